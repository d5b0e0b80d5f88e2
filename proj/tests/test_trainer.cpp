#include <catch2/catch_amalgamated.hpp>

#include <sdp/env.hpp>
#include <sdp/trainer.hpp>

#include "support/oracles.hpp"

#include <filesystem>
#include <fstream>

using namespace sdp;

namespace {

DenoiserConfig small_net() {
    DenoiserConfig c;
    c.action_dim = 2;
    c.obs_dim = 6;
    c.obs_len = 1;
    c.horizon = 8;
    c.width1 = 8;
    c.width2 = 12;
    c.cond_dim = 12;
    c.embed_dim = 8;
    c.num_levels = 20;
    return c;
}

TrainConfig small_train() {
    TrainConfig cfg;
    cfg.net = small_net();
    cfg.num_chunks = 2;
    cfg.chunk_len = 4;
    cfg.scheme = "cw80_const20";
    cfg.epochs = 3;
    cfg.batches_per_epoch = 6;
    cfg.batch_size = 16;
    cfg.seed = 5;
    return cfg;
}

std::vector<Window> make_batch(Rng& rng, int n, int obs_len, int horizon, int zero_actions = false) {
    std::vector<Window> batch;
    for (int i = 0; i < n; ++i) {
        Window w;
        w.obs = rng.gaussian(obs_len, 6);
        w.act = zero_actions ? Mat::Zero(horizon, 2) : rng.gaussian(horizon, 2);
        batch.push_back(std::move(w));
    }
    return batch;
}

std::filesystem::path temp_dir() {
    auto dir = std::filesystem::temp_directory_path() / "sdp_test_trainer";
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("zero-output network starts at the unit-Gaussian loss", "[trainer]") {
    auto c = small_net();
    Rng rng(61);
    auto p = init_params(c, rng);  // zero head -> eps_hat = 0
    auto sched = build_schedule(c.num_levels, ScheduleKind::DDPM);
    auto batch = make_batch(rng, 256, c.obs_len, c.horizon);
    Rng noise(62);
    const double loss =
        denoising_loss(p, batch, scheme_from_name("cw80_const20"), sched, 2, 4, noise);
    CHECK(loss == Catch::Approx(1.0).margin(0.05));
}

TEST_CASE("an oracle predictor drives the loss to zero", "[trainer]") {
    // with x0 = 0, the noisy input is sqrt(1 - abar_k) * eps, so eps is
    // exactly recoverable per row
    auto c = small_net();
    auto sched = build_schedule(c.num_levels, ScheduleKind::DDPM);
    Rng rng(63);
    auto batch = make_batch(rng, 32, c.obs_len, c.horizon, true);
    Predictor oracle = [&](const Mat& a_noisy, const Mat&, const LevelVector& k) {
        Mat eps = a_noisy;
        for (int i = 0; i < eps.rows(); ++i)
            eps.row(i) /= std::sqrt(1.0 - sched.alpha_bar(k[static_cast<std::size_t>(i)]));
        return eps;
    };
    Rng noise(64);
    const double loss = denoising_loss(oracle, batch, scheme_from_name("independent"), sched, 2, 4, noise);
    CHECK(loss <= 1e-20);
}

TEST_CASE("constant-scheme loss equals an independent single-level path", "[trainer]") {
    auto c = small_net();
    auto sched = build_schedule(c.num_levels, ScheduleKind::DDPM);
    auto ref = oracle::scalar_cosine(c.num_levels);
    Rng rng(65);
    auto p = init_params(c, rng);
    for (Eigen::Index i = 0; i < p.values.size(); ++i) p.values[i] = 0.3 * (2.0 * rng.uniform01() - 1.0);
    auto batch = make_batch(rng, 24, c.obs_len, c.horizon);

    Rng noise_a(77);
    const double got = denoising_loss(p, batch, scheme_from_name("constant"), sched, 2, 4, noise_a);

    // same draws, scalar schedule arithmetic throughout
    Rng noise_b(77);
    double want = 0.0;
    for (const auto& w : batch) {
        const int k = noise_b.uniform_int(1, c.num_levels);
        Mat eps = noise_b.gaussian(c.horizon, 2);
        const double ab = ref.alpha_bar[static_cast<std::size_t>(k)];
        Mat x_noisy = std::sqrt(ab) * w.act + std::sqrt(1.0 - ab) * eps;
        Mat eps_hat = forward(p, x_noisy, w.obs, LevelVector(static_cast<std::size_t>(c.horizon), k));
        want += (eps_hat - eps).array().square().mean();
    }
    want /= static_cast<double>(batch.size());
    CHECK(std::abs(got - want) <= 1e-12);
}

TEST_CASE("non-finite predictions raise the divergence error", "[trainer]") {
    auto c = small_net();
    auto sched = build_schedule(c.num_levels, ScheduleKind::DDPM);
    Rng rng(66), noise(67);
    auto batch = make_batch(rng, 4, c.obs_len, c.horizon);
    Predictor bad = [&](const Mat& a, const Mat&, const LevelVector&) {
        return Mat(a.array() * std::numeric_limits<double>::quiet_NaN());
    };
    CHECK_THROWS_AS(denoising_loss(bad, batch, scheme_from_name("constant"), sched, 2, 4, noise),
                    std::runtime_error);
}

TEST_CASE("training rejects malformed configs and empty data", "[trainer]") {
    auto ds = generate_demos(2, 3);
    auto cfg = small_train();
    cfg.num_chunks = 3;  // 3 * 4 != 8
    CHECK_THROWS_AS(train(ds, cfg), std::invalid_argument);
    cfg = small_train();
    cfg.scheme = "nonsense";
    CHECK_THROWS_AS(train(ds, cfg), std::invalid_argument);
    cfg = small_train();
    EpisodeDataset empty;
    empty.obs_dim = 6;
    empty.act_dim = 2;
    CHECK_THROWS_AS(train(empty, cfg), std::invalid_argument);
}

TEST_CASE("ema endpoints: decay 0 tracks, decay 1 freezes", "[trainer]") {
    auto ds = generate_demos(4, 9);
    auto cfg = small_train();
    cfg.epochs = 2;
    cfg.ema_decay = 0.0;
    auto tracked = train(ds, cfg);
    CHECK((tracked.checkpoint.ema.values - tracked.checkpoint.params.values).cwiseAbs().maxCoeff() ==
          0.0);

    cfg.ema_decay = 1.0;
    auto frozen = train(ds, cfg);
    Rng init_rng = Rng(cfg.seed).fork(0);
    auto initial = init_params(cfg.net, init_rng);
    CHECK((frozen.checkpoint.ema.values - initial.values).cwiseAbs().maxCoeff() == 0.0);
    CHECK((frozen.checkpoint.params.values - initial.values).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("training is deterministic down to the checkpoint bytes", "[trainer]") {
    auto ds = generate_demos(4, 21);
    auto cfg = small_train();
    const auto dir = temp_dir();
    const auto p1 = dir / "a.sdpc", p2 = dir / "b.sdpc";
    auto r1 = train(ds, cfg, p1);
    auto r2 = train(ds, cfg, p2);
    CHECK((r1.checkpoint.params.values - r2.checkpoint.params.values).cwiseAbs().maxCoeff() == 0.0);
    CHECK(r1.epoch_losses == r2.epoch_losses);

    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
    std::filesystem::remove_all(dir);
}

TEST_CASE("loss falls on a small real dataset and metrics are written", "[trainer]") {
    auto ds = generate_demos(12, 31);
    auto cfg = small_train();
    cfg.epochs = 10;
    cfg.batches_per_epoch = 12;
    cfg.batch_size = 24;
    const auto dir = temp_dir();
    const auto ckpt = dir / "fit.sdpc", csv = dir / "fit_metrics.csv";
    auto r = train(ds, cfg, ckpt, csv);
    REQUIRE(r.epoch_losses.size() == 10);
    CHECK(r.initial_loss == Catch::Approx(1.0).margin(0.1));
    CHECK(r.epoch_losses.back() < 0.6 * r.initial_loss);

    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "epoch,loss,wall_clock");
    int rows = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 10);
    std::filesystem::remove_all(dir);
}

TEST_CASE("checkpoints round-trip through the container", "[trainer]") {
    auto ds = generate_demos(3, 41);
    auto cfg = small_train();
    cfg.epochs = 1;
    const auto dir = temp_dir();
    const auto path = dir / "round.sdpc";
    auto r = train(ds, cfg, path);
    auto back = load_checkpoint(path);
    CHECK((back.params.values - r.checkpoint.params.values).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.ema.values - r.checkpoint.ema.values).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.config().horizon == cfg.net.horizon);
    CHECK(back.config().arch == cfg.net.arch);
    CHECK(back.scheme_name == cfg.scheme);
    CHECK(back.num_chunks == cfg.num_chunks);
    CHECK(back.chunk_len == cfg.chunk_len);
    CHECK((back.stats.act_min - r.checkpoint.stats.act_min).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.final_loss == r.checkpoint.final_loss);
    auto sched = back.schedule();
    CHECK(sched.num_levels() == cfg.net.num_levels);
    std::filesystem::remove_all(dir);
}

TEST_CASE("checkpoint writes are atomic via temp-and-rename", "[trainer]") {
    auto ds = generate_demos(2, 51);
    auto cfg = small_train();
    cfg.epochs = 1;
    const auto dir = temp_dir();
    const auto path = dir / "atomic.sdpc";
    train(ds, cfg, path);
    CHECK(std::filesystem::exists(path));
    CHECK_FALSE(std::filesystem::exists(path.string() + ".tmp"));
    std::filesystem::remove_all(dir);
}
