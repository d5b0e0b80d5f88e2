#pragma once

#include "sdp/checkpoint.hpp"

#include <chrono>
#include <functional>

namespace sdp {

// Denoising-loss training: corrupt normalized action windows under a
// corruption scheme, regress the drawn noise, optimize with Adam + cosine
// learning-rate decay, and keep an EMA copy of the weights. Single-threaded
// and byte-for-byte deterministic given the seed.

struct TrainConfig {
    DenoiserConfig net;             // horizon, obs window, widths, N
    int num_chunks = 2;             // h
    int chunk_len = 8;              // T_b
    std::string scheme = "cw80_const20";
    ScheduleKind sched_kind = ScheduleKind::DDPM;
    int ddim_stride = 1;
    int epochs = 60;
    int batches_per_epoch = 40;
    int batch_size = 64;
    double lr = 1e-3;
    double ema_decay = 0.99;
    std::uint64_t seed = 0;

    void validate() const {
        net.validate();
        require(num_chunks >= 1 && chunk_len >= 1 && net.horizon == num_chunks * chunk_len,
                "train config: horizon must equal num_chunks * chunk_len");
        require(net.num_levels % num_chunks == 0, "train config: N must be divisible by num_chunks");
        require(epochs >= 1 && batches_per_epoch >= 1 && batch_size >= 1,
                "train config: positive epoch/batch sizes required");
        require(lr > 0.0, "train config: positive learning rate required");
        require(ema_decay >= 0.0 && ema_decay <= 1.0, "train config: ema_decay in [0, 1]");
        scheme_from_name(scheme);  // throws on unknown name
    }
};

using Predictor = std::function<Mat(const Mat& a_noisy, const Mat& obs, const LevelVector& k)>;

// Mean squared error between drawn and predicted noise over a batch of
// normalized (obs window, action window) samples. The generic overload lets
// tests swap in oracle predictors.
inline double denoising_loss(const Predictor& predict, const std::vector<Window>& batch,
                             const CorruptionScheme& scheme, const NoiseSchedule& sched, int h, int Tb,
                             Rng& rng) {
    require(!batch.empty(), "denoising_loss: empty batch");
    double total = 0.0;
    for (const auto& w : batch) {
        auto cr = corrupt(w.act, scheme, sched, h, Tb, rng);
        Mat eps_hat = predict(cr.x_noisy, w.obs, cr.k);
        total += (eps_hat - cr.eps).array().square().mean();
    }
    const double value = total / static_cast<double>(batch.size());
    if (!std::isfinite(value))
        throw std::runtime_error("training diverged: non-finite loss over a batch of " +
                                 std::to_string(batch.size()));
    return value;
}

inline double denoising_loss(const ParameterSet& p, const std::vector<Window>& batch,
                             const CorruptionScheme& scheme, const NoiseSchedule& sched, int h, int Tb,
                             Rng& rng) {
    return denoising_loss(
        [&](const Mat& a, const Mat& o, const LevelVector& k) { return forward(p, a, o, k); }, batch,
        scheme, sched, h, Tb, rng);
}

namespace detail {

struct Adam {
    Vec m, v;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long t = 0;

    explicit Adam(Eigen::Index n) : m(Vec::Zero(n)), v(Vec::Zero(n)) {}

    void update(Vec& params, const Vec& grad, double lr) {
        ++t;
        m = beta1 * m + (1.0 - beta1) * grad;
        v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        params.array() -=
            lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
    }
};

}  // namespace detail

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<double> epoch_losses;
    double initial_loss = 0.0;
    double wall_seconds = 0.0;
};

// Full training loop. Writes the checkpoint (atomic) and a metrics CSV of
// "epoch,loss,wall_clock" when paths are given; pass empty paths to skip.
inline TrainResult train(const EpisodeDataset& dataset, const TrainConfig& cfg,
                         const std::filesystem::path& ckpt_path = {},
                         const std::filesystem::path& metrics_path = {}) {
    cfg.validate();
    dataset.validate();
    require(dataset.obs_dim == cfg.net.obs_dim && dataset.act_dim == cfg.net.action_dim,
            "train: dataset dims disagree with network config");

    const auto t_start = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    };

    const CorruptionScheme scheme = scheme_from_name(cfg.scheme);
    const NoiseSchedule sched = build_schedule(cfg.net.num_levels, cfg.sched_kind, cfg.ddim_stride);
    const NormStats stats = NormStats::fit(dataset);

    Rng init_rng = Rng(cfg.seed).fork(0);
    Rng data_rng = Rng(cfg.seed).fork(1);
    Rng noise_rng = Rng(cfg.seed).fork(2);

    ParameterSet params = init_params(cfg.net, init_rng);
    ParameterSet ema = params;
    detail::Adam adam(params.values.size());
    Workspace ws;

    auto draw_window = [&]() {
        const auto& ep = dataset.episodes[static_cast<std::size_t>(
            data_rng.uniform_int(0, dataset.size() - 1))];
        const int t = data_rng.uniform_int(0, ep.length() - 1);
        Window w = slice_window(ep, t, cfg.net.obs_len, cfg.net.horizon);
        w.obs = stats.normalize_obs(w.obs);
        w.act = stats.normalize_act(w.act);
        return w;
    };

    const long total_steps = static_cast<long>(cfg.epochs) * cfg.batches_per_epoch;
    long step = 0;
    TrainResult result;
    std::string metrics = "epoch,loss,wall_clock\n";

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (int b = 0; b < cfg.batches_per_epoch; ++b) {
            Vec grad = Vec::Zero(params.values.size());
            double batch_loss = 0.0;
            for (int s = 0; s < cfg.batch_size; ++s) {
                const Window w = draw_window();
                auto cr = corrupt(w.act, scheme, sched, cfg.num_chunks, cfg.chunk_len, noise_rng);
                Mat eps_hat = forward(params, cr.x_noisy, w.obs, cr.k, ws);
                Mat diff = eps_hat - cr.eps;
                batch_loss += diff.array().square().mean();
                // d(mean sq)/d(eps_hat), averaged over the batch
                Mat up = (2.0 / (cfg.batch_size * static_cast<double>(diff.size()))) * diff;
                grad += backward(params, ws, up);
            }
            batch_loss /= cfg.batch_size;
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                                         ", batch " + std::to_string(b) + ": non-finite loss");
            if (step == 0) result.initial_loss = batch_loss;
            const double lr = cfg.lr * 0.5 *
                              (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) /
                                              static_cast<double>(total_steps)));
            adam.update(params.values, grad, lr);
            ema.values = cfg.ema_decay * ema.values + (1.0 - cfg.ema_decay) * params.values;
            epoch_loss += batch_loss;
            ++step;
        }
        epoch_loss /= cfg.batches_per_epoch;
        result.epoch_losses.push_back(epoch_loss);
        metrics += std::to_string(epoch) + "," + std::to_string(epoch_loss) + "," +
                   std::to_string(elapsed()) + "\n";
    }

    Checkpoint ck;
    ck.params = std::move(params);
    ck.ema = std::move(ema);
    ck.stats = stats;
    ck.sched_kind = cfg.sched_kind;
    ck.ddim_stride = cfg.ddim_stride;
    ck.num_chunks = cfg.num_chunks;
    ck.chunk_len = cfg.chunk_len;
    ck.scheme_name = cfg.scheme;
    ck.seed = cfg.seed;
    ck.epochs = cfg.epochs;
    ck.final_loss = result.epoch_losses.back();

    if (!ckpt_path.empty()) save_checkpoint(ck, ckpt_path);
    if (!metrics_path.empty()) {
        std::ofstream out(metrics_path, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write metrics: " + metrics_path.string());
        out << metrics;
    }

    result.wall_seconds = elapsed();
    result.checkpoint = std::move(ck);
    return result;
}

}  // namespace sdp
