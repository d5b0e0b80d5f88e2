#pragma once

#include "sdp/container.hpp"

namespace sdp {

// Demonstration episodes and the min-max normalization used everywhere
// downstream. Payload layout per episode: observations time-major, then
// actions time-major, both fp64.

struct Episode {
    Mat obs;  // T x D_o
    Mat act;  // T x D_a
    std::uint64_t seed = 0;
    int mode = 0;  // expert route: 0 = left detour, 1 = right detour

    int length() const { return static_cast<int>(obs.rows()); }
};

struct EpisodeDataset {
    std::vector<Episode> episodes;
    int obs_dim = 0;
    int act_dim = 0;

    int size() const { return static_cast<int>(episodes.size()); }

    void validate() const {
        require(!episodes.empty(), "dataset has no episodes");
        for (const auto& e : episodes) {
            require(e.obs.rows() == e.act.rows(), "episode obs/action lengths differ");
            require(e.obs.cols() == obs_dim && e.act.cols() == act_dim, "episode dims differ from dataset");
            require(e.obs.allFinite() && e.act.allFinite(), "episode contains non-finite values");
        }
    }
};

constexpr const char* kDatasetMagic = "SDPDATA1";

inline void save_dataset(const EpisodeDataset& ds, const std::filesystem::path& path) {
    ds.validate();
    nlohmann::json header;
    header["version"] = 1;
    header["obs_dim"] = ds.obs_dim;
    header["act_dim"] = ds.act_dim;
    header["episodes"] = ds.size();
    std::vector<int> lengths;
    std::vector<std::uint64_t> seeds;
    std::vector<int> modes;
    Eigen::Index total = 0;
    for (const auto& e : ds.episodes) {
        lengths.push_back(e.length());
        seeds.push_back(e.seed);
        modes.push_back(e.mode);
        total += e.obs.size() + e.act.size();
    }
    header["lengths"] = lengths;
    header["seeds"] = seeds;
    header["modes"] = modes;

    Vec payload(total);
    Eigen::Index at = 0;
    for (const auto& e : ds.episodes) {
        for (int t = 0; t < e.length(); ++t)
            for (int d = 0; d < ds.obs_dim; ++d) payload[at++] = e.obs(t, d);
        for (int t = 0; t < e.length(); ++t)
            for (int d = 0; d < ds.act_dim; ++d) payload[at++] = e.act(t, d);
    }
    write_container(path, kDatasetMagic, header, payload);
}

inline EpisodeDataset load_dataset(const std::filesystem::path& path) {
    Container c = read_container(path, kDatasetMagic);
    EpisodeDataset ds;
    ds.obs_dim = c.header.at("obs_dim").get<int>();
    ds.act_dim = c.header.at("act_dim").get<int>();
    const auto lengths = c.header.at("lengths").get<std::vector<int>>();
    const auto seeds = c.header.at("seeds").get<std::vector<std::uint64_t>>();
    const auto modes = c.header.at("modes").get<std::vector<int>>();
    require(lengths.size() == seeds.size() && lengths.size() == modes.size(),
            "dataset header arrays disagree");

    Eigen::Index at = 0;
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        Episode e;
        const int T = lengths[i];
        e.obs.resize(T, ds.obs_dim);
        e.act.resize(T, ds.act_dim);
        e.seed = seeds[i];
        e.mode = modes[i];
        for (int t = 0; t < T; ++t)
            for (int d = 0; d < ds.obs_dim; ++d) e.obs(t, d) = c.payload[at++];
        for (int t = 0; t < T; ++t)
            for (int d = 0; d < ds.act_dim; ++d) e.act(t, d) = c.payload[at++];
        ds.episodes.push_back(std::move(e));
    }
    require(at == c.payload.size(), "dataset payload size disagrees with header");
    ds.validate();
    return ds;
}

// Per-dimension min-max statistics mapping data to [-1, 1]. Degenerate
// dimensions get a floor on the span instead of dividing by zero.
struct NormStats {
    Vec obs_min, obs_max, act_min, act_max;

    static NormStats fit(const EpisodeDataset& ds) {
        ds.validate();
        NormStats s;
        s.obs_min = Vec::Constant(ds.obs_dim, std::numeric_limits<double>::infinity());
        s.obs_max = -s.obs_min;
        s.act_min = Vec::Constant(ds.act_dim, std::numeric_limits<double>::infinity());
        s.act_max = -s.act_min;
        for (const auto& e : ds.episodes) {
            s.obs_min = s.obs_min.cwiseMin(e.obs.colwise().minCoeff().transpose());
            s.obs_max = s.obs_max.cwiseMax(e.obs.colwise().maxCoeff().transpose());
            s.act_min = s.act_min.cwiseMin(e.act.colwise().minCoeff().transpose());
            s.act_max = s.act_max.cwiseMax(e.act.colwise().maxCoeff().transpose());
        }
        return s;
    }

    static Vec span_of(const Vec& lo, const Vec& hi) { return (hi - lo).cwiseMax(1e-12); }

    Mat normalize_obs(const Mat& x) const { return apply(x, obs_min, obs_max); }
    Mat normalize_act(const Mat& x) const { return apply(x, act_min, act_max); }
    Mat denormalize_act(const Mat& y) const {
        const Vec span = span_of(act_min, act_max);
        Mat x = y;
        for (int c = 0; c < x.cols(); ++c)
            x.col(c) = ((x.col(c).array() + 1.0) * 0.5 * span[c] + act_min[c]).matrix();
        return x;
    }

    nlohmann::json to_json() const {
        auto vec = [](const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
        return {{"obs_min", vec(obs_min)}, {"obs_max", vec(obs_max)},
                {"act_min", vec(act_min)}, {"act_max", vec(act_max)}};
    }

    static NormStats from_json(const nlohmann::json& j) {
        auto vec = [](const nlohmann::json& a) {
            const auto v = a.get<std::vector<double>>();
            return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())).eval();
        };
        NormStats s;
        s.obs_min = vec(j.at("obs_min"));
        s.obs_max = vec(j.at("obs_max"));
        s.act_min = vec(j.at("act_min"));
        s.act_max = vec(j.at("act_max"));
        return s;
    }

  private:
    static Mat apply(const Mat& x, const Vec& lo, const Vec& hi) {
        require(x.cols() == lo.size(), "normalize: dimension mismatch");
        const Vec span = span_of(lo, hi);
        Mat y = x;
        for (int c = 0; c < y.cols(); ++c)
            y.col(c) = (2.0 * (y.col(c).array() - lo[c]) / span[c] - 1.0).matrix();
        return y;
    }
};

// Training window anchored at time t: the observation rows (t - T_o + 1 .. t)
// and action rows (t .. t + T_p - 1), both with repeat-padding past the
// episode ends.
struct Window {
    Mat obs;  // T_o x D_o
    Mat act;  // T_p x D_a
};

inline Window slice_window(const Episode& e, int t, int obs_len, int horizon) {
    require(e.length() > 0, "slice_window: empty episode");
    require(t >= 0 && t < e.length(), "slice_window: anchor outside episode");
    Window w;
    w.obs.resize(obs_len, e.obs.cols());
    for (int i = 0; i < obs_len; ++i) {
        int src = t - (obs_len - 1) + i;
        if (src < 0) src = 0;
        w.obs.row(i) = e.obs.row(src);
    }
    w.act.resize(horizon, e.act.cols());
    for (int i = 0; i < horizon; ++i) {
        int src = t + i;
        if (src > e.length() - 1) src = e.length() - 1;
        w.act.row(i) = e.act.row(src);
    }
    return w;
}

}  // namespace sdp
