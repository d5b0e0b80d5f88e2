#pragma once

#include "sdp/schedule.hpp"

namespace sdp {

// Training-time generators of per-position level vectors. Mixtures pick a
// component per draw; nesting mixtures is rejected.

enum class CorruptionKind { Constant, Linear, Independent, ChunkWise, Mixture };

struct CorruptionScheme {
    CorruptionKind kind = CorruptionKind::Constant;
    bool per_chunk_offset = false;  // ChunkWise only: one offset per chunk instead of shared
    std::vector<std::pair<CorruptionScheme, double>> components;  // Mixture only

    void validate() const {
        if (kind == CorruptionKind::Mixture) {
            require(!components.empty(), "mixture needs at least one component");
            double sum = 0.0;
            for (const auto& [scheme, weight] : components) {
                require(scheme.kind != CorruptionKind::Mixture, "nested mixtures are not allowed");
                require(weight >= 0.0, "mixture weights must be non-negative");
                sum += weight;
            }
            require(std::abs(sum - 1.0) <= 1e-9, "mixture weights must sum to 1");
        } else {
            require(components.empty(), "components only apply to mixtures");
        }
    }
};

inline CorruptionScheme make_mixture(std::vector<std::pair<CorruptionScheme, double>> components) {
    CorruptionScheme s;
    s.kind = CorruptionKind::Mixture;
    s.components = std::move(components);
    s.validate();
    return s;
}

namespace detail {

// Deterministic kernels exposed so tests can pin exact level patterns.

inline LevelVector chunkwise_levels(int N, int h, int Tb, double u) {
    LevelVector k(static_cast<std::size_t>(h) * Tb);
    for (int c = 0; c < h; ++c) {
        int level = static_cast<int>(std::floor((c + u) * static_cast<double>(N) / h));
        if (level < 1) level = 1;
        if (level > N) level = N;
        for (int j = 0; j < Tb; ++j) k[static_cast<std::size_t>(c) * Tb + j] = level;
    }
    return k;
}

inline LevelVector linear_levels(int N, int Tp, double start) {
    LevelVector k(static_cast<std::size_t>(Tp));
    const double slope = static_cast<double>(N) / Tp;
    for (int i = 0; i < Tp; ++i) {
        // rounding (not floor) keeps the boundary levels reachable with
        // nonzero probability under the random start
        int level = static_cast<int>(std::llround(start + slope * i));
        if (level < 1) level = 1;
        if (level > N) level = N;
        k[static_cast<std::size_t>(i)] = level;
    }
    return k;
}

}  // namespace detail

inline LevelVector sample_levels(const CorruptionScheme& scheme, int N, int Tp, int h, int Tb, Rng& rng) {
    scheme.validate();
    require(N >= 1 && Tp >= 1, "sample_levels: N and T_p must be positive");
    switch (scheme.kind) {
        case CorruptionKind::Constant: {
            return LevelVector(static_cast<std::size_t>(Tp), rng.uniform_int(1, N));
        }
        case CorruptionKind::Linear: {
            // start ranges over [1 - N(Tp-1)/Tp, N] so that after clamping every
            // position can realize every level in [1, N]
            const double lo = 1.0 - static_cast<double>(N) * (Tp - 1) / Tp;
            const double start = lo + rng.uniform01() * (N - lo);
            return detail::linear_levels(N, Tp, start);
        }
        case CorruptionKind::Independent: {
            LevelVector k(static_cast<std::size_t>(Tp));
            for (auto& kv : k) kv = rng.uniform_int(1, N);
            return k;
        }
        case CorruptionKind::ChunkWise: {
            require(h >= 1 && Tb >= 1 && Tp == h * Tb,
                    "sample_levels: chunk-wise needs T_p = h * T_b (complete chunks)");
            if (!scheme.per_chunk_offset) return detail::chunkwise_levels(N, h, Tb, rng.uniform01_halfopen());
            LevelVector k;
            k.reserve(static_cast<std::size_t>(Tp));
            for (int c = 0; c < h; ++c) {
                LevelVector one = detail::chunkwise_levels(N, h, 1, rng.uniform01_halfopen());
                k.insert(k.end(), static_cast<std::size_t>(Tb), one[static_cast<std::size_t>(c)]);
            }
            return k;
        }
        case CorruptionKind::Mixture: {
            const double pick = rng.uniform01();
            double acc = 0.0;
            for (const auto& [component, weight] : scheme.components) {
                acc += weight;
                if (pick <= acc) return sample_levels(component, N, Tp, h, Tb, rng);
            }
            return sample_levels(scheme.components.back().first, N, Tp, h, Tb, rng);
        }
    }
    throw std::logic_error("unreachable corruption kind");
}

struct CorruptResult {
    Mat x_noisy;
    Mat eps;
    LevelVector k;
};

inline CorruptResult corrupt(const Mat& x0, const CorruptionScheme& scheme, const NoiseSchedule& sched,
                             int h, int Tb, Rng& rng) {
    CorruptResult r;
    r.k = sample_levels(scheme, sched.num_levels(), static_cast<int>(x0.rows()), h, Tb, rng);
    r.eps = rng.gaussian(x0.rows(), x0.cols());
    r.x_noisy = add_noise(x0, r.eps, r.k, sched);
    return r;
}

// Scheme registry used by training configs and the ablation grid.
inline CorruptionScheme scheme_from_name(const std::string& name) {
    auto plain = [](CorruptionKind k) {
        CorruptionScheme s;
        s.kind = k;
        return s;
    };
    if (name == "constant") return plain(CorruptionKind::Constant);
    if (name == "linear") return plain(CorruptionKind::Linear);
    if (name == "independent") return plain(CorruptionKind::Independent);
    if (name == "chunkwise") return plain(CorruptionKind::ChunkWise);
    if (name == "chunkwise_perchunk") {
        auto s = plain(CorruptionKind::ChunkWise);
        s.per_chunk_offset = true;
        return s;
    }
    if (name == "cw80_const20")
        return make_mixture({{plain(CorruptionKind::ChunkWise), 0.8}, {plain(CorruptionKind::Constant), 0.2}});
    if (name == "ind67_lin33")
        return make_mixture({{plain(CorruptionKind::Independent), 0.67}, {plain(CorruptionKind::Linear), 0.33}});
    if (name == "ind67_cw33")
        return make_mixture({{plain(CorruptionKind::Independent), 0.67}, {plain(CorruptionKind::ChunkWise), 0.33}});
    throw std::invalid_argument(
        "unknown corruption scheme '" + name +
        "'; valid: constant, linear, independent, chunkwise, chunkwise_perchunk, cw80_const20, "
        "ind67_lin33, ind67_cw33");
}

inline std::string to_string(const CorruptionScheme& s) {
    switch (s.kind) {
        case CorruptionKind::Constant: return "constant";
        case CorruptionKind::Linear: return "linear";
        case CorruptionKind::Independent: return "independent";
        case CorruptionKind::ChunkWise: return s.per_chunk_offset ? "chunkwise_perchunk" : "chunkwise";
        case CorruptionKind::Mixture: {
            std::string out = "mixture(";
            for (std::size_t i = 0; i < s.components.size(); ++i) {
                if (i) out += ", ";
                out += to_string(s.components[i].first) + ":" + std::to_string(s.components[i].second);
            }
            return out + ")";
        }
    }
    return "?";
}

}  // namespace sdp
