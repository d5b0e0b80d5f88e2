#pragma once

#include "sdp/common.hpp"

namespace sdp {

enum class ScheduleKind { DDPM, DDIM };

inline std::string to_string(ScheduleKind k) {
    return k == ScheduleKind::DDPM ? "ddpm" : "ddim";
}

inline ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "ddpm") return ScheduleKind::DDPM;
    if (s == "ddim") return ScheduleKind::DDIM;
    throw std::invalid_argument("unknown schedule kind '" + s + "' (expected ddpm or ddim)");
}

// Diffusion coefficient tables for levels k in [0, N]; k = 0 is clean data,
// k = N is (near) pure noise. beta/alpha/sigma are defined for k in [1, N],
// alpha_bar for k in [0, N].
class NoiseSchedule {
public:
    NoiseSchedule() = default;

    int num_levels() const { return num_levels_; }
    ScheduleKind kind() const { return kind_; }
    int ddim_stride() const { return ddim_stride_; }

    // Levels removed by one reverse_step: 1 for DDPM, the stride for DDIM.
    int step_unit() const { return kind_ == ScheduleKind::DDIM ? ddim_stride_ : 1; }

    double beta(int k) const { check_step_level(k); return beta_[static_cast<std::size_t>(k) - 1]; }
    double alpha(int k) const { check_step_level(k); return alpha_[static_cast<std::size_t>(k) - 1]; }
    double sigma(int k) const { check_step_level(k); return sigma_[static_cast<std::size_t>(k) - 1]; }

    double alpha_bar(int k) const {
        require(k >= 0 && k <= num_levels_, "level " + std::to_string(k) + " outside [0, N]");
        return alpha_bar_[static_cast<std::size_t>(k)];
    }

    friend NoiseSchedule build_schedule(int num_levels, ScheduleKind kind, int ddim_stride);

private:
    void check_step_level(int k) const {
        require(k >= 1 && k <= num_levels_, "step level " + std::to_string(k) + " outside [1, N]");
    }

    int num_levels_ = 0;
    ScheduleKind kind_ = ScheduleKind::DDPM;
    int ddim_stride_ = 1;
    std::vector<double> beta_;       // [1, N]
    std::vector<double> alpha_;      // [1, N]
    std::vector<double> alpha_bar_;  // [0, N], alpha_bar_[0] = 1
    std::vector<double> sigma_;      // [1, N], sigma_[0] index = level 1
};

// Squared-cosine beta progression with the usual 0.999 cap on each beta.
inline NoiseSchedule build_schedule(int num_levels, ScheduleKind kind, int ddim_stride = 1) {
    require(num_levels >= 2, "schedule needs at least 2 levels, got " + std::to_string(num_levels));
    if (kind == ScheduleKind::DDIM) {
        require(ddim_stride >= 1, "ddim stride must be positive");
        require(num_levels % ddim_stride == 0,
                "ddim stride " + std::to_string(ddim_stride) + " must divide N = " + std::to_string(num_levels));
    }

    const int n = num_levels;
    const double s = 0.008;
    auto f = [&](double t) {
        const double u = (t / n + s) / (1.0 + s) * std::numbers::pi / 2.0;
        const double c = std::cos(u);
        return c * c;
    };

    NoiseSchedule sched;
    sched.num_levels_ = n;
    sched.kind_ = kind;
    sched.ddim_stride_ = kind == ScheduleKind::DDIM ? ddim_stride : 1;
    sched.beta_.resize(static_cast<std::size_t>(n));
    sched.alpha_.resize(static_cast<std::size_t>(n));
    sched.sigma_.resize(static_cast<std::size_t>(n));
    sched.alpha_bar_.resize(static_cast<std::size_t>(n) + 1);

    sched.alpha_bar_[0] = 1.0;
    for (int k = 1; k <= n; ++k) {
        const double beta = std::min(1.0 - f(static_cast<double>(k)) / f(static_cast<double>(k - 1)), 0.999);
        sched.beta_[k - 1] = beta;
        sched.alpha_[k - 1] = 1.0 - beta;
        sched.alpha_bar_[k] = sched.alpha_bar_[k - 1] * sched.alpha_[k - 1];
        // DDPM posterior variance; exactly 0 at the clean boundary (alpha_bar[0] = 1).
        const double var = beta * (1.0 - sched.alpha_bar_[k - 1]) / (1.0 - sched.alpha_bar_[k]);
        sched.sigma_[k - 1] = std::sqrt(std::max(var, 0.0));
    }
    return sched;
}

namespace detail {

inline void check_levels(const LevelVector& levels, const Mat& x, const NoiseSchedule& sched) {
    require(static_cast<Eigen::Index>(levels.size()) == x.rows(),
            "level vector length " + std::to_string(levels.size()) + " != trajectory rows " +
                std::to_string(x.rows()));
    for (int k : levels)
        require(k >= 0 && k <= sched.num_levels(), "level " + std::to_string(k) + " outside [0, N]");
}

}  // namespace detail

// Forward diffusion with one level per row:
//   out_i = sqrt(alpha_bar[k_i]) * x0_i + sqrt(1 - alpha_bar[k_i]) * eps_i.
// Rows at level 0 come back equal to x0 exactly.
inline Mat add_noise(const Mat& x0, const Mat& eps, const LevelVector& levels, const NoiseSchedule& sched) {
    require(x0.rows() == eps.rows() && x0.cols() == eps.cols(), "x0/eps shape mismatch");
    detail::check_levels(levels, x0, sched);
    Mat out(x0.rows(), x0.cols());
    for (Eigen::Index i = 0; i < x0.rows(); ++i) {
        const double ab = sched.alpha_bar(levels[static_cast<std::size_t>(i)]);
        out.row(i) = std::sqrt(ab) * x0.row(i) + std::sqrt(1.0 - ab) * eps.row(i);
    }
    return out;
}

struct ReverseResult {
    Mat x;
    LevelVector levels;
};

// One reverse diffusion update applied per row at that row's own level.
// DDPM rows drop one level, DDIM rows drop one stride; rows already at level 0
// pass through bit-identical.
inline ReverseResult reverse_step(const Mat& xk, const Mat& eps_pred, const LevelVector& levels, const Mat& z,
                                  const NoiseSchedule& sched) {
    require(xk.rows() == eps_pred.rows() && xk.cols() == eps_pred.cols(), "xk/eps_pred shape mismatch");
    require(xk.rows() == z.rows() && xk.cols() == z.cols(), "xk/z shape mismatch");
    detail::check_levels(levels, xk, sched);

    ReverseResult res;
    res.x.resize(xk.rows(), xk.cols());
    res.levels.resize(levels.size());

    for (Eigen::Index i = 0; i < xk.rows(); ++i) {
        const int k = levels[static_cast<std::size_t>(i)];
        if (k == 0) {
            res.x.row(i) = xk.row(i);
            res.levels[static_cast<std::size_t>(i)] = 0;
            continue;
        }
        if (sched.kind() == ScheduleKind::DDPM) {
            const double ab = sched.alpha_bar(k);
            const double mean_scale = 1.0 / std::sqrt(sched.alpha(k));
            const double eps_scale = sched.beta(k) / std::sqrt(1.0 - ab);
            res.x.row(i) = mean_scale * (xk.row(i) - eps_scale * eps_pred.row(i)) + sched.sigma(k) * z.row(i);
            res.levels[static_cast<std::size_t>(i)] = k - 1;
        } else {
            const int k_next = std::max(k - sched.ddim_stride(), 0);
            const double ab = sched.alpha_bar(k);
            const double ab_next = sched.alpha_bar(k_next);
            const auto x0_pred = (xk.row(i) - std::sqrt(1.0 - ab) * eps_pred.row(i)) / std::sqrt(ab);
            res.x.row(i) = std::sqrt(ab_next) * x0_pred + std::sqrt(1.0 - ab_next) * eps_pred.row(i);
            res.levels[static_cast<std::size_t>(i)] = k_next;
        }
    }
    return res;
}

}  // namespace sdp
