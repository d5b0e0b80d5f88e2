#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace sdp {

// rows = time steps, cols = feature dims
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Per-position diffusion levels; 0 = clean, N = pure noise.
using LevelVector = std::vector<int>;

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

inline void require_state(bool cond, const std::string& msg) {
    if (!cond) throw std::logic_error(msg);
}

// Deterministic RNG with a fixed draw discipline: one raw draw per uniform,
// two per normal. Draw counts never depend on library internals, so runs
// with the same seed replay exactly.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t raw() { return state_(); }

    // Uniform on (0, 1].
    double uniform01() {
        return static_cast<double>((raw() >> 11) + 1) * 0x1.0p-53;
    }

    // Uniform on [0, 1).
    double uniform01_halfopen() {
        return static_cast<double>(raw() >> 11) * 0x1.0p-53;
    }

    // Uniform integer on [lo, hi], inclusive.
    int uniform_int(int lo, int hi) {
        require(lo <= hi, "uniform_int: lo > hi");
        const std::uint64_t range = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
        std::uint64_t r = raw();
        while (r >= limit) r = raw();
        return lo + static_cast<int>(r % range);
    }

    // Standard normal via Box-Muller.
    double normal() {
        const double u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    // Matrix of i.i.d. standard normals, filled row by row.
    Mat gaussian(Eigen::Index rows, Eigen::Index cols) {
        Mat m(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = normal();
        return m;
    }

    // Independent substream; stable under changes to this stream's draw count.
    Rng fork(std::uint64_t stream) const {
        std::uint64_t z = seed_ + 0x9e3779b97f4a7c15ULL * (stream + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return Rng(z ^ (z >> 31));
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 state_;
};

}  // namespace sdp
