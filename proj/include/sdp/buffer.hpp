#pragma once

#include "sdp/schedule.hpp"

#include <nlohmann/json.hpp>

namespace sdp {

// Chunked staircase [N/h, 2N/h, ..., N]: chunk c (0-indexed) carries level
// (c+1)*N/h on all of its T_b positions.
inline LevelVector staircase_levels(int num_levels, int num_chunks, int chunk_len) {
    require(num_levels >= 1 && num_chunks >= 1 && chunk_len >= 1, "staircase_levels: positive sizes required");
    require(num_levels % num_chunks == 0,
            "N = " + std::to_string(num_levels) + " is not divisible by h = " + std::to_string(num_chunks) +
                "; pick h from the divisors of N");
    LevelVector levels(static_cast<std::size_t>(num_chunks) * chunk_len);
    for (int c = 0; c < num_chunks; ++c) {
        const int level = (c + 1) * (num_levels / num_chunks);
        for (int j = 0; j < chunk_len; ++j) levels[static_cast<std::size_t>(c) * chunk_len + j] = level;
    }
    return levels;
}

// Persistent action trajectory with one diffusion level per position.
// Main path: rows = h * T_b. Incomplete-chunk path additionally keeps an
// obs_overlap prefix of executed clean actions and an excess tail shorter
// than one chunk.
struct ActionBuffer {
    Mat actions;         // rows x action_dim, normalized units
    LevelVector levels;  // one level per row
    int chunk_len = 0;   // T_b
    int num_chunks = 0;  // h, complete chunks only
    int obs_overlap = 0; // T_o - 1 retained prefix rows (0 on the main path)
    int excess = 0;      // trailing positions beyond h complete chunks

    int action_dim() const { return static_cast<int>(actions.cols()); }
    int rows() const { return static_cast<int>(actions.rows()); }
    int full_length() const { return obs_overlap + num_chunks * chunk_len + excess; }

    // Pattern held between sampling cycles: prefix and chunk c at (c+1)*N/h,
    // excess tail at N.
    LevelVector expected_levels(int num_levels) const {
        const int step = num_levels / num_chunks;
        LevelVector expect;
        expect.reserve(static_cast<std::size_t>(full_length()));
        for (int i = 0; i < obs_overlap; ++i) expect.push_back(step);
        for (int c = 0; c < num_chunks; ++c)
            for (int j = 0; j < chunk_len; ++j) expect.push_back((c + 1) * step);
        for (int i = 0; i < excess; ++i) expect.push_back(num_levels);
        return expect;
    }

    bool at_staircase(int num_levels) const {
        return num_levels % num_chunks == 0 && levels == expected_levels(num_levels);
    }

    nlohmann::json trace_json(int step_index) const {
        nlohmann::json j;
        j["step"] = step_index;
        j["levels"] = levels;
        std::vector<std::vector<double>> rows_out;
        rows_out.reserve(static_cast<std::size_t>(actions.rows()));
        for (Eigen::Index r = 0; r < actions.rows(); ++r) {
            std::vector<double> row(static_cast<std::size_t>(actions.cols()));
            for (Eigen::Index c = 0; c < actions.cols(); ++c) row[static_cast<std::size_t>(c)] = actions(r, c);
            rows_out.push_back(std::move(row));
        }
        j["actions"] = rows_out;
        return j;
    }
};

// Removes the first chunk_len rows and returns the executable chunk, i.e.
// rows [obs_overlap, obs_overlap + chunk_len). Everything up to the end of
// that chunk must already be clean.
inline Mat pop_chunk(ActionBuffer& buf) {
    require_state(buf.rows() == buf.full_length(), "pop_chunk: buffer not at full length");
    const int end = buf.obs_overlap + buf.chunk_len;
    for (int i = 0; i < end; ++i)
        require_state(buf.levels[static_cast<std::size_t>(i)] == 0,
                      "pop_chunk: leading chunk not clean (level " +
                          std::to_string(buf.levels[static_cast<std::size_t>(i)]) + " at position " +
                          std::to_string(i) + ")");

    Mat chunk = buf.actions.middleRows(buf.obs_overlap, buf.chunk_len);
    const int remaining = buf.rows() - buf.chunk_len;
    buf.actions = buf.actions.bottomRows(remaining).eval();
    buf.levels.erase(buf.levels.begin(), buf.levels.begin() + buf.chunk_len);
    return chunk;
}

// Appends rows of pure noise at level N. The buffer must be exactly
// z.rows() short of full length.
inline void append_noise_chunk(ActionBuffer& buf, const Mat& z, int num_levels) {
    require(z.cols() == buf.actions.cols(), "append_noise_chunk: action_dim mismatch");
    require_state(buf.rows() < buf.full_length(), "append_noise_chunk: buffer already full");
    require_state(buf.rows() + static_cast<int>(z.rows()) == buf.full_length(),
                  "append_noise_chunk: appending " + std::to_string(z.rows()) + " rows to " +
                      std::to_string(buf.rows()) + " does not restore full length " +
                      std::to_string(buf.full_length()));
    Mat grown(buf.full_length(), buf.actions.cols());
    grown.topRows(buf.rows()) = buf.actions;
    grown.bottomRows(z.rows()) = z;
    buf.actions = std::move(grown);
    buf.levels.insert(buf.levels.end(), static_cast<std::size_t>(z.rows()), num_levels);
}

// Incomplete-chunk cleanup: after the leading chunk has been removed, drop
// the trailing x = (T_p - (T_o - 1)) % T_a_exec positions. Identity when the
// divisibility works out.
inline void trim_incomplete(ActionBuffer& buf, int horizon, int obs_len, int exec_len) {
    require(exec_len >= 1 && obs_len >= 1, "trim_incomplete: positive obs_len/exec_len required");
    require_state(buf.rows() == horizon - exec_len,
                  "trim_incomplete: expected buffer right after chunk removal (" +
                      std::to_string(horizon - exec_len) + " rows), got " + std::to_string(buf.rows()));
    const int x = (horizon - (obs_len - 1)) % exec_len;
    if (x == 0) return;
    buf.actions = buf.actions.topRows(buf.rows() - x).eval();
    buf.levels.resize(buf.levels.size() - static_cast<std::size_t>(x));
}

// Re-noises the clean executed actions kept for observation alignment (the
// obs_overlap prefix) up to k_next.
inline void renoise_obs_overlap(ActionBuffer& buf, const NoiseSchedule& sched, int k_next, const Mat& eps) {
    if (buf.obs_overlap == 0) return;
    require(k_next >= 0 && k_next <= sched.num_levels(), "renoise_obs_overlap: k_next outside [0, N]");
    require(eps.rows() == buf.obs_overlap && eps.cols() == buf.actions.cols(),
            "renoise_obs_overlap: eps must be obs_overlap x action_dim");
    for (int i = 0; i < buf.obs_overlap; ++i)
        require_state(buf.levels[static_cast<std::size_t>(i)] == 0, "renoise_obs_overlap: prefix not clean");

    LevelVector prefix_levels(static_cast<std::size_t>(buf.obs_overlap), k_next);
    Mat prefix = buf.actions.topRows(buf.obs_overlap);
    buf.actions.topRows(buf.obs_overlap) = add_noise(prefix, eps, prefix_levels, sched);
    for (int i = 0; i < buf.obs_overlap; ++i) buf.levels[static_cast<std::size_t>(i)] = k_next;
}

}  // namespace sdp
