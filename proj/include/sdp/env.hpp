#pragma once

#include "sdp/dataset.hpp"

#include <iostream>

namespace sdp {

// Toy contact task: a 2-D point agent pushes a disc block to a goal region
// while detouring around a fixed obstacle that blocks the agent (not the
// block). Fully kinematic; deterministic given the reset seed and actions.

struct EnvParams {
    double dt = 0.08;
    double max_speed = 1.0;
    double contact_radius = 0.15;
    double obstacle_radius = 0.16;
    double goal_radius = 0.15;
    int max_steps = 80;
    Eigen::Vector2d agent_start{0.0, -0.85};
    Eigen::Vector2d obstacle{0.0, -0.4};
    Eigen::Vector2d block_start{0.0, 0.0};
    Eigen::Vector2d goal_center{0.0, 0.6};
    double agent_jitter = 0.04;
    double block_jitter = 0.05;
    double goal_jitter = 0.05;
};

class PointPushEnv {
  public:
    static constexpr int kObsDim = 6;
    static constexpr int kActDim = 2;

    explicit PointPushEnv(EnvParams params = {}) : params_(params) { reset(0); }

    // Jitters are drawn in a fixed order, so a seed fully determines the
    // initial state.
    void reset(std::uint64_t seed) {
        Rng rng(seed);
        auto jitter = [&](double amp) { return amp * (2.0 * rng.uniform01() - 1.0); };
        agent_ = params_.agent_start + Eigen::Vector2d(jitter(params_.agent_jitter), jitter(params_.agent_jitter));
        block_ = params_.block_start + Eigen::Vector2d(jitter(params_.block_jitter), jitter(params_.block_jitter));
        goal_ = params_.goal_center + Eigen::Vector2d(jitter(params_.goal_jitter), jitter(params_.goal_jitter));
        steps_ = 0;
        initial_block_dist_ = (block_ - goal_).norm();
    }

    Vec observation() const {
        Vec o(kObsDim);
        o << agent_.x(), agent_.y(), block_.x(), block_.y(), goal_.x(), goal_.y();
        return o;
    }

    void step(Eigen::Vector2d v) {
        require(v.allFinite(), "env step: non-finite action");
        const double speed = v.norm();
        if (speed > params_.max_speed) v *= params_.max_speed / speed;

        agent_ += params_.dt * v;

        // obstacle blocks the agent: project back onto the disc boundary
        Eigen::Vector2d from_obst = agent_ - params_.obstacle;
        const double d_obst = from_obst.norm();
        if (d_obst < params_.obstacle_radius) {
            if (d_obst < 1e-12) from_obst = Eigen::Vector2d(0.0, -1.0);
            else from_obst /= d_obst;
            agent_ = params_.obstacle + params_.obstacle_radius * from_obst;
        }
        agent_ = agent_.cwiseMax(-1.0).cwiseMin(1.0);

        // kinematic push: the block keeps exactly contact_radius separation
        Eigen::Vector2d to_block = block_ - agent_;
        const double d_block = to_block.norm();
        if (d_block < params_.contact_radius) {
            if (d_block < 1e-12) to_block = Eigen::Vector2d(0.0, 1.0);
            else to_block /= d_block;
            block_ = agent_ + params_.contact_radius * to_block;
            block_ = block_.cwiseMax(-1.0).cwiseMin(1.0);
        }
        ++steps_;
    }

    bool success() const { return (block_ - goal_).norm() <= params_.goal_radius; }
    bool done() const { return success() || steps_ >= params_.max_steps; }
    int steps() const { return steps_; }

    // 1 on success, otherwise normalized progress of the block toward the goal.
    double score() const {
        if (success()) return 1.0;
        if (initial_block_dist_ < 1e-12) return 1.0;
        const double frac = 1.0 - (block_ - goal_).norm() / initial_block_dist_;
        return frac < 0.0 ? 0.0 : frac;
    }

    const EnvParams& params() const { return params_; }
    Eigen::Vector2d agent() const { return agent_; }
    Eigen::Vector2d block() const { return block_; }
    Eigen::Vector2d goal() const { return goal_; }

  private:
    EnvParams params_;
    Eigen::Vector2d agent_, block_, goal_;
    int steps_ = 0;
    double initial_block_dist_ = 1.0;
};

// Waypoint-following expert with two routes around the obstacle. Phase 0
// heads to the side waypoint, phase 1 to a pre-push spot behind the block,
// phase 2 pushes the block down the block->goal axis.
class ScriptedExpert {
  public:
    ScriptedExpert(const EnvParams& params, int mode, double speed = 0.9)
        : params_(params), mode_(mode), speed_(speed) {}

    Eigen::Vector2d act(const Vec& obs) {
        const Eigen::Vector2d agent(obs[0], obs[1]);
        const Eigen::Vector2d block(obs[2], obs[3]);
        const Eigen::Vector2d goal(obs[4], obs[5]);

        Eigen::Vector2d dir = goal - block;
        const double dist_goal = dir.norm();
        if (dist_goal > 1e-9) dir /= dist_goal;
        else dir = Eigen::Vector2d(0.0, 1.0);
        if (dist_goal <= params_.goal_radius * 0.8) return {0.0, 0.0};  // parked on the goal

        const double side = mode_ == 0 ? -1.0 : 1.0;
        const Eigen::Vector2d waypoint(side * (params_.obstacle_radius + 0.22), params_.obstacle.y());
        const Eigen::Vector2d approach = block - (params_.contact_radius + 0.03) * dir;

        if (phase_ == 0 && (agent - waypoint).norm() < 0.06) phase_ = 1;
        if (phase_ == 1 && (agent - approach).norm() < 0.04) phase_ = 2;

        Eigen::Vector2d target;
        if (phase_ == 0) target = waypoint;
        else if (phase_ == 1) target = approach;
        else target = block - (params_.contact_radius - 0.01) * dir;  // lean into contact

        Eigen::Vector2d v = (target - agent) / params_.dt;
        const double mag = v.norm();
        if (mag > speed_) v *= speed_ / mag;
        return v;
    }

    int mode() const { return mode_; }

  private:
    EnvParams params_;
    int mode_;
    double speed_;
    int phase_ = 0;
};

// Rolls the expert for a fixed-length episode; returns success.
inline bool run_expert_episode(PointPushEnv& env, ScriptedExpert& expert, int episode_len, Episode& out) {
    out.obs.resize(episode_len, PointPushEnv::kObsDim);
    out.act.resize(episode_len, PointPushEnv::kActDim);
    bool reached = false;
    for (int t = 0; t < episode_len; ++t) {
        const Vec obs = env.observation();
        const Eigen::Vector2d v = reached ? Eigen::Vector2d(0.0, 0.0) : expert.act(obs);
        out.obs.row(t) = obs.transpose();
        out.act.row(t) << v.x(), v.y();
        env.step(v);
        reached = reached || env.success();
    }
    return reached;
}

// Alternating-route demonstrations; failed seeds are resampled (and logged)
// so every stored episode succeeds.
inline EpisodeDataset generate_demos(int n_episodes, std::uint64_t seed, int episode_len = 64,
                                     EnvParams params = {}) {
    require(n_episodes >= 1, "generate_demos: need at least one episode");
    require(episode_len >= 2, "generate_demos: episode too short");
    EpisodeDataset ds;
    ds.obs_dim = PointPushEnv::kObsDim;
    ds.act_dim = PointPushEnv::kActDim;

    Rng seeder(seed);
    PointPushEnv env(params);
    for (int i = 0; i < n_episodes; ++i) {
        const int mode = i % 2;
        for (int attempt = 0;; ++attempt) {
            require_state(attempt < 100, "expert failed 100 consecutive seeds; environment unsolvable");
            const std::uint64_t ep_seed = seeder.raw();
            env.reset(ep_seed);
            ScriptedExpert expert(params, mode);
            Episode e;
            e.seed = ep_seed;
            e.mode = mode;
            if (run_expert_episode(env, expert, episode_len, e)) {
                ds.episodes.push_back(std::move(e));
                break;
            }
            std::cerr << "[gen-data] expert failed on seed " << ep_seed << " (episode " << i
                      << "), resampling\n";
        }
    }
    return ds;
}

}  // namespace sdp
