#pragma once

#include "sdp/container.hpp"
#include "sdp/corruption.hpp"
#include "sdp/dataset.hpp"
#include "sdp/denoiser.hpp"

namespace sdp {

constexpr const char* kCheckpointMagic = "SDPCKPT1";

// Self-contained training artifact: raw + EMA weights, the schedule and
// chunk structure trained against, and the normalization statistics needed
// to run rollouts.
struct Checkpoint {
    ParameterSet params;
    ParameterSet ema;
    NormStats stats;
    ScheduleKind sched_kind = ScheduleKind::DDPM;
    int ddim_stride = 1;
    int num_chunks = 2;  // h
    int chunk_len = 8;   // T_b
    std::string scheme_name = "cw80_const20";
    std::uint64_t seed = 0;
    int epochs = 0;
    double final_loss = 0.0;

    const DenoiserConfig& config() const { return params.config; }
    NoiseSchedule schedule() const {
        return build_schedule(params.config.num_levels, sched_kind, ddim_stride);
    }
};

inline nlohmann::json config_to_json(const DenoiserConfig& c) {
    return {{"action_dim", c.action_dim}, {"obs_dim", c.obs_dim},     {"obs_len", c.obs_len},
            {"horizon", c.horizon},       {"width1", c.width1},       {"width2", c.width2},
            {"cond_dim", c.cond_dim},     {"embed_dim", c.embed_dim}, {"num_levels", c.num_levels},
            {"arch", to_string(c.arch)}};
}

inline DenoiserConfig config_from_json(const nlohmann::json& j) {
    DenoiserConfig c;
    c.action_dim = j.at("action_dim").get<int>();
    c.obs_dim = j.at("obs_dim").get<int>();
    c.obs_len = j.at("obs_len").get<int>();
    c.horizon = j.at("horizon").get<int>();
    c.width1 = j.at("width1").get<int>();
    c.width2 = j.at("width2").get<int>();
    c.cond_dim = j.at("cond_dim").get<int>();
    c.embed_dim = j.at("embed_dim").get<int>();
    c.num_levels = j.at("num_levels").get<int>();
    c.arch = arch_from_string(j.at("arch").get<std::string>());
    c.validate();
    return c;
}

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
    require(ck.params.total() == ck.ema.total(), "checkpoint: raw/EMA parameter sizes differ");
    require(ck.params.values.allFinite() && ck.ema.values.allFinite(),
            "checkpoint: non-finite parameters");
    nlohmann::json header;
    header["version"] = ck.params.version;
    header["config"] = config_to_json(ck.params.config);
    header["schedule"] = {{"kind", to_string(ck.sched_kind)},
                          {"num_levels", ck.params.config.num_levels},
                          {"ddim_stride", ck.ddim_stride}};
    header["norm_stats"] = ck.stats.to_json();
    header["train"] = {{"num_chunks", ck.num_chunks}, {"chunk_len", ck.chunk_len},
                       {"scheme", ck.scheme_name},    {"seed", ck.seed},
                       {"epochs", ck.epochs},         {"final_loss", ck.final_loss}};
    header["ema"] = true;

    Vec payload(ck.params.total() + ck.ema.total());
    payload.head(ck.params.total()) = ck.params.values;
    payload.tail(ck.ema.total()) = ck.ema.values;
    write_container(path, kCheckpointMagic, header, payload);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    Container c = read_container(path, kCheckpointMagic);
    Checkpoint ck;
    const DenoiserConfig config = config_from_json(c.header.at("config"));
    ck.params.config = config;
    ck.params.specs = parameter_specs(config);
    ck.params.version = c.header.at("version").get<int>();
    ck.ema = ck.params;

    const int total = parameter_count(config);
    require(c.payload.size() == 2 * total, "checkpoint payload size mismatch for config");
    ck.params.values = c.payload.head(total);
    ck.ema.values = c.payload.tail(total);

    ck.stats = NormStats::from_json(c.header.at("norm_stats"));
    ck.sched_kind = schedule_kind_from_string(c.header.at("schedule").at("kind").get<std::string>());
    ck.ddim_stride = c.header.at("schedule").at("ddim_stride").get<int>();
    ck.num_chunks = c.header.at("train").at("num_chunks").get<int>();
    ck.chunk_len = c.header.at("train").at("chunk_len").get<int>();
    ck.scheme_name = c.header.at("train").at("scheme").get<std::string>();
    ck.seed = c.header.at("train").at("seed").get<std::uint64_t>();
    ck.epochs = c.header.at("train").at("epochs").get<int>();
    ck.final_loss = c.header.at("train").at("final_loss").get<double>();
    return ck;
}

}  // namespace sdp
