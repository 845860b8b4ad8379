#include "semdrive/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "semdrive/rng.hpp"

namespace semdrive {
namespace {

using nlohmann::json;

json weights_json(const RewardWeights& w) {
    return {{"rho1", w.rho1}, {"rho2", w.rho2}, {"lambda", w.lambda},
            {"alpha", w.alpha}, {"beta", w.beta}};
}

json targets_json(const KinematicTargets& t) {
    return {{"v_target", t.v_target}, {"sigma_v", t.sigma_v}, {"d_max", t.d_max},
            {"theta_max", t.theta_max}, {"omega_max", t.omega_max}};
}

json conv_json(const std::vector<ConvSpec>& conv) {
    json arr = json::array();
    for (const auto& c : conv) arr.push_back({c.out_ch, c.kernel, c.stride});
    return arr;
}

template <typename T>
void get(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string config_json(const RunConfig& cfg) {
    json j;
    j["seeds"] = {{"master", cfg.master_seed}, {"projection", cfg.projection_seed}};
    j["embedding"] = {{"dim", cfg.embed_dim}, {"text_buckets", cfg.text_buckets}};
    j["novelty"] = {
        {"buffer_capacity", cfg.novelty.buffer_capacity},
        {"cache_capacity", cfg.novelty.cache_capacity},
        {"quantile", cfg.novelty.quantile},
        {"warmup_steps", cfg.novelty.warmup_steps},
        {"initial_threshold", cfg.novelty.initial_threshold},
        {"insert_every_step", cfg.novelty.insert_every_step},
        {"async_prompts", cfg.novelty.async_prompts},
        {"synthetic_delay_ms", cfg.novelty.synthetic_delay_ms},
    };
    j["prompt_rules"] = {
        {"lead_gap_threshold_m", cfg.prompt_rules.lead_gap_threshold_m},
        {"deviation_threshold_m", cfg.prompt_rules.deviation_threshold_m},
        {"target_speed_mps", cfg.prompt_rules.target_speed_mps},
        {"overspeed_margin_mps", cfg.prompt_rules.overspeed_margin_mps},
    };
    j["reward"] = weights_json(cfg.weights);
    j["reward"]["targets"] = targets_json(cfg.targets);
    j["ablation"] = {{"no_hvfr", cfg.ablation.no_hvfr},
                     {"no_aicr", cfg.ablation.no_aicr},
                     {"no_pcfm", cfg.ablation.no_pcfm}};
    j["sim"] = {
        {"dt", cfg.sim.dt},
        {"max_episode_steps", cfg.sim.max_episode_steps},
        {"l_max", cfg.sim.l_max},
        {"route_retry_budget", cfg.sim.route_retry_budget},
        {"traffic_count", cfg.sim.traffic_count},
        {"traffic_speed_min", cfg.sim.traffic_speed_min},
        {"traffic_speed_max", cfg.sim.traffic_speed_max},
        {"waypoint_count", cfg.sim.waypoint_count},
        {"waypoint_spacing", cfg.sim.waypoint_spacing},
        {"waypoint_radius", cfg.sim.waypoint_radius},
        {"bev_size", cfg.sim.bev_size},
        {"bev_resolution", cfg.sim.bev_resolution},
        {"vehicle",
         {{"wheelbase", cfg.sim.vehicle.wheelbase},
          {"delta_max", cfg.sim.vehicle.delta_max},
          {"k_accel", cfg.sim.vehicle.k_accel},
          {"k_brake", cfg.sim.vehicle.k_brake},
          {"k_drag", cfg.sim.vehicle.k_drag},
          {"v_max", cfg.sim.vehicle.v_max},
          {"length", cfg.sim.vehicle.length},
          {"width", cfg.sim.vehicle.width}}},
        {"rules",
         {{"d_max", cfg.sim.rules.d_max},
          {"v_min", cfg.sim.rules.v_min},
          {"t_stuck", cfg.sim.rules.t_stuck},
          {"goal_tolerance", cfg.sim.rules.goal_tolerance}}},
    };
    j["world"] = {
        {"kind", cfg.world.kind},       {"rows", cfg.world.rows},
        {"cols", cfg.world.cols},       {"spacing", cfg.world.spacing},
        {"lane_halfwidth", cfg.world.lane_halfwidth},
        {"straight_nodes", cfg.world.straight_nodes},
        {"straight_spacing", cfg.world.straight_spacing},
        {"file", cfg.world.file},
    };
    j["sac"] = {
        {"preset", cfg.sac_preset},
        {"replay_capacity", cfg.replay_capacity},
        {"batch_size", cfg.batch_size},
        {"warm_start", cfg.warm_start},
        {"conv", conv_json(cfg.agent.conv)},
        {"d_v", cfg.agent.d_v},
        {"d_e", cfg.agent.d_e},
        {"d_w", cfg.agent.d_w},
        {"head_hidden", cfg.agent.head_hidden},
        {"lr", cfg.agent.lr},
        {"gamma", cfg.agent.gamma},
        {"tau", cfg.agent.tau},
        {"twin_critics", cfg.agent.twin_critics},
        {"auto_entropy", cfg.agent.auto_entropy},
        {"init_alpha", cfg.agent.init_alpha},
        {"target_entropy", cfg.agent.target_entropy},
        {"log_std_min", cfg.agent.log_std_min},
        {"log_std_max", cfg.agent.log_std_max},
    };
    j["world_model"] = {{"hidden", cfg.wm_hidden},
                        {"lr", cfg.wm_lr},
                        {"updates_per_step", cfg.wm_updates_per_step}};
    j["train"] = {
        {"total_steps", cfg.total_steps},   {"eval_cadence", cfg.eval_cadence},
        {"eval_episodes", cfg.eval_episodes}, {"scalar_every", cfg.scalar_every},
        {"out_dir", cfg.out_dir},
    };
    return j.dump(2);
}

RunConfig config_from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("config parse error: ") + e.what());
    }
    RunConfig cfg;
    if (j.contains("seeds")) {
        const auto& s = j["seeds"];
        get(s, "master", cfg.master_seed);
        get(s, "projection", cfg.projection_seed);
    }
    if (j.contains("embedding")) {
        const auto& e = j["embedding"];
        get(e, "dim", cfg.embed_dim);
        get(e, "text_buckets", cfg.text_buckets);
    }
    if (j.contains("novelty")) {
        const auto& n = j["novelty"];
        get(n, "buffer_capacity", cfg.novelty.buffer_capacity);
        get(n, "cache_capacity", cfg.novelty.cache_capacity);
        get(n, "quantile", cfg.novelty.quantile);
        get(n, "warmup_steps", cfg.novelty.warmup_steps);
        get(n, "initial_threshold", cfg.novelty.initial_threshold);
        get(n, "insert_every_step", cfg.novelty.insert_every_step);
        get(n, "async_prompts", cfg.novelty.async_prompts);
        get(n, "synthetic_delay_ms", cfg.novelty.synthetic_delay_ms);
    }
    if (j.contains("prompt_rules")) {
        const auto& p = j["prompt_rules"];
        get(p, "lead_gap_threshold_m", cfg.prompt_rules.lead_gap_threshold_m);
        get(p, "deviation_threshold_m", cfg.prompt_rules.deviation_threshold_m);
        get(p, "target_speed_mps", cfg.prompt_rules.target_speed_mps);
        get(p, "overspeed_margin_mps", cfg.prompt_rules.overspeed_margin_mps);
    }
    if (j.contains("reward")) {
        const auto& r = j["reward"];
        get(r, "rho1", cfg.weights.rho1);
        get(r, "rho2", cfg.weights.rho2);
        get(r, "lambda", cfg.weights.lambda);
        get(r, "alpha", cfg.weights.alpha);
        get(r, "beta", cfg.weights.beta);
        if (r.contains("targets")) {
            const auto& t = r["targets"];
            get(t, "v_target", cfg.targets.v_target);
            get(t, "sigma_v", cfg.targets.sigma_v);
            get(t, "d_max", cfg.targets.d_max);
            get(t, "theta_max", cfg.targets.theta_max);
            get(t, "omega_max", cfg.targets.omega_max);
        }
    }
    if (j.contains("ablation")) {
        const auto& a = j["ablation"];
        get(a, "no_hvfr", cfg.ablation.no_hvfr);
        get(a, "no_aicr", cfg.ablation.no_aicr);
        get(a, "no_pcfm", cfg.ablation.no_pcfm);
    }
    if (j.contains("sim")) {
        const auto& s = j["sim"];
        get(s, "dt", cfg.sim.dt);
        get(s, "max_episode_steps", cfg.sim.max_episode_steps);
        get(s, "l_max", cfg.sim.l_max);
        get(s, "route_retry_budget", cfg.sim.route_retry_budget);
        get(s, "traffic_count", cfg.sim.traffic_count);
        get(s, "traffic_speed_min", cfg.sim.traffic_speed_min);
        get(s, "traffic_speed_max", cfg.sim.traffic_speed_max);
        get(s, "waypoint_count", cfg.sim.waypoint_count);
        get(s, "waypoint_spacing", cfg.sim.waypoint_spacing);
        get(s, "waypoint_radius", cfg.sim.waypoint_radius);
        get(s, "bev_size", cfg.sim.bev_size);
        get(s, "bev_resolution", cfg.sim.bev_resolution);
        if (s.contains("vehicle")) {
            const auto& v = s["vehicle"];
            get(v, "wheelbase", cfg.sim.vehicle.wheelbase);
            get(v, "delta_max", cfg.sim.vehicle.delta_max);
            get(v, "k_accel", cfg.sim.vehicle.k_accel);
            get(v, "k_brake", cfg.sim.vehicle.k_brake);
            get(v, "k_drag", cfg.sim.vehicle.k_drag);
            get(v, "v_max", cfg.sim.vehicle.v_max);
            get(v, "length", cfg.sim.vehicle.length);
            get(v, "width", cfg.sim.vehicle.width);
        }
        if (s.contains("rules")) {
            const auto& r = s["rules"];
            get(r, "d_max", cfg.sim.rules.d_max);
            get(r, "v_min", cfg.sim.rules.v_min);
            get(r, "t_stuck", cfg.sim.rules.t_stuck);
            get(r, "goal_tolerance", cfg.sim.rules.goal_tolerance);
        }
    }
    if (j.contains("world")) {
        const auto& w = j["world"];
        get(w, "kind", cfg.world.kind);
        get(w, "rows", cfg.world.rows);
        get(w, "cols", cfg.world.cols);
        get(w, "spacing", cfg.world.spacing);
        get(w, "lane_halfwidth", cfg.world.lane_halfwidth);
        get(w, "straight_nodes", cfg.world.straight_nodes);
        get(w, "straight_spacing", cfg.world.straight_spacing);
        get(w, "file", cfg.world.file);
    }
    if (j.contains("sac")) {
        const auto& s = j["sac"];
        get(s, "preset", cfg.sac_preset);
        if (cfg.sac_preset == "main-text") {
            cfg.replay_capacity = 100000;
            cfg.batch_size = 256;
        }
        // explicit fields win over the preset
        get(s, "replay_capacity", cfg.replay_capacity);
        get(s, "batch_size", cfg.batch_size);
        get(s, "warm_start", cfg.warm_start);
        if (s.contains("conv")) {
            cfg.agent.conv.clear();
            for (const auto& c : s["conv"]) {
                if (!c.is_array() || c.size() != 3)
                    throw std::runtime_error("sac.conv entries must be [out_ch, kernel, stride]");
                cfg.agent.conv.push_back({c[0].get<int>(), c[1].get<int>(), c[2].get<int>()});
            }
        }
        get(s, "d_v", cfg.agent.d_v);
        get(s, "d_e", cfg.agent.d_e);
        get(s, "d_w", cfg.agent.d_w);
        get(s, "head_hidden", cfg.agent.head_hidden);
        get(s, "lr", cfg.agent.lr);
        get(s, "gamma", cfg.agent.gamma);
        get(s, "tau", cfg.agent.tau);
        get(s, "twin_critics", cfg.agent.twin_critics);
        get(s, "auto_entropy", cfg.agent.auto_entropy);
        get(s, "init_alpha", cfg.agent.init_alpha);
        get(s, "target_entropy", cfg.agent.target_entropy);
        get(s, "log_std_min", cfg.agent.log_std_min);
        get(s, "log_std_max", cfg.agent.log_std_max);
    }
    if (j.contains("world_model")) {
        const auto& w = j["world_model"];
        get(w, "hidden", cfg.wm_hidden);
        get(w, "lr", cfg.wm_lr);
        get(w, "updates_per_step", cfg.wm_updates_per_step);
    }
    if (j.contains("train")) {
        const auto& t = j["train"];
        get(t, "total_steps", cfg.total_steps);
        get(t, "eval_cadence", cfg.eval_cadence);
        get(t, "eval_episodes", cfg.eval_episodes);
        get(t, "scalar_every", cfg.scalar_every);
        get(t, "out_dir", cfg.out_dir);
    }
    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return config_from_json(buf.str());
}

RunConfig finalize(RunConfig cfg) {
    if (cfg.sac_preset != "appendix" && cfg.sac_preset != "main-text")
        throw std::invalid_argument("unknown sac preset: " + cfg.sac_preset);
    cfg.agent.grid_size = cfg.sim.bev_size;
    cfg.agent.wp_dim = 2 * cfg.sim.waypoint_count;
    cfg.agent.seed = cfg.master_seed;

    if (cfg.embed_dim <= 0) throw std::invalid_argument("embedding dim must be positive");
    if (cfg.total_steps < 0) throw std::invalid_argument("total_steps must be >= 0");
    if (cfg.batch_size == 0) throw std::invalid_argument("batch_size must be positive");
    if (cfg.scalar_every <= 0) throw std::invalid_argument("scalar_every must be positive");
    if (cfg.eval_cadence < 0) throw std::invalid_argument("eval_cadence must be >= 0");
    if (cfg.eval_episodes <= 0) throw std::invalid_argument("eval_episodes must be positive");
    if (cfg.novelty.quantile <= 0.0 || cfg.novelty.quantile >= 1.0)
        throw std::invalid_argument("novelty.quantile must be in (0, 1)");
    if (cfg.wm_updates_per_step < 0)
        throw std::invalid_argument("world_model.updates_per_step must be >= 0");
    return cfg;
}

WaypointGraph build_world(const RunConfig& cfg) {
    if (cfg.world.kind == "grid_town")
        return make_grid_town(cfg.world.rows, cfg.world.cols, cfg.world.spacing,
                              cfg.world.lane_halfwidth);
    if (cfg.world.kind == "straight")
        return make_straight_world(cfg.world.straight_nodes, cfg.world.straight_spacing,
                                   cfg.world.lane_halfwidth);
    if (cfg.world.kind == "file") {
        if (cfg.world.file.empty())
            throw std::invalid_argument("world.kind=file needs world.file");
        return load_world_json(cfg.world.file);
    }
    throw std::invalid_argument("unknown world kind: " + cfg.world.kind);
}

std::uint64_t config_hash(const RunConfig& cfg) {
    const std::string dump = config_json(cfg);
    return fnv1a(dump.data(), dump.size());
}

RunConfig desk_training_config() {
    RunConfig cfg;
    cfg.world.kind = "straight";
    // 55 m route + 90 s horizon: finishable at 0.62 m/s, well under the
    // 1-4 m/s cruise speeds trained policies settle on across seeds
    cfg.world.straight_nodes = 12;
    cfg.world.straight_spacing = 5.0;
    cfg.sim.traffic_count = 0;
    cfg.sim.max_episode_steps = 900;
    // desk-scale target speed: the speed factor peaks where a 20k-step run
    // can actually get, while still paying ~nothing for standing still
    cfg.targets.v_target = 3.5;
    cfg.targets.sigma_v = 1.2;
    cfg.agent.lr = 1e-3;
    cfg.sim.bev_size = 12;
    cfg.sim.bev_resolution = 1.0;
    cfg.sim.waypoint_count = 5;
    cfg.embed_dim = 32;
    cfg.novelty.warmup_steps = 500;
    cfg.agent.conv = {{8, 3, 2}, {16, 3, 2}};
    cfg.agent.d_v = 32;
    cfg.agent.d_e = 8;
    cfg.agent.d_w = 16;
    cfg.agent.head_hidden = 48;
    cfg.wm_hidden = 64;
    cfg.batch_size = 32;
    cfg.warm_start = 1000;
    cfg.total_steps = 20000;
    cfg.eval_cadence = 0;
    cfg.eval_episodes = 10;
    return cfg;
}

}  // namespace semdrive
