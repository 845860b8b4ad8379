#pragma once

#include <cstdint>
#include <string>

#include "semdrive/novelty.hpp"
#include "semdrive/reward.hpp"
#include "semdrive/sac.hpp"
#include "semdrive/sim_world.hpp"

namespace semdrive {

struct WorldSpec {
    std::string kind = "grid_town";  // grid_town | straight | file
    int rows = 5;
    int cols = 5;
    double spacing = 40.0;
    double lane_halfwidth = 3.5;
    int straight_nodes = 41;
    double straight_spacing = 5.0;
    std::string file;  // world JSON path when kind == "file"
};

// Every knob of a run. The zero-argument value is the default configuration
// (mixed-traffic grid town, full-size networks).
struct RunConfig {
    std::uint64_t master_seed = 0;
    std::uint64_t projection_seed = 12345;

    int embed_dim = 64;
    int text_buckets = 4096;

    NoveltyConfig novelty;
    PromptRules prompt_rules;
    RewardWeights weights;
    KinematicTargets targets;
    AblationFlags ablation;

    SimConfig sim;
    WorldSpec world;
    AgentConfig agent;

    std::string sac_preset = "appendix";  // appendix | main-text
    std::size_t replay_capacity = 50000;
    std::size_t batch_size = 64;
    std::size_t warm_start = 1000;

    int wm_hidden = 128;
    double wm_lr = 1e-3;
    int wm_updates_per_step = 1;

    long total_steps = 20000;
    long eval_cadence = 5000;  // 0 disables in-run evaluation
    int eval_episodes = 10;
    int scalar_every = 100;  // CSV row cadence
    std::string out_dir = "run_out";

    RunConfig() { sim.traffic_count = 12; }
};

// Syncs derived dims (agent grid size, waypoint dim, seed) and validates;
// call before handing the config to a run. The SAC preset resolves replay
// and batch defaults at parse time ("main-text" -> 1e5 / 256); explicit
// fields in the file always win.
RunConfig finalize(RunConfig cfg);

WaypointGraph build_world(const RunConfig& cfg);

std::string config_json(const RunConfig& cfg);
// Missing keys keep their defaults; section and field names mirror config_json.
RunConfig config_from_json(const std::string& json_text);
RunConfig load_config_file(const std::string& path);
std::uint64_t config_hash(const RunConfig& cfg);

// Small-network straight-road preset sized so a full 20k-step run fits a
// single-core minute budget.
RunConfig desk_training_config();

}  // namespace semdrive
