#pragma once

#include <functional>
#include <string>
#include <vector>

#include "semdrive/config.hpp"
#include "semdrive/evaluation.hpp"
#include "semdrive/sac.hpp"

namespace semdrive {

struct TrainResult {
    std::string checkpoint_path;
    std::string scalars_csv_path;
    std::string trace_jsonl_path;
    std::string prompts_jsonl_path;
    std::string metrics_json_path;
    long steps_run = 0;
    long episodes = 0;
    long update_count = 0;     // gradient steps taken (one per step past warm start)
    long trigger_count = 0;    // all prompt triggers, bootstrap included
    double trigger_rate = 0.0; // post-warmup triggers / post-warmup steps
    std::vector<double> step_rewards;  // combined reward per step, in order
    Metrics final_metrics;             // greedy evaluation at the end of the run
};

// Per-step pipeline: encode the BEV, score novelty and refresh the prompt
// bundle, assemble the composite reward, sample and apply an action, learn a
// one-step embedding predictor, and update the agent once per step past warm
// start. Writes trace JSONL, scalars CSV, prompts JSONL, metrics JSON, and a
// checkpoint under cfg.out_dir. Deterministic given the config (the prompt
// worker is forced synchronous here; the profiler exercises the async path).
TrainResult run_training(const RunConfig& cfg);

using PolicyFn = std::function<std::array<double, 2>(const ObservationVec&)>;

// Greedy-policy metric collection; `records` (optional) receives per-episode
// trajectories. Episode seeds depend only on cfg.master_seed, so repeated
// calls evaluate the same episode suite.
Metrics evaluate_policy(const RunConfig& cfg, const PolicyFn& policy, int episodes,
                        std::vector<EpisodeRecord>* records = nullptr);
Metrics evaluate_agent(const RunConfig& cfg, const SacAgent& agent, int episodes,
                       std::vector<EpisodeRecord>* records = nullptr);

// Loads the checkpoint (its embedded config unless `config_override` is
// given), rebuilds agent + world, and runs greedy episodes. Writes the
// metrics JSON to out_json when non-empty. Throws on config/checkpoint
// dimension mismatch.
Metrics run_evaluation(const std::string& checkpoint_path, int episodes,
                       const std::string& out_json = "",
                       const RunConfig* config_override = nullptr);

struct ProfileResult {
    LatencyProfile profile;
    long steps = 0;
    long triggers = 0;
    std::string json;  // component table, trigger rate, base/amortized totals
};

// Measures mean per-step wall-clock cost of each pipeline component (no
// learning updates) plus the once-per-trigger generation cost ("dynamic"),
// and folds them through the amortized latency model.
ProfileResult run_profile(const RunConfig& cfg, int steps);

}  // namespace semdrive
