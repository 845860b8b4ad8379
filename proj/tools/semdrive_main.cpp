#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "semdrive/config.hpp"
#include "semdrive/training.hpp"

namespace {

using namespace semdrive;

RunConfig config_from_cli(const std::string& path) {
    return path.empty() ? RunConfig{} : load_config_file(path);
}

std::vector<double> read_reward_field(const std::string& path, const std::string& field) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open reward log: " + path);
    std::vector<double> out;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": bad JSONL line: " + e.what());
        }
        if (!j.contains("reward") || !j["reward"].contains(field))
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": no reward field '" + field + "'");
        out.push_back(j["reward"][field].get<double>());
    }
    if (out.empty()) throw std::runtime_error("reward log is empty: " + path);
    return out;
}

void write_or_print(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text << "\n";
    } else {
        std::ofstream out(out_path);
        if (!out) throw std::runtime_error("cannot write: " + out_path);
        out << text << "\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"composite-reward driving trainer"};
    app.require_subcommand(1);

    std::string config_path, checkpoint_path, out_path;
    std::string rewards_a, rewards_b, field = "aicr";
    long steps_override = -1;
    std::uint64_t seed_override = 0;
    bool has_seed = false;
    int episodes = 0, profile_steps = 200;
    bool sync_prompts = false;
    double delay_ms = -1.0;

    auto* train = app.add_subcommand("train", "run a training session");
    train->add_option("--config", config_path, "config JSON (defaults when omitted)");
    train->add_option("--steps", steps_override, "override train.total_steps");
    train->add_option("--seed", seed_override, "override seeds.master")
        ->each([&](const std::string&) { has_seed = true; });
    train->add_option("--out-dir", out_path, "override train.out_dir");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint greedily");
    eval->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    eval->add_option("--episodes", episodes, "episode count (0 = config default)");
    eval->add_option("--config", config_path, "config override (defaults to embedded)");
    eval->add_option("--out", out_path, "write metrics JSON here instead of stdout");

    auto* dist = app.add_subcommand("distshift", "compare reward distributions of two logs");
    dist->add_option("--rewards-a", rewards_a, "trace JSONL, configuration A")->required();
    dist->add_option("--rewards-b", rewards_b, "trace JSONL, configuration B")->required();
    dist->add_option("--field", field, "reward field to compare (default aicr)");
    dist->add_option("--out", out_path, "write report JSON here instead of stdout");

    auto* prof = app.add_subcommand("profile", "per-component latency breakdown");
    prof->add_option("--config", config_path, "config JSON (defaults when omitted)");
    prof->add_option("--steps", profile_steps, "steps to profile");
    prof->add_flag("--sync", sync_prompts, "profile the blocking prompt path");
    prof->add_option("--delay-ms", delay_ms, "synthetic per-generation delay");
    prof->add_option("--out", out_path, "write profile JSON here instead of stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            RunConfig cfg = config_from_cli(config_path);
            if (steps_override >= 0) cfg.total_steps = steps_override;
            if (has_seed) cfg.master_seed = seed_override;
            if (!out_path.empty()) cfg.out_dir = out_path;
            const TrainResult r = run_training(cfg);
            std::printf("steps=%ld episodes=%ld updates=%ld triggers=%ld trigger_rate=%.4f\n",
                        r.steps_run, r.episodes, r.update_count, r.trigger_count,
                        r.trigger_rate);
            std::printf("checkpoint=%s\n", r.checkpoint_path.c_str());
            std::cout << metrics_json(r.final_metrics) << "\n";
        } else if (eval->parsed()) {
            RunConfig override_cfg;
            const bool has_cfg = !config_path.empty();
            if (has_cfg) override_cfg = load_config_file(config_path);
            const Metrics m = run_evaluation(checkpoint_path, episodes, out_path,
                                             has_cfg ? &override_cfg : nullptr);
            if (out_path.empty()) std::cout << metrics_json(m) << "\n";
        } else if (dist->parsed()) {
            const auto a = read_reward_field(rewards_a, field);
            const auto b = read_reward_field(rewards_b, field);
            write_or_print(distribution_shift_json(reward_distribution_report(a, b)), out_path);
        } else if (prof->parsed()) {
            RunConfig cfg = config_from_cli(config_path);
            cfg.novelty.async_prompts = !sync_prompts;
            if (delay_ms >= 0) cfg.novelty.synthetic_delay_ms = delay_ms;
            const ProfileResult r = run_profile(cfg, profile_steps);
            write_or_print(r.json, out_path);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
