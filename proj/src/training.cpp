#include "semdrive/training.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "semdrive/checkpoint.hpp"
#include "semdrive/novelty.hpp"
#include "semdrive/rng.hpp"
#include "semdrive/world_model.hpp"

namespace semdrive {
namespace {

using nlohmann::json;
using clock_type = std::chrono::steady_clock;

double ms_since(clock_type::time_point t0) {
    return std::chrono::duration<double, std::milli>(clock_type::now() - t0).count();
}

ObservationVec make_obs(const SimEnv& env) {
    ObservationVec obs;
    obs.bev = env.bev();
    const std::vector<double> ego = env.ego_state_vec();
    obs.ego = {ego[0], ego[1], ego[2]};
    obs.waypoints = env.waypoints();
    return obs;
}

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

WorldBatch world_batch_of(const std::vector<const Transition*>& batch) {
    WorldBatch wb;
    wb.v.reserve(batch.size());
    wb.a.reserve(batch.size());
    wb.v_next.reserve(batch.size());
    for (const Transition* t : batch) {
        wb.v.push_back(t->v);
        wb.a.push_back(t->action);
        wb.v_next.push_back(t->v_next);
    }
    return wb;
}

json trace_line(long step, long episode, const PromptService::StepOutcome& outcome,
                const RewardBreakdown& rb, const std::array<double, 2>& action,
                const ControlCommand& cmd, const SimEnv& env, const StepResult& sr,
                const std::map<std::string, double>& latency_ms) {
    json j;
    j["step"] = step;
    j["episode"] = episode;
    j["novelty_score"] = outcome.score;  // serialized as null until the buffer is non-empty
    j["threshold"] = outcome.threshold;
    j["triggered"] = outcome.triggered;
    j["reward"] = {{"task", rb.task}, {"hvfr", rb.hvfr}, {"aicr", rb.aicr},
                   {"pcfm", rb.pcfm}, {"total", rb.total}};
    j["action"] = {action[0], action[1]};
    j["command"] = {{"steer", cmd.steer}, {"throttle", cmd.throttle}, {"brake", cmd.brake}};
    j["speed_mps"] = env.ego().speed;
    j["position"] = {env.ego().position.x, env.ego().position.y};
    j["heading"] = env.ego().heading;
    j["progress_m"] = env.progress_m();
    j["termination"] = to_string(sr.status.cause);
    j["truncated"] = sr.truncated;
    j["latency_ms"] = latency_ms;
    return j;
}

void write_metrics_files(const Metrics& m, const std::string& json_path,
                         const std::string& csv_path) {
    if (!json_path.empty()) {
        std::ofstream out(json_path);
        out << metrics_json(m) << "\n";
    }
    if (!csv_path.empty()) {
        std::ofstream out(csv_path);
        out << "AS,RC,TD,CS,SR\n" << metrics_csv_row(m) << "\n";
    }
}

std::vector<std::pair<std::string, std::vector<double>>> checkpoint_sections(SacAgent& agent,
                                                                             WorldModel& wm) {
    auto sections = agent.sections();
    auto wm_params = wm.params();
    sections.emplace_back("world_model", flatten_params(wm_params));
    return sections;
}

}  // namespace

TrainResult run_training(const RunConfig& raw_cfg) {
    RunConfig cfg = finalize(raw_cfg);
    std::filesystem::create_directories(cfg.out_dir);

    WaypointGraph world = build_world(cfg);
    SimEnv env(world, cfg.sim);
    BevEncoder bev_enc(cfg.sim.bev_size, cfg.embed_dim, cfg.projection_seed);
    TextEncoder text_enc(cfg.embed_dim, cfg.projection_seed, cfg.text_buckets);

    NoveltyConfig novelty_cfg = cfg.novelty;
    novelty_cfg.async_prompts = false;  // determinism contract for training runs
    PromptService prompts(text_enc, novelty_cfg, cfg.prompt_rules);

    SacAgent agent(cfg.agent);
    WorldModel wm(cfg.embed_dim, 2, cfg.wm_hidden, cfg.master_seed);
    ReplayBuffer replay(cfg.replay_capacity);

    TrainResult result;
    result.checkpoint_path = cfg.out_dir + "/checkpoint.bin";
    result.scalars_csv_path = cfg.out_dir + "/scalars.csv";
    result.trace_jsonl_path = cfg.out_dir + "/trace.jsonl";
    result.prompts_jsonl_path = cfg.out_dir + "/prompts.jsonl";
    result.metrics_json_path = cfg.out_dir + "/metrics.json";

    {
        std::ofstream cfg_out(cfg.out_dir + "/config.json");
        cfg_out << config_json(cfg) << "\n";
    }

    std::ofstream scalars(result.scalars_csv_path);
    scalars << "step,critic_loss,actor_loss,alpha,mean_reward\n";
    std::ofstream trace(result.trace_jsonl_path);
    std::ofstream eval_csv;

    long episode_idx = 0;
    env.reset(derive_seed(cfg.master_seed, "episode", episode_idx));
    ObservationVec obs = make_obs(env);
    Embedding v = bev_enc.encode(obs.bev);

    double win_reward_sum = 0.0, win_closs_sum = 0.0, win_aloss_sum = 0.0;
    long win_steps = 0, win_updates = 0;
    long last_stepped_episode = -1;  // a reset on the final step opens no new episode
    long post_warmup_steps = 0, post_warmup_triggers = 0;
    result.step_rewards.reserve(static_cast<std::size_t>(cfg.total_steps));

    for (long step = 0; step < cfg.total_steps; ++step) {
        std::map<std::string, double> latency;
        try {
            const SceneSummary scene = env.summary();

            auto t0 = clock_type::now();
            const PromptService::StepOutcome outcome = prompts.on_step(v, scene, step);
            const PromptBundle& bundle = prompts.active();
            latency["novelty"] = ms_since(t0);
            if (step >= novelty_cfg.warmup_steps) {
                ++post_warmup_steps;
                if (outcome.triggered) ++post_warmup_triggers;
            }

            t0 = clock_type::now();
            const double aicr_term = aicr(v, bundle.u_ideal, bundle.u_present, cfg.weights);
            const KinematicFactors factors =
                kinematic_factors(env.ego().speed, env.lateral_deviation_m(),
                                  env.heading_error_rad(), env.ego().yaw_rate, cfg.targets);
            const double hvfr_term = hvfr(factors);
            latency["reward"] = ms_since(t0);

            t0 = clock_type::now();
            const std::array<double, 2> action =
                agent.act(obs, derive_seed(cfg.master_seed, "action", step));
            latency["policy"] = ms_since(t0);

            t0 = clock_type::now();
            const double pcfm_term = pcfm(v, action.data(), bundle.u_ideal, wm);
            latency["world_model"] = ms_since(t0);

            t0 = clock_type::now();
            const ControlCommand cmd =
                decode_action(action[0], action[1], cfg.sim.vehicle.delta_max);
            const StepResult sr = env.step(cmd);
            latency["sim"] = ms_since(t0);

            const double task = task_reward(sr.progress_delta_m, sr.collision);
            const RewardBreakdown rb =
                combine(task, hvfr_term, aicr_term, pcfm_term, cfg.weights, cfg.ablation);

            t0 = clock_type::now();
            ObservationVec next_obs = make_obs(env);
            Embedding v_next = bev_enc.encode(next_obs.bev);
            latency["encode"] = ms_since(t0);

            Transition tr;
            tr.obs = obs;
            tr.action = action;
            tr.reward = rb.total;
            tr.next_obs = next_obs;
            tr.done = sr.status.terminated;  // horizon truncation still bootstraps
            tr.breakdown = rb;
            tr.v = v;
            tr.v_next = v_next;
            replay.push(std::move(tr));

            t0 = clock_type::now();
            double closs = 0.0;
            ActorStats astats;
            bool updated = false;
            if (replay.size() >= cfg.warm_start) {
                const auto batch = replay.sample(cfg.batch_size, cfg.warm_start,
                                                 derive_seed(cfg.master_seed, "batch", step));
                if (!batch.empty()) {
                    closs = agent.critic_update(batch,
                                                derive_seed(cfg.master_seed, "critic", step));
                    astats =
                        agent.actor_update(batch, derive_seed(cfg.master_seed, "actor", step));
                    const WorldBatch wb = world_batch_of(batch);
                    for (int u = 0; u < cfg.wm_updates_per_step; ++u)
                        wm.train_step(wb, cfg.wm_lr);
                    agent.polyak_step();
                    updated = true;
                    ++result.update_count;
                }
            }
            latency["update"] = ms_since(t0);

            trace << trace_line(step, episode_idx, outcome, rb, action, cmd, env, sr, latency)
                         .dump()
                  << "\n";
            last_stepped_episode = episode_idx;

            result.step_rewards.push_back(rb.total);
            win_reward_sum += rb.total;
            ++win_steps;
            if (updated) {
                win_closs_sum += closs;
                win_aloss_sum += astats.loss;
                ++win_updates;
            }

            if ((step + 1) % cfg.scalar_every == 0) {
                const double mean_r = win_reward_sum / static_cast<double>(win_steps);
                const double mean_c =
                    win_updates > 0 ? win_closs_sum / static_cast<double>(win_updates) : 0.0;
                const double mean_a =
                    win_updates > 0 ? win_aloss_sum / static_cast<double>(win_updates) : 0.0;
                scalars << step << "," << fmt17(mean_c) << "," << fmt17(mean_a) << ","
                        << fmt17(agent.alpha_ent()) << "," << fmt17(mean_r) << "\n";
                win_reward_sum = win_closs_sum = win_aloss_sum = 0.0;
                win_steps = win_updates = 0;
            }

            if (cfg.eval_cadence > 0 && (step + 1) % cfg.eval_cadence == 0) {
                const Metrics m = evaluate_agent(cfg, agent, cfg.eval_episodes);
                if (!eval_csv.is_open()) {
                    eval_csv.open(cfg.out_dir + "/eval_history.csv");
                    eval_csv << "step,AS,RC,TD,CS,SR\n";
                }
                eval_csv << (step + 1) << "," << metrics_csv_row(m) << "\n";
            }

            if (sr.status.terminated || sr.truncated) {
                ++episode_idx;
                env.reset(derive_seed(cfg.master_seed, "episode", episode_idx));
                next_obs = make_obs(env);
                v_next = bev_enc.encode(next_obs.bev);
            }
            obs = std::move(next_obs);
            v = std::move(v_next);
        } catch (const std::runtime_error& e) {
            throw std::runtime_error("training aborted at step " + std::to_string(step) + ": " +
                                     e.what());
        }
    }

    prompts.flush();
    {
        std::ofstream plog(result.prompts_jsonl_path);
        for (const PromptBundle& b : prompts.bundle_log())
            plog << prompt_jsonl_line(b) << "\n";
    }

    result.steps_run = cfg.total_steps;
    result.episodes = last_stepped_episode + 1;
    result.trigger_count = prompts.trigger_count();
    result.trigger_rate = post_warmup_steps > 0
                              ? static_cast<double>(post_warmup_triggers) /
                                    static_cast<double>(post_warmup_steps)
                              : 0.0;

    result.final_metrics = evaluate_agent(cfg, agent, cfg.eval_episodes);
    write_metrics_files(result.final_metrics, result.metrics_json_path,
                        cfg.out_dir + "/metrics.csv");

    json meta;
    meta["config"] = json::parse(config_json(cfg));
    meta["step"] = cfg.total_steps;
    meta["config_hash"] = config_hash(cfg);
    save_checkpoint(result.checkpoint_path, meta.dump(), checkpoint_sections(agent, wm));
    return result;
}

Metrics evaluate_policy(const RunConfig& raw_cfg, const PolicyFn& policy, int episodes,
                        std::vector<EpisodeRecord>* records) {
    RunConfig cfg = finalize(raw_cfg);
    WaypointGraph world = build_world(cfg);
    SimEnv env(world, cfg.sim);
    std::vector<EpisodeRecord> local;
    local.reserve(static_cast<std::size_t>(episodes));

    for (int ep = 0; ep < episodes; ++ep) {
        env.reset(derive_seed(cfg.master_seed, "eval-episode", ep));
        EpisodeRecord rec;
        rec.positions.push_back(env.ego().position);
        for (;;) {
            const std::array<double, 2> a = policy(make_obs(env));
            const ControlCommand cmd =
                decode_action(a[0], a[1], cfg.sim.vehicle.delta_max);
            const StepResult sr = env.step(cmd);
            rec.speeds.push_back(env.ego().speed);
            rec.positions.push_back(env.ego().position);
            if (sr.collision) rec.collision_speeds.push_back(env.ego().speed);
            ++rec.steps;
            if (sr.status.terminated || sr.truncated) {
                rec.reached_goal = sr.status.cause == TerminationCause::route_complete;
                break;
            }
        }
        local.push_back(std::move(rec));
    }

    const Metrics m = episode_metrics(local);
    if (records) *records = std::move(local);
    return m;
}

Metrics evaluate_agent(const RunConfig& cfg, const SacAgent& agent, int episodes,
                       std::vector<EpisodeRecord>* records) {
    return evaluate_policy(
        cfg, [&agent](const ObservationVec& obs) { return agent.act_greedy(obs); }, episodes,
        records);
}

Metrics run_evaluation(const std::string& checkpoint_path, int episodes,
                       const std::string& out_json, const RunConfig* config_override) {
    const LoadedCheckpoint ckpt = load_checkpoint(checkpoint_path);
    json meta = json::parse(ckpt.meta_json);
    if (!meta.contains("config"))
        throw std::runtime_error("checkpoint has no embedded config: " + checkpoint_path);
    RunConfig cfg = config_override ? *config_override
                                    : config_from_json(meta["config"].dump());
    cfg = finalize(cfg);

    SacAgent agent(cfg.agent);
    try {
        agent.load_sections(ckpt.sections);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("checkpoint/config dimension mismatch: ") +
                                 e.what());
    }

    if (episodes <= 0) episodes = cfg.eval_episodes;
    const Metrics m = evaluate_agent(cfg, agent, episodes);
    if (!out_json.empty()) write_metrics_files(m, out_json, "");
    return m;
}

ProfileResult run_profile(const RunConfig& raw_cfg, int steps) {
    RunConfig cfg = finalize(raw_cfg);
    if (steps <= 0) throw std::runtime_error("profile needs a positive step count");

    WaypointGraph world = build_world(cfg);
    SimEnv env(world, cfg.sim);
    BevEncoder bev_enc(cfg.sim.bev_size, cfg.embed_dim, cfg.projection_seed);
    TextEncoder text_enc(cfg.embed_dim, cfg.projection_seed, cfg.text_buckets);
    PromptService prompts(text_enc, cfg.novelty, cfg.prompt_rules);
    SacAgent agent(cfg.agent);
    WorldModel wm(cfg.embed_dim, 2, cfg.wm_hidden, cfg.master_seed);

    std::map<std::string, double> total_ms = {{"encode", 0}, {"novelty", 0}, {"reward", 0},
                                              {"policy", 0}, {"world_model", 0}, {"sim", 0}};

    long episode_idx = 0;
    env.reset(derive_seed(cfg.master_seed, "episode", episode_idx));

    for (int step = 0; step < steps; ++step) {
        auto t0 = clock_type::now();
        const BevGrid grid = env.bev();
        ObservationVec obs;
        obs.bev = grid;
        const std::vector<double> ego = env.ego_state_vec();
        obs.ego = {ego[0], ego[1], ego[2]};
        obs.waypoints = env.waypoints();
        const Embedding v = bev_enc.encode(grid);
        total_ms["encode"] += ms_since(t0);

        const SceneSummary scene = env.summary();
        t0 = clock_type::now();
        prompts.on_step(v, scene, step);
        const PromptBundle& bundle = prompts.active();
        total_ms["novelty"] += ms_since(t0);

        t0 = clock_type::now();
        (void)aicr(v, bundle.u_ideal, bundle.u_present, cfg.weights);
        (void)hvfr(kinematic_factors(env.ego().speed, env.lateral_deviation_m(),
                                     env.heading_error_rad(), env.ego().yaw_rate, cfg.targets));
        total_ms["reward"] += ms_since(t0);

        t0 = clock_type::now();
        const std::array<double, 2> action =
            agent.act(obs, derive_seed(cfg.master_seed, "action", step));
        total_ms["policy"] += ms_since(t0);

        t0 = clock_type::now();
        (void)pcfm(v, action.data(), bundle.u_ideal, wm);
        total_ms["world_model"] += ms_since(t0);

        t0 = clock_type::now();
        const StepResult sr =
            env.step(decode_action(action[0], action[1], cfg.sim.vehicle.delta_max));
        total_ms["sim"] += ms_since(t0);

        if (sr.status.terminated || sr.truncated) {
            ++episode_idx;
            env.reset(derive_seed(cfg.master_seed, "episode", episode_idx));
        }
    }
    prompts.flush();

    std::map<std::string, double> component_ms;
    for (const auto& [name, total] : total_ms)
        component_ms[name] = total / static_cast<double>(steps);
    component_ms["dynamic"] = prompts.mean_generation_ms();

    ProfileResult out;
    out.steps = steps;
    out.triggers = prompts.trigger_count();
    const double rate = static_cast<double>(out.triggers) / static_cast<double>(steps);
    out.profile = latency_profile(component_ms, rate);

    json j;
    j["component_ms"] = out.profile.component_ms;
    j["trigger_rate"] = out.profile.trigger_rate;
    j["base_total_ms"] = out.profile.base_total_ms;
    j["amortized_total_ms"] = out.profile.amortized_total_ms;
    j["steps"] = out.steps;
    j["triggers"] = out.triggers;
    j["async_prompts"] = cfg.novelty.async_prompts;
    out.json = j.dump(2);
    return out;
}

}  // namespace semdrive
