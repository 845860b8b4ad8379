#pragma once

#include <array>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "semdrive/embedding.hpp"
#include "semdrive/sim_world.hpp"

namespace semdrive {

// ---------------------------------------------------------------------------
// Stores
// ---------------------------------------------------------------------------

// FIFO of recent embeddings; novelty is measured against this set.
struct NoveltyBuffer {
    std::size_t capacity = 128;
    std::deque<Embedding> entries;
};

struct PromptBundle {
    std::string present_prompt;
    std::string ideal_prompt;
    std::array<std::string, 3> cot_explanation;  // overview, risk, guidance
    Embedding u_present;
    Embedding u_ideal;
    long trigger_step = 0;
};

// FIFO of generated bundles; the newest entry is the active one.
struct PromptCache {
    std::size_t capacity = 8;
    std::deque<PromptBundle> entries;
};

// ---------------------------------------------------------------------------
// Core operations
// ---------------------------------------------------------------------------

// Minimum L2 distance from v to any buffer entry; +inf on an empty buffer so
// the first step always counts as novel.
double novelty_score(const Embedding& v, const NoveltyBuffer& buffer);

// Append v; evict the oldest entry when over capacity.
void update_buffer(NoveltyBuffer& buffer, const Embedding& v);

// Nearest-rank quantile: sort ascending, take index ceil(q*n) - 1.
double calibrate_threshold(std::vector<double> warmup_scores, double quantile);

struct PromptRules {
    double lead_gap_threshold_m = 8.0;
    double deviation_threshold_m = 1.5;
    double target_speed_mps = 5.5;
    double overspeed_margin_mps = 2.0;
};

struct PromptStrings {
    std::string present;
    std::string ideal;
    std::array<std::string, 3> cot;
};

// First matching rule wins: close lead vehicle, lane departure, over-speed,
// then the clear-road default. Pure function of the scene summary.
PromptStrings generate_prompts(const SceneSummary& scene, const PromptRules& rules = {});

struct TriggerResult {
    bool triggered = false;
    double score = 0.0;
};

// Single novelty decision: on score > threshold, generate + encode a bundle,
// push it into the cache, and insert v into the buffer; otherwise reuse the
// newest cached bundle untouched. Ties do not trigger.
TriggerResult maybe_trigger(const Embedding& v, NoveltyBuffer& buffer, double threshold,
                            const SceneSummary& scene, PromptCache& cache,
                            const TextEncoder& encoder, long step,
                            const PromptRules& rules = {});

// Bundle as a JSON object with exactly the keys cot_explanation,
// present_prompt, ideal_prompt.
std::string bundle_json(const PromptBundle& bundle);
// One prompts-log line: {"trigger_step": n, "bundle": {...}}.
std::string prompt_jsonl_line(const PromptBundle& bundle);

// ---------------------------------------------------------------------------
// Stepping-loop service
// ---------------------------------------------------------------------------

struct NoveltyConfig {
    std::size_t buffer_capacity = 128;
    std::size_t cache_capacity = 8;
    double quantile = 0.95;
    int warmup_steps = 1000;
    double initial_threshold = 0.0;  // used until calibration completes
    // keep inserting after warm-up so scored distances stay comparable to the
    // calibration regime; off restricts post-warm-up growth to triggers
    bool insert_every_step = true;
    bool async_prompts = false;
    double synthetic_delay_ms = 0.0;  // simulated generation latency (async mode)
};

// Owns buffer, cache, threshold calibration, and (optionally) a worker thread
// for asynchronous prompt generation. During warm-up the buffer is filled
// every step and finite novelty scores are collected; the threshold is set to
// their configured quantile once warm-up ends. In async mode a trigger
// inserts v immediately but the generated bundle only becomes active at the
// first step boundary after generation completes; the bootstrap bundle is
// always generated synchronously so an active bundle exists from step 0.
class PromptService {
public:
    PromptService(const TextEncoder& encoder, NoveltyConfig config, PromptRules rules = {});
    ~PromptService();

    PromptService(const PromptService&) = delete;
    PromptService& operator=(const PromptService&) = delete;

    struct StepOutcome {
        bool triggered = false;
        double score = 0.0;
        double threshold = 0.0;
        bool calibrated = false;
    };

    StepOutcome on_step(const Embedding& v, const SceneSummary& scene, long step);

    const PromptBundle& active() const;
    bool calibrated() const { return calibrated_; }
    double threshold() const { return threshold_; }
    const NoveltyBuffer& buffer() const { return buffer_; }
    const PromptCache& cache() const { return cache_; }
    // every bundle in arrival order (the prompts log)
    const std::vector<PromptBundle>& bundle_log() const { return bundle_log_; }
    long trigger_count() const { return trigger_count_; }
    // mean wall-clock cost of one bundle generation, synthetic delay included
    double mean_generation_ms() const;

    // async mode: wait for in-flight generations and apply them
    void flush();

private:
    struct Job {
        SceneSummary scene;
        long step;
    };

    void push_bundle(PromptBundle bundle);
    PromptBundle make_bundle(const SceneSummary& scene, long step) const;
    void drain_ready();
    void worker_loop();

    const TextEncoder& encoder_;
    NoveltyConfig config_;
    PromptRules rules_;
    NoveltyBuffer buffer_;
    PromptCache cache_;
    std::vector<double> warmup_scores_;
    std::vector<PromptBundle> bundle_log_;
    double threshold_ = 0.0;
    bool calibrated_ = false;
    long trigger_count_ = 0;
    mutable std::mutex gen_mutex_;
    mutable double gen_ms_total_ = 0.0;
    mutable long gen_count_ = 0;

    // async machinery
    std::thread worker_;
    std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<Job> jobs_;
    std::vector<PromptBundle> ready_;
    int in_flight_ = 0;
    bool stop_ = false;
};

}  // namespace semdrive
