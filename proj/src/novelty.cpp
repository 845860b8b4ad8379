#include "semdrive/novelty.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "json.hpp"

namespace semdrive {

double novelty_score(const Embedding& v, const NoveltyBuffer& buffer) {
    if (buffer.entries.empty()) return std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    for (const auto& entry : buffer.entries) {
        if (entry.size() != v.size())
            throw std::invalid_argument("novelty_score: dimension mismatch");
        double d2 = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double diff = v[i] - entry[i];
            d2 += diff * diff;
        }
        best = std::min(best, d2);
    }
    return std::sqrt(best);
}

void update_buffer(NoveltyBuffer& buffer, const Embedding& v) {
    buffer.entries.push_back(v);
    while (buffer.entries.size() > buffer.capacity) buffer.entries.pop_front();
}

double calibrate_threshold(std::vector<double> warmup_scores, double quantile) {
    if (warmup_scores.empty())
        throw std::invalid_argument("calibrate_threshold: empty score set");
    if (quantile <= 0.0 || quantile >= 1.0)
        throw std::invalid_argument("calibrate_threshold: quantile must be in (0,1)");
    std::sort(warmup_scores.begin(), warmup_scores.end());
    const std::size_t n = warmup_scores.size();
    std::size_t rank = static_cast<std::size_t>(std::ceil(quantile * static_cast<double>(n)));
    if (rank == 0) rank = 1;
    return warmup_scores[rank - 1];
}

PromptStrings generate_prompts(const SceneSummary& scene, const PromptRules& rules) {
    PromptStrings out;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "Scene Overview: ego at %.1f m/s, %.2f m from the lane center.",
                  scene.speed_mps, scene.lateral_deviation_m);
    out.cot[0] = buf;
    if (scene.lead_vehicle_gap_m < rules.lead_gap_threshold_m) {
        out.present = "a vehicle is dangerously close ahead";
        out.ideal = "a safe following gap is maintained";
        std::snprintf(buf, sizeof(buf),
                      "Risk Assessment: lead vehicle only %.1f m ahead, collision likely.",
                      scene.lead_vehicle_gap_m);
        out.cot[1] = buf;
        out.cot[2] = "Guidance Summary: brake and restore a safe following gap.";
    } else if (std::abs(scene.lateral_deviation_m) > rules.deviation_threshold_m) {
        out.present = "the car is drifting out of its lane";
        out.ideal = "the car stays centered in its lane";
        std::snprintf(buf, sizeof(buf),
                      "Risk Assessment: lateral deviation %.2f m exceeds the safe band.",
                      scene.lateral_deviation_m);
        out.cot[1] = buf;
        out.cot[2] = "Guidance Summary: steer back toward the lane center.";
    } else if (scene.speed_mps > rules.target_speed_mps + rules.overspeed_margin_mps) {
        out.present = "the car is travelling too fast";
        out.ideal = "the car slows to a safe speed";
        std::snprintf(buf, sizeof(buf),
                      "Risk Assessment: speed %.1f m/s is above the safe target.",
                      scene.speed_mps);
        out.cot[1] = buf;
        out.cot[2] = "Guidance Summary: ease off the throttle to the target speed.";
    } else {
        out.present = "the road ahead is clear";
        out.ideal = "the car continues safely in its lane";
        out.cot[1] = "Risk Assessment: no nearby hazards detected.";
        out.cot[2] = "Guidance Summary: hold the lane at the target speed.";
    }
    return out;
}

namespace {

PromptBundle build_bundle(const SceneSummary& scene, long step, const TextEncoder& encoder,
                          const PromptRules& rules) {
    const PromptStrings strings = generate_prompts(scene, rules);
    PromptBundle bundle;
    bundle.present_prompt = strings.present;
    bundle.ideal_prompt = strings.ideal;
    bundle.cot_explanation = strings.cot;
    bundle.u_present = encoder.encode(strings.present);
    bundle.u_ideal = encoder.encode(strings.ideal);
    bundle.trigger_step = step;
    return bundle;
}

void push_cache(PromptCache& cache, PromptBundle bundle) {
    cache.entries.push_back(std::move(bundle));
    while (cache.entries.size() > cache.capacity) cache.entries.pop_front();
}

}  // namespace

TriggerResult maybe_trigger(const Embedding& v, NoveltyBuffer& buffer, double threshold,
                            const SceneSummary& scene, PromptCache& cache,
                            const TextEncoder& encoder, long step, const PromptRules& rules) {
    TriggerResult result;
    result.score = novelty_score(v, buffer);
    if (result.score > threshold) {
        result.triggered = true;
        update_buffer(buffer, v);
        push_cache(cache, build_bundle(scene, step, encoder, rules));
    } else if (cache.entries.empty()) {
        throw std::logic_error("maybe_trigger: no cached bundle to reuse");
    }
    return result;
}

std::string bundle_json(const PromptBundle& bundle) {
    nlohmann::json j;
    j["cot_explanation"] = bundle.cot_explanation;
    j["present_prompt"] = bundle.present_prompt;
    j["ideal_prompt"] = bundle.ideal_prompt;
    return j.dump();
}

std::string prompt_jsonl_line(const PromptBundle& bundle) {
    nlohmann::json j;
    j["trigger_step"] = bundle.trigger_step;
    j["bundle"] = nlohmann::json::parse(bundle_json(bundle));
    return j.dump();
}

// ---------------------------------------------------------------------------
// PromptService
// ---------------------------------------------------------------------------

PromptService::PromptService(const TextEncoder& encoder, NoveltyConfig config, PromptRules rules)
    : encoder_(encoder), config_(config), rules_(rules) {
    buffer_.capacity = config_.buffer_capacity;
    cache_.capacity = config_.cache_capacity;
    threshold_ = config_.initial_threshold;
    if (config_.async_prompts) worker_ = std::thread([this] { worker_loop(); });
}

PromptService::~PromptService() {
    if (worker_.joinable()) {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            stop_ = true;
        }
        cv_.notify_all();
        worker_.join();
    }
}

PromptBundle PromptService::make_bundle(const SceneSummary& scene, long step) const {
    const auto t0 = std::chrono::steady_clock::now();
    PromptBundle bundle = build_bundle(scene, step, encoder_, rules_);
    const auto t1 = std::chrono::steady_clock::now();
    std::lock_guard<std::mutex> lock(gen_mutex_);
    gen_ms_total_ += std::chrono::duration<double, std::milli>(t1 - t0).count();
    ++gen_count_;
    return bundle;
}

double PromptService::mean_generation_ms() const {
    std::lock_guard<std::mutex> lock(gen_mutex_);
    if (gen_count_ == 0) return 0.0;
    // the synthetic delay is part of the per-generation cost being modeled
    return gen_ms_total_ / static_cast<double>(gen_count_) + config_.synthetic_delay_ms;
}

void PromptService::push_bundle(PromptBundle bundle) {
    bundle_log_.push_back(bundle);
    push_cache(cache_, std::move(bundle));
}

void PromptService::drain_ready() {
    std::vector<PromptBundle> arrived;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        arrived.swap(ready_);
    }
    for (auto& bundle : arrived) push_bundle(std::move(bundle));
}

void PromptService::worker_loop() {
    for (;;) {
        Job job;
        {
            std::unique_lock<std::mutex> lock(mutex_);
            cv_.wait(lock, [this] { return stop_ || !jobs_.empty(); });
            if (stop_ && jobs_.empty()) return;
            job = jobs_.front();
            jobs_.pop_front();
        }
        if (config_.synthetic_delay_ms > 0.0)
            std::this_thread::sleep_for(
                std::chrono::duration<double, std::milli>(config_.synthetic_delay_ms));
        PromptBundle bundle = make_bundle(job.scene, job.step);
        {
            std::lock_guard<std::mutex> lock(mutex_);
            ready_.push_back(std::move(bundle));
            --in_flight_;
        }
        cv_.notify_all();
    }
}

PromptService::StepOutcome PromptService::on_step(const Embedding& v, const SceneSummary& scene,
                                                  long step) {
    if (config_.async_prompts) drain_ready();

    StepOutcome outcome;
    outcome.score = novelty_score(v, buffer_);

    const bool warming = step < config_.warmup_steps;
    if (warming) {
        if (std::isfinite(outcome.score)) warmup_scores_.push_back(outcome.score);
        if (cache_.entries.empty()) {
            // bootstrap: an active bundle must exist from the very first step
            outcome.triggered = true;
            push_bundle(make_bundle(scene, step));
        }
        update_buffer(buffer_, v);
        if (step == config_.warmup_steps - 1 && !warmup_scores_.empty()) {
            threshold_ = calibrate_threshold(warmup_scores_, config_.quantile);
            calibrated_ = true;
        }
    } else {
        if (outcome.score > threshold_) {
            outcome.triggered = true;
            update_buffer(buffer_, v);
            if (!config_.async_prompts || cache_.entries.empty()) {
                push_bundle(make_bundle(scene, step));
            } else {
                std::lock_guard<std::mutex> lock(mutex_);
                jobs_.push_back({scene, step});
                ++in_flight_;
                cv_.notify_all();
            }
        } else if (config_.insert_every_step) {
            update_buffer(buffer_, v);
        }
    }
    if (outcome.triggered) ++trigger_count_;
    outcome.threshold = threshold_;
    outcome.calibrated = calibrated_;
    return outcome;
}

const PromptBundle& PromptService::active() const {
    if (cache_.entries.empty()) throw std::logic_error("PromptService: no active bundle");
    return cache_.entries.back();
}

void PromptService::flush() {
    if (!config_.async_prompts) return;
    {
        std::unique_lock<std::mutex> lock(mutex_);
        cv_.wait(lock, [this] { return in_flight_ == 0 && jobs_.empty(); });
    }
    drain_ready();
}

}  // namespace semdrive
