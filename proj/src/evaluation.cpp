#include "semdrive/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "json.hpp"

namespace semdrive {

Metrics episode_metrics(const std::vector<EpisodeRecord>& episodes) {
    if (episodes.empty()) throw std::invalid_argument("episode_metrics: no episodes");
    Metrics m;
    double collision_speed_sum = 0.0;
    std::size_t collision_events = 0;
    for (const auto& ep : episodes) {
        double speed_sum = 0.0;
        for (double v : ep.speeds) speed_sum += v;
        m.avg_speed += ep.speeds.empty() ? 0.0 : speed_sum / static_cast<double>(ep.speeds.size());
        m.total_distance += polyline_length(ep.positions);
        m.route_completion += ep.reached_goal ? 1.0 : 0.0;
        m.success_rate += (ep.reached_goal && ep.collision_speeds.empty()) ? 1.0 : 0.0;
        for (double cs : ep.collision_speeds) {
            if (cs < 0.0) throw std::invalid_argument("episode_metrics: negative collision speed");
            collision_speed_sum += cs;
            ++collision_events;
        }
    }
    const double n = static_cast<double>(episodes.size());
    m.avg_speed /= n;
    m.total_distance /= n;
    m.route_completion /= n;
    m.success_rate /= n;
    m.collision_speed = collision_events == 0 ? 0.0 : collision_speed_sum / collision_events;
    return m;
}

namespace {

// right-continuous ECDF value at t: #{x_i <= t} / n
double ecdf(const std::vector<double>& sorted, double t) {
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), t);
    return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
}

}  // namespace

double wasserstein1(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.empty() || y.empty()) throw std::invalid_argument("wasserstein1: empty sample");
    std::vector<double> xs(x), ys(y);
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    if (xs.size() == ys.size()) {
        double total = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) total += std::abs(xs[i] - ys[i]);
        return total / static_cast<double>(xs.size());
    }
    std::vector<double> merged;
    merged.reserve(xs.size() + ys.size());
    merged.insert(merged.end(), xs.begin(), xs.end());
    merged.insert(merged.end(), ys.begin(), ys.end());
    std::sort(merged.begin(), merged.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < merged.size(); ++i) {
        const double width = merged[i + 1] - merged[i];
        if (width == 0.0) continue;
        total += std::abs(ecdf(xs, merged[i]) - ecdf(ys, merged[i])) * width;
    }
    return total;
}

double ks_stat(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.empty() || y.empty()) throw std::invalid_argument("ks_stat: empty sample");
    std::vector<double> xs(x), ys(y);
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    double sup = 0.0;
    for (const auto& sample : {xs, ys})
        for (double t : sample) sup = std::max(sup, std::abs(ecdf(xs, t) - ecdf(ys, t)));
    return sup;
}

LatencyProfile latency_profile(const std::map<std::string, double>& component_ms,
                               double trigger_rate) {
    if (trigger_rate < 0.0 || trigger_rate > 1.0)
        throw std::invalid_argument("latency_profile: rate outside [0,1]");
    LatencyProfile p;
    p.component_ms = component_ms;
    p.trigger_rate = trigger_rate;
    double dynamic_ms = 0.0;
    for (const auto& [name, ms] : component_ms) {
        if (ms < 0.0) throw std::invalid_argument("latency_profile: negative component mean");
        if (name == "dynamic")
            dynamic_ms = ms;
        else
            p.base_total_ms += ms;
    }
    p.amortized_total_ms = p.base_total_ms + dynamic_ms * trigger_rate;
    return p;
}

SampleStats sample_stats(const std::vector<double>& xs) {
    if (xs.empty()) throw std::invalid_argument("sample_stats: empty sample");
    SampleStats s;
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    double var = 0.0;
    std::size_t pos = 0, neg = 0, zero = 0;
    for (double x : xs) {
        var += (x - s.mean) * (x - s.mean);
        if (x > 0.0)
            ++pos;
        else if (x < 0.0)
            ++neg;
        else
            ++zero;
    }
    s.stddev = std::sqrt(var / static_cast<double>(xs.size()));
    const double scale = 100.0 / static_cast<double>(xs.size());
    s.pct_positive = scale * static_cast<double>(pos);
    s.pct_negative = scale * static_cast<double>(neg);
    s.pct_zero = scale * static_cast<double>(zero);
    return s;
}

DistributionShiftReport reward_distribution_report(const std::vector<double>& rewards_a,
                                                   const std::vector<double>& rewards_b) {
    DistributionShiftReport r;
    r.a = sample_stats(rewards_a);
    r.b = sample_stats(rewards_b);
    r.emd = wasserstein1(rewards_a, rewards_b);
    r.ks = ks_stat(rewards_a, rewards_b);
    return r;
}

std::string metrics_json(const Metrics& m) {
    nlohmann::json j;
    j["AS"] = m.avg_speed;
    j["RC"] = m.route_completion;
    j["TD"] = m.total_distance;
    j["CS"] = m.collision_speed;
    j["SR"] = m.success_rate;
    return j.dump();
}

std::string metrics_csv_row(const Metrics& m) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g", m.avg_speed,
                  m.route_completion, m.total_distance, m.collision_speed, m.success_rate);
    return buf;
}

namespace {
nlohmann::json stats_json(const SampleStats& s) {
    return {{"mean", s.mean},
            {"std", s.stddev},
            {"pct_positive", s.pct_positive},
            {"pct_negative", s.pct_negative},
            {"pct_zero", s.pct_zero}};
}
}  // namespace

std::string distribution_shift_json(const DistributionShiftReport& r) {
    nlohmann::json j;
    j["a"] = stats_json(r.a);
    j["b"] = stats_json(r.b);
    j["emd"] = r.emd;
    j["ks"] = r.ks;
    return j.dump();
}

}  // namespace semdrive
