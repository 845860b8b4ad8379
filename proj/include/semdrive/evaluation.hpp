#pragma once

#include <map>
#include <string>
#include <vector>

#include "semdrive/geom.hpp"

namespace semdrive {

struct EpisodeRecord {
    std::vector<double> speeds;            // m/s, one per step
    std::vector<Vec2> positions;           // one per step
    std::vector<double> collision_speeds;  // speed at each collision event
    bool reached_goal = false;
    int steps = 0;
};

struct Metrics {
    double avg_speed = 0.0;        // mean over episodes of per-episode mean speed
    double route_completion = 0.0; // fraction reaching the goal
    double total_distance = 0.0;   // mean cumulative path length, m
    double collision_speed = 0.0;  // mean over all collision events, 0 if none
    double success_rate = 0.0;     // fraction reaching the goal with no collision
};

Metrics episode_metrics(const std::vector<EpisodeRecord>& episodes);

// Exact 1-D W1: sorted-difference identity for equal sizes, ECDF area otherwise.
double wasserstein1(const std::vector<double>& x, const std::vector<double>& y);

// sup_t |F_x(t) - F_y(t)| over the merged sample points (right-continuous ECDFs).
double ks_stat(const std::vector<double>& x, const std::vector<double>& y);

struct LatencyProfile {
    std::map<std::string, double> component_ms;  // includes the "dynamic" component
    double trigger_rate = 0.0;
    double base_total_ms = 0.0;       // sum of non-dynamic components
    double amortized_total_ms = 0.0;  // base + dynamic * trigger_rate
};

// The "dynamic" key is the once-per-trigger cost; all other keys are paid
// every step.
LatencyProfile latency_profile(const std::map<std::string, double>& component_ms,
                               double trigger_rate);

struct SampleStats {
    double mean = 0.0;
    double stddev = 0.0;        // population convention
    double pct_positive = 0.0;  // strict > 0, percent
    double pct_negative = 0.0;  // strict < 0, percent
    double pct_zero = 0.0;
};

struct DistributionShiftReport {
    SampleStats a;
    SampleStats b;
    double emd = 0.0;  // wasserstein1(a, b)
    double ks = 0.0;
};

SampleStats sample_stats(const std::vector<double>& xs);
DistributionShiftReport reward_distribution_report(const std::vector<double>& rewards_a,
                                                   const std::vector<double>& rewards_b);

std::string metrics_json(const Metrics& m);
std::string metrics_csv_row(const Metrics& m);  // header: AS,RC,TD,CS,SR
std::string distribution_shift_json(const DistributionShiftReport& r);

}  // namespace semdrive
