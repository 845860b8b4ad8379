#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "semdrive/evaluation.hpp"
#include "semdrive/rng.hpp"

using namespace semdrive;

namespace {

// brute-force 1-D W1: area between the two ECDFs integrated over every
// interval of the merged support
double w1_oracle(std::vector<double> x, std::vector<double> y) {
    std::vector<double> grid = x;
    grid.insert(grid.end(), y.begin(), y.end());
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    auto ecdf = [](const std::vector<double>& v, double t) {
        return static_cast<double>(std::upper_bound(v.begin(), v.end(), t) - v.begin()) /
               static_cast<double>(v.size());
    };
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i)
        area += std::abs(ecdf(x, grid[i]) - ecdf(y, grid[i])) * (grid[i + 1] - grid[i]);
    return area;
}

// brute-force KS: double loop over every sample point as the sup candidate
double ks_oracle(std::vector<double> x, std::vector<double> y) {
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    auto ecdf = [](const std::vector<double>& v, double t) {
        return static_cast<double>(std::upper_bound(v.begin(), v.end(), t) - v.begin()) /
               static_cast<double>(v.size());
    };
    double sup = 0.0;
    for (double t : x) sup = std::max(sup, std::abs(ecdf(x, t) - ecdf(y, t)));
    for (double t : y) sup = std::max(sup, std::abs(ecdf(x, t) - ecdf(y, t)));
    return sup;
}

std::vector<double> random_sample(Rng& rng, int n, double lo, double hi) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

}  // namespace

TEST_CASE("episode metrics: single clean episode") {
    EpisodeRecord ep;
    ep.steps = 100;
    ep.reached_goal = true;
    ep.positions.push_back({0, 0});
    for (int i = 1; i <= 100; ++i) {
        ep.speeds.push_back(10.0);
        ep.positions.push_back({i * 1.0, 0.0});  // 1 m per step => 100 m total
    }
    const Metrics m = episode_metrics({ep});
    CHECK(m.avg_speed == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(m.route_completion == 1.0);
    CHECK(m.total_distance == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(m.collision_speed == 0.0);  // no collision events
    CHECK(m.success_rate == 1.0);
}

TEST_CASE("episode metrics: distance follows the polyline, not displacement") {
    EpisodeRecord ep;
    ep.steps = 2;
    ep.speeds = {1.0, 1.0};
    ep.positions = {{0, 0}, {3, 0}, {3, 4}};  // L-path: 3 + 4 = 7
    const Metrics m = episode_metrics({ep});
    CHECK(m.total_distance == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("episode metrics: collision forfeits success but not completion") {
    EpisodeRecord clean;
    clean.steps = 10;
    clean.reached_goal = true;
    clean.speeds.assign(10, 2.0);
    clean.positions.assign(11, {0, 0});

    EpisodeRecord crashed = clean;
    crashed.collision_speeds = {5.0};

    const Metrics m = episode_metrics({clean, crashed});
    CHECK(m.route_completion == 1.0);
    CHECK(m.success_rate == 0.5);
    CHECK(m.collision_speed == doctest::Approx(5.0).epsilon(1e-12));

    // success is completion minus incidents: SR <= RC always
    Rng rng(91);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<EpisodeRecord> eps;
        for (int i = 0; i < 8; ++i) {
            EpisodeRecord e;
            e.steps = 5;
            e.speeds.assign(5, 1.0);
            e.positions.assign(6, {0, 0});
            e.reached_goal = rng.uniform() < 0.6;
            if (rng.uniform() < 0.4) e.collision_speeds.push_back(rng.uniform(0, 10));
            eps.push_back(std::move(e));
        }
        const Metrics mm = episode_metrics(eps);
        CHECK(mm.success_rate <= mm.route_completion + 1e-12);
    }
}

TEST_CASE("wasserstein distance: worked examples") {
    CHECK(wasserstein1({1, 2, 3}, {1, 2, 3}) == 0.0);
    CHECK(wasserstein1({0}, {1}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(wasserstein1({0, 1}, {1, 2}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS(wasserstein1({}, {1.0}));
}

TEST_CASE("kolmogorov-smirnov statistic: worked examples") {
    CHECK(ks_stat({1, 2, 3}, {1, 2, 3}) == 0.0);
    CHECK(ks_stat({0, 0}, {1, 1}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ks_stat({0, 1, 2}, {0, 1, 3}) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK_THROWS(ks_stat({1.0}, {}));
}

TEST_CASE("distance statistics match brute-force oracles on random pairs") {
    Rng rng(92);
    for (int trial = 0; trial < 200; ++trial) {
        const int nx = 1 + static_cast<int>(rng.uniform_index(40));
        const int ny = 1 + static_cast<int>(rng.uniform_index(40));
        const auto x = random_sample(rng, nx, -5, 5);
        const auto y = random_sample(rng, ny, -5, 5);
        CHECK(wasserstein1(x, y) == doctest::Approx(w1_oracle(x, y)).epsilon(1e-12));
        CHECK(ks_stat(x, y) == doctest::Approx(ks_oracle(x, y)).epsilon(1e-12));
    }
}

TEST_CASE("distance statistics: metric properties") {
    Rng rng(93);
    for (int trial = 0; trial < 50; ++trial) {
        const auto x = random_sample(rng, 12, -3, 3);
        const auto y = random_sample(rng, 12, -3, 3);
        const auto z = random_sample(rng, 12, -3, 3);
        // symmetry
        CHECK(wasserstein1(x, y) == doctest::Approx(wasserstein1(y, x)).epsilon(1e-12));
        CHECK(ks_stat(x, y) == doctest::Approx(ks_stat(y, x)).epsilon(1e-12));
        // triangle inequality for W1 (equal sizes: sorted-coupling metric)
        CHECK(wasserstein1(x, z) <= wasserstein1(x, y) + wasserstein1(y, z) + 1e-12);
        // KS is a normalized sup-distance
        CHECK(ks_stat(x, y) >= 0.0);
        CHECK(ks_stat(x, y) <= 1.0);
    }
}

TEST_CASE("latency profile: amortized model") {
    const std::map<std::string, double> components{
        {"embedding", 3.87}, {"novelty", 1.58},   {"reward", 2.97},
        {"world_model", 0.11}, {"policy", 0.53},  {"dynamic", 2975.23},
    };
    const LatencyProfile p = latency_profile(components, 0.01);
    CHECK(p.base_total_ms == doctest::Approx(9.06).epsilon(1e-3));
    CHECK(p.amortized_total_ms == doctest::Approx(9.06 + 29.7523).epsilon(1e-3));
    CHECK(p.trigger_rate == 0.01);

    // a zero trigger rate strips the dynamic cost entirely
    CHECK(latency_profile(components, 0.0).amortized_total_ms ==
          doctest::Approx(9.06).epsilon(1e-9));
    // rate 1 pays it on every step
    CHECK(latency_profile(components, 1.0).amortized_total_ms ==
          doctest::Approx(9.06 + 2975.23).epsilon(1e-9));

    CHECK_THROWS(latency_profile(components, -0.1));
    CHECK_THROWS(latency_profile(components, 1.1));
    CHECK_THROWS(latency_profile({{"embedding", -1.0}, {"dynamic", 0.0}}, 0.5));
}

TEST_CASE("sample statistics and the shift report") {
    const SampleStats sa = sample_stats({0.1, 0.2});
    CHECK(sa.mean == doctest::Approx(0.15).epsilon(1e-12));
    CHECK(sa.pct_positive == 100.0);
    CHECK(sa.pct_negative == 0.0);

    const SampleStats sb = sample_stats({-0.1, 0.3});
    CHECK(sb.pct_positive == 50.0);
    CHECK(sb.pct_negative == 50.0);
    CHECK(sb.mean == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(sb.stddev == doctest::Approx(0.2).epsilon(1e-12));  // population convention

    Rng rng(94);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> xs = random_sample(rng, 20, -1, 1);
        xs[0] = 0.0;
        const SampleStats s = sample_stats(xs);
        CHECK(s.pct_positive + s.pct_negative + s.pct_zero == doctest::Approx(100.0).epsilon(1e-9));
    }

    const DistributionShiftReport same = reward_distribution_report({1, 2, 3}, {1, 2, 3});
    CHECK(same.emd == 0.0);
    CHECK(same.ks == 0.0);

    const DistributionShiftReport r = reward_distribution_report({0.1, 0.2}, {-0.1, 0.3});
    CHECK(r.a.mean == doctest::Approx(0.15).epsilon(1e-12));
    CHECK(r.b.pct_negative == 50.0);
    // composition: the report reuses the two primitive statistics exactly
    CHECK(r.emd == wasserstein1({0.1, 0.2}, {-0.1, 0.3}));
    CHECK(r.ks == ks_stat({0.1, 0.2}, {-0.1, 0.3}));
}

TEST_CASE("JSON serializations carry the full field sets") {
    Metrics m;
    m.avg_speed = 4.25;
    m.route_completion = 0.8;
    m.total_distance = 96.5;
    m.collision_speed = 1.5;
    m.success_rate = 0.7;
    const auto j = nlohmann::json::parse(metrics_json(m));
    CHECK(j.size() == 5);
    CHECK(j["AS"].get<double>() == doctest::Approx(4.25));
    CHECK(j["RC"].get<double>() == doctest::Approx(0.8));
    CHECK(j["TD"].get<double>() == doctest::Approx(96.5));
    CHECK(j["CS"].get<double>() == doctest::Approx(1.5));
    CHECK(j["SR"].get<double>() == doctest::Approx(0.7));
    CHECK(metrics_csv_row(m).rfind("4.25,", 0) == 0);

    const DistributionShiftReport r = reward_distribution_report({0.1, 0.2}, {-0.1, 0.3});
    const auto js = nlohmann::json::parse(distribution_shift_json(r));
    CHECK(js.size() == 4);
    for (const char* key : {"a", "b"}) {
        REQUIRE(js.contains(key));
        CHECK(js[key].size() == 5);
        CHECK(js[key].contains("mean"));
        CHECK(js[key].contains("std"));
        CHECK(js[key].contains("pct_positive"));
        CHECK(js[key].contains("pct_negative"));
        CHECK(js[key].contains("pct_zero"));
    }
    CHECK(js.contains("emd"));
    CHECK(js.contains("ks"));
}
