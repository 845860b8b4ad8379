#include <array>
#include <cmath>
#include <cstdio>
#include <vector>

#include "doctest.h"
#include "semdrive/embedding.hpp"
#include "semdrive/rng.hpp"
#include "semdrive/world_model.hpp"

using namespace semdrive;

namespace {

Embedding random_unit(Rng& rng, int dim) {
    Embedding v(dim);
    for (auto& x : v) x = rng.gaussian();
    l2_normalize(v);
    return v;
}

void zero_params(WorldModel& m) {
    for (auto& p : m.params())
        for (std::size_t i = 0; i < p.count; ++i) p.value[i] = 0.0;
}

// v' = normalize(0.9 v + 0.1 [a1, a2, 0, ...]): simple contractive dynamics
Embedding linear_dynamics(const Embedding& v, const std::array<double, 2>& a) {
    Embedding next = v;
    for (auto& x : next) x *= 0.9;
    next[0] += 0.1 * a[0];
    next[1] += 0.1 * a[1];
    l2_normalize(next);
    return next;
}

WorldBatch sample_linear_batch(Rng& rng, int n, int dim) {
    WorldBatch batch;
    for (int i = 0; i < n; ++i) {
        Embedding v = random_unit(rng, dim);
        const std::array<double, 2> a{rng.uniform(-1, 1), rng.uniform(-1, 1)};
        batch.v_next.push_back(linear_dynamics(v, a));
        batch.v.push_back(std::move(v));
        batch.a.push_back(a);
    }
    return batch;
}

}  // namespace

TEST_CASE("zeroed network with a pinned output bias is a constant map") {
    const int k = 8;
    WorldModel m(k, 2, 16, 1);
    zero_params(m);
    auto params = m.params();
    ParamRef& bias = params.back();
    REQUIRE(bias.count == static_cast<std::size_t>(k));
    Embedding b(k);
    Rng rng(61);
    for (auto& x : b) x = rng.uniform(-1, 1);
    for (int i = 0; i < k; ++i) bias.value[i] = b[i];
    Embedding expect = b;
    l2_normalize(expect);

    for (int trial = 0; trial < 10; ++trial) {
        const Embedding v = random_unit(rng, k);
        const double a[2] = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const Embedding out = m.predict(v, a);
        REQUIRE(out.size() == static_cast<std::size_t>(k));
        for (int i = 0; i < k; ++i) CHECK(out[i] == doctest::Approx(expect[i]).epsilon(1e-12));
        // raw output is the bias itself
        const Embedding raw = m.predict_raw(v, a);
        for (int i = 0; i < k; ++i) CHECK(raw[i] == doctest::Approx(b[i]).epsilon(1e-12));
    }
}

TEST_CASE("predict is deterministic and unit-norm") {
    WorldModel m(12, 2, 24, 2);
    Rng rng(62);
    for (int i = 0; i < 20; ++i) {
        const Embedding v = random_unit(rng, 12);
        const double a[2] = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const Embedding p1 = m.predict(v, a);
        const Embedding p2 = m.predict(v, a);
        CHECK(p1 == p2);
        CHECK(l2_norm(p1) == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("pre-normalization output responds smoothly to input perturbation") {
    WorldModel m(10, 2, 20, 3);
    Rng rng(63);
    const Embedding v = random_unit(rng, 10);
    const double a[2] = {0.2, -0.6};
    const Embedding base = m.predict_raw(v, a);
    // measure an empirical Lipschitz ratio at eps, then confirm it holds at eps/10
    const double eps = 1e-4;
    Embedding v2 = v;
    v2[3] += eps;
    const Embedding out2 = m.predict_raw(v2, a);
    double d = 0;
    for (std::size_t i = 0; i < base.size(); ++i) d += (out2[i] - base[i]) * (out2[i] - base[i]);
    const double ratio = std::sqrt(d) / eps;

    Embedding v3 = v;
    v3[3] += eps / 10;
    const Embedding out3 = m.predict_raw(v3, a);
    double d3 = 0;
    for (std::size_t i = 0; i < base.size(); ++i) d3 += (out3[i] - base[i]) * (out3[i] - base[i]);
    CHECK(std::sqrt(d3) <= 2.0 * ratio * (eps / 10) + 1e-12);
}

TEST_CASE("zero-residual batch: loss 0, gradient exactly 0, parameters untouched") {
    const int k = 8;
    WorldModel m(k, 2, 16, 4);
    Rng rng(64);
    WorldBatch batch;
    for (int i = 0; i < 6; ++i) {
        Embedding v = random_unit(rng, k);
        const std::array<double, 2> a{rng.uniform(-1, 1), rng.uniform(-1, 1)};
        batch.v_next.push_back(m.predict_raw(v, a.data()));  // target == current output
        batch.v.push_back(std::move(v));
        batch.a.push_back(a);
    }
    const std::vector<double> before = flatten_params(m.params());
    CHECK(m.batch_loss(batch) == doctest::Approx(0.0).epsilon(1e-24));
    const double loss = m.train_step(batch, 1e-3);
    CHECK(loss == doctest::Approx(0.0).epsilon(1e-24));
    // Adam with an exactly-zero gradient moves nothing
    const std::vector<double> after = flatten_params(m.params());
    CHECK(before == after);
    CHECK(m.update_count() == 1);
}

TEST_CASE("analytic gradient matches central finite differences") {
    const int k = 6;
    WorldModel m(k, 2, 10, 5);
    Rng rng(65);
    const WorldBatch batch = sample_linear_batch(rng, 5, k);

    // harvest analytic grads: train_step accumulates them before the update,
    // so run it on a copy at the same parameters
    WorldModel probe = m;
    probe.train_step(batch, 1e-12);  // negligible parameter motion, grads intact
    std::vector<double> analytic;
    for (auto& p : probe.params())
        for (std::size_t i = 0; i < p.count; ++i) analytic.push_back(p.grad[i]);

    auto params = m.params();
    const double h = 1e-5;
    std::size_t idx = 0;
    double worst = 0.0;
    for (auto& p : params) {
        for (std::size_t i = 0; i < p.count; ++i, ++idx) {
            const double saved = p.value[i];
            p.value[i] = saved + h;
            const double lp = m.batch_loss(batch);
            p.value[i] = saved - h;
            const double lm = m.batch_loss(batch);
            p.value[i] = saved;
            const double fd = (lp - lm) / (2 * h);
            const double denom = std::max({std::abs(fd), std::abs(analytic[idx]), 1e-8});
            worst = std::max(worst, std::abs(fd - analytic[idx]) / denom);
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("training on contractive linear dynamics cuts the loss by 10x") {
    const int k = 16;
    WorldModel m(k, 2, 128, 6);
    Rng rng(66);

    std::vector<double> losses;
    for (int step = 0; step < 2000; ++step)
        losses.push_back(m.train_step(sample_linear_batch(rng, 32, k), 1e-3));

    auto window_mean = [&](int lo, int hi) {
        double s = 0;
        for (int i = lo; i < hi; ++i) s += losses[i];
        return s / (hi - lo);
    };
    const double first = window_mean(0, 100);
    const double last = window_mean(1900, 2000);
    CHECK(last < 0.1 * first);

    // monotone trend over 100-step windows: overall downward drift, allowing
    // local noise (each window no worse than 1.5x the best seen so far)
    double best = first;
    for (int w = 1; w < 20; ++w) {
        const double mean = window_mean(100 * w, 100 * (w + 1));
        CHECK(mean <= 1.5 * best + 1e-9);
        best = std::min(best, mean);
    }
}

TEST_CASE("training is reproducible from (seed, batch sequence, lr)") {
    const int k = 8;
    WorldModel a(k, 2, 16, 7);
    WorldModel b(k, 2, 16, 7);
    Rng rng_a(67), rng_b(67);
    for (int step = 0; step < 20; ++step) {
        const double la = a.train_step(sample_linear_batch(rng_a, 8, k), 1e-3);
        const double lb = b.train_step(sample_linear_batch(rng_b, 8, k), 1e-3);
        CHECK(la == lb);
    }
    CHECK(flatten_params(a.params()) == flatten_params(b.params()));

    WorldModel c(k, 2, 16, 8);  // different seed, different trajectory
    Rng rng_c(67);
    const double lc = c.train_step(sample_linear_batch(rng_c, 8, k), 1e-3);
    CHECK(lc != doctest::Approx(0.0).epsilon(0));  // trivially nonzero
    CHECK(flatten_params(c.params()) != flatten_params(a.params()));
}

TEST_CASE("save/load round trip preserves parameters and dims") {
    WorldModel m(8, 2, 16, 9);
    Rng rng(68);
    for (int i = 0; i < 5; ++i) m.train_step(sample_linear_batch(rng, 4, 8), 1e-3);
    const std::string path = "/tmp/semdrive_wm_roundtrip.bin";
    m.save(path);
    WorldModel loaded = WorldModel::load(path);
    CHECK(loaded.embed_dim() == 8);
    CHECK(loaded.action_dim() == 2);
    CHECK(loaded.hidden_dim() == 16);
    CHECK(flatten_params(loaded.params()) == flatten_params(m.params()));

    const Embedding v = random_unit(rng, 8);
    const double a[2] = {0.1, 0.2};
    CHECK(loaded.predict(v, a) == m.predict(v, a));
    std::remove(path.c_str());
}
