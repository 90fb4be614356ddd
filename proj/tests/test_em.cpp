#include <doctest.h>

#include "hetmra/em.hpp"
#include "hetmra/metrics.hpp"
#include "oracles.hpp"

using namespace hmra;

TEST_CASE("EM configuration defaults and validation") {
    EmConfig cfg;
    CHECK(cfg.sigma0_sq == 1.0);
    CHECK(cfg.max_iter == 10000);
    CHECK(cfg.conv_tol_per_K == 1e-5);
    CHECK_NOTHROW(cfg.validate());
    auto bad = cfg;
    bad.sigma = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.sigma0_sq = -1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.conv_tol_per_K = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.max_iter = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("responsibilities limits") {
    const auto x = generate_signals(2, 8, 1);
    const auto r = responsibilities(x[0], x, 0.01);
    CHECK(r(0, 0) == doctest::Approx(1.0));

    const auto u = responsibilities(RealVector(5, 0.0), SignalSet(3, 5), 1.0);
    for (double v : u.values) CHECK(v == doctest::Approx(1.0 / 15.0));

    CHECK_THROWS_AS((void)responsibilities(x[0], x, 0.0), std::invalid_argument);
    CHECK_THROWS_AS((void)responsibilities(RealVector(7, 0.0), x, 1.0), std::invalid_argument);
}

TEST_CASE("responsibilities match brute force and normalize") {
    const auto x = generate_signals(3, 7, 2);
    GroundTruth t{x, MixingWeights::uniform(3), 0.6};
    const auto obs = generate_observations(t, 40, 3);
    const auto est = generate_signals(3, 7, 4);
    const auto dense = oracle::dense_em_step(obs, est, 0.6, 1.0);
    for (std::size_t j = 0; j < obs.size(); ++j) {
        const auto r = responsibilities(obs[j], est, 0.6);
        double s = 0.0;
        for (std::size_t i = 0; i < r.values.size(); ++i) {
            CHECK(r.values[i] >= 0.0);
            CHECK(std::abs(r.values[i] - dense.resp[j][i]) <= 1e-10);
            s += r.values[i];
        }
        CHECK(std::abs(s - 1.0) <= 1e-12);
    }
}

TEST_CASE("streamed EM step equals the dense update") {
    const auto x = generate_signals(2, 6, 5);
    GroundTruth t{x, MixingWeights::uniform(2), 0.5};
    const auto obs = generate_observations(t, 100, 6);
    const auto est = generate_signals(2, 6, 7);
    const auto dense = oracle::dense_em_step(obs, est, 0.5, 1.0);
    for (std::size_t bs : {1u, 17u, 4096u}) {
        EmConfig cfg;
        cfg.sigma = 0.5;
        cfg.batch_size = bs;
        const auto step = em_step(InMemorySource(obs), est, cfg);
        for (std::size_t i = 0; i < step.signals.data().size(); ++i)
            CHECK(std::abs(step.signals.data()[i] - dense.signals.data()[i]) <= 1e-10);
        for (std::size_t k = 0; k < 2; ++k) CHECK(std::abs(step.class_mass[k] - dense.mass[k]) <= 1e-10);
    }
}

TEST_CASE("EM step is bit-identical across thread counts") {
    GroundTruth t{generate_signals(2, 9, 8), MixingWeights::uniform(2), 1.0};
    const auto obs = generate_observations(t, 3000, 9);
    const auto est = generate_signals(2, 9, 10);
    EmConfig cfg;
    cfg.sigma = 1.0;
    const auto one = em_step(InMemorySource(obs), est, cfg);
    cfg.threads = 4;
    const auto four = em_step(InMemorySource(obs), est, cfg);
    CHECK(one.signals.data() == four.signals.data());
    CHECK(one.log_posterior == four.log_posterior);
}

TEST_CASE("EM update averages aligned observations when responsibilities are sharp") {
    GroundTruth t{generate_signals(1, 10, 11), MixingWeights::uniform(1), 0.01};
    const auto obs = generate_observations(t, 200, 12);
    EmConfig cfg;
    cfg.sigma = 0.01;
    cfg.sigma0_sq = 1e12;
    const auto step = em_step(InMemorySource(obs), t.signals, cfg);
    RealVector avg(10, 0.0);
    for (std::size_t j = 0; j < obs.size(); ++j) {
        const auto back = cyclic_shift(obs[j], -obs.shifts[j]);
        for (std::size_t n = 0; n < 10; ++n) avg[n] += back[n] / 200.0;
    }
    for (std::size_t n = 0; n < 10; ++n) CHECK(std::abs(step.signals[0][n] - avg[n]) <= 1e-8);
}

TEST_CASE("starved classes are flagged and left unchanged") {
    GroundTruth t{generate_signals(1, 6, 13), MixingWeights::uniform(1), 0.1};
    const auto obs = generate_observations(t, 50, 14);
    SignalSet est({RealVector(t.signals[0].begin(), t.signals[0].end()), RealVector(6, 100.0)});
    EmConfig cfg;
    cfg.sigma = 0.1;
    const auto step = em_step(InMemorySource(obs), est, cfg);
    CHECK(!step.starved[0]);
    CHECK(step.starved[1]);
    for (std::size_t n = 0; n < 6; ++n) CHECK(step.signals[1][n] == 100.0);
}

TEST_CASE("EM log-posterior is non-decreasing") {
    GroundTruth t{generate_signals(2, 6, 15), MixingWeights::uniform(2), 0.8};
    const auto obs = generate_observations(t, 200, 16);
    InMemorySource src(obs);
    EmConfig cfg;
    cfg.sigma = 0.8;
    auto x = generate_signals(2, 6, 17);
    double prev = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < 40; ++it) {
        const auto step = em_step(src, x, cfg);
        CHECK(step.log_posterior >= prev - 1e-9 * std::abs(prev));
        prev = step.log_posterior;
        x = step.signals;
    }
}

TEST_CASE("run_em recovers a homogeneous signal at high SNR") {
    GroundTruth t{generate_signals(1, 10, 18), MixingWeights::uniform(1), 0.1};
    const auto obs = generate_observations(t, 1000, 19);
    EmConfig cfg;
    cfg.sigma = 0.1;
    cfg.seed = 20;
    const auto res = run_em(InMemorySource(obs), 1, cfg);
    CHECK(relative_error(t.signals, res.estimate.candidate.signals) < 0.05);
    CHECK(!res.hit_iteration_cap);
    CHECK(res.estimate.final_cost < 1e-5);
    CHECK(res.estimate.candidate.weights[0] == doctest::Approx(1.0));
}

TEST_CASE("run_em stopping rule") {
    GroundTruth t{generate_signals(2, 8, 21), MixingWeights::uniform(2), 1.0};
    const auto obs = generate_observations(t, 500, 22);
    InMemorySource src(obs);
    EmConfig cfg;
    cfg.sigma = 1.0;
    cfg.seed = 23;
    cfg.max_iter = 3;
    const auto capped = run_em(src, 2, cfg);
    CHECK(capped.hit_iteration_cap);
    CHECK(capped.estimate.iterations == 3);

    cfg.max_iter = 10000;
    const auto done = run_em(src, 2, cfg);
    CHECK(!done.hit_iteration_cap);
    CHECK(done.estimate.final_cost < 2 * 1e-5);
    // The reported step is the distance between the last two iterates.
    auto again = cfg;
    again.max_iter = done.estimate.iterations - 1;
    const auto before = run_em(src, 2, again);
    const auto last = em_step(src, before.estimate.candidate.signals, cfg);
    CHECK(match_sets(before.estimate.candidate.signals, last.signals).distance() ==
          doctest::Approx(done.estimate.final_cost));
    double s = 0.0;
    for (double w : done.estimate.candidate.weights.values()) s += w;
    CHECK(std::abs(s - 1.0) <= 1e-12);
}
