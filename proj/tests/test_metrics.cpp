#include <doctest.h>

#include <random>

#include "hetmra/metrics.hpp"
#include "oracles.hpp"

using namespace hmra;

TEST_CASE("shift_dist examples") {
    auto m = shift_dist(RealVector{1, 0, 0}, RealVector{0, 1, 0});
    CHECK(m.distance == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(m.shift == 1);

    m = shift_dist(RealVector{1, 0}, RealVector{0, 2});
    CHECK(m.distance == doctest::Approx(1.0));
    CHECK(m.shift == 1);

    const RealVector x{0.4, -1.0, 2.5, 3.0};
    m = shift_dist(x, x);
    CHECK(m.distance <= 1e-7);
    CHECK(m.shift == 0);

    CHECK_THROWS_AS((void)shift_dist(RealVector{1, 2}, RealVector{1, 2, 3}), std::invalid_argument);
}

TEST_CASE("shift_dist agrees with enumeration and is symmetric and invariant") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n;
    for (std::size_t L : {2u, 3u, 5u, 8u, 16u, 31u}) {
        for (int t = 0; t < 20; ++t) {
            RealVector x(L), y(L);
            for (auto& v : x) v = n(rng);
            for (auto& v : y) v = n(rng);
            const auto fast = shift_dist(x, y);
            const auto slow = oracle::brute_shift_dist(x, y);
            CHECK(fast.shift == slow.shift);
            CHECK(std::abs(fast.distance - slow.distance) <= 1e-10);
            CHECK(std::abs(shift_dist(y, x).distance - fast.distance) <= 1e-12);
            const auto a = static_cast<std::int64_t>(t), b = static_cast<std::int64_t>(3 * t + 1);
            CHECK(std::abs(shift_dist(cyclic_shift(x, a), cyclic_shift(y, b)).distance - fast.distance) <= 1e-12);
        }
    }
}

TEST_CASE("shift ties resolve to the smallest shift") {
    // Constant signals: every shift is optimal.
    CHECK(shift_dist(RealVector(6, 1.0), RealVector(6, 2.0)).shift == 0);
    // Period-2 signal: shifts 1, 3, 5 all optimal.
    CHECK(shift_dist(RealVector{1, 0, 1, 0, 1, 0}, RealVector{0, 1, 0, 1, 0, 1}).shift == 1);
}

TEST_CASE("hungarian matches permutation enumeration") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (std::size_t K = 1; K <= 6; ++K) {
        for (int t = 0; t < 25; ++t) {
            RealMatrix c(K, K);
            for (auto& v : c.data()) v = u(rng);
            const auto a = hungarian(c);
            double s = 0.0;
            std::vector<bool> used(K, false);
            for (std::size_t k = 0; k < K; ++k) {
                s += c(k, a[k]);
                CHECK(!used[a[k]]);
                used[a[k]] = true;
            }
            CHECK(std::abs(s - oracle::brute_assignment(c)) <= 1e-12);
        }
    }
}

TEST_CASE("match_sets recovers reordering and shifts") {
    const auto x = generate_signals(4, 10, 3);
    SignalSet y(4, 10);
    const std::size_t perm[4] = {2, 0, 3, 1};
    for (std::size_t k = 0; k < 4; ++k) {
        const auto s = cyclic_shift(x[k], static_cast<std::int64_t>(k + 2));
        std::copy(s.begin(), s.end(), y[perm[k]].begin());
    }
    const auto m = match_sets(x, y);
    CHECK(m.distance() <= 1e-7);
    for (std::size_t k = 0; k < 4; ++k) CHECK(m.permutation[k] == perm[k]);
    double tot = 0.0;
    for (double d : m.distances) tot += d * d;
    CHECK(m.total_squared == doctest::Approx(tot));

    const auto one = generate_signals(1, 5, 1);
    CHECK(match_sets(one, generate_signals(1, 5, 2)).permutation[0] == 0);
}

TEST_CASE("match_sets is optimal over all permutations") {
    for (std::size_t K = 2; K <= 6; ++K) {
        const auto x = generate_signals(K, 7, K);
        const auto y = generate_signals(K, 7, 100 + K);
        RealMatrix c(K, K);
        for (std::size_t i = 0; i < K; ++i)
            for (std::size_t j = 0; j < K; ++j) {
                const double d = oracle::brute_shift_dist(x[i], y[j]).distance;
                c(i, j) = d * d;
            }
        CHECK(std::abs(match_sets(x, y).total_squared - oracle::brute_assignment(c)) <= 1e-9);
    }
}

TEST_CASE("relative error") {
    const auto x = generate_signals(3, 8, 1);
    CHECK(relative_error(x, x) <= 1e-7);
    CHECK(relative_error(x, SignalSet(3, 8)) == doctest::Approx(1.0));
    CHECK(relative_error(SignalSet({RealVector{1, 0}}), SignalSet({RealVector{0, 2}})) == doctest::Approx(1.0));
    CHECK_THROWS_AS((void)relative_error(SignalSet(3, 8), x), std::invalid_argument);
}

TEST_CASE("tv distance") {
    const std::vector<std::size_t> id{0, 1}, swap{1, 0};
    CHECK(tv_dist(MixingWeights({0.5, 0.5}), MixingWeights({0.7, 0.3}), id) == doctest::Approx(0.2));
    CHECK(tv_dist(MixingWeights({0.2, 0.8}), MixingWeights({0.2, 0.8}), id) == 0.0);
    CHECK(tv_dist(MixingWeights({1.0, 0.0}), MixingWeights({0.0, 1.0}), swap) == 0.0);
    CHECK(tv_dist(MixingWeights({1.0, 0.0}), MixingWeights({0.0, 1.0}), id) == doctest::Approx(1.0));
    const std::vector<std::size_t> bad{0, 0};
    CHECK_THROWS((void)tv_dist(MixingWeights({0.5, 0.5}), MixingWeights({0.5, 0.5}), bad));
}
