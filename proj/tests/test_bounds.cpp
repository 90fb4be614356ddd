#include <doctest.h>

#include <cmath>

#include "hetmra/bounds.hpp"
#include "hetmra/core.hpp"
#include "hetmra/simulate.hpp"

using namespace hmra;

TEST_CASE("feature counts") {
    for (std::size_t L = 2; L <= 40; ++L) {
        const auto c = feature_count(L);
        CHECK(c.n1 == 1);
        CHECK(c.n2 == L / 2 + 1);
        CHECK(c.total() == c.n1 + c.n2 + c.n3);
    }
    CHECK(feature_count(4).n2 == 3);
    CHECK(feature_count(4).n3 == 5);
    const double ratio = static_cast<double>(feature_count(120).n3) / (120.0 * 120.0 / 6.0);
    CHECK(ratio >= 0.8);
    CHECK(ratio <= 1.2);
    CHECK_THROWS_AS((void)feature_count(1), std::invalid_argument);
}

TEST_CASE("n3 matches a count of distinct bispectrum values") {
    // For a generic signal, distinct orbits carry distinct values; count numerically.
    for (std::size_t L = 2; L <= 14; ++L) {
        const auto x = generate_signals(1, L, 1000 + L);
        const auto B = invariant_features(x[0]).bispectrum;
        std::vector<Complex> reps;
        std::size_t reals = 0;
        for (const auto& b : B.data()) {
            bool seen = false;
            for (const auto& r : reps) {
                if (std::abs(b - r) <= 1e-9 * (1 + std::abs(r)) || std::abs(b - std::conj(r)) <= 1e-9 * (1 + std::abs(r))) {
                    seen = true;
                    break;
                }
            }
            if (seen) continue;
            reps.push_back(b);
            reals += std::abs(b.imag()) <= 1e-9 * (1 + std::abs(b)) ? 1 : 2;
        }
        CHECK(reals == feature_count(L).n3);
    }
}

TEST_CASE("orbit structure agrees with random signals") {
    for (std::size_t L = 4; L <= 32; ++L) {
        const auto orb = bispectrum_orbits(L);
        const auto x = generate_signals(1, L, L);
        const auto B = invariant_features(x[0]).bispectrum;
        double scale = 0.0;
        for (const auto& b : B.data()) scale = std::max(scale, std::abs(b));
        bool same_ok = true;
        for (std::size_t i = 0; i < L * L; ++i) {
            const auto rep = B.data()[orb.representative[orb.orbit[i]]];
            const auto v = orb.conjugated[i] ? std::conj(B.data()[i]) : B.data()[i];
            same_ok = same_ok && std::abs(v - rep) <= 1e-10 * scale;
            if (orb.self_conjugate[orb.orbit[i]]) same_ok = same_ok && std::abs(B.data()[i].imag()) <= 1e-10 * scale;
        }
        CHECK(same_ok);
        bool distinct_ok = true;
        for (std::size_t a = 0; a < orb.orbit_count(); ++a)
            for (std::size_t b = a + 1; b < orb.orbit_count(); ++b) {
                const auto u = B.data()[orb.representative[a]];
                const auto v = B.data()[orb.representative[b]];
                distinct_ok = distinct_ok && std::abs(u - v) > 1e-10 * scale && std::abs(u - std::conj(v)) > 1e-10 * scale;
            }
        CHECK(distinct_ok);
    }
}

TEST_CASE("max_K") {
    std::size_t prev_k = 0, prev_u = 0;
    for (std::size_t L = 2; L <= 100; ++L) {
        const auto k = max_K(L, false), u = max_K(L, true);
        CHECK(k >= prev_k);
        CHECK(u >= prev_u);
        CHECK(u <= k);
        const auto t = feature_count(L).total();
        CHECK(t >= k * L);
        CHECK(t < (k + 1) * L);
        CHECK(t >= u * L + u - 1);
        prev_k = k;
        prev_u = u;
    }
    CHECK(std::abs(static_cast<long>(max_K(60, false)) - 10) <= 2);
    CHECK(std::abs(static_cast<long>(max_K(60, true)) - 10) <= 2);
    CHECK(max_K(6, false) == 2);
}
