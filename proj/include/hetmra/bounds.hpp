#pragma once

#include <cstddef>
#include <vector>

namespace hmra {

/// Number of distinct real numbers carried by the mixed features of generic real signals.
struct FeatureCount {
    std::size_t n1 = 0;
    std::size_t n2 = 0;
    std::size_t n3 = 0;

    [[nodiscard]] std::size_t total() const noexcept { return n1 + n2 + n3; }
};

/// Partition of the L x L bispectrum entries into classes that are equal or conjugate for
/// every real signal. Entry (k, l) is the product xhat[k] xhat[-l] xhat[l-k]; its class is
/// the unordered frequency triple, identified with its negation (complex conjugate).
struct BispectrumOrbits {
    std::size_t L = 0;
    std::vector<std::size_t> orbit;  ///< orbit id of entry k * L + l
    std::vector<bool> conjugated;    ///< entry equals conj(representative of its orbit)
    std::vector<bool> self_conjugate;  ///< per orbit: entries are real
    std::vector<std::size_t> representative;  ///< per orbit: a non-conjugated entry index

    [[nodiscard]] std::size_t orbit_count() const noexcept { return self_conjugate.size(); }
};

[[nodiscard]] BispectrumOrbits bispectrum_orbits(std::size_t L);

[[nodiscard]] FeatureCount feature_count(std::size_t L);

/// Largest K such that the feature count reaches K L unknowns (plus K - 1 when the mixing
/// weights are unknown).
[[nodiscard]] std::size_t max_K(std::size_t L, bool weights_unknown);

}  // namespace hmra
