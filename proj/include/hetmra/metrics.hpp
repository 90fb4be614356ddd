#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hetmra/core.hpp"

namespace hmra {

class MixingWeights;

struct ShiftMatch {
    double distance = 0.0;   ///< min_s ||R_s x - y||
    std::int64_t shift = 0;  ///< smallest minimizing s
};

/// Shift-invariant distance computed from the circular cross-correlation via FFT.
[[nodiscard]] ShiftMatch shift_dist(std::span<const double> x, std::span<const double> y);

/// Optimal pairing of a reference set with an estimate, up to shifts and relabeling.
struct Matching {
    std::vector<std::size_t> permutation;  ///< reference k is matched to estimate permutation[k]
    std::vector<std::int64_t> shifts;
    RealVector distances;
    double total_squared = 0.0;

    [[nodiscard]] double distance() const;
};

/// Minimum-cost perfect assignment for a square cost matrix (Hungarian / Kuhn-Munkres).
/// Returns assignment[row] = column.
[[nodiscard]] std::vector<std::size_t> hungarian(const RealMatrix& cost);

[[nodiscard]] Matching match_sets(const SignalSet& reference, const SignalSet& estimate);

/// dist(x, x~) / sqrt(sum_k ||x_k||^2).
[[nodiscard]] double relative_error(const SignalSet& reference, const SignalSet& estimate);

/// 0.5 * sum_k |w_k - w~_{pi(k)}|.
[[nodiscard]] double tv_dist(const MixingWeights& w, const MixingWeights& w_est,
                             std::span<const std::size_t> permutation);

}  // namespace hmra
