#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "hetmra/core.hpp"
#include "hetmra/simulate.hpp"

namespace hmra {

/// Mixed invariant features M1 (mean), M2 (power spectrum), M3 (bispectrum).
struct InvariantFeatures {
    std::size_t L = 0;
    double sigma = 0.0;
    /// Number of observations averaged; empty for population-limit (analytic) features.
    std::optional<std::uint64_t> sample_count;
    double m1 = 0.0;
    RealVector m2;
    ComplexMatrix m3;
};

/// Raw running sums of per-observation features. Memory is O(L^2) regardless of how many
/// observations have been absorbed; accumulators over disjoint partitions merge exactly.
class MomentAccumulator {
public:
    explicit MomentAccumulator(std::size_t L);

    void add(std::span<const double> y);
    void add_batch(const ObservationBatch& batch);
    void merge(const MomentAccumulator& other);

    [[nodiscard]] std::size_t length() const noexcept { return L_; }
    [[nodiscard]] std::uint64_t count() const noexcept { return count_; }
    [[nodiscard]] double sum_mean() const noexcept { return sum_mean_; }
    [[nodiscard]] const RealVector& sum_power() const noexcept { return sum_power_; }
    [[nodiscard]] ComplexMatrix sum_bispectrum() const;

    /// Divides the sums by the count. Throws on an empty accumulator.
    [[nodiscard]] InvariantFeatures finalize(double sigma) const;

private:
    std::size_t L_;
    std::uint64_t count_ = 0;
    double sum_mean_ = 0.0;
    RealVector sum_power_;
    ComplexMatrix sum_bispec_;
};

[[nodiscard]] MomentAccumulator merge(MomentAccumulator a, const MomentAccumulator& b);

inline constexpr std::size_t kMomentBlock = 1024;

/// Splits a batch into fixed blocks of `block_size` observations, one accumulator per block,
/// and merges the block accumulators into `acc` left to right. The block layout does not depend
/// on `threads`, so the result is bit-identical for any thread count. Feeding a stream in
/// chunks that are whole multiples of `block_size` gives the same result as one call.
void accumulate_into(MomentAccumulator& acc, const ObservationBatch& batch, unsigned threads,
                     std::size_t block_size = kMomentBlock);
[[nodiscard]] MomentAccumulator accumulate_parallel(const ObservationBatch& batch, unsigned threads,
                                                    std::size_t block_size = kMomentBlock);

/// Population limit of the mixed features under noise level sigma, including the
/// sigma^2 L bias on M2 and the mu sigma^2 L^2 A bias on M3.
[[nodiscard]] InvariantFeatures analytic_features(const SignalSet& signals, const MixingWeights& w, double sigma);

}  // namespace hmra
