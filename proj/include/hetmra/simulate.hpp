#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "hetmra/core.hpp"

namespace hmra {

using Rng = std::mt19937_64;

/// Mixes a base seed with a stream index so that derived streams are decorrelated.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept;

/// A point on the probability simplex.
class MixingWeights {
public:
    MixingWeights() = default;
    /// Validates w >= 0 and sum(w) = 1 (within 1e-9), then renormalizes exactly.
    explicit MixingWeights(RealVector w);

    static MixingWeights uniform(std::size_t K);

    [[nodiscard]] std::size_t size() const noexcept { return w_.size(); }
    double operator[](std::size_t k) const noexcept { return w_[k]; }
    [[nodiscard]] std::span<const double> values() const noexcept { return w_; }

private:
    RealVector w_;
};

enum class WeightMode { uniform, random, given };

[[nodiscard]] SignalSet generate_signals(std::size_t K, std::size_t L, std::uint64_t seed);

/// uniform: 1/K each; random: i.i.d. U[0,1] normalized; given: validates `explicit_weights`.
[[nodiscard]] MixingWeights generate_weights(std::size_t K, WeightMode mode, std::uint64_t seed,
                                             std::span<const double> explicit_weights = {});

struct GroundTruth {
    SignalSet signals;
    MixingWeights weights;
    double sigma = 0.0;
};

/// Throws if dimensions disagree, sigma < 0, or two signals coincide up to shift.
void validate(const GroundTruth& truth);

/// A batch of observations y_j = R_{r_j} x_{v_j} + noise, stored row-major.
/// Shifts and classes are latent and kept for evaluation only; classes are 0-based.
struct ObservationBatch {
    std::size_t L = 0;
    RealVector values;
    std::vector<std::int64_t> shifts;
    std::vector<std::size_t> classes;

    [[nodiscard]] std::size_t size() const noexcept { return L == 0 ? 0 : values.size() / L; }
    [[nodiscard]] std::span<const double> operator[](std::size_t j) const noexcept {
        return {values.data() + j * L, L};
    }
};

/// Deterministic generator of N observations, delivered in caller-sized batches. The
/// concatenated stream does not depend on how it is partitioned into batches.
class ObservationStream {
public:
    ObservationStream(const GroundTruth& truth, std::uint64_t N, std::uint64_t seed);

    [[nodiscard]] std::uint64_t remaining() const noexcept { return N_ - produced_; }
    [[nodiscard]] std::size_t length() const noexcept { return truth_->signals.length(); }

    /// Fills `out` with up to max_count observations; returns the number produced.
    std::size_t next(std::size_t max_count, ObservationBatch& out);

private:
    const GroundTruth* truth_;
    std::uint64_t N_;
    std::uint64_t produced_ = 0;
    Rng rng_;
    std::discrete_distribution<std::size_t> class_dist_;
    std::uniform_int_distribution<std::int64_t> shift_dist_;
    std::normal_distribution<double> noise_;
};

/// Convenience: materializes the whole stream in one batch.
[[nodiscard]] ObservationBatch generate_observations(const GroundTruth& truth, std::uint64_t N,
                                                     std::uint64_t seed);

}  // namespace hmra
