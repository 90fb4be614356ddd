#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "hetmra/core.hpp"
#include "hetmra/simulate.hpp"
#include "hetmra/solver.hpp"

namespace hmra {

struct EmConfig {
    double sigma = 1.0;
    double sigma0_sq = 1.0;  ///< variance of the N(0, sigma0^2 I) prior on each signal
    int max_iter = 10000;
    double conv_tol_per_K = 1e-5;
    std::uint64_t seed = 0;
    std::size_t batch_size = 4096;
    unsigned threads = 1;

    void validate() const;
};

/// Posterior over (shift r, class k) for one observation, stored as values[r * K + k].
struct Responsibilities {
    std::size_t L = 0;
    std::size_t K = 0;
    RealVector values;

    double operator()(std::size_t r, std::size_t k) const noexcept { return values[r * K + k]; }
};

[[nodiscard]] Responsibilities responsibilities(std::span<const double> y, const SignalSet& signals, double sigma);

/// Anything that can replay the observations batch by batch, any number of times.
class ObservationSource {
public:
    virtual ~ObservationSource() = default;
    [[nodiscard]] virtual std::size_t length() const = 0;
    [[nodiscard]] virtual std::uint64_t size() const = 0;
    virtual void for_each_batch(std::size_t batch_size,
                                const std::function<void(const ObservationBatch&)>& fn) const = 0;
};

class InMemorySource final : public ObservationSource {
public:
    explicit InMemorySource(const ObservationBatch& batch) : batch_(&batch) {}
    [[nodiscard]] std::size_t length() const override { return batch_->L; }
    [[nodiscard]] std::uint64_t size() const override { return batch_->size(); }
    void for_each_batch(std::size_t batch_size,
                        const std::function<void(const ObservationBatch&)>& fn) const override;

private:
    const ObservationBatch* batch_;
};

/// Mergeable E-step sums: per class, sum_{j,r} w_{j,r,k} R_r^{-1} y_j (held in the Fourier
/// domain) and sum_{j,r} w_{j,r,k}; plus the data log-likelihood of the current signals.
class EmSums {
public:
    EmSums(std::size_t K, std::size_t L);

    /// `spectra` and `norms2` are the DFTs and squared norms of the current signals.
    void add(std::span<const double> y, const std::vector<ComplexVector>& spectra, const RealVector& norms2,
             double sigma);
    void merge(const EmSums& other);

    [[nodiscard]] std::size_t count() const noexcept { return count_; }
    [[nodiscard]] const RealVector& mass() const noexcept { return mass_; }
    [[nodiscard]] double log_likelihood() const noexcept { return log_likelihood_; }
    /// Back-shifted weighted sum for class k in the signal domain.
    [[nodiscard]] RealVector numerator(std::size_t k) const;

private:
    std::size_t K_;
    std::size_t L_;
    std::uint64_t count_ = 0;
    std::vector<ComplexVector> numer_hat_;
    RealVector mass_;
    double log_likelihood_ = 0.0;
};

struct EmStepResult {
    SignalSet signals;
    std::vector<bool> starved;  ///< class mass fell below 1e-12; signal left unchanged
    RealVector class_mass;      ///< sum_{j,r} w_{j,r,k}
    double log_posterior = 0.0;  ///< of the input signals, including the Gaussian prior
};

[[nodiscard]] EmStepResult em_step(const ObservationSource& source, const SignalSet& signals, const EmConfig& cfg);

struct EmResult {
    Estimate estimate;  ///< final_cost holds the distance between the last two iterates
    bool hit_iteration_cap = false;
    std::size_t starved_events = 0;
    double log_posterior = 0.0;
};

/// Iterates em_step from a N(0, sigma0^2) start until successive iterates differ by less than
/// K * conv_tol_per_K in the shift- and permutation-invariant distance, or max_iter is reached.
[[nodiscard]] EmResult run_em(const ObservationSource& source, std::size_t K, const EmConfig& cfg);

}  // namespace hmra
