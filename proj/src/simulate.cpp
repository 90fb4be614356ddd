#include "hetmra/simulate.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "hetmra/metrics.hpp"

namespace hmra {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept {
    // splitmix64 finalizer
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

MixingWeights::MixingWeights(RealVector w) : w_(std::move(w)) {
    if (w_.empty()) throw std::invalid_argument("mixing weights must be non-empty");
    double total = 0.0;
    for (double v : w_) {
        if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("mixing weights must be non-negative");
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw std::invalid_argument("mixing weights must sum to 1 (got " + std::to_string(total) + ")");
    }
    for (double& v : w_) v /= total;
}

MixingWeights MixingWeights::uniform(std::size_t K) {
    if (K == 0) throw std::invalid_argument("K must be at least 1");
    return MixingWeights(RealVector(K, 1.0 / static_cast<double>(K)));
}

SignalSet generate_signals(std::size_t K, std::size_t L, std::uint64_t seed) {
    if (K < 1 || L < 2) throw std::invalid_argument("generate_signals requires K >= 1 and L >= 2");
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    SignalSet out(K, L);
    for (double& v : out.data()) v = normal(rng);
    return out;
}

MixingWeights generate_weights(std::size_t K, WeightMode mode, std::uint64_t seed,
                               std::span<const double> explicit_weights) {
    if (K < 1) throw std::invalid_argument("generate_weights requires K >= 1");
    switch (mode) {
        case WeightMode::uniform:
            return MixingWeights::uniform(K);
        case WeightMode::random: {
            Rng rng(seed);
            std::uniform_real_distribution<double> unif(0.0, 1.0);
            RealVector w(K);
            for (double& v : w) v = unif(rng);
            const double total = std::accumulate(w.begin(), w.end(), 0.0);
            for (double& v : w) v /= total;
            return MixingWeights(std::move(w));
        }
        case WeightMode::given:
            if (explicit_weights.size() != K) throw std::invalid_argument("explicit weights must have K entries");
            return MixingWeights(RealVector(explicit_weights.begin(), explicit_weights.end()));
    }
    throw std::invalid_argument("unknown weight mode");
}

void validate(const GroundTruth& truth) {
    const auto K = truth.signals.count();
    if (K == 0 || truth.signals.length() < 2) throw std::invalid_argument("ground truth needs K >= 1, L >= 2");
    if (truth.weights.size() != K) throw std::invalid_argument("ground truth weights must have K entries");
    if (!(truth.sigma >= 0.0) || !std::isfinite(truth.sigma)) throw std::invalid_argument("sigma must be >= 0");
    for (std::size_t a = 0; a < K; ++a) {
        for (std::size_t b = a + 1; b < K; ++b) {
            if (shift_dist(truth.signals[a], truth.signals[b]).distance <= 1e-6) {
                throw std::invalid_argument("ground truth signals " + std::to_string(a) + " and " +
                                            std::to_string(b) + " coincide up to shift");
            }
        }
    }
}

ObservationStream::ObservationStream(const GroundTruth& truth, std::uint64_t N, std::uint64_t seed)
    : truth_(&truth),
      N_(N),
      rng_(seed),
      class_dist_(truth.weights.values().begin(), truth.weights.values().end()),
      shift_dist_(0, static_cast<std::int64_t>(truth.signals.length()) - 1),
      noise_(0.0, 1.0) {
    if (N < 1) throw std::invalid_argument("observation stream needs N >= 1");
    if (truth.weights.size() != truth.signals.count()) throw std::invalid_argument("weights/signals mismatch");
}

std::size_t ObservationStream::next(std::size_t max_count, ObservationBatch& out) {
    const std::size_t L = truth_->signals.length();
    const auto count = static_cast<std::size_t>(std::min<std::uint64_t>(max_count, remaining()));
    out.L = L;
    out.values.assign(count * L, 0.0);
    out.shifts.resize(count);
    out.classes.resize(count);
    const double sigma = truth_->sigma;
    for (std::size_t j = 0; j < count; ++j) {
        const std::size_t v = class_dist_(rng_);
        const std::int64_t r = shift_dist_(rng_);
        const auto x = truth_->signals[v];
        double* y = out.values.data() + j * L;
        const auto s = static_cast<std::size_t>(r);
        for (std::size_t n = 0; n < L; ++n) y[(n + s) % L] = x[n];
        for (std::size_t n = 0; n < L; ++n) y[n] += sigma * noise_(rng_);
        out.shifts[j] = r;
        out.classes[j] = v;
    }
    produced_ += count;
    return count;
}

ObservationBatch generate_observations(const GroundTruth& truth, std::uint64_t N, std::uint64_t seed) {
    ObservationStream stream(truth, N, seed);
    ObservationBatch batch;
    stream.next(static_cast<std::size_t>(N), batch);
    return batch;
}

}  // namespace hmra
