#include "hetmra/moments.hpp"

#include <algorithm>
#include <stdexcept>
#include <thread>
#include <vector>

namespace hmra {

MomentAccumulator::MomentAccumulator(std::size_t L) : L_(L), sum_power_(L, 0.0), sum_bispec_(L, L) {
    if (L < 2) throw std::invalid_argument("moment accumulator requires L >= 2");
}

void MomentAccumulator::add(std::span<const double> y) {
    if (y.size() != L_) throw std::invalid_argument("observation length does not match accumulator");
    const auto yhat = dft(y);
    sum_mean_ += yhat[0].real() / static_cast<double>(L_);
    for (std::size_t k = 0; k < L_; ++k) sum_power_[k] += std::norm(yhat[k]);
    // The bispectrum of a real signal is Hermitian; accumulate the upper triangle only.
    for (std::size_t k = 0; k < L_; ++k) {
        const Complex a = yhat[k];
        auto row = sum_bispec_.row(k);
        for (std::size_t l = k; l < L_; ++l) row[l] += a * std::conj(yhat[l]) * yhat[l - k];
    }
    ++count_;
}

void MomentAccumulator::add_batch(const ObservationBatch& batch) {
    if (batch.L != L_) throw std::invalid_argument("batch length does not match accumulator");
    for (std::size_t j = 0; j < batch.size(); ++j) add(batch[j]);
}

void MomentAccumulator::merge(const MomentAccumulator& other) {
    if (other.L_ != L_) throw std::invalid_argument("cannot merge accumulators of different lengths");
    count_ += other.count_;
    sum_mean_ += other.sum_mean_;
    for (std::size_t k = 0; k < L_; ++k) sum_power_[k] += other.sum_power_[k];
    sum_bispec_ += other.sum_bispec_;
}

InvariantFeatures MomentAccumulator::finalize(double sigma) const {
    if (count_ == 0) throw std::invalid_argument("cannot finalize an empty accumulator");
    const double inv = 1.0 / static_cast<double>(count_);
    InvariantFeatures f;
    f.L = L_;
    f.sigma = sigma;
    f.sample_count = count_;
    f.m1 = sum_mean_ * inv;
    f.m2 = sum_power_;
    for (double& v : f.m2) v *= inv;
    f.m3 = sum_bispectrum();
    for (auto& v : f.m3.data()) v *= inv;
    return f;
}

ComplexMatrix MomentAccumulator::sum_bispectrum() const {
    ComplexMatrix full = sum_bispec_;
    for (std::size_t k = 0; k < L_; ++k)
        for (std::size_t l = 0; l < k; ++l) full(k, l) = std::conj(full(l, k));
    return full;
}

MomentAccumulator merge(MomentAccumulator a, const MomentAccumulator& b) {
    a.merge(b);
    return a;
}

void accumulate_into(MomentAccumulator& acc, const ObservationBatch& batch, unsigned threads, std::size_t block_size) {
    if (batch.L != acc.length()) throw std::invalid_argument("batch length does not match accumulator");
    if (block_size == 0) throw std::invalid_argument("block size must be positive");
    const std::size_t n = batch.size();
    const std::size_t blocks = (n + block_size - 1) / block_size;
    std::vector<MomentAccumulator> partial(blocks, MomentAccumulator(batch.L));

    auto work = [&](std::size_t first) {
        for (std::size_t b = first; b < blocks; b += std::max(1u, threads)) {
            const std::size_t end = std::min(n, (b + 1) * block_size);
            for (std::size_t j = b * block_size; j < end; ++j) partial[b].add(batch[j]);
        }
    };
    if (threads <= 1 || blocks <= 1) {
        work(0);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
    }

    for (const auto& p : partial) acc.merge(p);
}

MomentAccumulator accumulate_parallel(const ObservationBatch& batch, unsigned threads, std::size_t block_size) {
    MomentAccumulator total(batch.L);
    accumulate_into(total, batch, threads, block_size);
    return total;
}

InvariantFeatures analytic_features(const SignalSet& signals, const MixingWeights& w, double sigma) {
    const std::size_t K = signals.count();
    const std::size_t L = signals.length();
    if (w.size() != K) throw std::invalid_argument("analytic_features: weights/signals dimension mismatch");
    if (L < 2) throw std::invalid_argument("analytic_features: L must be at least 2");
    if (!(sigma >= 0.0)) throw std::invalid_argument("analytic_features: sigma must be >= 0");

    InvariantFeatures f;
    f.L = L;
    f.sigma = sigma;
    f.m2.assign(L, 0.0);
    f.m3 = ComplexMatrix(L, L);

    const double Ld = static_cast<double>(L);
    const double s2L = sigma * sigma * Ld;
    const double s2L2 = s2L * Ld;
    const auto A = bias_matrix(L);
    for (std::size_t k = 0; k < K; ++k) {
        const auto feat = invariant_features(signals[k]);
        const double wk = w[k];
        f.m1 += wk * feat.mean;
        for (std::size_t i = 0; i < L; ++i) f.m2[i] += wk * feat.power[i];
        for (std::size_t i = 0; i < L * L; ++i) {
            f.m3.data()[i] += wk * (feat.bispectrum.data()[i] + feat.mean * s2L2 * A.data()[i]);
        }
    }
    for (double& v : f.m2) v += s2L;
    return f;
}

}  // namespace hmra
