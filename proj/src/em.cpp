#include "hetmra/em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "hetmra/metrics.hpp"

namespace hmra {

void EmConfig::validate() const {
    if (!(sigma > 0.0)) throw std::invalid_argument("EM requires sigma > 0");
    if (!(sigma0_sq > 0.0)) throw std::invalid_argument("EM requires sigma0^2 > 0");
    if (max_iter < 1) throw std::invalid_argument("EM requires max_iter >= 1");
    if (!(conv_tol_per_K > 0.0)) throw std::invalid_argument("EM requires a positive convergence tolerance");
    if (batch_size == 0) throw std::invalid_argument("EM requires a positive batch size");
}

namespace {

struct SignalCache {
    std::vector<ComplexVector> spectra;
    RealVector norms2;
};

SignalCache cache_signals(const SignalSet& signals) {
    SignalCache c;
    for (std::size_t k = 0; k < signals.count(); ++k) {
        c.spectra.push_back(dft(signals[k]));
        double n2 = 0.0;
        for (double v : signals[k]) n2 += v * v;
        c.norms2.push_back(n2);
    }
    return c;
}

// Normalized posterior in `w` (layout r * K + k); returns log of the unnormalized mass
// sum_{r,k} exp(-||R_r x_k - y||^2 / (2 sigma^2)).
double posterior(std::span<const Complex> yhat, double y_norm2, const std::vector<ComplexVector>& spectra,
                 const RealVector& norms2, double sigma, RealVector& w) {
    const std::size_t K = spectra.size();
    const std::size_t L = yhat.size();
    w.resize(L * K);
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    ComplexVector prod(L);
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t i = 0; i < L; ++i) prod[i] = yhat[i] * std::conj(spectra[k][i]);
        // corr[r] = <R_r x_k, y>
        const auto corr = idft_real(prod);
        for (std::size_t r = 0; r < L; ++r) {
            w[r * K + k] = -(norms2[k] + y_norm2 - 2.0 * corr[r]) * inv2s2;
        }
    }
    const double mx = *std::max_element(w.begin(), w.end());
    double total = 0.0;
    for (double& v : w) {
        v = std::exp(v - mx);
        total += v;
    }
    for (double& v : w) v /= total;
    return mx + std::log(total);
}

}  // namespace

Responsibilities responsibilities(std::span<const double> y, const SignalSet& signals, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("responsibilities require sigma > 0");
    if (y.size() != signals.length()) throw std::invalid_argument("observation length does not match signals");
    const auto cache = cache_signals(signals);
    double yy = 0.0;
    for (double v : y) yy += v * v;
    Responsibilities out;
    out.L = signals.length();
    out.K = signals.count();
    posterior(dft(y), yy, cache.spectra, cache.norms2, sigma, out.values);
    return out;
}

void InMemorySource::for_each_batch(std::size_t batch_size,
                                    const std::function<void(const ObservationBatch&)>& fn) const {
    const std::size_t n = batch_->size();
    const std::size_t L = batch_->L;
    if (n <= batch_size) {
        fn(*batch_);
        return;
    }
    ObservationBatch chunk;
    chunk.L = L;
    for (std::size_t first = 0; first < n; first += batch_size) {
        const std::size_t last = std::min(n, first + batch_size);
        chunk.values.assign(batch_->values.begin() + static_cast<std::ptrdiff_t>(first * L),
                            batch_->values.begin() + static_cast<std::ptrdiff_t>(last * L));
        chunk.shifts.assign(batch_->shifts.begin() + static_cast<std::ptrdiff_t>(first),
                            batch_->shifts.begin() + static_cast<std::ptrdiff_t>(last));
        chunk.classes.assign(batch_->classes.begin() + static_cast<std::ptrdiff_t>(first),
                             batch_->classes.begin() + static_cast<std::ptrdiff_t>(last));
        fn(chunk);
    }
}

EmSums::EmSums(std::size_t K, std::size_t L) : K_(K), L_(L), numer_hat_(K, ComplexVector(L)), mass_(K, 0.0) {}

void EmSums::add(std::span<const double> y, const std::vector<ComplexVector>& spectra, const RealVector& norms2,
                 double sigma) {
    const auto yhat = dft(y);
    double yy = 0.0;
    for (double v : y) yy += v * v;
    RealVector w;
    const double log_mass = posterior(yhat, yy, spectra, norms2, sigma, w);
    const double Ld = static_cast<double>(L_);
    log_likelihood_ += log_mass - std::log(Ld * static_cast<double>(K_)) -
                       0.5 * Ld * std::log(2.0 * std::numbers::pi * sigma * sigma);

    RealVector col(L_);
    for (std::size_t k = 0; k < K_; ++k) {
        double m = 0.0;
        for (std::size_t r = 0; r < L_; ++r) {
            col[r] = w[r * K_ + k];
            m += col[r];
        }
        mass_[k] += m;
        // sum_r w_r y[n + r] has spectrum conj(what) * yhat.
        const auto what = dft(col);
        for (std::size_t i = 0; i < L_; ++i) numer_hat_[k][i] += std::conj(what[i]) * yhat[i];
    }
    ++count_;
}

void EmSums::merge(const EmSums& other) {
    if (other.K_ != K_ || other.L_ != L_) throw std::invalid_argument("cannot merge EM sums of different shapes");
    count_ += other.count_;
    log_likelihood_ += other.log_likelihood_;
    for (std::size_t k = 0; k < K_; ++k) {
        mass_[k] += other.mass_[k];
        for (std::size_t i = 0; i < L_; ++i) numer_hat_[k][i] += other.numer_hat_[k][i];
    }
}

RealVector EmSums::numerator(std::size_t k) const { return idft_real(numer_hat_[k]); }

EmStepResult em_step(const ObservationSource& source, const SignalSet& signals, const EmConfig& cfg) {
    cfg.validate();
    const std::size_t K = signals.count();
    const std::size_t L = signals.length();
    if (source.length() != L) throw std::invalid_argument("observation length does not match signals");
    const auto cache = cache_signals(signals);

    EmSums total(K, L);
    constexpr std::size_t block = 512;
    source.for_each_batch(cfg.batch_size, [&](const ObservationBatch& batch) {
        const std::size_t n = batch.size();
        const std::size_t blocks = (n + block - 1) / block;
        std::vector<EmSums> partial(blocks, EmSums(K, L));
        auto work = [&](std::size_t first) {
            for (std::size_t b = first; b < blocks; b += std::max(1u, cfg.threads)) {
                const std::size_t end = std::min(n, (b + 1) * block);
                for (std::size_t j = b * block; j < end; ++j) {
                    partial[b].add(batch[j], cache.spectra, cache.norms2, cfg.sigma);
                }
            }
        };
        if (cfg.threads <= 1 || blocks <= 1) {
            work(0);
        } else {
            std::vector<std::jthread> pool;
            for (unsigned t = 0; t < cfg.threads; ++t) pool.emplace_back(work, t);
        }
        for (const auto& p : partial) total.merge(p);
    });

    EmStepResult out;
    out.signals = signals;
    out.starved.assign(K, false);
    out.class_mass = total.mass();
    const double ratio = cfg.sigma * cfg.sigma / cfg.sigma0_sq;
    double prior = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        prior += cache.norms2[k] / (2.0 * cfg.sigma0_sq);
        if (total.mass()[k] < 1e-12) {
            out.starved[k] = true;
            continue;
        }
        const auto numer = total.numerator(k);
        const double denom = ratio + total.mass()[k];
        auto row = out.signals[k];
        for (std::size_t n = 0; n < L; ++n) row[n] = numer[n] / denom;
    }
    out.log_posterior = total.log_likelihood() - prior;
    return out;
}

EmResult run_em(const ObservationSource& source, std::size_t K, const EmConfig& cfg) {
    cfg.validate();
    if (K < 1) throw std::invalid_argument("EM requires K >= 1");
    if (source.size() < 1) throw std::invalid_argument("EM requires at least one observation");
    const std::size_t L = source.length();

    Rng rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(cfg.sigma0_sq));
    SignalSet current(K, L);
    for (double& v : current.data()) v = normal(rng);

    EmResult result;
    const double threshold = static_cast<double>(K) * cfg.conv_tol_per_K;
    RealVector mass(K, 1.0);
    int it = 0;
    double step = std::numeric_limits<double>::infinity();
    while (it < cfg.max_iter) {
        auto next = em_step(source, current, cfg);
        ++it;
        for (bool s : next.starved) result.starved_events += s ? 1 : 0;
        step = match_sets(current, next.signals).distance();
        mass = next.class_mass;
        result.log_posterior = next.log_posterior;
        current = std::move(next.signals);
        if (step < threshold) break;
    }
    result.hit_iteration_cap = step >= threshold;

    double total_mass = 0.0;
    for (double m : mass) total_mass += m;
    for (double& m : mass) m /= total_mass;

    auto& est = result.estimate;
    est.candidate.signals = std::move(current);
    est.candidate.weights = MixingWeights(std::move(mass));
    est.candidate.weights_fixed = true;
    est.final_cost = step;
    est.iterations = it;
    est.status = result.hit_iteration_cap ? "max_iterations" : "converged";
    return result;
}

}  // namespace hmra
