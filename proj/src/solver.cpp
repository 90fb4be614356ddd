#include "hetmra/solver.hpp"

#include <algorithm>
#include <atomic>
#include <limits>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "hetmra/optimize.hpp"

namespace hmra {

CostWeights CostWeights::make(double sigma, std::size_t L, double P) {
    if (!(sigma >= 0.0) || L < 2 || !(P > 0.0)) throw std::invalid_argument("cost weights need sigma >= 0, L >= 2, P > 0");
    const double Ld = static_cast<double>(L);
    const double s2L = sigma * sigma * Ld;
    CostWeights cw;
    cw.sigma = sigma;
    cw.L = L;
    cw.P = P;
    cw.w2 = 1.0 / (s2L + 2.0 * P);
    const double v3 = s2L * s2L + 3.0 * P * P;
    cw.w3 = 1.0 / v3;
    cw.global_scale = v3 / 2.0;
    return cw;
}

double default_P(const InvariantFeatures& f) {
    constexpr double floor = 1e-6;
    const double bias = f.sigma * f.sigma * static_cast<double>(f.L);
    double total = 0.0;
    for (double v : f.m2) total += v - bias;
    return std::max(total / static_cast<double>(f.m2.size()), floor);
}

namespace {

// Evaluates the scaled least-squares cost for signals X (K x L, row-major) and weights w.
// Optionally writes d/dX and the Euclidean d/dw.
class Objective {
public:
    Objective(const InvariantFeatures& f, const CostWeights& cw, std::size_t K)
        : f_(f), cw_(cw), K_(K), L_(f.L), bias_(f.m3) {
        if (f.m2.size() != L_ || f.m3.rows() != L_ || f.m3.cols() != L_) {
            throw std::invalid_argument("invariant features have inconsistent dimensions");
        }
        if (cw.L != L_) throw std::invalid_argument("cost weights built for a different L");
        if (std::abs(cw.sigma - f.sigma) > 1e-12 * std::max(1.0, f.sigma)) {
            throw std::invalid_argument("cost weights sigma does not match the features");
        }
        // bias_ = m1 sigma^2 L^2 A - m3: the constant part of the third-order residual.
        const double Ld = static_cast<double>(L_);
        const double c = f.m1 * f.sigma * f.sigma * Ld * Ld;
        const auto A = bias_matrix(L_);
        for (std::size_t i = 0; i < L_ * L_; ++i) bias_.data()[i] = c * A.data()[i] - f.m3.data()[i];
        zhat_.resize(K_);
        bispec_.resize(K_);
    }

    double operator()(std::span<const double> X, std::span<const double> w, double* gX, double* gw) {
        const std::size_t L = L_;
        const double Ld = static_cast<double>(L);
        const double s2L = cw_.sigma * cw_.sigma * Ld;

        double r1 = -Ld * f_.m1;
        RealVector r2(L);
        for (std::size_t a = 0; a < L; ++a) r2[a] = s2L - f_.m2[a];
        ComplexMatrix R = bias_;
        for (std::size_t k = 0; k < K_; ++k) {
            zhat_[k] = dft(X.subspan(k * L, L));
            bispec_[k] = bispectrum_from_spectrum(zhat_[k]);
            const double wk = w[k];
            r1 += wk * zhat_[k][0].real();
            for (std::size_t a = 0; a < L; ++a) r2[a] += wk * std::norm(zhat_[k][a]);
            const auto& Bk = bispec_[k].data();
            auto& Rd = R.data();
            for (std::size_t i = 0; i < L * L; ++i) Rd[i] += wk * Bk[i];
        }

        double t2 = 0.0;
        for (double v : r2) t2 += v * v;
        double t3 = 0.0;
        for (const auto& v : R.data()) t3 += std::norm(v);
        const double scale = cw_.global_scale;
        const double value = scale * (r1 * r1 + cw_.w2 * t2 + cw_.w3 * t3);
        if (gX == nullptr && gw == nullptr) return value;

        for (std::size_t k = 0; k < K_; ++k) {
            const auto& z = zhat_[k];
            if (gw != nullptr) {
                double d2 = 0.0;
                for (std::size_t a = 0; a < L; ++a) d2 += r2[a] * std::norm(z[a]);
                double d3 = 0.0;
                const auto& Bk = bispec_[k].data();
                for (std::size_t i = 0; i < L * L; ++i) d3 += (std::conj(R.data()[i]) * Bk[i]).real();
                gw[k] = scale * 2.0 * (r1 * z[0].real() + cw_.w2 * d2 + cw_.w3 * d3);
            }
            if (gX == nullptr) continue;

            // G = d cost / d conj(zhat) (Wirtinger), then dX = 2 Re(F^H G).
            const double wk = w[k];
            ComplexVector G(L);
            for (std::size_t j = 0; j < L; ++j) {
                Complex s1{}, s2{}, s3{};
                for (std::size_t a = 0; a < L; ++a) {
                    const std::size_t jma = j >= a ? j - a : j + L - a;
                    s1 += z[a] * z[jma] * std::conj(R(a, j));
                    const std::size_t amj = a >= j ? a - j : a + L - j;
                    s2 += R(j, a) * z[a] * std::conj(z[amj]);
                    const std::size_t apj = a + j < L ? a + j : a + j - L;
                    s3 += R(a, apj) * std::conj(z[a]) * z[apj];
                }
                G[j] = 2.0 * cw_.w2 * r2[j] * z[j] + cw_.w3 * (s1 + s2 + s3);
            }
            G[0] += r1;
            const auto back = idft(G);
            for (std::size_t n = 0; n < L; ++n) gX[k * L + n] = 2.0 * scale * wk * Ld * back[n].real();
        }
        return value;
    }

private:
    const InvariantFeatures& f_;
    const CostWeights& cw_;
    std::size_t K_;
    std::size_t L_;
    ComplexMatrix bias_;
    std::vector<ComplexVector> zhat_;
    std::vector<ComplexMatrix> bispec_;
};

void check_candidate(const Candidate& c, const InvariantFeatures& f) {
    if (c.signals.count() == 0) throw std::invalid_argument("candidate has no signals");
    if (c.signals.length() != f.L) throw std::invalid_argument("candidate length does not match features");
    if (c.weights.size() != c.signals.count()) throw std::invalid_argument("candidate weights must have K entries");
}

RealVector softmax_pinned(std::span<const double> logits, std::size_t K) {
    RealVector w(K);
    double mx = 0.0;
    for (double t : logits) mx = std::max(mx, t);
    double total = std::exp(-mx);
    w[0] = total;
    for (std::size_t k = 1; k < K; ++k) {
        w[k] = std::exp(logits[k - 1] - mx);
        total += w[k];
    }
    for (double& v : w) v /= total;
    return w;
}

}  // namespace

double cost(const Candidate& c, const InvariantFeatures& f, const CostWeights& cw) {
    check_candidate(c, f);
    Objective obj(f, cw, c.signals.count());
    return obj(c.signals.data(), c.weights.values(), nullptr, nullptr);
}

CostGradient gradient(const Candidate& c, const InvariantFeatures& f, const CostWeights& cw) {
    check_candidate(c, f);
    const std::size_t K = c.signals.count();
    Objective obj(f, cw, K);
    CostGradient out{SignalSet(K, f.L), std::nullopt};
    RealVector gw(K);
    obj(c.signals.data(), c.weights.values(), out.signals.data().data(), gw.data());
    if (!c.weights_fixed) {
        double mean = 0.0;
        for (double v : gw) mean += v;
        mean /= static_cast<double>(K);
        for (double& v : gw) v -= mean;
        out.weights = std::move(gw);
    }
    return out;
}

Estimate solve(const InvariantFeatures& f, std::size_t K, const SolveOptions& opts) {
    if (K < 1) throw std::invalid_argument("solve requires K >= 1");
    if (opts.weights_fixed && (!opts.fixed_weights || opts.fixed_weights->size() != K)) {
        throw std::invalid_argument("fixed-weight solve needs K explicit weights");
    }
    const std::size_t L = f.L;
    const CostWeights cw = CostWeights::make(f.sigma, L, opts.P.value_or(default_P(f)));
    Objective obj(f, cw, K);

    const bool free_w = !opts.weights_fixed && K > 1;
    const std::size_t nx = K * L;
    const std::size_t n = nx + (free_w ? K - 1 : 0);

    RealVector params(n, 0.0);
    Rng rng(opts.seed);
    std::normal_distribution<double> normal(0.0, opts.init_scale);
    for (std::size_t i = 0; i < nx; ++i) params[i] = normal(rng);

    const RealVector fixed_w = opts.weights_fixed ? RealVector(opts.fixed_weights->values().begin(),
                                                                opts.fixed_weights->values().end())
                                                  : RealVector(K, 1.0 / static_cast<double>(K));
    RealVector gw(K);
    SmoothObjective fn = [&](std::span<const double> p, std::span<double> g) {
        const RealVector w = free_w ? softmax_pinned(p.subspan(nx), K) : fixed_w;
        const double value = obj(p.subspan(0, nx), w, g.data(), free_w ? gw.data() : nullptr);
        if (free_w) {
            double avg = 0.0;
            for (std::size_t k = 0; k < K; ++k) avg += w[k] * gw[k];
            for (std::size_t k = 1; k < K; ++k) g[nx + k - 1] = w[k] * (gw[k] - avg);
        }
        return value;
    };

    OptimizerResult res;
    if (opts.optimizer == OptimizerKind::lbfgs) {
        LbfgsOptions lo;
        lo.max_iter = opts.max_iter;
        lo.gtol = opts.gtol;
        res = minimize_lbfgs(fn, params, lo);
    } else {
        TrustRegionOptions to;
        to.max_iter = opts.max_iter;
        to.gtol = opts.gtol;
        res = minimize_trust_region(fn, params, to);
    }

    Estimate est;
    est.candidate.signals = SignalSet(K, L);
    std::copy(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(nx), est.candidate.signals.data().begin());
    est.candidate.weights =
        MixingWeights(free_w ? softmax_pinned(std::span<const double>(params).subspan(nx), K) : fixed_w);
    est.candidate.weights_fixed = opts.weights_fixed;
    est.final_cost = res.value;
    est.grad_norm = res.grad_norm;
    est.iterations = res.iterations;
    est.status = std::string(to_string(res.status));
    est.failed = res.status == OptimizerStatus::non_finite;
    return est;
}

MultiStartResult multi_start(const InvariantFeatures& f, std::size_t K, std::size_t R, const SolveOptions& opts,
                             unsigned threads) {
    if (R < 1) throw std::invalid_argument("multi_start requires at least one restart");
    std::vector<Estimate> runs(R);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t r = next++; r < R; r = next++) {
            SolveOptions o = opts;
            o.seed = derive_seed(opts.seed, r);
            try {
                runs[r] = solve(f, K, o);
            } catch (const std::exception& e) {
                runs[r].failed = true;
                runs[r].status = e.what();
                runs[r].final_cost = std::numeric_limits<double>::infinity();
            }
            runs[r].restart_index = static_cast<int>(r);
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < std::min<std::size_t>(threads, R); ++t) pool.emplace_back(worker);
    }

    MultiStartResult out;
    std::size_t best = 0;
    for (std::size_t r = 0; r < R; ++r) {
        const double c = runs[r].failed ? std::numeric_limits<double>::infinity() : runs[r].final_cost;
        out.all_costs.push_back(c);
        out.global.push_back(c < opts.global_tol);
        if (c < out.all_costs[best]) best = r;
    }
    out.best = runs[best];
    out.runs = std::move(runs);
    return out;
}

}  // namespace hmra
