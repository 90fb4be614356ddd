#include "hetmra/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "hetmra/simulate.hpp"

namespace hmra {

ShiftMatch shift_dist(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("shift_dist: length mismatch");
    const std::size_t L = x.size();
    if (L == 0) return {};

    const auto xhat = dft(x);
    const auto yhat = dft(y);
    ComplexVector prod(L);
    for (std::size_t k = 0; k < L; ++k) prod[k] = yhat[k] * std::conj(xhat[k]);
    // corr[s] = <R_s x, y>
    const auto corr = idft_real(prod);

    double xx = 0.0;
    double yy = 0.0;
    for (std::size_t n = 0; n < L; ++n) {
        xx += x[n] * x[n];
        yy += y[n] * y[n];
    }
    const double best = *std::max_element(corr.begin(), corr.end());
    const double tie_tol = 1e-13 * (xx + yy);
    // Re-evaluate near-optimal shifts directly; the correlation identity loses
    // precision when the distance is tiny relative to the norms.
    std::size_t s = 0;
    double d2 = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < L; ++c) {
        if (corr[c] < best - tie_tol) continue;
        double d = 0.0;
        for (std::size_t n = 0; n < L; ++n) {
            const double e = x[n] - y[(n + c) % L];
            d += e * e;
        }
        if (d < d2) {
            d2 = d;
            s = c;
        }
    }
    return {std::sqrt(d2), static_cast<std::int64_t>(s)};
}

double Matching::distance() const { return std::sqrt(total_squared); }

std::vector<std::size_t> hungarian(const RealMatrix& cost) {
    const std::size_t n = cost.rows();
    if (cost.cols() != n) throw std::invalid_argument("hungarian: cost matrix must be square");
    constexpr double inf = std::numeric_limits<double>::infinity();
    // 1-based potentials formulation; column 0 is a sentinel.
    std::vector<double> u(n + 1, 0.0);
    std::vector<double> v(n + 1, 0.0);
    std::vector<std::size_t> match(n + 1, 0);  // match[col] = row
    std::vector<std::size_t> way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        match[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = match[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> assignment(n);
    for (std::size_t j = 1; j <= n; ++j) assignment[match[j] - 1] = j - 1;
    return assignment;
}

Matching match_sets(const SignalSet& reference, const SignalSet& estimate) {
    if (reference.count() != estimate.count() || reference.length() != estimate.length()) {
        throw std::invalid_argument("match_sets: dimension mismatch");
    }
    const std::size_t K = reference.count();
    RealMatrix cost(K, K);
    Matrix<std::int64_t> shifts(K, K);
    for (std::size_t a = 0; a < K; ++a) {
        for (std::size_t b = 0; b < K; ++b) {
            const auto m = shift_dist(reference[a], estimate[b]);
            cost(a, b) = m.distance * m.distance;
            shifts(a, b) = m.shift;
        }
    }
    Matching out;
    out.permutation = hungarian(cost);
    out.shifts.resize(K);
    out.distances.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
        const auto j = out.permutation[k];
        out.shifts[k] = shifts(k, j);
        out.distances[k] = std::sqrt(cost(k, j));
        out.total_squared += cost(k, j);
    }
    return out;
}

double relative_error(const SignalSet& reference, const SignalSet& estimate) {
    double norm2 = 0.0;
    for (double v : reference.data()) norm2 += v * v;
    if (norm2 <= 0.0) throw std::invalid_argument("relative_error: reference set is identically zero");
    return match_sets(reference, estimate).distance() / std::sqrt(norm2);
}

double tv_dist(const MixingWeights& w, const MixingWeights& w_est, std::span<const std::size_t> permutation) {
    const std::size_t K = w.size();
    if (w_est.size() != K || permutation.size() != K) throw std::invalid_argument("tv_dist: dimension mismatch");
    std::vector<bool> seen(K, false);
    double total = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        if (permutation[k] >= K || seen[permutation[k]]) throw std::invalid_argument("tv_dist: invalid permutation");
        seen[permutation[k]] = true;
        total += std::abs(w[k] - w_est[permutation[k]]);
    }
    return std::min(1.0, 0.5 * total);
}

}  // namespace hmra
