#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hetmra/optimize.hpp"

namespace hmra {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// tau >= 0 such that ||eta + tau d|| = radius.
double to_boundary(std::span<const double> eta, std::span<const double> d, double radius) {
    const double ee = dot(eta, eta);
    const double ed = dot(eta, d);
    const double dd = dot(d, d);
    return (-ed + std::sqrt(ed * ed + dd * (radius * radius - ee))) / dd;
}

struct InnerResult {
    std::vector<double> eta;
    std::vector<double> Heta;
    bool hit_boundary = false;
};

}  // namespace

OptimizerResult minimize_trust_region(const SmoothObjective& f, std::vector<double>& x,
                                      const TrustRegionOptions& opts) {
    const std::size_t n = x.size();
    OptimizerResult result;
    std::vector<double> g(n);
    double fx = f(x, g);
    result.evaluations = 1;
    if (!std::isfinite(fx)) {
        result.value = fx;
        result.status = OptimizerStatus::non_finite;
        return result;
    }

    const double max_radius = opts.max_radius > 0.0 ? opts.max_radius : std::sqrt(static_cast<double>(n));
    double radius = max_radius / 8.0;

    std::vector<double> probe(n);
    std::vector<double> gprobe(n);
    auto hess_vec = [&](std::span<const double> v, std::span<double> out) {
        const double nv = std::sqrt(dot(v, v));
        if (nv == 0.0) {
            std::fill(out.begin(), out.end(), 0.0);
            return;
        }
        const double h = opts.fd_step / nv;
        for (std::size_t i = 0; i < n; ++i) probe[i] = x[i] + h * v[i];
        f(probe, gprobe);
        ++result.evaluations;
        for (std::size_t i = 0; i < n; ++i) out[i] = (gprobe[i] - g[i]) / h;
    };

    auto truncated_cg = [&](double gnorm) {
        InnerResult res;
        res.eta.assign(n, 0.0);
        res.Heta.assign(n, 0.0);
        std::vector<double> r = g;
        std::vector<double> d(n);
        std::vector<double> Hd(n);
        for (std::size_t i = 0; i < n; ++i) d[i] = -r[i];
        double rr = gnorm * gnorm;
        const double target = gnorm * std::min(std::pow(gnorm, opts.theta), opts.kappa);
        for (std::size_t j = 0; j < n; ++j) {
            hess_vec(d, Hd);
            const double dHd = dot(d, Hd);
            const double alpha = rr / dHd;
            double ee_new = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double e = res.eta[i] + alpha * d[i];
                ee_new += e * e;
            }
            if (!(dHd > 0.0) || ee_new >= radius * radius) {
                const double tau = to_boundary(res.eta, d, radius);
                for (std::size_t i = 0; i < n; ++i) {
                    res.eta[i] += tau * d[i];
                    res.Heta[i] += tau * Hd[i];
                }
                res.hit_boundary = true;
                break;
            }
            for (std::size_t i = 0; i < n; ++i) {
                res.eta[i] += alpha * d[i];
                res.Heta[i] += alpha * Hd[i];
                r[i] += alpha * Hd[i];
            }
            const double rr_new = dot(r, r);
            if (std::sqrt(rr_new) <= target) break;
            const double beta = rr_new / rr;
            rr = rr_new;
            for (std::size_t i = 0; i < n; ++i) d[i] = -r[i] + beta * d[i];
        }
        return res;
    };

    std::vector<double> x_new(n);
    std::vector<double> g_new(n);
    int iter = 0;
    int rejected_in_a_row = 0;
    int flat_in_a_row = 0;
    result.status = OptimizerStatus::max_iterations;
    while (true) {
        const double gnorm = std::sqrt(dot(g, g));
        result.grad_norm = gnorm;
        if (gnorm <= opts.gtol) {
            result.status = OptimizerStatus::converged;
            break;
        }
        if (iter >= opts.max_iter) break;
        ++iter;

        const auto step = truncated_cg(gnorm);
        const double model_decrease = -(dot(g, step.eta) + 0.5 * dot(step.eta, step.Heta));
        for (std::size_t i = 0; i < n; ++i) x_new[i] = x[i] + step.eta[i];
        const double f_new = f(x_new, g_new);
        ++result.evaluations;

        // Regularized ratio guards against roundoff when both decreases are tiny.
        const double reg = std::max(1.0, std::abs(fx)) * std::numeric_limits<double>::epsilon() * 1e3;
        const double rho = std::isfinite(f_new) ? (fx - f_new + reg) / (model_decrease + reg) : -1.0;

        if (rho < 0.25 || !(model_decrease > 0.0)) {
            radius /= 4.0;
        } else if (rho > 0.75 && step.hit_boundary) {
            radius = std::min(2.0 * radius, max_radius);
        }

        // Progress below roundoff on the cost for many iterations: a numerical stationary point.
        if (std::isfinite(f_new) && std::abs(fx - f_new) <= 1e-12 * std::abs(fx)) {
            if (++flat_in_a_row >= 10) {
                result.status = OptimizerStatus::stalled;
                break;
            }
        } else {
            flat_in_a_row = 0;
        }

        if (model_decrease > 0.0 && rho > opts.rho_prime && std::isfinite(f_new)) {
            x.swap(x_new);
            g.swap(g_new);
            fx = f_new;
            rejected_in_a_row = 0;
        } else if (++rejected_in_a_row > 60) {
            // The radius has collapsed far below any meaningful step length.
            result.status = OptimizerStatus::stalled;
            break;
        }
    }
    result.value = fx;
    result.iterations = iter;
    return result;
}

}  // namespace hmra
