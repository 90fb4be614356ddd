#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace hmra {

/// Objective callback: returns f(x) and writes the gradient into `grad`.
using SmoothObjective = std::function<double(std::span<const double> x, std::span<double> grad)>;

enum class OptimizerStatus { converged, max_iterations, stalled, non_finite };

[[nodiscard]] std::string_view to_string(OptimizerStatus s) noexcept;

struct OptimizerResult {
    double value = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
    int evaluations = 0;
    OptimizerStatus status = OptimizerStatus::max_iterations;
};

struct LbfgsOptions {
    std::size_t memory = 12;
    int max_iter = 2000;
    double gtol = 1e-10;  ///< stop when ||grad||_2 <= gtol
    double c1 = 1e-4;     ///< sufficient decrease
    double c2 = 0.9;      ///< curvature
    int max_line_search = 40;
};

/// Limited-memory BFGS with a strong-Wolfe line search. `x` is updated in place.
OptimizerResult minimize_lbfgs(const SmoothObjective& f, std::vector<double>& x, const LbfgsOptions& opts);

struct TrustRegionOptions {
    int max_iter = 2000;
    double gtol = 1e-10;
    double rho_prime = 0.1;    ///< accept a step when actual/predicted decrease exceeds this
    double kappa = 0.1;        ///< inner linear convergence target
    double theta = 1.0;        ///< inner superlinear convergence target
    double fd_step = 0x1p-14;  ///< step for finite-difference Hessian-vector products
    double max_radius = 0.0;   ///< 0 selects sqrt(dimension)
};

/// Trust-region Newton method with a truncated conjugate-gradient (Steihaug-Toint) inner
/// solver. Hessian-vector products are finite differences of the gradient, so the
/// objective only needs to supply values and gradients. `x` is updated in place.
OptimizerResult minimize_trust_region(const SmoothObjective& f, std::vector<double>& x,
                                      const TrustRegionOptions& opts);

}  // namespace hmra
