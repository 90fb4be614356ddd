#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hetmra/core.hpp"
#include "hetmra/moments.hpp"
#include "hetmra/simulate.hpp"

namespace hmra {

/// Inverse-variance weights of the three least-squares terms, plus the global scale
/// applied to the whole cost. P is a typical power-spectrum level of the unknown signals.
struct CostWeights {
    double sigma = 0.0;
    std::size_t L = 0;
    double P = 0.0;
    double w2 = 0.0;            ///< 1 / (sigma^2 L + 2P)
    double w3 = 0.0;            ///< 1 / (sigma^4 L^2 + 3P^2)
    double global_scale = 0.0;  ///< (sigma^4 L^2 + 3P^2) / 2

    static CostWeights make(double sigma, std::size_t L, double P);
};

/// P = max(mean_k(m2[k] - sigma^2 L), 1e-6).
[[nodiscard]] double default_P(const InvariantFeatures& f);

struct Candidate {
    SignalSet signals;
    MixingWeights weights;
    bool weights_fixed = true;
};

struct CostGradient {
    SignalSet signals;                 ///< d cost / d x_k, K x L
    std::optional<RealVector> weights;  ///< projected onto the simplex tangent; absent when fixed
};

[[nodiscard]] double cost(const Candidate& c, const InvariantFeatures& f, const CostWeights& cw);
[[nodiscard]] CostGradient gradient(const Candidate& c, const InvariantFeatures& f, const CostWeights& cw);

enum class OptimizerKind { trust_region, lbfgs };

struct SolveOptions {
    OptimizerKind optimizer = OptimizerKind::trust_region;
    bool weights_fixed = false;
    std::optional<MixingWeights> fixed_weights;  ///< required when weights_fixed
    std::optional<double> P;                    ///< overrides default_P
    int max_iter = 2000;
    double gtol = 1e-10;
    double global_tol = 1e-16;
    double init_scale = 1.0;
    std::uint64_t seed = 0;
};

struct Estimate {
    Candidate candidate;
    double final_cost = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
    int restart_index = 0;
    std::string status;
    bool failed = false;  ///< non-finite cost encountered; candidate is the last finite iterate
};

/// One local optimization from a random start (signals i.i.d. N(0, init_scale^2), weights
/// uniform when free). Weights are optimized through softmax logits with the first pinned to 0.
[[nodiscard]] Estimate solve(const InvariantFeatures& f, std::size_t K, const SolveOptions& opts);

struct MultiStartResult {
    Estimate best;
    RealVector all_costs;
    std::vector<bool> global;  ///< final_cost < opts.global_tol
    std::vector<Estimate> runs;
};

/// R independent solves with seeds derive_seed(opts.seed, r). The best run is the lowest
/// final cost, ties broken by lowest restart index. Runs are spread over `threads` workers.
[[nodiscard]] MultiStartResult multi_start(const InvariantFeatures& f, std::size_t K, std::size_t R,
                                           const SolveOptions& opts, unsigned threads = 1);

}  // namespace hmra
