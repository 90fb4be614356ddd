#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "hetmra/em.hpp"
#include "hetmra/solver.hpp"

namespace hmra {

/// Grid for the infinite-data experiments (exact features at sigma = 0).
struct GridConfig {
    std::vector<std::size_t> L_values;
    std::vector<std::size_t> K_values;
    std::size_t restarts = 30;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    OptimizerKind optimizer = OptimizerKind::trust_region;
    int max_iter = 2000;

    void validate() const;
};

/// Desk-scale default: L in 2..36, K in 1..6.
[[nodiscard]] GridConfig default_grid();

struct GridCell {
    std::size_t L = 0;
    std::size_t K = 0;
    std::size_t runs = 0;
    std::size_t global_runs = 0;
    std::size_t failed_runs = 0;
    double best_cost = 0.0;
    double worst_global_error = 0.0;  ///< NaN when no run is global
    double worst_global_tv = 0.0;     ///< NaN when no run is global or weights are known
    double min_weight = 0.0;
    double cpu_seconds = 0.0;
    std::string error;  ///< non-empty when the cell itself failed

    [[nodiscard]] double global_fraction() const {
        return runs == 0 ? 0.0 : static_cast<double>(global_runs) / static_cast<double>(runs);
    }
};

/// Exact-feature recovery over an (L, K) grid with uniform known weights.
[[nodiscard]] std::vector<GridCell> experiment1(const GridConfig& cfg);
/// As experiment1 with random weights that are unknown to the solver.
[[nodiscard]] std::vector<GridCell> experiment2(const GridConfig& cfg);

/// One (L, K) cell; exposed for tests and the acceptance harness.
[[nodiscard]] GridCell run_grid_cell(std::size_t L, std::size_t K, bool weights_unknown, const GridConfig& cfg);

void write_grid_csv(std::ostream& out, const std::vector<GridCell>& cells);

struct NoiseConfig {
    std::size_t L = 20;
    std::size_t K = 2;
    std::uint64_t N = 100000;
    std::vector<double> sigmas;
    std::size_t trials = 5;
    std::size_t restarts = 2;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    OptimizerKind optimizer = OptimizerKind::trust_region;
    int em_max_iter = 10000;
    bool run_em = true;

    void validate() const;
};

/// Desk-scale default: L = 20, K = 2, N = 1e5, sigma on a log grid from 0.1 to 10.
[[nodiscard]] NoiseConfig default_noise();

struct NoiseTrial {
    double sigma = 0.0;
    std::size_t trial = 0;
    std::uint64_t N = 0;
    std::string method;  ///< "invariants" or "em"
    double relative_error = 0.0;
    double tv = 0.0;
    double wall_seconds = 0.0;
    int iterations = 0;
    int starved_events = 0;
    bool hit_cap = false;
    std::string error;
};

/// Moments + solver versus EM on simulated data.
[[nodiscard]] std::vector<NoiseTrial> experiment3(const NoiseConfig& cfg);

/// One (sigma, trial) pair for both methods.
[[nodiscard]] std::vector<NoiseTrial> run_noise_trial(double sigma, std::size_t trial, const NoiseConfig& cfg);

void write_noise_csv(std::ostream& out, const std::vector<NoiseTrial>& rows);

// SVG figures.
enum class GridMetric { global_fraction, worst_error, cpu_seconds, worst_tv };

void write_grid_svg(std::ostream& out, const std::vector<GridCell>& cells, GridMetric metric, bool weights_unknown,
                    const std::string& title);
void write_noise_svg(std::ostream& out, const std::vector<NoiseTrial>& rows, bool timing, std::uint64_t seed);

}  // namespace hmra
