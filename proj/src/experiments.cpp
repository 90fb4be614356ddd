#include "hetmra/experiments.hpp"

#include <time.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "hetmra/metrics.hpp"
#include "hetmra/moments.hpp"

namespace hmra {

namespace {

double thread_cpu_seconds() {
    timespec ts{};
    clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
    return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Runs fn(i) for i in [0, n) on up to `threads` workers, handing out indices in order.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) fn(i);
    };
    if (threads <= 1 || n <= 1) {
        worker();
        return;
    }
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < std::min<std::size_t>(threads, n); ++t) pool.emplace_back(worker);
}

std::vector<GridCell> run_grid(const GridConfig& cfg, bool weights_unknown) {
    cfg.validate();
    std::vector<std::pair<std::size_t, std::size_t>> jobs;
    for (auto L : cfg.L_values)
        for (auto K : cfg.K_values) jobs.emplace_back(L, K);
    std::vector<GridCell> cells(jobs.size());
    parallel_for(jobs.size(), cfg.threads, [&](std::size_t i) {
        cells[i] = run_grid_cell(jobs[i].first, jobs[i].second, weights_unknown, cfg);
    });
    return cells;
}

// Observations regenerated from their seed on every pass.
class RegeneratedSource final : public ObservationSource {
public:
    RegeneratedSource(const GroundTruth& truth, std::uint64_t N, std::uint64_t seed)
        : truth_(&truth), N_(N), seed_(seed) {}
    [[nodiscard]] std::size_t length() const override { return truth_->signals.length(); }
    [[nodiscard]] std::uint64_t size() const override { return N_; }
    void for_each_batch(std::size_t batch_size,
                        const std::function<void(const ObservationBatch&)>& fn) const override {
        ObservationStream stream(*truth_, N_, seed_);
        ObservationBatch batch;
        while (stream.next(batch_size, batch) > 0) fn(batch);
    }

private:
    const GroundTruth* truth_;
    std::uint64_t N_;
    std::uint64_t seed_;
};

constexpr std::uint64_t kInMemoryLimit = 50'000'000;  // doubles

}  // namespace

void GridConfig::validate() const {
    if (L_values.empty() || K_values.empty()) throw std::invalid_argument("grid ranges must be non-empty");
    for (auto L : L_values)
        if (L < 2) throw std::invalid_argument("grid L values must be >= 2");
    for (auto K : K_values)
        if (K < 1) throw std::invalid_argument("grid K values must be >= 1");
    if (restarts < 1) throw std::invalid_argument("restarts must be >= 1");
    if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
}

GridConfig default_grid() {
    GridConfig cfg;
    for (std::size_t L = 2; L <= 36; ++L) cfg.L_values.push_back(L);
    for (std::size_t K = 1; K <= 6; ++K) cfg.K_values.push_back(K);
    return cfg;
}

GridCell run_grid_cell(std::size_t L, std::size_t K, bool weights_unknown, const GridConfig& cfg) {
    GridCell cell;
    cell.L = L;
    cell.K = K;
    cell.worst_global_error = std::numeric_limits<double>::quiet_NaN();
    cell.worst_global_tv = std::numeric_limits<double>::quiet_NaN();
    cell.best_cost = std::numeric_limits<double>::infinity();
    const double t0 = thread_cpu_seconds();
    try {
        const std::uint64_t cell_seed = derive_seed(cfg.seed, L * 1000 + K);
        const auto truth = generate_signals(K, L, derive_seed(cell_seed, 0));
        const auto w = generate_weights(K, weights_unknown ? WeightMode::random : WeightMode::uniform,
                                        derive_seed(cell_seed, 1));
        cell.min_weight = *std::min_element(w.values().begin(), w.values().end());
        const auto f = analytic_features(truth, w, 0.0);

        SolveOptions opts;
        opts.optimizer = cfg.optimizer;
        opts.max_iter = cfg.max_iter;
        opts.seed = derive_seed(cell_seed, 2);
        opts.weights_fixed = !weights_unknown;
        if (!weights_unknown) opts.fixed_weights = w;
        const auto ms = multi_start(f, K, cfg.restarts, opts, 1);

        cell.runs = ms.runs.size();
        cell.best_cost = ms.best.final_cost;
        double worst_err = -1.0;
        double worst_tv = -1.0;
        for (std::size_t r = 0; r < ms.runs.size(); ++r) {
            const auto& run = ms.runs[r];
            if (run.failed) ++cell.failed_runs;
            if (!ms.global[r]) continue;
            ++cell.global_runs;
            const auto m = match_sets(truth, run.candidate.signals);
            worst_err = std::max(worst_err, relative_error(truth, run.candidate.signals));
            if (weights_unknown) worst_tv = std::max(worst_tv, tv_dist(w, run.candidate.weights, m.permutation));
        }
        if (worst_err >= 0.0) cell.worst_global_error = worst_err;
        if (worst_tv >= 0.0) cell.worst_global_tv = worst_tv;
    } catch (const std::exception& e) {
        cell.error = e.what();
    }
    cell.cpu_seconds = thread_cpu_seconds() - t0;
    return cell;
}

std::vector<GridCell> experiment1(const GridConfig& cfg) { return run_grid(cfg, false); }
std::vector<GridCell> experiment2(const GridConfig& cfg) { return run_grid(cfg, true); }

void write_grid_csv(std::ostream& out, const std::vector<GridCell>& cells) {
    out << "L,K,runs,global_runs,global_fraction,failed_runs,best_cost,worst_global_error,worst_global_tv,"
           "min_weight,cpu_seconds,error\n";
    out.precision(10);
    for (const auto& c : cells) {
        out << c.L << ',' << c.K << ',' << c.runs << ',' << c.global_runs << ',' << c.global_fraction() << ','
            << c.failed_runs << ',' << c.best_cost << ',' << c.worst_global_error << ',' << c.worst_global_tv << ','
            << c.min_weight << ',' << c.cpu_seconds << ',' << '"' << c.error << '"' << '\n';
    }
}

void NoiseConfig::validate() const {
    if (L < 2) throw std::invalid_argument("L must be >= 2");
    if (K < 1) throw std::invalid_argument("K must be >= 1");
    if (N < 1) throw std::invalid_argument("N must be >= 1");
    if (sigmas.empty()) throw std::invalid_argument("sigma grid must be non-empty");
    for (double s : sigmas)
        if (!(s > 0.0)) throw std::invalid_argument("sigma values must be positive");
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    if (restarts < 1) throw std::invalid_argument("restarts must be >= 1");
    if (em_max_iter < 1) throw std::invalid_argument("em_max_iter must be >= 1");
}

NoiseConfig default_noise() {
    NoiseConfig cfg;
    for (int i = 0; i <= 8; ++i) cfg.sigmas.push_back(std::pow(10.0, -1.0 + 0.25 * i));
    return cfg;
}

std::vector<NoiseTrial> run_noise_trial(double sigma, std::size_t trial, const NoiseConfig& cfg) {
    const std::uint64_t trial_seed = derive_seed(cfg.seed, trial);
    const std::uint64_t sigma_seed = derive_seed(trial_seed, static_cast<std::uint64_t>(std::llround(sigma * 1e6)));
    GroundTruth truth;
    truth.signals = generate_signals(cfg.K, cfg.L, derive_seed(trial_seed, 0));
    truth.weights = MixingWeights::uniform(cfg.K);
    truth.sigma = sigma;
    const std::uint64_t obs_seed = derive_seed(sigma_seed, 1);

    ObservationBatch batch;
    const bool in_memory = cfg.N * cfg.L <= kInMemoryLimit;
    if (in_memory) batch = generate_observations(truth, cfg.N, obs_seed);
    RegeneratedSource regenerated(truth, cfg.N, obs_seed);
    InMemorySource memory(batch);
    const ObservationSource& source = in_memory ? static_cast<const ObservationSource&>(memory) : regenerated;

    std::vector<NoiseTrial> rows;
    NoiseTrial base;
    base.sigma = sigma;
    base.trial = trial;
    base.N = cfg.N;

    {
        NoiseTrial row = base;
        row.method = "invariants";
        try {
            const auto t0 = std::chrono::steady_clock::now();
            MomentAccumulator acc(cfg.L);
            source.for_each_batch(64 * kMomentBlock,
                                  [&](const ObservationBatch& b) { accumulate_into(acc, b, cfg.threads); });
            const auto f = acc.finalize(sigma);
            SolveOptions opts;
            opts.optimizer = cfg.optimizer;
            opts.seed = derive_seed(sigma_seed, 2);
            const auto ms = multi_start(f, cfg.K, cfg.restarts, opts, cfg.threads);
            row.wall_seconds = seconds_since(t0);
            const auto m = match_sets(truth.signals, ms.best.candidate.signals);
            row.relative_error = relative_error(truth.signals, ms.best.candidate.signals);
            row.tv = tv_dist(truth.weights, ms.best.candidate.weights, m.permutation);
            row.iterations = ms.best.iterations;
            if (ms.best.failed) row.error = ms.best.status;
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        rows.push_back(row);
    }

    if (cfg.run_em) {
        NoiseTrial row = base;
        row.method = "em";
        try {
            EmConfig ec;
            ec.sigma = sigma;
            ec.max_iter = cfg.em_max_iter;
            ec.seed = derive_seed(sigma_seed, 3);
            ec.threads = cfg.threads;
            const auto t0 = std::chrono::steady_clock::now();
            const auto em = run_em(source, cfg.K, ec);
            row.wall_seconds = seconds_since(t0);
            const auto& est = em.estimate.candidate;
            const auto m = match_sets(truth.signals, est.signals);
            row.relative_error = relative_error(truth.signals, est.signals);
            row.tv = tv_dist(truth.weights, est.weights, m.permutation);
            row.iterations = em.estimate.iterations;
            row.starved_events = static_cast<int>(em.starved_events);
            row.hit_cap = em.hit_iteration_cap;
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        rows.push_back(row);
    }
    return rows;
}

std::vector<NoiseTrial> experiment3(const NoiseConfig& cfg) {
    cfg.validate();
    std::vector<NoiseTrial> rows;
    for (double sigma : cfg.sigmas) {
        for (std::size_t t = 0; t < cfg.trials; ++t) {
            auto r = run_noise_trial(sigma, t, cfg);
            rows.insert(rows.end(), r.begin(), r.end());
        }
    }
    return rows;
}

void write_noise_csv(std::ostream& out, const std::vector<NoiseTrial>& rows) {
    out << "sigma,trial,N,method,relative_error,tv,wall_seconds,iterations,starved_events,hit_cap,error\n";
    out.precision(10);
    for (const auto& r : rows) {
        out << r.sigma << ',' << r.trial << ',' << r.N << ',' << r.method << ',' << r.relative_error << ',' << r.tv
            << ',' << r.wall_seconds << ',' << r.iterations << ',' << r.starved_events << ',' << (r.hit_cap ? 1 : 0)
            << ',' << '"' << r.error << '"' << '\n';
    }
}

}  // namespace hmra
