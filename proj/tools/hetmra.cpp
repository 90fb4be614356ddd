// hetmra: heterogeneous multireference alignment from invariant features.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hetmra/bounds.hpp"
#include "hetmra/em.hpp"
#include "hetmra/experiments.hpp"
#include "hetmra/io.hpp"
#include "hetmra/metrics.hpp"
#include "hetmra/moments.hpp"

namespace fs = std::filesystem;
using namespace hmra;

namespace {

class UserError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

OptimizerKind parse_optimizer(const std::string& s) {
    if (s == "trust-region") return OptimizerKind::trust_region;
    if (s == "lbfgs") return OptimizerKind::lbfgs;
    throw UserError("unknown optimizer '" + s + "' (expected trust-region or lbfgs)");
}

std::vector<std::size_t> range(std::size_t lo, std::size_t hi) {
    if (lo > hi) throw UserError("empty range " + std::to_string(lo) + ".." + std::to_string(hi));
    std::vector<std::size_t> v;
    for (std::size_t i = lo; i <= hi; ++i) v.push_back(i);
    return v;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p);
    if (!out) throw io::IoError("cannot open " + p.string() + " for writing");
    return out;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw io::IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

// key=value lines; '#' starts a comment.
std::vector<std::string> read_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw io::IoError("cannot open config " + path.string());
    std::vector<std::string> args;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw UserError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
        }
        args.push_back("--" + trim(line.substr(0, eq)) + "=" + trim(line.substr(eq + 1)));
    }
    return args;
}

// Splices config-file options after the subcommand name; command-line values win.
std::vector<std::string> expand_config(std::vector<std::string> args) {
    fs::path config;
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            config = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            config = args[i].substr(9);
        } else {
            rest.push_back(args[i]);
        }
    }
    if (config.empty()) return rest;
    std::set<std::string> given;
    for (const auto& a : rest) {
        if (a.rfind("--", 0) == 0) given.insert(a.substr(0, a.find('=')));
    }
    std::vector<std::string> extra;
    for (auto& a : read_config(config)) {
        if (!given.contains(a.substr(0, a.find('=')))) extra.push_back(std::move(a));
    }
    const auto sub = std::find_if(rest.begin(), rest.end(), [](const std::string& a) { return a.rfind("-", 0) != 0; });
    if (sub == rest.end()) throw UserError("--config requires a subcommand");
    rest.insert(sub + 1, extra.begin(), extra.end());
    return rest;
}

void print_estimate_summary(const Estimate& e) {
    std::cout << "cost " << e.final_cost << "  grad_norm " << e.grad_norm << "  iterations " << e.iterations
              << "  status " << e.status << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Estimate K signals from noisy, cyclically shifted, unlabeled observations"};
    app.require_subcommand(1);
    app.add_option("--config", "key=value file with option defaults for the subcommand");

    // simulate
    auto* sim = app.add_subcommand("simulate", "draw ground truth and write an observation file");
    std::size_t sim_K = 2, sim_L = 20;
    std::uint64_t sim_N = 10000, sim_seed = 1;
    std::size_t sim_batch = 65536;
    double sim_sigma = 1.0;
    std::string sim_weights = "uniform", sim_truth, sim_obs, sim_labels;
    sim->add_option("--K", sim_K, "number of signals")->check(CLI::PositiveNumber);
    sim->add_option("--L", sim_L, "signal length")->check(CLI::Range(2, 1 << 20));
    sim->add_option("--N", sim_N, "number of observations")->check(CLI::PositiveNumber);
    sim->add_option("--sigma", sim_sigma, "noise standard deviation")->check(CLI::NonNegativeNumber);
    sim->add_option("--seed", sim_seed);
    sim->add_option("--weights", sim_weights, "uniform, random, or a comma-separated list");
    sim->add_option("--batch", sim_batch, "observations generated per batch")->check(CLI::PositiveNumber);
    sim->add_option("--truth", sim_truth, "ground-truth JSON output")->required();
    sim->add_option("--obs", sim_obs, "observation file output")->required();
    sim->add_option("--labels", sim_labels, "write latent shift,class labels to this CSV");

    // moments
    auto* mom = app.add_subcommand("moments", "stream an observation file into invariant features");
    std::string mom_obs, mom_out;
    unsigned mom_threads = 1;
    std::size_t mom_batch = 65536;
    mom->add_option("--obs", mom_obs)->required();
    mom->add_option("--out", mom_out, "features JSON")->required();
    mom->add_option("--threads", mom_threads)->check(CLI::PositiveNumber);
    mom->add_option("--batch", mom_batch)->check(CLI::PositiveNumber);

    // exact-moments
    auto* exm = app.add_subcommand("exact-moments", "population-limit features of a ground truth");
    std::string exm_truth, exm_out;
    double exm_sigma = -1.0;
    exm->add_option("--truth", exm_truth)->required();
    exm->add_option("--out", exm_out)->required();
    exm->add_option("--sigma", exm_sigma, "noise level (default: the truth's sigma)");

    // solve
    auto* sol = app.add_subcommand("solve", "recover signals from invariant features");
    std::string sol_features, sol_out, sol_optimizer = "trust-region", sol_fixed;
    std::size_t sol_K = 2, sol_restarts = 1;
    std::uint64_t sol_seed = 1;
    unsigned sol_threads = 1;
    double sol_P = 0.0, sol_gtol = 1e-10, sol_init_scale = 1.0;
    int sol_max_iter = 2000;
    sol->add_option("--features", sol_features)->required();
    sol->add_option("--K", sol_K)->check(CLI::PositiveNumber);
    sol->add_option("--out", sol_out, "estimate JSON")->required();
    sol->add_option("--restarts", sol_restarts)->check(CLI::PositiveNumber);
    sol->add_option("--seed", sol_seed);
    sol->add_option("--threads", sol_threads)->check(CLI::PositiveNumber);
    sol->add_option("--optimizer", sol_optimizer, "trust-region or lbfgs");
    sol->add_option("--fixed-weights", sol_fixed, "uniform or a comma-separated list; omit to estimate weights");
    sol->add_option("--P", sol_P, "power-spectrum level in the cost weights (default: from the features)");
    sol->add_option("--gtol", sol_gtol);
    sol->add_option("--max-iter", sol_max_iter)->check(CLI::PositiveNumber);
    sol->add_option("--init-scale", sol_init_scale)->check(CLI::PositiveNumber);

    // em
    auto* emc = app.add_subcommand("em", "expectation-maximization baseline on an observation file");
    std::string em_obs, em_out;
    std::size_t em_K = 2, em_batch = 4096;
    EmConfig em_cfg;
    double em_sigma = -1.0;
    em_cfg.seed = 1;
    emc->add_option("--obs", em_obs)->required();
    emc->add_option("--K", em_K)->check(CLI::PositiveNumber);
    emc->add_option("--out", em_out)->required();
    emc->add_option("--sigma", em_sigma, "noise level (default: from the file header)");
    emc->add_option("--sigma0-sq", em_cfg.sigma0_sq, "prior variance");
    emc->add_option("--max-iter", em_cfg.max_iter);
    emc->add_option("--tol", em_cfg.conv_tol_per_K, "stop when iterates differ by less than K * tol");
    emc->add_option("--seed", em_cfg.seed);
    emc->add_option("--threads", em_cfg.threads)->check(CLI::PositiveNumber);
    emc->add_option("--batch", em_batch)->check(CLI::PositiveNumber);

    // eval
    auto* ev = app.add_subcommand("eval", "compare an estimate with the ground truth");
    std::string ev_truth, ev_est;
    bool ev_json = false;
    ev->add_option("--truth", ev_truth)->required();
    ev->add_option("--estimate", ev_est)->required();
    ev->add_flag("--json", ev_json, "print JSON instead of text");

    // bound
    auto* bd = app.add_subcommand("bound", "information-count bound on K as a function of L");
    std::size_t bd_Lmin = 2, bd_Lmax = 100;
    std::string bd_out;
    bd->add_option("--Lmin", bd_Lmin)->check(CLI::Range(2, 1 << 16));
    bd->add_option("--Lmax", bd_Lmax)->check(CLI::Range(2, 1 << 16));
    bd->add_option("--out", bd_out, "CSV path (default: stdout)");

    // exp1 / exp2
    struct GridArgs {
        std::size_t Lmin = 2, Lmax = 36, Kmin = 1, Kmax = 6, restarts = 30;
        std::uint64_t seed = 1;
        unsigned threads = 1;
        int max_iter = 2000;
        std::string optimizer = "trust-region", out_dir = "results";
        bool paper_scale = false;
    };
    GridArgs g1, g2;
    auto add_grid = [](CLI::App* sub, GridArgs& g) {
        sub->add_option("--Lmin", g.Lmin)->check(CLI::Range(2, 1 << 16));
        sub->add_option("--Lmax", g.Lmax)->check(CLI::Range(2, 1 << 16));
        sub->add_option("--Kmin", g.Kmin)->check(CLI::PositiveNumber);
        sub->add_option("--Kmax", g.Kmax)->check(CLI::PositiveNumber);
        sub->add_option("--restarts", g.restarts)->check(CLI::PositiveNumber);
        sub->add_option("--seed", g.seed);
        sub->add_option("--threads", g.threads)->check(CLI::PositiveNumber);
        sub->add_option("--max-iter", g.max_iter)->check(CLI::PositiveNumber);
        sub->add_option("--optimizer", g.optimizer);
        sub->add_option("--out-dir", g.out_dir);
        sub->add_flag("--paper-scale", g.paper_scale, "L in 2..100, K in 1..10");
    };
    auto* e1 = app.add_subcommand("exp1", "exact features, uniform known weights, (L, K) grid");
    auto* e2 = app.add_subcommand("exp2", "exact features, random unknown weights, (L, K) grid");
    add_grid(e1, g1);
    add_grid(e2, g2);

    // exp3
    auto* e3 = app.add_subcommand("exp3", "invariant features versus EM across noise levels");
    NoiseConfig n3 = default_noise();
    std::string e3_dir = "results", e3_optimizer = "trust-region";
    bool e3_paper = false, e3_no_em = false;
    std::vector<double> e3_sigmas;
    e3->add_option("--L", n3.L)->check(CLI::Range(2, 1 << 16));
    e3->add_option("--K", n3.K)->check(CLI::PositiveNumber);
    e3->add_option("--N", n3.N)->check(CLI::PositiveNumber);
    e3->add_option("--sigmas", e3_sigmas, "comma-separated noise levels")->delimiter(',');
    e3->add_option("--trials", n3.trials)->check(CLI::PositiveNumber);
    e3->add_option("--restarts", n3.restarts)->check(CLI::PositiveNumber);
    e3->add_option("--seed", n3.seed);
    e3->add_option("--threads", n3.threads)->check(CLI::PositiveNumber);
    e3->add_option("--em-max-iter", n3.em_max_iter)->check(CLI::PositiveNumber);
    e3->add_option("--optimizer", e3_optimizer);
    e3->add_option("--out-dir", e3_dir);
    e3->add_flag("--no-em", e3_no_em, "skip the EM baseline");
    e3->add_flag("--paper-scale", e3_paper, "L = 50, N = 1e6, 6 trials, sigma from 0.1 to 10");

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        args = expand_config(std::move(args));
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (*sim) {
            GroundTruth truth;
            truth.sigma = sim_sigma;
            truth.signals = generate_signals(sim_K, sim_L, derive_seed(sim_seed, 0));
            if (sim_weights == "uniform") {
                truth.weights = generate_weights(sim_K, WeightMode::uniform, 0);
            } else if (sim_weights == "random") {
                truth.weights = generate_weights(sim_K, WeightMode::random, derive_seed(sim_seed, 1));
            } else {
                std::vector<double> w;
                std::stringstream ss(sim_weights);
                for (std::string tok; std::getline(ss, tok, ',');) w.push_back(std::stod(tok));
                if (w.size() != sim_K) throw UserError("--weights must list exactly K values");
                truth.weights = generate_weights(sim_K, WeightMode::given, 0, w);
            }
            validate(truth);
            io::write_json(sim_truth, io::to_json(truth));
            io::ObservationWriter writer(sim_obs, {static_cast<std::uint32_t>(sim_L), sim_N, sim_sigma});
            std::ofstream labels;
            if (!sim_labels.empty()) {
                labels = open_out(sim_labels);
                labels << "shift,class\n";
            }
            ObservationStream stream(truth, sim_N, derive_seed(sim_seed, 2));
            ObservationBatch batch;
            while (stream.next(sim_batch, batch) > 0) {
                writer.write(batch);
                if (labels.is_open()) io::write_labels(labels, batch);
            }
            writer.close();
            std::cout << "wrote " << sim_N << " observations of length " << sim_L << " to " << sim_obs << "\n";
        } else if (*mom) {
            io::ObservationReader reader(mom_obs);
            MomentAccumulator acc(reader.header().L);
            ObservationBatch batch;
            // Whole blocks per read keep the reduction order independent of --batch and --threads.
            const std::size_t chunk = (mom_batch + kMomentBlock - 1) / kMomentBlock * kMomentBlock;
            while (reader.read(chunk, batch) > 0) accumulate_into(acc, batch, mom_threads);
            if (acc.count() == 0) throw UserError("observation file is empty");
            io::write_json(mom_out, io::to_json(acc.finalize(reader.header().sigma)));
            std::cout << "accumulated " << acc.count() << " observations\n";
        } else if (*exm) {
            const auto truth = io::truth_from_json(io::read_json(exm_truth));
            const double sigma = exm_sigma >= 0.0 ? exm_sigma : truth.sigma;
            io::write_json(exm_out, io::to_json(analytic_features(truth.signals, truth.weights, sigma)));
        } else if (*sol) {
            const auto f = io::features_from_json(io::read_json(sol_features));
            SolveOptions opts;
            opts.optimizer = parse_optimizer(sol_optimizer);
            opts.seed = sol_seed;
            opts.gtol = sol_gtol;
            opts.max_iter = sol_max_iter;
            opts.init_scale = sol_init_scale;
            if (sol_P > 0.0) opts.P = sol_P;
            if (!sol_fixed.empty()) {
                opts.weights_fixed = true;
                if (sol_fixed == "uniform") {
                    opts.fixed_weights = MixingWeights::uniform(sol_K);
                } else {
                    std::vector<double> w;
                    std::stringstream ss(sol_fixed);
                    for (std::string tok; std::getline(ss, tok, ',');) w.push_back(std::stod(tok));
                    if (w.size() != sol_K) throw UserError("--fixed-weights must list exactly K values");
                    opts.fixed_weights = MixingWeights(w);
                }
            }
            const auto ms = multi_start(f, sol_K, sol_restarts, opts, sol_threads);
            io::write_json(sol_out, io::to_json(ms.best, "invariants"));
            std::size_t n_global = std::count(ms.global.begin(), ms.global.end(), true);
            std::cout << "best of " << sol_restarts << " (restart " << ms.best.restart_index << ", " << n_global
                      << " below global threshold): ";
            print_estimate_summary(ms.best);
            if (ms.best.failed) return 2;
        } else if (*emc) {
            io::ObservationFileSource source(em_obs);
            em_cfg.sigma = em_sigma >= 0.0 ? em_sigma : source.sigma();
            em_cfg.batch_size = em_batch;
            const auto res = run_em(source, em_K, em_cfg);
            auto j = io::to_json(res.estimate, "em");
            j["diagnostics"]["starved_events"] = res.starved_events;
            j["diagnostics"]["hit_iteration_cap"] = res.hit_iteration_cap;
            j["diagnostics"]["log_posterior"] = res.log_posterior;
            io::write_json(em_out, j);
            std::cout << "EM " << (res.hit_iteration_cap ? "hit the iteration cap" : "converged") << " after "
                      << res.estimate.iterations << " iterations; starved events " << res.starved_events << "\n";
        } else if (*ev) {
            const auto truth = io::truth_from_json(io::read_json(ev_truth));
            const auto est = io::estimate_from_json(io::read_json(ev_est));
            if (est.candidate.signals.count() != truth.signals.count() ||
                est.candidate.signals.length() != truth.signals.length()) {
                throw UserError("estimate and truth dimensions differ");
            }
            const auto m = match_sets(truth.signals, est.candidate.signals);
            const double rel = relative_error(truth.signals, est.candidate.signals);
            const double tv = tv_dist(truth.weights, est.candidate.weights, m.permutation);
            if (ev_json) {
                nlohmann::json j;
                j["relative_error"] = rel;
                j["tv_dist"] = tv;
                j["permutation"] = m.permutation;
                j["shifts"] = m.shifts;
                std::cout << j.dump(2) << "\n";
            } else {
                std::cout << "relative_error " << rel << "\ntv_dist " << tv << "\n";
            }
        } else if (*bd) {
            if (bd_Lmin > bd_Lmax) throw UserError("--Lmin exceeds --Lmax");
            std::ofstream file;
            if (!bd_out.empty()) file = open_out(bd_out);
            std::ostream& out = bd_out.empty() ? std::cout : file;
            out << "L,max_K_known_w,max_K_unknown_w\n";
            for (std::size_t L = bd_Lmin; L <= bd_Lmax; ++L) {
                out << L << ',' << max_K(L, false) << ',' << max_K(L, true) << '\n';
            }
        } else if (*e1 || *e2) {
            const bool unknown = static_cast<bool>(*e2);
            const GridArgs& g = unknown ? g2 : g1;
            GridConfig cfg;
            if (g.paper_scale) {
                cfg.L_values = range(2, 100);
                cfg.K_values = range(1, 10);
            } else {
                cfg.L_values = range(g.Lmin, g.Lmax);
                cfg.K_values = range(g.Kmin, g.Kmax);
            }
            cfg.restarts = g.restarts;
            cfg.seed = g.seed;
            cfg.threads = g.threads;
            cfg.max_iter = g.max_iter;
            cfg.optimizer = parse_optimizer(g.optimizer);
            const auto cells = unknown ? experiment2(cfg) : experiment1(cfg);
            const fs::path dir = g.out_dir;
            ensure_dir(dir);
            const std::string tag = unknown ? "exp2" : "exp1";
            {
                auto out = open_out(dir / (tag + ".csv"));
                write_grid_csv(out, cells);
            }
            auto svg = [&](const char* name, GridMetric m, const char* title) {
                auto out = open_out(dir / (tag + "_" + name + ".svg"));
                write_grid_svg(out, cells, m, unknown, title);
            };
            svg("global", GridMetric::global_fraction, "Fraction of runs reaching a global optimum");
            svg("error", GridMetric::worst_error, "Worst relative error among global runs (log10)");
            svg("cpu", GridMetric::cpu_seconds, "CPU time per cell in seconds (log10)");
            if (unknown) svg("tv", GridMetric::worst_tv, "Worst TV distance among global runs (log10)");
            std::size_t failed = 0;
            for (const auto& c : cells) failed += c.error.empty() ? 0 : 1;
            std::cout << tag << ": " << cells.size() << " cells written to " << dir.string();
            if (failed > 0) std::cout << " (" << failed << " cells failed)";
            std::cout << "\n";
        } else if (*e3) {
            if (e3_paper) {
                n3.L = 50;
                n3.N = 1000000;
                n3.trials = 6;
            }
            if (!e3_sigmas.empty()) n3.sigmas = e3_sigmas;
            n3.optimizer = parse_optimizer(e3_optimizer);
            n3.run_em = !e3_no_em;
            const auto rows = experiment3(n3);
            const fs::path dir = e3_dir;
            ensure_dir(dir);
            {
                auto out = open_out(dir / "exp3.csv");
                write_noise_csv(out, rows);
            }
            {
                auto out = open_out(dir / "exp3_error.svg");
                write_noise_svg(out, rows, false, n3.seed);
            }
            {
                auto out = open_out(dir / "exp3_time.svg");
                write_noise_svg(out, rows, true, n3.seed);
            }
            std::cout << "exp3: " << rows.size() << " rows written to " << dir.string() << "\n";
        }
    } catch (const UserError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const io::FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const io::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
