#include "hetmra/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>

namespace hmra {

std::string_view to_string(OptimizerStatus s) noexcept {
    switch (s) {
        case OptimizerStatus::converged: return "converged";
        case OptimizerStatus::max_iterations: return "max_iterations";
        case OptimizerStatus::stalled: return "stalled";
        case OptimizerStatus::non_finite: return "non_finite";
    }
    return "unknown";
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

struct Point {
    double alpha = 0.0;
    double value = 0.0;
    double slope = 0.0;
    std::vector<double> x;
    std::vector<double> grad;
};

// Minimizer of the cubic interpolating (a, fa, da) and (b, fb, db), safeguarded to the
// interior of [a, b].
double cubic_step(const Point& a, const Point& b) {
    const double lo = std::min(a.alpha, b.alpha);
    const double hi = std::max(a.alpha, b.alpha);
    const double d1 = a.slope + b.slope - 3.0 * (a.value - b.value) / (a.alpha - b.alpha);
    const double disc = d1 * d1 - a.slope * b.slope;
    double t = 0.5 * (lo + hi);
    if (disc >= 0.0) {
        const double d2 = std::copysign(std::sqrt(disc), b.alpha - a.alpha);
        const double denom = b.slope - a.slope + 2.0 * d2;
        if (denom != 0.0) t = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / denom;
    }
    const double margin = 0.1 * (hi - lo);
    if (!std::isfinite(t) || t < lo + margin || t > hi - margin) t = 0.5 * (lo + hi);
    return t;
}

class LineSearch {
public:
    LineSearch(const SmoothObjective& f, const std::vector<double>& x0, const std::vector<double>& dir,
               double f0, double slope0, const LbfgsOptions& opts, int& evals)
        : f_(f), x0_(x0), dir_(dir), f0_(f0), slope0_(slope0), opts_(opts), evals_(evals) {}

    // Returns true with `out` set to an acceptable point, or false on failure. On failure
    // `out` holds the best point with sufficient decrease, if one was found.
    bool run(double alpha0, Point& out) {
        Point prev{0.0, f0_, slope0_, x0_, {}};
        double alpha = alpha0;
        for (int i = 0; i < opts_.max_line_search; ++i) {
            Point cur = evaluate(alpha);
            if (!std::isfinite(cur.value)) {
                alpha = 0.5 * (prev.alpha + alpha);
                continue;
            }
            if (cur.value > f0_ + opts_.c1 * alpha * slope0_ || (i > 0 && cur.value >= prev.value)) {
                return zoom(prev, cur, out);
            }
            if (std::abs(cur.slope) <= -opts_.c2 * slope0_) {
                out = std::move(cur);
                return true;
            }
            if (cur.slope >= 0.0) return zoom(cur, prev, out);
            prev = std::move(cur);
            alpha *= 2.0;
        }
        return fallback(out);
    }

private:
    Point evaluate(double alpha) {
        Point p;
        p.alpha = alpha;
        p.x.resize(x0_.size());
        p.grad.resize(x0_.size());
        for (std::size_t i = 0; i < x0_.size(); ++i) p.x[i] = x0_[i] + alpha * dir_[i];
        p.value = f_(p.x, p.grad);
        ++evals_;
        p.slope = dot(p.grad, dir_);
        if (std::isfinite(p.value) && p.value < f0_ + opts_.c1 * alpha * slope0_ &&
            (!best_ || p.value < best_->value)) {
            best_ = p;
        }
        return p;
    }

    bool zoom(Point lo, Point hi, Point& out) {
        for (int i = 0; i < opts_.max_line_search; ++i) {
            if (std::abs(hi.alpha - lo.alpha) <= 1e-16 * std::max(1.0, std::abs(lo.alpha))) break;
            const double alpha = cubic_step(lo, hi);
            Point cur = evaluate(alpha);
            if (!std::isfinite(cur.value) || cur.value > f0_ + opts_.c1 * alpha * slope0_ ||
                cur.value >= lo.value) {
                hi = std::move(cur);
            } else {
                if (std::abs(cur.slope) <= -opts_.c2 * slope0_) {
                    out = std::move(cur);
                    return true;
                }
                if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
                lo = std::move(cur);
            }
        }
        return fallback(out);
    }

    bool fallback(Point& out) {
        if (best_) {
            out = *best_;
            return true;
        }
        return false;
    }

    const SmoothObjective& f_;
    const std::vector<double>& x0_;
    const std::vector<double>& dir_;
    double f0_;
    double slope0_;
    const LbfgsOptions& opts_;
    int& evals_;
    std::optional<Point> best_;
};

}  // namespace

OptimizerResult minimize_lbfgs(const SmoothObjective& f, std::vector<double>& x, const LbfgsOptions& opts) {
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

    struct Pair {
        std::vector<double> s, y;
        double rho;
    };
    std::deque<Pair> history;
    std::vector<double> dir(n);
    std::vector<double> alpha_buf;

    int iter = 0;
    result.status = OptimizerStatus::max_iterations;
    while (true) {
        const double gnorm = norm(g);
        result.grad_norm = gnorm;
        if (gnorm <= opts.gtol) {
            result.status = OptimizerStatus::converged;
            break;
        }
        if (iter >= opts.max_iter) break;

        // Two-loop recursion: dir = -H g.
        std::copy(g.begin(), g.end(), dir.begin());
        alpha_buf.assign(history.size(), 0.0);
        for (std::size_t i = history.size(); i-- > 0;) {
            alpha_buf[i] = history[i].rho * dot(history[i].s, dir);
            for (std::size_t j = 0; j < n; ++j) dir[j] -= alpha_buf[i] * history[i].y[j];
        }
        if (!history.empty()) {
            const auto& last = history.back();
            const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
            for (double& d : dir) d *= gamma;
        }
        for (std::size_t i = 0; i < history.size(); ++i) {
            const double beta = history[i].rho * dot(history[i].y, dir);
            for (std::size_t j = 0; j < n; ++j) dir[j] += (alpha_buf[i] - beta) * history[i].s[j];
        }
        for (double& d : dir) d = -d;

        double slope = dot(g, dir);
        if (!(slope < 0.0)) {
            // Not a descent direction: restart from steepest descent.
            history.clear();
            for (std::size_t j = 0; j < n; ++j) dir[j] = -g[j];
            slope = -gnorm * gnorm;
        }
        const double alpha0 = history.empty() ? std::min(1.0, 1.0 / gnorm) : 1.0;

        LineSearch ls(f, x, dir, fx, slope, opts, result.evaluations);
        Point next;
        if (!ls.run(alpha0, next)) {
            if (history.empty()) {
                result.status = OptimizerStatus::stalled;
                break;
            }
            history.clear();
            continue;
        }

        Pair p{std::vector<double>(n), std::vector<double>(n), 0.0};
        for (std::size_t j = 0; j < n; ++j) {
            p.s[j] = next.x[j] - x[j];
            p.y[j] = next.grad[j] - g[j];
        }
        const double sy = dot(p.s, p.y);
        x = std::move(next.x);
        g = std::move(next.grad);
        fx = next.value;
        ++iter;
        if (sy > 1e-300) {
            p.rho = 1.0 / sy;
            history.push_back(std::move(p));
            if (history.size() > opts.memory) history.pop_front();
        }
    }
    result.value = fx;
    result.iterations = iter;
    return result;
}

}  // namespace hmra
