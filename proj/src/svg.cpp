#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "hetmra/bounds.hpp"
#include "hetmra/experiments.hpp"

namespace hmra {

namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 400;
constexpr double kLeft = 60;
constexpr double kRight = 110;
constexpr double kTop = 40;
constexpr double kBottom = 50;

std::string color(double t) {
    // Piecewise-linear viridis approximation.
    static const std::array<std::array<double, 3>, 5> stops = {{
        {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
    t = std::clamp(t, 0.0, 1.0) * 4.0;
    const auto i = std::min<std::size_t>(3, static_cast<std::size_t>(t));
    const double f = t - static_cast<double>(i);
    std::ostringstream s;
    s << "rgb(";
    for (int c = 0; c < 3; ++c) {
        s << static_cast<int>(std::lround(stops[i][c] + f * (stops[i + 1][c] - stops[i][c])));
        s << (c < 2 ? "," : ")");
    }
    return s.str();
}

void header(std::ostream& out, const std::string& title) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title
        << "</text>\n";
}

struct Scale {
    double lo, hi, px_lo, px_hi;
    double operator()(double v) const { return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo); }
};

}  // namespace

void write_grid_svg(std::ostream& out, const std::vector<GridCell>& cells, GridMetric metric, bool weights_unknown,
                    const std::string& title) {
    header(out, title);
    if (cells.empty()) {
        out << "</svg>\n";
        return;
    }
    std::size_t Lmin = cells[0].L, Lmax = cells[0].L, Kmin = cells[0].K, Kmax = cells[0].K;
    for (const auto& c : cells) {
        Lmin = std::min(Lmin, c.L);
        Lmax = std::max(Lmax, c.L);
        Kmin = std::min(Kmin, c.K);
        Kmax = std::max(Kmax, c.K);
    }
    const Scale x{static_cast<double>(Lmin) - 0.5, static_cast<double>(Lmax) + 0.5, kLeft, kWidth - kRight};
    const Scale y{static_cast<double>(Kmin) - 0.5, static_cast<double>(Kmax) + 0.5, kHeight - kBottom, kTop};

    auto value = [&](const GridCell& c) {
        switch (metric) {
            case GridMetric::global_fraction: return c.global_fraction();
            case GridMetric::worst_error: return std::log10(std::max(c.worst_global_error, 1e-16));
            case GridMetric::cpu_seconds: return std::log10(std::max(c.cpu_seconds, 1e-4));
            case GridMetric::worst_tv: return std::log10(std::max(c.worst_global_tv, 1e-16));
        }
        return 0.0;
    };
    double vmin = std::numeric_limits<double>::infinity();
    double vmax = -vmin;
    for (const auto& c : cells) {
        const double v = value(c);
        if (!std::isfinite(v)) continue;
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
    }
    if (metric == GridMetric::global_fraction) {
        vmin = 0.0;
        vmax = 1.0;
    }
    if (!(vmax > vmin)) vmax = vmin + 1.0;

    const double cw = x(1.0) - x(0.0);
    const double ch = y(0.0) - y(1.0);
    for (const auto& c : cells) {
        const double v = value(c);
        const std::string fill = std::isfinite(v) ? color((v - vmin) / (vmax - vmin)) : "rgb(200,200,200)";
        out << "<rect x=\"" << x(static_cast<double>(c.L) - 0.5) << "\" y=\"" << y(static_cast<double>(c.K) + 0.5)
            << "\" width=\"" << cw << "\" height=\"" << ch << "\" fill=\"" << fill << "\"/>\n";
    }

    // sqrt(L) curve.
    out << "<polyline fill=\"none\" stroke=\"red\" stroke-width=\"2\" points=\"";
    for (int i = 0; i <= 200; ++i) {
        const double L = x.lo + (x.hi - x.lo) * i / 200.0;
        const double K = std::clamp(std::sqrt(std::max(L, 0.0)), y.lo, y.hi);
        out << x(L) << ',' << y(K) << ' ';
    }
    out << "\"/>\n";
    // Information-count bound.
    for (std::size_t L = std::max<std::size_t>(Lmin, 2); L <= Lmax; ++L) {
        const double K = static_cast<double>(max_K(L, weights_unknown)) + 0.5;
        if (K > y.hi) continue;
        out << "<circle cx=\"" << x(static_cast<double>(L)) << "\" cy=\"" << y(K) << "\" r=\"3\" fill=\"red\"/>\n";
    }

    // Axes.
    const std::size_t Lstep = std::max<std::size_t>(1, (Lmax - Lmin + 1) / 10);
    for (std::size_t L = Lmin; L <= Lmax; L += Lstep) {
        out << "<text x=\"" << x(static_cast<double>(L)) << "\" y=\"" << kHeight - kBottom + 15
            << "\" text-anchor=\"middle\">" << L << "</text>\n";
    }
    for (std::size_t K = Kmin; K <= Kmax; ++K) {
        out << "<text x=\"" << kLeft - 8 << "\" y=\"" << y(static_cast<double>(K)) + 4 << "\" text-anchor=\"end\">" << K
            << "</text>\n";
    }
    out << "<text x=\"" << (x.px_lo + x.px_hi) / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">L</text>\n";
    out << "<text x=\"18\" y=\"" << (y.px_lo + y.px_hi) / 2 << "\" text-anchor=\"middle\">K</text>\n";

    // Color bar.
    const double bx = kWidth - kRight + 25;
    for (int i = 0; i < 50; ++i) {
        const double t = i / 49.0;
        out << "<rect x=\"" << bx << "\" y=\"" << y.px_lo - (i + 1) * (y.px_lo - y.px_hi) / 50.0 << "\" width=\"15\" height=\""
            << (y.px_lo - y.px_hi) / 50.0 + 0.5 << "\" fill=\"" << color(t) << "\"/>\n";
    }
    const bool logged = metric != GridMetric::global_fraction;
    out << "<text x=\"" << bx + 20 << "\" y=\"" << y.px_lo << "\">" << (logged ? "1e" : "") << vmin << "</text>\n";
    out << "<text x=\"" << bx + 20 << "\" y=\"" << y.px_hi + 8 << "\">" << (logged ? "1e" : "") << vmax << "</text>\n";
    out << "</svg>\n";
}

void write_noise_svg(std::ostream& out, const std::vector<NoiseTrial>& rows, bool timing, std::uint64_t seed) {
    header(out, timing ? "Wall time (s) vs noise level" : "Relative error vs noise level");
    auto yval = [&](const NoiseTrial& r) {
        return std::log10(std::max(timing ? r.wall_seconds : r.relative_error, 1e-16));
    };
    double smin = std::numeric_limits<double>::infinity(), smax = -smin;
    double vmin = smin, vmax = -smin;
    for (const auto& r : rows) {
        if (!r.error.empty()) continue;
        smin = std::min(smin, std::log10(r.sigma));
        smax = std::max(smax, std::log10(r.sigma));
        vmin = std::min(vmin, yval(r));
        vmax = std::max(vmax, yval(r));
    }
    if (!std::isfinite(smin)) {
        out << "</svg>\n";
        return;
    }
    vmin = std::floor(vmin);
    vmax = std::ceil(vmax);
    if (vmax <= vmin) vmax = vmin + 1;
    const double pad = std::max(0.1, 0.05 * (smax - smin));
    const Scale x{smin - pad, smax + pad, kLeft, kWidth - kRight};
    const Scale y{vmin, vmax, kHeight - kBottom, kTop};

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-0.3 * pad, 0.3 * pad);
    for (const auto& r : rows) {
        if (!r.error.empty()) continue;
        const double px = x(std::log10(r.sigma) + jitter(rng));
        const double py = y(yval(r));
        if (r.method == "em") {
            out << "<path d=\"M" << px - 3 << ',' << py - 3 << " L" << px + 3 << ',' << py + 3 << " M" << px - 3 << ','
                << py + 3 << " L" << px + 3 << ',' << py - 3 << "\" stroke=\"red\" stroke-width=\"1.5\"/>\n";
        } else {
            out << "<circle cx=\"" << px << "\" cy=\"" << py << "\" r=\"3\" fill=\"blue\"/>\n";
        }
    }
    out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kWidth - kRight - kLeft << "\" height=\""
        << kHeight - kBottom - kTop << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double v = vmin; v <= vmax; v += 1.0) {
        out << "<text x=\"" << kLeft - 6 << "\" y=\"" << y(v) + 4 << "\" text-anchor=\"end\">1e" << v << "</text>\n";
    }
    for (double s = std::ceil(smin * 4) / 4; s <= smax + 1e-9; s += 0.5) {
        out << "<text x=\"" << x(s) << "\" y=\"" << kHeight - kBottom + 15 << "\" text-anchor=\"middle\">"
            << std::pow(10.0, s) << "</text>\n";
    }
    out << "<text x=\"" << (x.px_lo + x.px_hi) / 2 << "\" y=\"" << kHeight - 12
        << "\" text-anchor=\"middle\">sigma</text>\n";
    const double lx = kWidth - kRight + 10;
    out << "<circle cx=\"" << lx << "\" cy=\"" << kTop + 10 << "\" r=\"3\" fill=\"blue\"/><text x=\"" << lx + 8
        << "\" y=\"" << kTop + 14 << "\">invariants</text>\n";
    out << "<path d=\"M" << lx - 3 << ',' << kTop + 27 << " L" << lx + 3 << ',' << kTop + 33 << " M" << lx - 3 << ','
        << kTop + 33 << " L" << lx + 3 << ',' << kTop + 27 << "\" stroke=\"red\" stroke-width=\"1.5\"/><text x=\""
        << lx + 8 << "\" y=\"" << kTop + 34 << "\">EM</text>\n";
    out << "</svg>\n";
}

}  // namespace hmra
