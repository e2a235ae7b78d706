#pragma once

// Derivative-free minimisers: golden-section (scalar) and Nelder-Mead (N-d).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>

namespace eesm::opt {

struct ScalarMinimum {
    double x = 0.0;
    double fx = 0.0;
    int evaluations = 0;
};

/// Golden-section search for a unimodal f on [a, b]; stops once b - a <= width.
template <class F>
ScalarMinimum golden_section_minimize(F&& f, double a, double b, double width, int max_iterations = 500) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c);
    double fd = f(d);
    int evals = 2;
    for (int it = 0; it < max_iterations && (b - a) > width; ++it) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        ++evals;
    }
    return fc <= fd ? ScalarMinimum{c, fc, evals} : ScalarMinimum{d, fd, evals};
}

template <std::size_t N>
struct SimplexResult {
    std::array<double, N> x{};
    double fx = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct SimplexOptions {
    int max_iterations = 2000;
    double f_tolerance = 1e-10;  // spread of function values across the simplex
    double x_tolerance = 1e-9;   // max vertex distance from the best vertex
};

/// Nelder-Mead with the standard coefficients (1, 2, 0.5, 0.5). Non-finite
/// objective values are treated as +infinity.
template <std::size_t N, class F>
SimplexResult<N> nelder_mead(F&& f, const std::array<double, N>& x0, const std::array<double, N>& step,
                             const SimplexOptions& opts = {}) {
    using Point = std::array<double, N>;
    auto eval = [&](const Point& p) {
        const double v = f(p);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };

    std::array<Point, N + 1> pts;
    std::array<double, N + 1> vals;
    pts[0] = x0;
    for (std::size_t i = 0; i < N; ++i) {
        pts[i + 1] = x0;
        pts[i + 1][i] += step[i];
    }
    for (std::size_t i = 0; i <= N; ++i) vals[i] = eval(pts[i]);

    std::array<std::size_t, N + 1> idx;
    SimplexResult<N> res;
    int it = 0;
    for (; it < opts.max_iterations; ++it) {
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
        const std::size_t best = idx[0];
        const std::size_t worst = idx[N];
        const std::size_t second = idx[N - 1];

        double size = 0.0;
        for (std::size_t i = 0; i <= N; ++i) {
            for (std::size_t k = 0; k < N; ++k) size = std::max(size, std::abs(pts[i][k] - pts[best][k]));
        }
        if (std::isfinite(vals[worst]) && vals[worst] - vals[best] <= opts.f_tolerance && size <= opts.x_tolerance) {
            res.converged = true;
            break;
        }

        Point centroid{};
        for (std::size_t i = 0; i <= N; ++i) {
            if (i == worst) continue;
            for (std::size_t k = 0; k < N; ++k) centroid[k] += pts[i][k] / static_cast<double>(N);
        }
        auto along = [&](double t) {
            Point p;
            for (std::size_t k = 0; k < N; ++k) p[k] = centroid[k] + t * (pts[worst][k] - centroid[k]);
            return p;
        };

        const Point xr = along(-1.0);
        const double fr = eval(xr);
        if (fr < vals[best]) {
            const Point xe = along(-2.0);
            const double fe = eval(xe);
            if (fe < fr) {
                pts[worst] = xe;
                vals[worst] = fe;
            } else {
                pts[worst] = xr;
                vals[worst] = fr;
            }
            continue;
        }
        if (fr < vals[second]) {
            pts[worst] = xr;
            vals[worst] = fr;
            continue;
        }
        const bool outside = fr < vals[worst];
        const Point xc = along(outside ? -0.5 : 0.5);
        const double fc = eval(xc);
        if (fc < (outside ? fr : vals[worst])) {
            pts[worst] = xc;
            vals[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i <= N; ++i) {
            if (i == best) continue;
            for (std::size_t k = 0; k < N; ++k) pts[i][k] = pts[best][k] + 0.5 * (pts[i][k] - pts[best][k]);
            vals[i] = eval(pts[i]);
        }
    }

    const auto best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
    res.x = pts[best];
    res.fx = vals[best];
    res.iterations = it;
    return res;
}

}  // namespace eesm::opt
