#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

namespace quadlab::detail {

struct NelderMeadOptions {
    std::size_t max_evals = 20000;
    double f_tol = 1e-12;  // spread of simplex values
    double x_tol = 1e-10;  // simplex diameter
};

struct NelderMeadResult {
    std::vector<double> x;
    double f;
    std::size_t evals;
};

/// Downhill simplex with the standard coefficients (1, 2, 0.5, 0.5).
/// `step[i]` sizes the initial simplex along coordinate i.
template <typename F>
NelderMeadResult nelder_mead(F&& f, std::vector<double> x0, const std::vector<double>& step,
                             const NelderMeadOptions& opt = {}) {
    const std::size_t n = x0.size();
    std::vector<std::vector<double>> pts(n + 1, x0);
    for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += step[i];
    std::vector<double> val(n + 1);
    std::size_t evals = 0;
    auto eval = [&](const std::vector<double>& x) {
        ++evals;
        const double v = f(x);
        return std::isfinite(v) ? v : 1e300;
    };
    for (std::size_t i = 0; i <= n; ++i) val[i] = eval(pts[i]);

    std::vector<std::size_t> order(n + 1);
    auto blend = [&](const std::vector<double>& a, const std::vector<double>& b, double t) {
        std::vector<double> out(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + t * (b[i] - a[i]);
        return out;
    };

    while (evals < opt.max_evals) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return val[a] < val[b]; });
        const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];

        double diam = 0.0;
        for (std::size_t i = 0; i <= n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                diam = std::max(diam, std::abs(pts[i][j] - pts[best][j]));
        if (std::abs(val[worst] - val[best]) <= opt.f_tol * (1.0 + std::abs(val[best])) &&
            diam <= opt.x_tol)
            break;

        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t j = 0; j < n; ++j) centroid[j] += pts[i][j] / static_cast<double>(n);
        }

        const auto refl = blend(centroid, pts[worst], -1.0);
        const double fr = eval(refl);
        if (fr < val[best]) {
            const auto expd = blend(centroid, pts[worst], -2.0);
            const double fe = eval(expd);
            if (fe < fr) {
                pts[worst] = expd;
                val[worst] = fe;
            } else {
                pts[worst] = refl;
                val[worst] = fr;
            }
            continue;
        }
        if (fr < val[second]) {
            pts[worst] = refl;
            val[worst] = fr;
            continue;
        }
        const bool outside = fr < val[worst];
        const auto con = outside ? blend(centroid, refl, 0.5) : blend(centroid, pts[worst], 0.5);
        const double fc = eval(con);
        if (fc < (outside ? fr : val[worst])) {
            pts[worst] = con;
            val[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == best) continue;
            pts[i] = blend(pts[best], pts[i], 0.5);
            val[i] = eval(pts[i]);
        }
    }
    const auto it = std::min_element(val.begin(), val.end());
    const auto k = static_cast<std::size_t>(it - val.begin());
    return {pts[k], val[k], evals};
}

} // namespace quadlab::detail
