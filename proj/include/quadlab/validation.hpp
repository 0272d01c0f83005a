#pragma once

// Time-domain checks of identified models against doublet responses.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <vector>

#include "quadlab/control.hpp"
#include "quadlab/error.hpp"
#include "quadlab/flight_log.hpp"
#include "quadlab/sysid.hpp"

namespace quadlab {

namespace detail {

inline std::vector<double> poly_mul(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

inline std::vector<double> poly_pow(const std::vector<double>& a, std::size_t n) {
    std::vector<double> out{1.0};
    for (std::size_t i = 0; i < n; ++i) out = poly_mul(out, a);
    return out;
}

/// Strips leading zero coefficients.
inline std::vector<double> trimmed(std::vector<double> c) {
    while (c.size() > 1 && c.front() == 0.0) c.erase(c.begin());
    return c;
}

} // namespace detail

/// Discrete transfer function in powers of z^-1: b[0] + b[1] z^-1 + ...
struct DiscreteTf {
    std::vector<double> b;
    std::vector<double> a;  // a[0] == 1
};

/// Bilinear transform of num(s)/den(s), s = (2/dt)(1 - z^-1)/(1 + z^-1).
inline DiscreteTf bilinear_tf(const std::vector<double>& num_s, const std::vector<double>& den_s,
                              double dt) {
    require(dt > 0.0, "dt must be > 0");
    const auto num = detail::trimmed(num_s);
    const auto den = detail::trimmed(den_s);
    require(den.front() != 0.0, "denominator must be nonzero");
    require(num.size() <= den.size(), "transfer function must be proper");
    const std::size_t n = den.size() - 1;
    const double k = 2.0 / dt;
    const std::vector<double> minus{1.0, -1.0}, plus{1.0, 1.0};

    auto map = [&](const std::vector<double>& c) {
        std::vector<double> out(n + 1, 0.0);
        const std::size_t deg = c.size() - 1;
        for (std::size_t i = 0; i < c.size(); ++i) {
            const std::size_t power = deg - i;  // coefficient of s^power
            const auto term = detail::poly_mul(detail::poly_pow(minus, power),
                                               detail::poly_pow(plus, n - power));
            const double scale = c[i] * std::pow(k, static_cast<double>(power));
            for (std::size_t j = 0; j < term.size(); ++j) out[j] += scale * term[j];
        }
        return out;
    };
    DiscreteTf tf{map(num), map(den)};
    const double a0 = tf.a[0];
    for (auto& v : tf.b) v /= a0;
    for (auto& v : tf.a) v /= a0;
    return tf;
}

/// Direct form II transposed.
inline std::vector<double> filter(const DiscreteTf& tf, const std::vector<double>& x) {
    const std::size_t n = std::max(tf.a.size(), tf.b.size());
    std::vector<double> b = tf.b, a = tf.a;
    b.resize(n, 0.0);
    a.resize(n, 0.0);
    std::vector<double> z(n, 0.0), y(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double out = b[0] * x[k] + z[0];
        for (std::size_t i = 1; i < n; ++i)
            z[i - 1] = b[i] * x[k] - a[i] * out + (i < n - 1 ? z[i] : 0.0);
        y[k] = out;
    }
    return y;
}

/// Delays a series by tau seconds, linearly interpolating between samples.
inline std::vector<double> delay_series(const std::vector<double>& x, double tau, double dt) {
    require(tau >= 0.0 && dt > 0.0, "delay must be >= 0 and dt > 0");
    const double shift = tau / dt;
    const auto whole = static_cast<std::size_t>(std::floor(shift));
    const double frac = shift - static_cast<double>(whole);
    std::vector<double> y(x.size(), 0.0);
    auto at = [&](std::size_t k, std::size_t back) { return k >= back ? x[k - back] : 0.0; };
    for (std::size_t k = 0; k < x.size(); ++k)
        y[k] = (1.0 - frac) * at(k, whole) + frac * at(k, whole + 1);
    return y;
}

/// Model output for a sampled input, starting from rest.
inline std::vector<double> simulate_tf(const LoesModel& m, const std::vector<double>& input,
                                       double dt) {
    return delay_series(filter(bilinear_tf(m.num, m.den, dt), input), m.tau, dt);
}

inline constexpr double kWindowBefore = 0.5;  // s before doublet start
inline constexpr double kWindowAfter = 5.0;   // s after doublet start
inline constexpr double kMaxLag = 1.0;        // s searched by the cross-correlation

struct DoubletMetrics {
    double start_time = 0;
    double window_begin = 0;
    double window_end = 0;
    double rms_error = 0;
    double peak_ratio = 0;  // predicted / measured peak magnitude
    double lag = 0;         // s; positive when the measurement trails the model
    std::vector<double> t, input, measured, predicted;
};

/// Lag (in samples, refined by a parabola) maximizing the cross-correlation
/// of `later` against `earlier`.
inline double xcorr_lag(const std::vector<double>& earlier, const std::vector<double>& later,
                        std::size_t max_lag) {
    const std::size_t n = earlier.size();
    const auto span = static_cast<long>(std::min(max_lag, n > 0 ? n - 1 : 0));
    std::vector<double> c;
    for (long lag = -span; lag <= span; ++lag) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const long j = static_cast<long>(i) + lag;
            if (j >= 0 && j < static_cast<long>(n)) s += earlier[i] * later[static_cast<std::size_t>(j)];
        }
        c.push_back(s);
    }
    const auto best = static_cast<std::size_t>(std::max_element(c.begin(), c.end()) - c.begin());
    double refine = 0.0;
    if (best > 0 && best + 1 < c.size()) {
        const double ym = c[best - 1], y0 = c[best], yp = c[best + 1];
        const double den = ym - 2.0 * y0 + yp;
        if (den < 0.0) refine = 0.5 * (ym - yp) / den;
    }
    return static_cast<double>(static_cast<long>(best) - span) + refine;
}

/// Compares the model driven by the logged stick input with the logged
/// response around the first doublet in the log.
inline DoubletMetrics validate_doublet(const LoesModel& m, const FlightLog& log, Axis axis,
                                       const StickLimits& lim = {}) {
    if (log.size() < 3) throw Error(ErrorCode::missing_channel, "log has fewer than 3 records");
    const double dt = (log.back().t - log.front().t) / static_cast<double>(log.size() - 1);
    const auto input = logged_input(log, axis, lim);
    const auto output = logged_output(log, axis);

    double peak_in = 0.0;
    for (double v : input) peak_in = std::max(peak_in, std::abs(v));
    if (peak_in <= 1e-9) {
        throw Error(ErrorCode::missing_channel,
                    "no " + to_string(axis) + " stick excitation found in the log");
    }
    std::size_t k0 = 0;
    while (std::abs(input[k0]) < 0.05 * peak_in) ++k0;

    // Response about the pre-doublet level.
    const double base_in = k0 > 0 ? input[k0 - 1] : 0.0;
    const double base_out = k0 > 0 ? output[k0 - 1] : output[0];
    std::vector<double> u(input.size());
    for (std::size_t k = 0; k < u.size(); ++k) u[k] = input[k] - base_in;
    const auto pred = simulate_tf(m, u, dt);

    DoubletMetrics r;
    r.start_time = log[k0].t;
    r.window_begin = std::max(log.front().t, r.start_time - kWindowBefore);
    r.window_end = std::min(log.back().t, r.start_time + kWindowAfter);
    double se = 0.0, peak_meas = 0.0, peak_pred = 0.0;
    for (std::size_t k = 0; k < log.size(); ++k) {
        if (log[k].t < r.window_begin - 1e-9 || log[k].t > r.window_end + 1e-9) continue;
        const double meas = output[k] - base_out;
        r.t.push_back(log[k].t);
        r.input.push_back(u[k]);
        r.measured.push_back(meas);
        r.predicted.push_back(pred[k]);
        se += (pred[k] - meas) * (pred[k] - meas);
        peak_meas = std::max(peak_meas, std::abs(meas));
        peak_pred = std::max(peak_pred, std::abs(pred[k]));
    }
    r.rms_error = std::sqrt(se / static_cast<double>(r.t.size()));
    r.peak_ratio = peak_meas > 0.0 ? peak_pred / peak_meas : 0.0;
    const auto max_lag = static_cast<std::size_t>(std::llround(kMaxLag / dt));
    r.lag = xcorr_lag(r.predicted, r.measured, max_lag) * dt;
    return r;
}

/// Overlay table: t, input, measured, predicted.
inline void write_overlay_csv(std::ostream& os, const DoubletMetrics& r) {
    os << "t,input,measured,predicted\n";
    for (std::size_t i = 0; i < r.t.size(); ++i)
        os << format_g6(r.t[i]) << ',' << format_g6(r.input[i]) << ',' << format_g6(r.measured[i])
           << ',' << format_g6(r.predicted[i]) << '\n';
}

} // namespace quadlab
