#pragma once

// Exponential chirp and doublet inputs for identification and validation runs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "quadlab/error.hpp"

namespace quadlab {

struct ChirpSpec {
    double c1 = 4.0;
    double c2 = 0.0187;
    double omega_min = 0.3;   // rad/s
    double omega_max = 40.0;  // rad/s
    double amplitude = 4.5;   // command units, 10% of the 45 deg stick limit
    double t_rec = 90.0;      // s
    double trim_pad = 3.0;    // s of zero input before and after
    double dt = 0.01;         // s
};

inline void check_chirp(const ChirpSpec& s) {
    require(s.c1 > 0.0 && s.c2 > 0.0, "chirp constants must be > 0");
    require(s.omega_min > 0.0 && s.omega_min < s.omega_max, "need 0 < omega_min < omega_max");
    require(s.amplitude > 0.0, "chirp amplitude must be > 0");
    require(s.t_rec > 0.0, "record length must be > 0");
    require(s.trim_pad >= 0.0, "trim pad must be >= 0");
    require(s.dt > 0.0, "dt must be > 0");
}

/// K(t) = c2 (exp(c1 t / t_rec) - 1)
inline double chirp_k(const ChirpSpec& s, double t) {
    return s.c2 * (std::exp(s.c1 * t / s.t_rec) - 1.0);
}

/// Instantaneous frequency; not clamped at omega_max.
inline double chirp_omega(const ChirpSpec& s, double t) {
    return s.omega_min + chirp_k(s, t) * (s.omega_max - s.omega_min);
}

struct ChirpSample {
    double delta;
    double phase;  // accumulator after the Euler update
};

/// delta = A sin(phase), then phase += omega(t) dt.
inline ChirpSample chirp_sample(const ChirpSpec& s, double t, double phase) {
    require(t >= 0.0 && t <= s.t_rec + 1e-9, "chirp time outside [0, t_rec]");
    const double delta = s.amplitude * std::sin(phase);
    return {delta, phase + chirp_omega(s, t) * s.dt};
}

struct Signal {
    double dt = 0;
    std::vector<double> t;
    std::vector<double> value;
};

/// Trim pad, sweep, trim pad.
inline Signal chirp_signal(const ChirpSpec& s) {
    check_chirp(s);
    const auto pad = static_cast<std::size_t>(std::llround(s.trim_pad / s.dt));
    const auto n = static_cast<std::size_t>(std::llround(s.t_rec / s.dt));
    Signal out;
    out.dt = s.dt;
    out.value.assign(pad, 0.0);
    double phase = 0.0;
    for (std::size_t k = 0; k <= n; ++k) {
        const auto smp = chirp_sample(s, std::min(static_cast<double>(k) * s.dt, s.t_rec), phase);
        out.value.push_back(smp.delta);
        phase = smp.phase;
    }
    out.value.insert(out.value.end(), pad, 0.0);
    out.t.resize(out.value.size());
    for (std::size_t k = 0; k < out.t.size(); ++k) out.t[k] = static_cast<double>(k) * s.dt;
    return out;
}

/// +A for one pulse width from `start`, -A for the next, zero elsewhere.
inline Signal doublet(double amplitude, double pulse_width, double start, double dt,
                      double duration) {
    require(dt > 0.0 && pulse_width > 0.0 && start >= 0.0, "doublet needs dt, width > 0");
    require(start + 2.0 * pulse_width <= duration + 1e-9, "doublet does not fit in the duration");
    const auto n = static_cast<std::size_t>(std::llround(duration / dt));
    const auto k0 = static_cast<std::size_t>(std::llround(start / dt));
    const auto w = static_cast<std::size_t>(std::llround(pulse_width / dt));
    Signal out;
    out.dt = dt;
    out.t.resize(n);
    out.value.assign(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        out.t[k] = static_cast<double>(k) * dt;
        if (k >= k0 && k < k0 + w) out.value[k] = amplitude;
        else if (k >= k0 + w && k < k0 + 2 * w) out.value[k] = -amplitude;
    }
    return out;
}

} // namespace quadlab
