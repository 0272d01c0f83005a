#pragma once

// IMU emulation, attitude filters and RC receiver decoding.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "quadlab/dynamics.hpp"

namespace quadlab {

struct ImuSample {
    std::array<double, 3> accel{};  // m/s^2, reads (0, 0, -g) level at rest
    std::array<double, 3> gyro{};   // rad/s
    double t = 0;
};

struct ImuNoise {
    double accel_sigma = 0.3;       // m/s^2, white
    double gyro_sigma = 0.02;       // rad/s, white
    double gyro_bias_init = 0.005;  // rad/s, initial bias on every axis
    double gyro_bias_walk = 5e-4;   // rad/s/sqrt(s), bias random walk

    static ImuNoise none() { return {0.0, 0.0, 0.0, 0.0}; }
};

/// Gravity resolved in body axes (what the accelerometer reads at rest).
inline std::array<double, 3> gravity_body(double phi, double theta, double g) {
    return {g * std::sin(theta), -g * std::cos(theta) * std::sin(phi),
            -g * std::cos(theta) * std::cos(phi)};
}

/// Accelerometer reading: gravity in body axes minus the body-frame
/// acceleration of the centre of mass (negated specific force).
inline std::array<double, 3> accel_reading(const BodyState& s, const ControlEfforts& e,
                                           const VehicleParams& p) {
    const StateVector d = eom_derivative(s, e, p);
    const double ax = d[idx::u] + s.q * s.w - s.r * s.v;
    const double ay = d[idx::v] + s.r * s.u - s.p * s.w;
    const double az = d[idx::w] + s.p * s.v - s.q * s.u;
    const auto gb = gravity_body(s.phi, s.theta, p.g);
    return {gb[0] - ax, gb[1] - ay, gb[2] - az};
}

/// Seeded IMU: white noise on both sensors plus a random-walk gyro bias.
class ImuModel {
public:
    ImuModel(const ImuNoise& noise, std::uint64_t seed) : noise_(noise), rng_(seed) {
        bias_.fill(noise.gyro_bias_init);
    }

    ImuSample sample(const BodyState& s, const ControlEfforts& e, const VehicleParams& p,
                     double t) {
        if (started_ && t > last_t_ && noise_.gyro_bias_walk > 0.0) {
            const double k = noise_.gyro_bias_walk * std::sqrt(t - last_t_);
            for (auto& b : bias_) b += k * normal_(rng_);
        }
        started_ = true;
        last_t_ = t;

        ImuSample out;
        out.t = t;
        out.accel = accel_reading(s, e, p);
        const std::array<double, 3> rates = {s.p, s.q, s.r};
        for (std::size_t i = 0; i < 3; ++i) {
            if (noise_.accel_sigma > 0.0) out.accel[i] += noise_.accel_sigma * normal_(rng_);
            out.gyro[i] = rates[i] + bias_[i];
            if (noise_.gyro_sigma > 0.0) out.gyro[i] += noise_.gyro_sigma * normal_(rng_);
        }
        return out;
    }

    const std::array<double, 3>& bias() const { return bias_; }

private:
    ImuNoise noise_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::array<double, 3> bias_{};
    double last_t_ = 0.0;
    bool started_ = false;
};

struct TiltAngles {
    double roll = 0;   // rad
    double pitch = 0;  // rad
};

/// Roll and pitch from the gravity direction. Rejects near free-fall frames.
inline TiltAngles accel_angles(const ImuSample& s, double g = 9.81) {
    const auto& a = s.accel;
    const double mag = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
    if (!(mag > 0.1 * g)) {
        throw Error(ErrorCode::free_fall, "accelerometer magnitude " + std::to_string(mag) +
                                              " m/s^2 below 0.1 g");
    }
    return {std::atan2(-a[1], -a[2]), std::atan2(a[0], std::sqrt(a[1] * a[1] + a[2] * a[2]))};
}

/// angle = alpha * (angle + gyro * dt) + (1 - alpha) * accel
inline double complementary_step(double angle_prev, double gyro_rate, double accel_angle,
                                 double alpha, double dt) {
    require(alpha >= 0.0 && alpha <= 1.0, "alpha must lie in [0, 1]");
    return alpha * (angle_prev + gyro_rate * dt) + (1.0 - alpha) * accel_angle;
}

// ---------------------------------------------------------------------------
// Low-pass family, realized as one biquad via the prewarped bilinear transform.

enum class FilterKind { complementary, lowpass1, butterworth2, chebyshev1 };

struct FilterConfig {
    FilterKind kind = FilterKind::complementary;
    double alpha = 0.98;
    double cutoff_hz = 5.0;
    double ripple_db = 1.0;  // Chebyshev only
    double sample_rate_hz = 100.0;
};

inline void check_filter(const FilterConfig& c) {
    require(c.alpha >= 0.0 && c.alpha <= 1.0, "filter alpha must lie in [0, 1]");
    require(c.sample_rate_hz > 0.0, "sample rate must be > 0");
    require(c.cutoff_hz > 0.0 && c.cutoff_hz < c.sample_rate_hz / 2.0,
            "cutoff must lie in (0, sample_rate/2)");
    require(c.ripple_db > 0.0, "ripple must be > 0 dB");
}

/// y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2] - a1 y[n-1] - a2 y[n-2]
struct Biquad {
    double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;

    double dc_gain() const { return (b0 + b1 + b2) / (1.0 + a1 + a2); }
};

struct BiquadState {
    double s1 = 0, s2 = 0;  // transposed direct form II
};

/// Bilinear map of (n2 s^2 + n1 s + n0) / (d2 s^2 + d1 s + d0) at `fs`.
inline Biquad bilinear(std::array<double, 3> num, std::array<double, 3> den, double fs) {
    const double k = 2.0 * fs, k2 = k * k;
    auto map = [&](const std::array<double, 3>& c) {
        // c = {c2, c1, c0}
        return std::array<double, 3>{c[0] * k2 + c[1] * k + c[2], 2.0 * (c[2] - c[0] * k2),
                                     c[0] * k2 - c[1] * k + c[2]};
    };
    const auto n = map(num), d = map(den);
    return {n[0] / d[0], n[1] / d[0], n[2] / d[0], d[1] / d[0], d[2] / d[0]};
}

/// Chebyshev type-I analog prototype (order 2, unit passband edge):
/// s^2 + 2 sigma s + (sigma^2 + omega^2).
inline std::pair<double, double> chebyshev2_poles(double ripple_db) {
    const double eps = std::sqrt(std::pow(10.0, ripple_db / 10.0) - 1.0);
    const double mu = std::asinh(1.0 / eps) / 2.0;
    const double a = std::numbers::pi / 4.0;
    return {std::sinh(mu) * std::sin(a), std::cosh(mu) * std::cos(a)};
}

/// Coefficients for the low-pass kinds. Low-pass and Butterworth have unit DC
/// gain; the even-order Chebyshev sits at the bottom of its ripple band at DC,
/// so its DC gain is 10^(-ripple/20).
inline Biquad design_filter(const FilterConfig& c) {
    check_filter(c);
    const double fs = c.sample_rate_hz;
    const double wc = 2.0 * fs * std::tan(std::numbers::pi * c.cutoff_hz / fs);
    switch (c.kind) {
    case FilterKind::lowpass1:
        return bilinear({0.0, 0.0, 1.0}, {0.0, 1.0 / wc, 1.0}, fs);
    case FilterKind::butterworth2:
        return bilinear({0.0, 0.0, wc * wc}, {1.0, std::numbers::sqrt2 * wc, wc * wc}, fs);
    case FilterKind::chebyshev1: {
        const auto [sigma, omega] = chebyshev2_poles(c.ripple_db);
        const double w0sq = (sigma * sigma + omega * omega) * wc * wc;
        const double dc = std::pow(10.0, -c.ripple_db / 20.0);
        return bilinear({0.0, 0.0, dc * w0sq}, {1.0, 2.0 * sigma * wc, w0sq}, fs);
    }
    case FilterKind::complementary:
        break;
    }
    throw Error(ErrorCode::invalid_argument, "complementary is not a single-input filter");
}

struct FilterOutput {
    double y;
    BiquadState state;
};

inline FilterOutput biquad_step(const Biquad& f, BiquadState st, double x) {
    const double y = f.b0 * x + st.s1;
    st.s1 = f.b1 * x - f.a1 * y + st.s2;
    st.s2 = f.b2 * x - f.a2 * y;
    return {y, st};
}

/// State primed to the steady state for a constant input `x`.
inline BiquadState biquad_steady(const Biquad& f, double x) {
    const double y = f.dc_gain() * x;
    BiquadState st;
    st.s2 = f.b2 * x - f.a2 * y;
    st.s1 = f.b1 * x - f.a1 * y + st.s2;
    return st;
}

inline FilterOutput lowpass1_step(BiquadState st, double x, FilterConfig cfg) {
    cfg.kind = FilterKind::lowpass1;
    return biquad_step(design_filter(cfg), st, x);
}

inline FilterOutput butterworth2_step(BiquadState st, double x, FilterConfig cfg) {
    cfg.kind = FilterKind::butterworth2;
    return biquad_step(design_filter(cfg), st, x);
}

inline FilterOutput chebyshev1_step(BiquadState st, double x, FilterConfig cfg) {
    cfg.kind = FilterKind::chebyshev1;
    return biquad_step(design_filter(cfg), st, x);
}

/// Runs a whole record through one designed filter, starting from rest.
inline std::vector<double> filter_series(const FilterConfig& cfg, const std::vector<double>& x) {
    const Biquad f = design_filter(cfg);
    BiquadState st;
    std::vector<double> y;
    y.reserve(x.size());
    for (double v : x) {
        auto o = biquad_step(f, st, v);
        st = o.state;
        y.push_back(o.y);
    }
    return y;
}

// ---------------------------------------------------------------------------
// Receiver.

inline constexpr double kPwmMin = 1024.0;
inline constexpr double kPwmMax = 2048.0;
inline constexpr double kPwmMid = 1536.0;
inline constexpr double kPwmResolution = 4.0;

namespace channel {
inline constexpr int throttle = 0, roll = 1, pitch = 2, yaw = 3, trigger = 4, kill = 5;
}

struct PwmFrame {
    std::array<double, 6> width{kPwmMin, kPwmMid, kPwmMid, kPwmMid, kPwmMin, kPwmMin};
};

struct StickLimits {
    double roll_deg = 45.0;
    double pitch_deg = 45.0;
    double yaw_rate_dps = 135.0;
};

struct PilotCommand {
    double roll_deg = 0;
    double pitch_deg = 0;
    double yaw_rate_dps = 0;
    double throttle = 0;  // [0, 1]
    bool trigger = false;
    bool kill = false;
};

/// Clamp to [1024, 2048] us and round to the 4 us timer resolution.
inline double pwm_quantize(double width_us) {
    require(width_us >= 900.0 && width_us <= 2200.0, "raw pulse width outside [900, 2200] us");
    const double c = std::clamp(width_us, kPwmMin, kPwmMax);
    return kPwmResolution * std::round(c / kPwmResolution);
}

inline PilotCommand pwm_map(const PwmFrame& f, const StickLimits& lim = {}) {
    auto sym = [](double w, double limit) { return (w - kPwmMid) / (kPwmMax - kPwmMid) * limit; };
    PilotCommand c;
    c.throttle = (f.width[channel::throttle] - kPwmMin) / (kPwmMax - kPwmMin);
    c.roll_deg = sym(f.width[channel::roll], lim.roll_deg);
    c.pitch_deg = sym(f.width[channel::pitch], lim.pitch_deg);
    c.yaw_rate_dps = sym(f.width[channel::yaw], lim.yaw_rate_dps);
    c.trigger = f.width[channel::trigger] > kPwmMid;
    c.kill = f.width[channel::kill] > kPwmMid;
    return c;
}

/// Inverse of pwm_map without quantization (used for logging applied commands).
inline PwmFrame pwm_from_command(const PilotCommand& c, const StickLimits& lim = {}) {
    auto sym = [](double v, double limit) { return kPwmMid + v / limit * (kPwmMax - kPwmMid); };
    PwmFrame f;
    f.width[channel::throttle] = kPwmMin + c.throttle * (kPwmMax - kPwmMin);
    f.width[channel::roll] = sym(c.roll_deg, lim.roll_deg);
    f.width[channel::pitch] = sym(c.pitch_deg, lim.pitch_deg);
    f.width[channel::yaw] = sym(c.yaw_rate_dps, lim.yaw_rate_dps);
    f.width[channel::trigger] = c.trigger ? kPwmMax : kPwmMin;
    f.width[channel::kill] = c.kill ? kPwmMax : kPwmMin;
    return f;
}

} // namespace quadlab
