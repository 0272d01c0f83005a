#pragma once

// Nonlinear 6-DOF quadcopter plant: motor mixing, equations of motion,
// hover trim and fixed-step RK4 integration.
//
// Frames: inertial z points up, body z points along the thrust axis, body x
// forward, body y left. Euler angles are ZYX (psi, theta, phi). With this
// convention gravity in body axes is g * (sin(theta), -cos(theta) sin(phi),
// -cos(theta) cos(phi)), which gives du/dtheta = +g at hover.

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "quadlab/error.hpp"

namespace quadlab {

inline constexpr std::size_t kStateSize = 12;
inline constexpr std::size_t kInputSize = 4;

using StateVector = Eigen::Matrix<double, kStateSize, 1>;
using InputVector = Eigen::Matrix<double, kInputSize, 1>;

/// Canonical state ordering used by every vector/matrix in the library.
namespace idx {
inline constexpr int u = 0, v = 1, w = 2;
inline constexpr int p = 3, q = 4, r = 5;
inline constexpr int x = 6, y = 7, z = 8;
inline constexpr int phi = 9, theta = 10, psi = 11;
} // namespace idx

inline constexpr std::array<const char*, kStateSize> kStateNames = {
    "u", "v", "w", "p", "q", "r", "x", "y", "z", "phi", "theta", "psi"};

inline constexpr double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

struct VehicleParams {
    double mass = 1.8;       // kg
    double ixx = 7.06e-3;    // kg m^2
    double iyy = 7.06e-3;    // kg m^2
    double izz = 7.865e-3;   // kg m^2
    double jtp = 14.2e-4;    // kg m^2, rotor + prop polar inertia
    double b = 4.5e-4;       // N s^2/rad^2
    double d = 1.8e-5;       // N m s^2/rad^2
    double l = 0.2096;       // m (8.25 in)
    double g = 9.81;         // m/s^2

    /// Rotor speed ceiling [rad/s]; 0 selects twice the hover speed.
    double omega_max = 0.0;
    /// Residual rotor term Omega = b (O1 - O2 + O3 - O4); false drops the b.
    bool omega_residual_includes_b = true;
    /// Use -J/Iyy p Omega in the pitch row instead of +.
    bool printed_q_gyro_sign = false;
};

/// Throws on invalid parameters; returns non-fatal warnings.
inline std::vector<std::string> check_params(const VehicleParams& p) {
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    require(positive(p.mass), "mass must be > 0");
    require(positive(p.ixx) && positive(p.iyy) && positive(p.izz), "inertias must be > 0");
    require(positive(p.jtp), "jtp must be > 0");
    require(positive(p.b) && positive(p.d), "rotor constants b, d must be > 0");
    require(positive(p.l), "arm length must be > 0");
    require(positive(p.g), "g must be > 0");
    require(std::isfinite(p.omega_max) && p.omega_max >= 0.0, "omega_max must be >= 0");

    std::vector<std::string> warnings;
    if (std::abs(p.ixx - p.iyy) > 1e-12 * std::max(p.ixx, p.iyy)) {
        warnings.emplace_back("ixx != iyy: airframe is not symmetric about x and y");
    }
    return warnings;
}

struct BodyState {
    double u = 0, v = 0, w = 0;
    double p = 0, q = 0, r = 0;
    double x = 0, y = 0, z = 0;
    double phi = 0, theta = 0, psi = 0;

    StateVector vec() const {
        StateVector s;
        s << u, v, w, p, q, r, x, y, z, phi, theta, psi;
        return s;
    }

    static BodyState from(const StateVector& s) {
        return {s[0], s[1], s[2], s[3], s[4], s[5], s[6], s[7], s[8], s[9], s[10], s[11]};
    }

    bool finite() const { return vec().allFinite(); }

    bool operator==(const BodyState&) const = default;
};

/// Rotor speeds, numbered front-right, rear-right, rear-left, front-left.
/// Rotors 1 and 3 spin clockwise.
struct MotorSpeeds {
    std::array<double, 4> omega{};

    double operator[](std::size_t i) const { return omega[i]; }
    double& operator[](std::size_t i) { return omega[i]; }
    bool operator==(const MotorSpeeds&) const = default;
};

struct ControlEfforts {
    double u1 = 0;         // N, collective thrust
    double u2 = 0;         // N m, roll
    double u3 = 0;         // N m, pitch
    double u4 = 0;         // N m, yaw
    double omega_res = 0;  // residual rotor term feeding the gyroscopic coupling

    InputVector vec() const { return InputVector(u1, u2, u3, u4); }
    bool operator==(const ControlEfforts&) const = default;
};

inline double hover_speed(const VehicleParams& p) {
    return std::sqrt(p.mass * p.g / (4.0 * p.b));
}

inline double omega_max(const VehicleParams& p) {
    return p.omega_max > 0.0 ? p.omega_max : 2.0 * hover_speed(p);
}

inline ControlEfforts mix_motors(const MotorSpeeds& s, const VehicleParams& p) {
    const double s1 = s[0] * s[0], s2 = s[1] * s[1], s3 = s[2] * s[2], s4 = s[3] * s[3];
    ControlEfforts e;
    e.u1 = p.b * (s1 + s2 + s3 + s4);
    e.u2 = p.l * p.b * (-s1 - s2 + s3 + s4);
    e.u3 = p.l * p.b * (s1 - s2 - s3 + s4);
    e.u4 = p.d * (-s1 + s2 - s3 + s4);
    const double residual = s[0] - s[1] + s[2] - s[3];
    e.omega_res = p.omega_residual_includes_b ? p.b * residual : residual;
    return e;
}

/// Squared rotor speeds that realize (u1..u4). The mixing rows are mutually
/// orthogonal with norm 2, so the inverse is the transpose over four.
inline std::array<double, 4> squared_speeds_for(const ControlEfforts& e, const VehicleParams& p) {
    const double t = e.u1 / p.b;
    const double r = e.u2 / (p.l * p.b);
    const double m = e.u3 / (p.l * p.b);
    const double y = e.u4 / p.d;
    return {(t - r + m - y) / 4.0, (t - r - m + y) / 4.0, (t + r - m - y) / 4.0,
            (t + r + m + y) / 4.0};
}

/// Exact inverse of mix_motors on U1..U4. Speeds above omega_max are
/// returned as-is; check them with saturated().
inline MotorSpeeds unmix_motors(const ControlEfforts& e, const VehicleParams& p) {
    const auto sq = squared_speeds_for(e, p);
    MotorSpeeds out;
    for (std::size_t i = 0; i < 4; ++i) {
        // Round-off can leave a zero speed very slightly negative.
        const double tol = 1e-12 * (std::abs(e.u1) / p.b + 1.0);
        if (sq[i] < -tol) {
            throw Error(ErrorCode::infeasible_effort,
                        "rotor " + std::to_string(i + 1) + " needs Omega^2 = " +
                            std::to_string(sq[i]) + " < 0");
        }
        out[i] = std::sqrt(std::max(sq[i], 0.0));
    }
    return out;
}

inline std::array<bool, 4> saturated(const MotorSpeeds& s, const VehicleParams& p) {
    const double top = omega_max(p);
    return {s[0] > top, s[1] > top, s[2] > top, s[3] > top};
}

/// Allocation used in the loop: clamps each Omega^2 into [0, omega_max^2]
/// instead of throwing.
struct MotorAllocation {
    MotorSpeeds speeds;
    bool infeasible = false;  // some Omega^2 < 0 was clamped to zero
    bool saturated = false;   // some Omega > omega_max was clamped
};

inline MotorAllocation allocate_motors(const ControlEfforts& e, const VehicleParams& p) {
    const auto sq = squared_speeds_for(e, p);
    const double top = omega_max(p);
    MotorAllocation a;
    for (std::size_t i = 0; i < 4; ++i) {
        double v = sq[i];
        if (v < 0.0) {
            a.infeasible = true;
            v = 0.0;
        }
        if (v > top * top) {
            a.saturated = true;
            v = top * top;
        }
        a.speeds[i] = std::sqrt(v);
    }
    return a;
}

inline constexpr double kSingularityMargin = 1e-6;

/// Time derivative of the 12-state rigid body.
inline StateVector eom_derivative(const BodyState& s, const ControlEfforts& e,
                                  const VehicleParams& p) {
    if (!(std::abs(s.theta) < std::numbers::pi / 2 - kSingularityMargin)) {
        throw Error(ErrorCode::singular_attitude,
                    "|theta| = " + std::to_string(std::abs(s.theta)) + " rad at the Euler singularity");
    }
    const double sphi = std::sin(s.phi), cphi = std::cos(s.phi);
    const double sth = std::sin(s.theta), cth = std::cos(s.theta);
    const double spsi = std::sin(s.psi), cpsi = std::cos(s.psi);
    const double tth = sth / cth;
    const double q_gyro = p.printed_q_gyro_sign ? -1.0 : 1.0;

    StateVector d;
    d[idx::u] = s.v * s.r - s.w * s.q + p.g * sth;
    d[idx::v] = s.w * s.p - s.u * s.r - p.g * cth * sphi;
    d[idx::w] = s.u * s.q - s.v * s.p - p.g * cth * cphi + e.u1 / p.mass;

    d[idx::p] = (p.iyy - p.izz) / p.ixx * s.q * s.r - p.jtp / p.ixx * s.q * e.omega_res +
                e.u2 / p.ixx;
    d[idx::q] = (p.izz - p.ixx) / p.iyy * s.p * s.r +
                q_gyro * p.jtp / p.iyy * s.p * e.omega_res + e.u3 / p.iyy;
    d[idx::r] = (p.ixx - p.iyy) / p.izz * s.p * s.q + e.u4 / p.izz;

    // Body-to-inertial rotation R = Rz(psi) Ry(theta) Rx(phi) applied to (u, v, w).
    d[idx::x] = cth * cpsi * s.u + (sphi * sth * cpsi - cphi * spsi) * s.v +
                (cphi * sth * cpsi + sphi * spsi) * s.w;
    d[idx::y] = cth * spsi * s.u + (sphi * sth * spsi + cphi * cpsi) * s.v +
                (cphi * sth * spsi - sphi * cpsi) * s.w;
    d[idx::z] = -sth * s.u + sphi * cth * s.v + cphi * cth * s.w;

    d[idx::phi] = s.p + (sphi * s.q + cphi * s.r) * tth;
    d[idx::theta] = cphi * s.q - sphi * s.r;
    d[idx::psi] = (sphi * s.q + cphi * s.r) / cth;
    return d;
}

struct HoverTrim {
    MotorSpeeds speeds;
    ControlEfforts efforts;
};

inline HoverTrim hover_trim(const VehicleParams& p) {
    const double omega = hover_speed(p);
    HoverTrim t;
    t.speeds.omega = {omega, omega, omega, omega};
    t.efforts.u1 = p.mass * p.g;
    return t;
}

/// Classical fourth-order Runge-Kutta step of dx/dt = f(x).
template <typename Vec, typename F>
Vec rk4_step(F&& f, const Vec& x, double dt) {
    const Vec k1 = f(x);
    const Vec k2 = f(Vec(x + 0.5 * dt * k1));
    const Vec k3 = f(Vec(x + 0.5 * dt * k2));
    const Vec k4 = f(Vec(x + dt * k3));
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline constexpr double kMaxStep = 0.05;

/// One RK4 step with the efforts held constant over the step.
inline BodyState integrate_step(const BodyState& s, const ControlEfforts& e,
                                const VehicleParams& p, double dt) {
    require(dt > 0.0 && dt <= kMaxStep, "dt must lie in (0, 0.05] s");
    auto f = [&](const StateVector& x) { return eom_derivative(BodyState::from(x), e, p); };
    return BodyState::from(rk4_step(f, s.vec(), dt));
}

inline BodyState integrate_step(const BodyState& s, const MotorSpeeds& speeds,
                                const VehicleParams& p, double dt) {
    return integrate_step(s, mix_motors(speeds, p), p, dt);
}

struct TrajectorySample {
    double t = 0;
    BodyState state;
    MotorSpeeds speeds;
    ControlEfforts efforts;
};

struct Trajectory {
    std::vector<TrajectorySample> samples;
    bool diverged = false;
    double abort_time = 0.0;  // valid when diverged
};

struct SimOptions {
    std::size_t max_samples = 10'000'000;
    double divergence_deg = 89.0;
};

inline bool attitude_diverged(const BodyState& s, double limit_deg) {
    const double lim = deg2rad(limit_deg);
    return !s.finite() || std::abs(s.phi) > lim || std::abs(s.theta) > lim;
}

/// Open-loop fixed-step simulation. `command(t, state)` returns the rotor
/// speeds held over [t, t + dt). Stops early, flagging divergence, when
/// |phi| or |theta| passes the crash threshold.
template <typename CommandSource>
Trajectory simulate(const BodyState& initial, CommandSource&& command, const VehicleParams& p,
                    double dt, double duration, const SimOptions& opt = {}) {
    require(dt > 0.0 && dt <= kMaxStep, "dt must lie in (0, 0.05] s");
    require(duration >= 0.0, "duration must be >= 0");
    const auto steps = static_cast<std::size_t>(std::llround(duration / dt));
    require(steps + 1 <= opt.max_samples, "duration/dt exceeds the configured sample budget");

    Trajectory traj;
    traj.samples.reserve(steps + 1);
    BodyState s = initial;
    for (std::size_t k = 0; k <= steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        const MotorSpeeds cmd = command(t, s);
        const ControlEfforts e = mix_motors(cmd, p);
        traj.samples.push_back({t, s, cmd, e});
        if (attitude_diverged(s, opt.divergence_deg)) {
            traj.diverged = true;
            traj.abort_time = t;
            break;
        }
        if (k == steps) break;
        try {
            s = integrate_step(s, e, p, dt);
        } catch (const Error& err) {
            if (err.code() != ErrorCode::singular_attitude) throw;
            traj.diverged = true;
            traj.abort_time = t + dt;
            break;
        }
    }
    return traj;
}

} // namespace quadlab
