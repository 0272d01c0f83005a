#pragma once

// Discrete PID, the angle/rate cascade and closed-loop simulation.
//
// All controller signals are SI: angles in rad, rates in rad/s, torques in
// N m. Pilot commands arrive in degrees and are converted at the boundary.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <tuple>
#include <vector>

#include "quadlab/dynamics.hpp"
#include "quadlab/flight_log.hpp"
#include "quadlab/linearization.hpp"
#include "quadlab/sensors.hpp"

namespace quadlab {

// ---------------------------------------------------------------------------
// PID

enum class Direction { direct, reverse };
enum class PidMode { active, off };

struct PidGains {
    double kp = 0;
    double ki = 0;
    double td = 0;
};

struct PidState {
    double integral = 0;
    double last_input = 0;
    double output = 0;
    double out_min = -1;
    double out_max = 1;
    double sample_time = 0.01;  // s
    Direction direction = Direction::direct;
    PidMode mode = PidMode::active;
    /// Output = Kp e + I - Td dMeas/dt when set; the D sign flips otherwise.
    bool negate_derivative = true;
    /// First-order low-pass on the derivative term; 0 disables it.
    double derivative_cutoff_hz = 0;
    double derivative = 0;  // filtered dMeas/dt
    double last_time = 0;
    bool initialized = false;
};

inline void check_pid(const PidState& s) {
    require(s.out_min < s.out_max, "PID output limits need min < max");
    require(s.sample_time > 0.0, "PID sample time must be > 0");
    require(s.derivative_cutoff_hz >= 0.0, "derivative cutoff must be >= 0");
}

struct PidResult {
    double output;
    PidState state;
};

/// One controller evaluation at time `now`. Calls earlier than one sample
/// time after the last evaluation return the previous output unchanged.
inline PidResult pid_step(PidState s, const PidGains& g, double setpoint, double measurement,
                          double now) {
    if (s.mode == PidMode::off) {
        s.last_input = measurement;
        return {s.output, s};
    }
    if (s.initialized && now - s.last_time < s.sample_time - 1e-9) return {s.output, s};
    if (!s.initialized) {
        s.last_input = measurement;
        s.derivative = 0.0;
        s.initialized = true;
    }
    const double ts = s.sample_time;
    const double sign = s.direction == Direction::reverse ? -1.0 : 1.0;
    const double error = setpoint - measurement;

    s.integral = std::clamp(s.integral + sign * g.ki * error * ts, s.out_min, s.out_max);

    const double raw = (measurement - s.last_input) / ts;
    if (s.derivative_cutoff_hz > 0.0) {
        const double a = std::exp(-2.0 * std::numbers::pi * s.derivative_cutoff_hz * ts);
        s.derivative = a * s.derivative + (1.0 - a) * raw;
    } else {
        s.derivative = raw;
    }
    const double dterm = sign * g.td * s.derivative;
    const double out = sign * g.kp * error + s.integral + (s.negate_derivative ? -dterm : dterm);

    s.output = std::clamp(out, s.out_min, s.out_max);
    s.last_input = measurement;
    s.last_time = now;
    return {s.output, s};
}

inline PidState reset_integral(PidState s) {
    s.integral = 0.0;
    return s;
}

// ---------------------------------------------------------------------------
// Cascade

struct CascadeGains {
    PidGains roll_angle{3.604, 0.0, 0.0};
    PidGains pitch_angle{3.604, 0.0, 0.0};
    PidGains roll_rate{0.2209, 0.0, 0.014};
    PidGains pitch_rate{0.2209, 0.0, 0.014};
    PidGains yaw_rate{0.1141, 0.634, 0.0};
};

struct CascadeConfig {
    CascadeGains gains;
    StickLimits limits;
    double loop_rate_hz = 100.0;
    double rate_setpoint_limit = 4.0;  // rad/s, angle-loop output
    double roll_pitch_torque_limit = 2.0;  // N m
    double yaw_torque_limit = 0.5;         // N m
    double derivative_cutoff_hz = 10.0;    // 0 = raw derivative
    bool negate_derivative = true;
};

inline void check_cascade(const CascadeConfig& c) {
    require(c.loop_rate_hz > 0.0, "loop rate must be > 0");
    require(c.limits.roll_deg > 0.0 && c.limits.pitch_deg > 0.0 && c.limits.yaw_rate_dps > 0.0,
            "stick limits must be > 0");
    require(c.rate_setpoint_limit > 0.0 && c.roll_pitch_torque_limit > 0.0 &&
                c.yaw_torque_limit > 0.0,
            "controller output limits must be > 0");
    require(c.derivative_cutoff_hz >= 0.0 &&
                (c.derivative_cutoff_hz == 0.0 || c.derivative_cutoff_hz < c.loop_rate_hz / 2.0),
            "derivative cutoff must be 0 or below the loop Nyquist rate");
}

struct CascadePids {
    PidState roll_angle, pitch_angle, roll_rate, pitch_rate, yaw_rate;
};

inline CascadePids make_cascade_pids(const CascadeConfig& c) {
    check_cascade(c);
    auto make = [&](double limit) {
        PidState s;
        s.out_min = -limit;
        s.out_max = limit;
        s.sample_time = 1.0 / c.loop_rate_hz;
        s.negate_derivative = c.negate_derivative;
        s.derivative_cutoff_hz = c.derivative_cutoff_hz;
        return s;
    };
    return {make(c.rate_setpoint_limit), make(c.rate_setpoint_limit),
            make(c.roll_pitch_torque_limit), make(c.roll_pitch_torque_limit),
            make(c.yaw_torque_limit)};
}

inline CascadePids set_mode(CascadePids p, PidMode mode) {
    for (PidState* s : {&p.roll_angle, &p.pitch_angle, &p.roll_rate, &p.pitch_rate, &p.yaw_rate})
        s->mode = mode;
    return p;
}

inline CascadePids reset_integrals(CascadePids p) {
    for (PidState* s : {&p.roll_angle, &p.pitch_angle, &p.roll_rate, &p.pitch_rate, &p.yaw_rate})
        *s = reset_integral(*s);
    return p;
}

/// Attitude as the controller sees it: filtered angles and gyro rates.
struct AttitudeEstimate {
    double phi = 0, theta = 0;   // rad
    double p = 0, q = 0, r = 0;  // rad/s
};

/// Full collective thrust at throttle 1.
inline double max_thrust(const VehicleParams& p) {
    const double top = omega_max(p);
    return 4.0 * p.b * top * top;
}

/// Throttle fraction that balances weight.
inline double hover_throttle(const VehicleParams& p) { return p.mass * p.g / max_thrust(p); }

struct CascadeOutput {
    ControlEfforts efforts;
    CascadePids pids;
    double roll_rate_setpoint = 0;   // rad/s
    double pitch_rate_setpoint = 0;  // rad/s
};

/// One controller frame. With the kill switch set the PIDs are idle and the
/// sticks map straight onto torques.
inline CascadeOutput cascade_step(const CascadeConfig& cfg, const PilotCommand& cmd,
                                  const AttitudeEstimate& est, CascadePids pids, double now,
                                  const VehicleParams& params) {
    CascadeOutput out;
    out.efforts.u1 = std::clamp(cmd.throttle, 0.0, 1.0) * max_thrust(params);
    if (cmd.kill) {
        out.pids = set_mode(pids, PidMode::off);
        out.efforts.u2 = cmd.roll_deg / cfg.limits.roll_deg * cfg.roll_pitch_torque_limit;
        out.efforts.u3 = cmd.pitch_deg / cfg.limits.pitch_deg * cfg.roll_pitch_torque_limit;
        out.efforts.u4 = cmd.yaw_rate_dps / cfg.limits.yaw_rate_dps * cfg.yaw_torque_limit;
        return out;
    }
    pids = set_mode(pids, PidMode::active);
    const auto& g = cfg.gains;

    auto ra = pid_step(pids.roll_angle, g.roll_angle, deg2rad(cmd.roll_deg), est.phi, now);
    auto pa = pid_step(pids.pitch_angle, g.pitch_angle, deg2rad(cmd.pitch_deg), est.theta, now);
    auto rr = pid_step(pids.roll_rate, g.roll_rate, ra.output, est.p, now);
    auto pr = pid_step(pids.pitch_rate, g.pitch_rate, pa.output, est.q, now);
    auto yr = pid_step(pids.yaw_rate, g.yaw_rate, deg2rad(cmd.yaw_rate_dps), est.r, now);

    out.pids = {ra.state, pa.state, rr.state, pr.state, yr.state};
    out.roll_rate_setpoint = ra.output;
    out.pitch_rate_setpoint = pa.output;
    out.efforts.u2 = rr.output;
    out.efforts.u3 = pr.output;
    out.efforts.u4 = yr.output;
    return out;
}

// ---------------------------------------------------------------------------
// Closed-loop simulation

enum class PlantKind { nonlinear, linear };

/// Where the controller takes its attitude from. `sensors` runs the seeded IMU
/// and the complementary filter; `truth` feeds the plant state directly.
enum class AttitudeSource { truth, sensors };

struct Scenario {
    BodyState initial;
    /// Pilot command at time t; empty means hover throttle and centred sticks.
    std::function<PilotCommand(double)> command;
    double duration = 5.0;
};

struct ClosedLoopOptions {
    PlantKind plant = PlantKind::nonlinear;
    AttitudeSource source = AttitudeSource::truth;
    double dt = 1e-3;  // plant integration step
    ImuNoise noise = ImuNoise::none();
    std::uint64_t seed = 1;
    double alpha = 0.98;  // complementary blend
    double divergence_deg = 89.0;
};

inline constexpr double kSettleFraction = 0.02;

struct AxisSettling {
    double roll = 0;      // s, on true phi
    double pitch = 0;     // s, on true theta
    double yaw_rate = 0;  // s, on true r
};

struct ClosedLoopResult {
    FlightLog log;                  // one record per control frame
    std::vector<double> t;          // frame times
    std::vector<BodyState> truth;   // plant state at each frame
    std::size_t saturation_events = 0;
    bool diverged = false;
    double abort_time = 0;
    AxisSettling settling;
};

/// First time after which |x| stays below 2% of its peak. Infinite when the
/// last sample is still outside the band.
inline double settling_time(const std::vector<double>& t, const std::vector<double>& x,
                            double fraction = kSettleFraction) {
    require(t.size() == x.size(), "settling_time: size mismatch");
    double peak = 0.0;
    for (double v : x) peak = std::max(peak, std::abs(v));
    if (peak == 0.0 || x.empty()) return 0.0;
    const double band = fraction * peak;
    if (std::abs(x.back()) >= band) return std::numeric_limits<double>::infinity();
    for (std::size_t i = x.size(); i-- > 0;) {
        if (std::abs(x[i]) >= band) return t[i + 1];
    }
    return t.front();
}

inline int substeps_per_frame(double loop_rate_hz, double dt) {
    const double n = 1.0 / (loop_rate_hz * dt);
    const double r = std::round(n);
    require(r >= 1.0 && std::abs(n - r) < 1e-6,
            "loop period must be an integer multiple of the plant step");
    return static_cast<int>(r);
}

inline ClosedLoopResult closed_loop_simulate(const CascadeConfig& cfg, const Scenario& sc,
                                             const VehicleParams& params,
                                             const ClosedLoopOptions& opt = {}) {
    check_params(params);
    check_cascade(cfg);
    require(opt.dt > 0.0 && opt.dt <= kMaxStep, "dt must lie in (0, 0.05] s");
    require(sc.duration >= 0.0, "duration must be >= 0");
    require(opt.alpha >= 0.0 && opt.alpha <= 1.0, "alpha must lie in [0, 1]");
    const int sub = substeps_per_frame(cfg.loop_rate_hz, opt.dt);
    const double frame = 1.0 / cfg.loop_rate_hz;
    const auto frames = static_cast<std::size_t>(std::floor(sc.duration * cfg.loop_rate_hz + 1e-9));

    const HoverTrim trim = hover_trim(params);
    const double throttle0 = hover_throttle(params);

    LinearModel lin;
    Matrix phi_d, gam_d;
    if (opt.plant == PlantKind::linear) {
        lin = linearize_hover(params);
        std::tie(phi_d, gam_d) = zoh_discretize(Matrix(lin.a), Matrix(lin.b), opt.dt);
    }

    ClosedLoopResult res;
    res.log.reserve(frames + 1);
    CascadePids pids = make_cascade_pids(cfg);
    ImuModel imu(opt.noise, opt.seed);
    BodyState s = sc.initial;
    Vector x = s.vec();
    ControlEfforts applied = trim.efforts;
    double est_phi = s.phi, est_theta = s.theta;

    for (std::size_t k = 0; k <= frames; ++k) {
        const double t = static_cast<double>(k) * frame;
        if (opt.plant == PlantKind::linear) s = BodyState::from(x);
        res.t.push_back(t);
        res.truth.push_back(s);
        if (attitude_diverged(s, opt.divergence_deg)) {
            res.diverged = true;
            res.abort_time = t;
            break;
        }

        PilotCommand cmd;
        cmd.throttle = throttle0;
        if (sc.command) cmd = sc.command(t);

        AttitudeEstimate est;
        ImuSample meas;
        if (opt.source == AttitudeSource::truth) {
            est = {s.phi, s.theta, s.p, s.q, s.r};
            meas.t = t;
            meas.accel = accel_reading(s, applied, params);
            meas.gyro = {s.p, s.q, s.r};
        } else {
            meas = imu.sample(s, applied, params, t);
            if (k > 0) {
                double acc_roll = est_phi, acc_pitch = est_theta, a = opt.alpha;
                try {
                    const auto tilt = accel_angles(meas, params.g);
                    acc_roll = tilt.roll;
                    acc_pitch = tilt.pitch;
                } catch (const Error& e) {
                    if (e.code() != ErrorCode::free_fall) throw;
                    a = 1.0;
                }
                est_phi = complementary_step(est_phi, meas.gyro[0], acc_roll, a, frame);
                est_theta = complementary_step(est_theta, meas.gyro[1], acc_pitch, a, frame);
            }
            est = {est_phi, est_theta, meas.gyro[0], meas.gyro[1], meas.gyro[2]};
        }

        auto step = cascade_step(cfg, cmd, est, pids, t, params);
        pids = step.pids;

        MotorSpeeds speeds;
        if (opt.plant == PlantKind::nonlinear) {
            const auto alloc = allocate_motors(step.efforts, params);
            if (alloc.infeasible || alloc.saturated) ++res.saturation_events;
            speeds = alloc.speeds;
            applied = mix_motors(speeds, params);
        } else {
            applied = step.efforts;
            const auto sq = squared_speeds_for(applied, params);
            for (std::size_t i = 0; i < 4; ++i) speeds[i] = std::sqrt(std::max(sq[i], 0.0));
        }

        FlightLogRecord rec;
        rec.t = t;
        rec.pwm = pwm_from_command(cmd, cfg.limits).width;
        rec.phi = rad2deg(est.phi);
        rec.theta = rad2deg(est.theta);
        rec.p = rad2deg(meas.gyro[0]);
        rec.q = rad2deg(meas.gyro[1]);
        rec.r = rad2deg(meas.gyro[2]);
        rec.ax = meas.accel[0];
        rec.ay = meas.accel[1];
        rec.az = meas.accel[2];
        const double top = omega_max(params);
        for (std::size_t i = 0; i < 4; ++i) rec.motor[i] = kPwmMin + 1024.0 * speeds[i] / top;
        rec.u = {applied.u1, applied.u2, applied.u3, applied.u4};
        rec.trigger = cmd.trigger;
        rec.kill = cmd.kill;
        res.log.push_back(rec);

        if (k == frames) break;
        if (opt.plant == PlantKind::linear) {
            Vector du(4);
            du << applied.u1 - trim.efforts.u1, applied.u2, applied.u3, applied.u4;
            for (int i = 0; i < sub; ++i) x = phi_d * x + gam_d * du;
            if (!x.allFinite()) {
                res.diverged = true;
                res.abort_time = t + frame;
                break;
            }
        } else {
            try {
                for (int i = 0; i < sub; ++i) s = integrate_step(s, applied, params, opt.dt);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::singular_attitude) throw;
                res.diverged = true;
                res.abort_time = t + frame;
                break;
            }
        }
    }

    const double inf = std::numeric_limits<double>::infinity();
    if (res.diverged) {
        res.settling = {inf, inf, inf};
    } else {
        std::vector<double> phi, theta, r;
        for (const auto& b : res.truth) {
            phi.push_back(b.phi);
            theta.push_back(b.theta);
            r.push_back(b.r);
        }
        res.settling = {settling_time(res.t, phi), settling_time(res.t, theta),
                        settling_time(res.t, r)};
    }
    return res;
}

// Scenario builders.

enum class Axis { roll, pitch, yaw };

inline std::string to_string(Axis a) {
    switch (a) {
    case Axis::roll: return "roll";
    case Axis::pitch: return "pitch";
    case Axis::yaw: return "yaw";
    }
    return "?";
}

inline Axis parse_axis(const std::string& name) {
    if (name == "roll") return Axis::roll;
    if (name == "pitch") return Axis::pitch;
    if (name == "yaw") return Axis::yaw;
    throw Error(ErrorCode::invalid_argument,
                "unknown axis '" + name + "' (valid axes: roll, pitch, yaw)");
}

/// Body-rate impulse, applied as an initial rate of `rate` rad/s.
inline Scenario rate_impulse(Axis axis, double rate, double duration) {
    Scenario sc;
    sc.duration = duration;
    if (axis == Axis::roll) sc.initial.p = rate;
    if (axis == Axis::pitch) sc.initial.q = rate;
    if (axis == Axis::yaw) sc.initial.r = rate;
    return sc;
}

inline Scenario initial_attitude(double roll_deg, double pitch_deg, double duration) {
    Scenario sc;
    sc.duration = duration;
    sc.initial.phi = deg2rad(roll_deg);
    sc.initial.theta = deg2rad(pitch_deg);
    return sc;
}

/// Stick input `signal[k]` (deg or deg/s) applied on one axis at frame k.
inline std::function<PilotCommand(double)> stick_sequence(Axis axis, std::vector<double> signal,
                                                          double frame_dt, double throttle) {
    return [axis, signal = std::move(signal), frame_dt, throttle](double t) {
        PilotCommand c;
        c.throttle = throttle;
        const auto k = static_cast<std::size_t>(std::llround(t / frame_dt));
        const double v = k < signal.size() ? signal[k] : 0.0;
        if (axis == Axis::roll) c.roll_deg = v;
        if (axis == Axis::pitch) c.pitch_deg = v;
        if (axis == Axis::yaw) c.yaw_rate_dps = v;
        return c;
    };
}

// ---------------------------------------------------------------------------
// Loop-rate study

enum class LoopVerdict { stable, degraded, unstable };

inline std::string to_string(LoopVerdict v) {
    switch (v) {
    case LoopVerdict::stable: return "stable";
    case LoopVerdict::degraded: return "degraded";
    case LoopVerdict::unstable: return "unstable";
    }
    return "?";
}

struct LoopRateRow {
    double rate_hz;
    bool diverged;
    double settling;  // s, roll
    LoopVerdict verdict;
};

struct LoopRateStudy {
    double reference_settling;  // s, at 100 Hz
    std::vector<LoopRateRow> rows;
};

/// Runs the nonlinear closed loop from a 5 deg roll offset at each rate.
/// Degraded means settling beyond 3x the 100 Hz value.
inline LoopRateStudy loop_rate_sweep(CascadeConfig cfg, const VehicleParams& params,
                                     const std::vector<double>& rates, double duration = 10.0,
                                     double dt = 1e-3) {
    for (double r : rates) require(r > 0.0, "loop rates must be > 0");
    const Scenario sc = initial_attitude(5.0, 0.0, duration);
    ClosedLoopOptions opt;
    opt.dt = dt;
    auto run = [&](double hz) {
        cfg.loop_rate_hz = hz;
        if (cfg.derivative_cutoff_hz >= hz / 2.0) cfg.derivative_cutoff_hz = 0.45 * hz;
        return closed_loop_simulate(cfg, sc, params, opt);
    };
    LoopRateStudy study;
    study.reference_settling = run(100.0).settling.roll;
    for (double hz : rates) {
        const auto r = run(hz);
        LoopRateRow row{hz, r.diverged, r.settling.roll, LoopVerdict::stable};
        if (r.diverged || !std::isfinite(r.settling.roll)) {
            row.verdict = LoopVerdict::unstable;
        } else if (r.settling.roll > 3.0 * study.reference_settling) {
            row.verdict = LoopVerdict::degraded;
        }
        study.rows.push_back(row);
    }
    return study;
}

// ---------------------------------------------------------------------------
// Linear closed-loop models

/// Continuous cascade about hover with truth feedback. State: the 12 plant
/// states, then the roll and pitch derivative-filter states and the yaw
/// integral. Derivative filters use time constant 1 / (2 pi fc); with fc = 0
/// the rate loop sees the unfiltered derivative.
struct ContinuousClosedLoop {
    Matrix a;
    std::vector<int> attitude;  // indices of the attitude subsystem
};

inline ContinuousClosedLoop continuous_closed_loop(const LinearModel& m, const CascadeConfig& cfg) {
    const auto& g = cfg.gains;
    require(g.roll_angle.ki == 0.0 && g.roll_angle.td == 0.0 && g.pitch_angle.ki == 0.0 &&
                g.pitch_angle.td == 0.0 && g.roll_rate.ki == 0.0 && g.pitch_rate.ki == 0.0 &&
                g.yaw_rate.td == 0.0,
            "continuous closed loop supports P angle loops, PD roll/pitch rate and PI yaw rate");
    const double dsign = cfg.negate_derivative ? 1.0 : -1.0;
    const int n = 15, xp = 12, xq = 13, iy = 14;
    Matrix a = Matrix::Zero(n, n);
    a.topLeftCorner(12, 12) = m.a;

    auto add_axis = [&](int rate, int angle, int filt, int input, const PidGains& ag,
                        const PidGains& rg) {
        const double bi = m.b(rate, input);
        Eigen::RowVectorXd torque = Eigen::RowVectorXd::Zero(n);
        torque(angle) = -rg.kp * ag.kp;
        torque(rate) = -rg.kp;
        double eff = 1.0;
        if (cfg.derivative_cutoff_hz > 0.0) {
            const double tau = 1.0 / (2.0 * std::numbers::pi * cfg.derivative_cutoff_hz);
            torque(rate) += -dsign * rg.td / tau;
            torque(filt) += dsign * rg.td / tau;
            a(filt, rate) = 1.0 / tau;
            a(filt, filt) = -1.0 / tau;
        } else {
            // Unfiltered: the -Td pdot term moves to the left-hand side.
            eff = 1.0 + dsign * rg.td * bi;
            a(filt, filt) = -1.0;
        }
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
        row.head(12) = m.a.row(rate);
        a.row(rate) = (row + bi * torque) / eff;
    };
    add_axis(idx::p, idx::phi, xp, 1, g.roll_angle, g.roll_rate);
    add_axis(idx::q, idx::theta, xq, 2, g.pitch_angle, g.pitch_rate);

    // Yaw: U4 = -Kp r + I, dI/dt = -Ki r
    a(idx::r, idx::r) += m.b(idx::r, 3) * -g.yaw_rate.kp;
    a(idx::r, iy) += m.b(idx::r, 3);
    a(iy, idx::r) = -g.yaw_rate.ki;

    return {a, {idx::p, idx::q, idx::r, idx::phi, idx::theta, xp, xq, iy}};
}

inline Matrix submatrix(const Matrix& a, const std::vector<int>& ids) {
    Matrix out(ids.size(), ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t j = 0; j < ids.size(); ++j) out(i, j) = a(ids[i], ids[j]);
    return out;
}

/// Affine form over a state vector plus one scalar input.
struct Lin {
    Eigen::RowVectorXd s;
    double u = 0;

    Lin operator+(const Lin& o) const { return {s + o.s, u + o.u}; }
    Lin operator-(const Lin& o) const { return {s - o.s, u - o.u}; }
    Lin operator*(double k) const { return {s * k, u * k}; }
};

/// Discrete single-axis closed loop at the control rate: plant held over each
/// frame by ZOH, angle and rate PIDs unclamped, attitude from truth or from
/// the complementary filter with a zero accelerometer angle (the drag-free
/// accelerometer sees no lateral specific force). Input is the stick command
/// in degrees; output is the logged attitude in degrees.
struct DiscreteLoop {
    Matrix phi;
    Matrix gamma;
    Eigen::RowVectorXd c;
    double d = 0;
    double dt = 0;
};

inline DiscreteLoop discrete_closed_loop(const LinearModel& m, const CascadeConfig& cfg,
                                         Axis axis, AttitudeSource source, double alpha = 0.98) {
    require(axis != Axis::yaw, "discrete_closed_loop covers roll and pitch");
    const double T = 1.0 / cfg.loop_rate_hz;
    const auto [phid, gamd] = zoh_discretize(Matrix(m.a), Matrix(m.b), T);
    const int rate = axis == Axis::roll ? idx::p : idx::q;
    const int angle = axis == Axis::roll ? idx::phi : idx::theta;
    const int input = axis == Axis::roll ? 1 : 2;
    const PidGains ag = axis == Axis::roll ? cfg.gains.roll_angle : cfg.gains.pitch_angle;
    const PidGains rg = axis == Axis::roll ? cfg.gains.roll_rate : cfg.gains.pitch_rate;

    // Controller memory carried from the previous frame.
    enum { kEst = 12, kIa, kPrevA, kDa, kIr, kPrevR, kDr, kN };
    auto unit = [](int i) {
        Lin l{Eigen::RowVectorXd::Zero(kN), 0.0};
        l.s(i) = 1.0;
        return l;
    };
    const Lin zero{Eigen::RowVectorXd::Zero(kN), 0.0};
    const Lin cmd{Eigen::RowVectorXd::Zero(kN), std::numbers::pi / 180.0};
    const double a = cfg.derivative_cutoff_hz > 0.0
                         ? std::exp(-2.0 * std::numbers::pi * cfg.derivative_cutoff_hz * T)
                         : 0.0;
    const double dsign = cfg.negate_derivative ? -1.0 : 1.0;

    const Lin gyro = unit(rate);
    const Lin est = source == AttitudeSource::truth
                        ? unit(angle)
                        : (unit(kEst) + gyro * T) * alpha;

    const Lin ea = cmd - est;
    const Lin ia = unit(kIa) + ea * (ag.ki * T);
    const Lin da = unit(kDa) * a + (est - unit(kPrevA)) * ((1.0 - a) / T);
    const Lin sp = ea * ag.kp + ia + da * (dsign * ag.td);

    const Lin er = sp - gyro;
    const Lin ir = unit(kIr) + er * (rg.ki * T);
    const Lin dr = unit(kDr) * a + (gyro - unit(kPrevR)) * ((1.0 - a) / T);
    const Lin torque = er * rg.kp + ir + dr * (dsign * rg.td);

    DiscreteLoop out;
    out.dt = T;
    out.phi = Matrix::Zero(kN, kN);
    out.gamma = Matrix::Zero(kN, 1);
    for (int i = 0; i < 12; ++i) {
        Lin next = zero;
        next.s.head(12) = phid.row(i);
        next = next + torque * gamd(i, input);
        out.phi.row(i) = next.s;
        out.gamma(i, 0) = next.u;
    }
    const Lin mem[] = {est, ia, est, da, ir, gyro, dr};
    for (int i = 0; i < 7; ++i) {
        out.phi.row(kEst + i) = mem[i].s;
        out.gamma(kEst + i, 0) = mem[i].u;
    }
    out.c = est.s * (180.0 / std::numbers::pi);
    out.d = est.u * (180.0 / std::numbers::pi);
    return out;
}

/// H(e^{j w T}) of a discrete loop at the given frequencies (rad/s).
inline std::vector<std::complex<double>> frequency_response(const DiscreteLoop& l,
                                                            const std::vector<double>& w) {
    using C = std::complex<double>;
    const auto n = l.phi.rows();
    std::vector<C> out;
    out.reserve(w.size());
    for (double wi : w) {
        const C z = std::exp(C(0.0, wi * l.dt));
        const Eigen::MatrixXcd m = z * Eigen::MatrixXcd::Identity(n, n) - l.phi.cast<C>();
        const Eigen::VectorXcd x = m.partialPivLu().solve(l.gamma.cast<C>());
        out.push_back((l.c.cast<C>() * x)(0) + l.d);
    }
    return out;
}

} // namespace quadlab
