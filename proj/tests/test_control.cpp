#include <gtest/gtest.h>

#include <cmath>

#include "quadlab/control.hpp"

using namespace quadlab;

namespace {

PidState unit_pid(double dt = 0.01) {
    PidState s;
    s.out_min = -100;
    s.out_max = 100;
    s.sample_time = dt;
    return s;
}

} // namespace

TEST(Pid, ProportionalOnly) {
    auto r = pid_step(unit_pid(), {2.0, 0, 0}, 1.0, 0.25, 0.0);
    EXPECT_DOUBLE_EQ(r.output, 1.5);
}

TEST(Pid, IntegralAccumulatesPerSample) {
    PidState s = unit_pid();
    const PidGains g{0, 10.0, 0};
    double out = 0;
    for (int k = 0; k < 5; ++k) {
        auto r = pid_step(s, g, 1.0, 0.0, k * 0.01);
        s = r.state;
        out = r.output;
    }
    EXPECT_NEAR(out, 5 * 10.0 * 1.0 * 0.01, 1e-12);
}

TEST(Pid, SampleTimeGating) {
    PidState s = unit_pid();
    const PidGains g{0, 10.0, 0};
    auto r1 = pid_step(s, g, 1.0, 0.0, 0.0);
    auto r2 = pid_step(r1.state, g, 1.0, 0.0, 0.005);
    EXPECT_EQ(r2.output, r1.output);
    EXPECT_EQ(r2.state.integral, r1.state.integral);
    auto r3 = pid_step(r2.state, g, 1.0, 0.0, 0.01);
    EXPECT_GT(r3.output, r1.output);
}

TEST(Pid, IntegralClampedToOutputLimits) {
    PidState s = unit_pid();
    s.out_min = -1;
    s.out_max = 1;
    const PidGains g{0, 100.0, 0};
    for (int k = 0; k < 1000; ++k) s = pid_step(s, g, 1.0, 0.0, k * 0.01).state;
    EXPECT_DOUBLE_EQ(s.integral, 1.0);
    // Recovery starts as soon as the error reverses.
    s = pid_step(s, g, -1.0, 0.0, 1000 * 0.01).state;
    EXPECT_LT(s.integral, 1.0);
}

TEST(Pid, OutputClamped) {
    PidState s = unit_pid();
    s.out_min = -0.5;
    s.out_max = 0.5;
    EXPECT_DOUBLE_EQ(pid_step(s, {10, 0, 0}, 1.0, 0.0, 0).output, 0.5);
    EXPECT_DOUBLE_EQ(pid_step(s, {10, 0, 0}, -1.0, 0.0, 0).output, -0.5);
}

TEST(Pid, DerivativeOnMeasurementIgnoresSetpointKick) {
    PidState s = unit_pid();
    const PidGains g{0, 0, 1.0};
    s = pid_step(s, g, 0.0, 0.0, 0.0).state;
    const auto r = pid_step(s, g, 50.0, 0.0, 0.01);
    EXPECT_DOUBLE_EQ(r.output, 0.0);
}

TEST(Pid, DerivativeSignFlag) {
    PidState s = unit_pid();
    const PidGains g{0, 0, 0.5};
    s = pid_step(s, g, 0.0, 0.0, 0.0).state;
    const auto neg = pid_step(s, g, 0.0, 0.1, 0.01);
    EXPECT_NEAR(neg.output, -0.5 * 0.1 / 0.01, 1e-12);
    s.negate_derivative = false;
    const auto pos = pid_step(s, g, 0.0, 0.1, 0.01);
    EXPECT_NEAR(pos.output, 0.5 * 0.1 / 0.01, 1e-12);
}

TEST(Pid, DerivativeFilterIsFirstOrder) {
    PidState s = unit_pid();
    s.derivative_cutoff_hz = 10.0;
    const PidGains g{0, 0, 1.0};
    s = pid_step(s, g, 0.0, 0.0, 0.0).state;
    const double a = std::exp(-2 * std::numbers::pi * 10.0 * 0.01);
    // Ramp of slope 1: raw derivative 1 every sample.
    double d = 0;
    for (int k = 1; k <= 20; ++k) {
        s = pid_step(s, g, 0.0, k * 0.01, k * 0.01).state;
        d = a * d + (1 - a) * 1.0;
        EXPECT_NEAR(s.derivative, d, 1e-12);
    }
}

TEST(Pid, ReverseDirectionNegatesGains) {
    PidState s = unit_pid();
    s.direction = Direction::reverse;
    EXPECT_DOUBLE_EQ(pid_step(s, {2.0, 0, 0}, 1.0, 0.0, 0).output, -2.0);
}

TEST(Pid, OffModeHoldsOutput) {
    PidState s = unit_pid();
    s = pid_step(s, {1.0, 0, 0}, 1.0, 0.0, 0).state;
    s.mode = PidMode::off;
    const auto r = pid_step(s, {1.0, 0, 0}, 5.0, 0.0, 1.0);
    EXPECT_DOUBLE_EQ(r.output, 1.0);
}

TEST(Pid, ResetIntegral) {
    PidState s = unit_pid();
    s.integral = 3.0;
    EXPECT_EQ(reset_integral(s).integral, 0.0);
}

TEST(Pid, InvalidLimitsRejected) {
    PidState s = unit_pid();
    s.out_min = 1;
    s.out_max = 0;
    EXPECT_THROW(check_pid(s), Error);
}

TEST(Cascade, HoverCommandAtRestGivesWeight) {
    VehicleParams p;
    CascadeConfig cfg;
    PilotCommand cmd;
    cmd.throttle = hover_throttle(p);
    const auto out = cascade_step(cfg, cmd, {}, make_cascade_pids(cfg), 0.0, p);
    EXPECT_NEAR(out.efforts.u1, p.mass * p.g, 1e-9);
    EXPECT_DOUBLE_EQ(out.efforts.u2, 0.0);
    EXPECT_DOUBLE_EQ(out.efforts.u3, 0.0);
    EXPECT_DOUBLE_EQ(out.efforts.u4, 0.0);
    EXPECT_NEAR(hover_throttle(p), 0.25, 1e-12);
}

TEST(Cascade, AngleLoopFeedsRateSetpoint) {
    VehicleParams p;
    CascadeConfig cfg;
    PilotCommand cmd;
    cmd.roll_deg = 10.0;
    const auto out = cascade_step(cfg, cmd, {}, make_cascade_pids(cfg), 0.0, p);
    EXPECT_NEAR(out.roll_rate_setpoint, 3.604 * deg2rad(10.0), 1e-12);
    EXPECT_NEAR(out.efforts.u2, 0.2209 * out.roll_rate_setpoint, 1e-12);
    EXPECT_GT(out.efforts.u2, 0.0);
}

TEST(Cascade, RateSetpointLimited) {
    VehicleParams p;
    CascadeConfig cfg;
    PilotCommand cmd;
    cmd.roll_deg = 45.0;
    AttitudeEstimate est;
    est.phi = -deg2rad(45.0);
    const auto out = cascade_step(cfg, cmd, est, make_cascade_pids(cfg), 0.0, p);
    EXPECT_DOUBLE_EQ(out.roll_rate_setpoint, cfg.rate_setpoint_limit);
}

TEST(Cascade, KillSwitchBypassesPids) {
    VehicleParams p;
    CascadeConfig cfg;
    PilotCommand cmd;
    cmd.kill = true;
    cmd.roll_deg = 22.5;
    cmd.yaw_rate_dps = -135.0;
    const auto out = cascade_step(cfg, cmd, {}, make_cascade_pids(cfg), 0.0, p);
    EXPECT_DOUBLE_EQ(out.efforts.u2, 0.5 * cfg.roll_pitch_torque_limit);
    EXPECT_DOUBLE_EQ(out.efforts.u4, -cfg.yaw_torque_limit);
    EXPECT_EQ(out.pids.roll_rate.mode, PidMode::off);
}

TEST(ClosedLoop, LinearImpulsesSettleWithinOneSecond) {
    VehicleParams p;
    CascadeConfig cfg;
    ClosedLoopOptions opt;
    opt.plant = PlantKind::linear;
    const auto roll = closed_loop_simulate(cfg, rate_impulse(Axis::roll, 0.5, 5.0), p, opt);
    const auto pitch = closed_loop_simulate(cfg, rate_impulse(Axis::pitch, 0.5, 5.0), p, opt);
    const auto yaw = closed_loop_simulate(cfg, rate_impulse(Axis::yaw, 0.5, 5.0), p, opt);
    EXPECT_LE(roll.settling.roll, 1.0);
    EXPECT_LE(pitch.settling.pitch, 1.0);
    EXPECT_LE(yaw.settling.yaw_rate, 1.0);
}

TEST(ClosedLoop, NonlinearRecoversFromTilt) {
    VehicleParams p;
    CascadeConfig cfg;
    const auto r = closed_loop_simulate(cfg, initial_attitude(10.0, -5.0, 5.0), p);
    EXPECT_FALSE(r.diverged);
    EXPECT_LT(std::abs(r.truth.back().phi), deg2rad(0.1));
    EXPECT_LT(std::abs(r.truth.back().theta), deg2rad(0.1));
    EXPECT_EQ(r.log.size(), 501u);
}

TEST(ClosedLoop, LogCarriesAppliedCommand) {
    VehicleParams p;
    CascadeConfig cfg;
    Scenario sc;
    sc.duration = 0.5;
    sc.command = [&](double) {
        PilotCommand c;
        c.throttle = hover_throttle(p);
        c.roll_deg = 9.0;
        return c;
    };
    const auto r = closed_loop_simulate(cfg, sc, p);
    PwmFrame f;
    f.width = r.log[3].pwm;
    EXPECT_NEAR(pwm_map(f).roll_deg, 9.0, 1e-9);
    EXPECT_NEAR(pwm_map(f).throttle, 0.25, 1e-12);
}

TEST(ClosedLoop, SensorModeIsSeedDeterministic) {
    VehicleParams p;
    CascadeConfig cfg;
    ClosedLoopOptions opt;
    opt.source = AttitudeSource::sensors;
    opt.noise = ImuNoise{};
    opt.seed = 42;
    const auto a = closed_loop_simulate(cfg, initial_attitude(5.0, 0.0, 2.0), p, opt);
    const auto b = closed_loop_simulate(cfg, initial_attitude(5.0, 0.0, 2.0), p, opt);
    EXPECT_EQ(a.log, b.log);
    opt.seed = 43;
    const auto c = closed_loop_simulate(cfg, initial_attitude(5.0, 0.0, 2.0), p, opt);
    EXPECT_NE(a.log, c.log);
}

TEST(ClosedLoop, LoopPeriodMustDivide) {
    VehicleParams p;
    CascadeConfig cfg;
    cfg.loop_rate_hz = 300.0;
    EXPECT_THROW(closed_loop_simulate(cfg, initial_attitude(1, 0, 1), p), Error);
}

TEST(Settling, TwoPercentOfPeak) {
    std::vector<double> t, x;
    for (int k = 0; k <= 1000; ++k) {
        t.push_back(k * 0.01);
        x.push_back(std::exp(-t.back()));
    }
    EXPECT_NEAR(settling_time(t, x), -std::log(0.02), 0.011);
    x.back() = 1.0;
    EXPECT_TRUE(std::isinf(settling_time(t, x)));
}

TEST(LoopRate, DegradesAtLowRate) {
    VehicleParams p;
    CascadeConfig cfg;
    const auto study = loop_rate_sweep(cfg, p, {100.0, 20.0});
    ASSERT_EQ(study.rows.size(), 2u);
    EXPECT_EQ(study.rows[0].verdict, LoopVerdict::stable);
    EXPECT_NE(study.rows[1].verdict, LoopVerdict::stable);
}

TEST(LinearLoop, ContinuousAttitudeSubsystemStable) {
    VehicleParams p;
    CascadeConfig cfg;
    const auto cl = continuous_closed_loop(linearize_hover(p), cfg);
    for (auto z : eigenvalues(submatrix(cl.a, cl.attitude))) EXPECT_LT(z.real(), 0.0);
}

TEST(LinearLoop, DiscreteMatchesSimulation) {
    // The discrete loop model must reproduce the linear-plant simulation frame by frame.
    VehicleParams p;
    CascadeConfig cfg;
    const auto dl = discrete_closed_loop(linearize_hover(p), cfg, Axis::roll, AttitudeSource::truth);
    std::vector<double> u(300, 0.0);
    for (int k = 10; k < 60; ++k) u[k] = 5.0;
    Scenario sc;
    sc.duration = 2.99;
    sc.command = stick_sequence(Axis::roll, u, 0.01, hover_throttle(p));
    ClosedLoopOptions opt;
    opt.plant = PlantKind::linear;
    const auto sim = closed_loop_simulate(cfg, sc, p, opt);
    Vector x = Vector::Zero(dl.phi.rows());
    for (std::size_t k = 0; k < sim.log.size(); ++k) {
        const double y = (dl.c * x)(0) + dl.d * u[k];
        EXPECT_NEAR(y, sim.log[k].phi, 1e-6) << "frame " << k;
        x = dl.phi * x + dl.gamma * u[k];
    }
}

TEST(Axes, ParseRejectsUnknown) {
    EXPECT_EQ(parse_axis("pitch"), Axis::pitch);
    try {
        parse_axis("heave");
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("roll, pitch, yaw"), std::string::npos);
    }
}
