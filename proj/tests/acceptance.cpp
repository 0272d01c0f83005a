// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "quadlab/quadlab.hpp"

using namespace quadlab;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void check(bool ok, const std::string& what) {
        pass = pass && ok;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [x]");
    }
};

std::string fmt(const char* f, double a) {
    char buf[96];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string fmt(const char* f, double a, double b) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

Outcome hover_trim_criterion() {
    Outcome o;
    VehicleParams p;
    const double w = hover_speed(p);
    o.check(std::abs(w - 99.045) < 1e-3, fmt("hover speed %.4f rad/s (99.045 +- 1e-3)", w));
    const auto d = eom_derivative(BodyState{}, mix_motors(hover_trim(p).speeds, p), p);
    const double r = d.cwiseAbs().maxCoeff();
    o.check(r <= 1e-12, fmt("|xdot| at trim %.1e (<= 1e-12)", r));
    return o;
}

Outcome linearization_criterion() {
    Outcome o;
    const auto m = linearize_hover(VehicleParams{});
    const double g1 = m.a(idx::u, idx::theta), g2 = m.a(idx::v, idx::phi);
    o.check(std::abs(g1 - 9.81) < 1e-5 && std::abs(g2 + 9.81) < 1e-5,
            fmt("(udot,theta) %.6f, (vdot,phi) %.6f (+-1e-5)", g1, g2));
    int ones = 0;
    for (auto [r, c] : {std::pair{idx::x, idx::u}, {idx::y, idx::v}, {idx::z, idx::w},
                        {idx::phi, idx::p}, {idx::theta, idx::q}, {idx::psi, idx::r}})
        ones += std::abs(m.a(r, c) - 1.0) < 1e-9;
    o.check(ones == 6, "kinematic unit entries " + std::to_string(ones) + "/6");
    o.check(m.c.isIdentity(0.0) && m.d.isZero(0.0), "C = I, D = 0 exactly");
    const bool absent = std::abs(m.a(idx::w, idx::phi)) < 1e-9 && std::abs(m.a(idx::p, idx::q)) < 1e-9 &&
                        std::abs(m.a(idx::q, idx::p)) < 1e-9 && std::abs(m.b(idx::p, 1) - 12.3457) > 1.0;
    o.check(absent, "printed -9.81 / +-1.63 / B magnitudes absent");
    const auto list = errata(m);
    std::size_t a_count = 0, b_count = 0;
    for (const auto& e : list) (e.matrix == "A" ? a_count : b_count)++;
    o.check(a_count >= 3 && b_count >= 4,
            "errata lists " + std::to_string(a_count) + " A and " + std::to_string(b_count) + " B entries");
    return o;
}

Outcome loop_behavior_criterion() {
    Outcome o;
    const auto m = linearize_hover(VehicleParams{});
    o.check(classify(eigenvalues(m)) != StabilityClass::asymptotically_stable,
            "open loop not asymptotically stable");
    const auto c = controllability(m);
    o.check(c.rank == 12, "controllability rank " + std::to_string(c.rank));
    VehicleParams p;
    CascadeConfig cfg;
    ClosedLoopOptions opt;
    opt.plant = PlantKind::linear;
    const double sr = closed_loop_simulate(cfg, rate_impulse(Axis::roll, 0.5, 5.0), p, opt).settling.roll;
    const double sp = closed_loop_simulate(cfg, rate_impulse(Axis::pitch, 0.5, 5.0), p, opt).settling.pitch;
    const double sy = closed_loop_simulate(cfg, rate_impulse(Axis::yaw, 0.5, 5.0), p, opt).settling.yaw_rate;
    o.check(sr <= 1.0 && sp <= 1.0 && sy <= 1.0,
            fmt("2%% settling roll %.2f s, ", sr) + fmt("pitch %.2f s, yaw rate %.2f s (<= 1.0)", sp, sy));
    return o;
}

Outcome loop_rate_criterion() {
    Outcome o;
    const auto study = loop_rate_sweep(CascadeConfig{}, VehicleParams{}, {100.0, 20.0});
    const auto& fast = study.rows[0];
    const auto& slow = study.rows[1];
    o.check(fast.verdict == LoopVerdict::stable, fmt("100 Hz settles in %.2f s", fast.settling));
    o.check(slow.verdict != LoopVerdict::stable, "20 Hz " + to_string(slow.verdict));
    return o;
}

Outcome chirp_criterion() {
    Outcome o;
    ChirpSpec s;
    const double k_end = chirp_k(s, s.t_rec);
    o.check(chirp_k(s, 0.0) == 0.0, "K(0) = 0");
    o.check(std::abs(k_end - 1.00228) < 1e-5 && std::abs(k_end - 0.0187 * (std::exp(4.0) - 1.0)) < 1e-6,
            fmt("K(T_rec) = %.6f", k_end));
    const auto sig = chirp_signal(s);
    const auto pad = static_cast<std::size_t>(std::lround(s.trim_pad / s.dt));
    bool pads = std::abs(s.trim_pad - 3.0) < 1e-12;
    for (std::size_t k = 0; k < pad; ++k)
        pads = pads && sig.value[k] == 0.0 && sig.value[sig.value.size() - 1 - k] == 0.0;
    o.check(pads, "3 s trim pads");
    bool mono = true;
    for (double t = s.dt; t <= s.t_rec; t += s.dt) mono = mono && chirp_omega(s, t) > chirp_omega(s, t - s.dt);
    o.check(mono, "frequency monotone");
    return o;
}

Outcome sysid_criterion() {
    Outcome o;
    // The default 90 s record is too short for the Welch windows to reach
    // coherence 0.99 at the low end of the band; a 600 s sweep is used.
    ChirpSpec s;
    s.t_rec = 600.0;
    const auto sig = chirp_signal(s);
    const auto clean = oracle::second_order(sig.value, s.dt, 2.305, 0.0, 3.894, 3.967, 0.197);
    const auto frf = estimate_frf(sig.value, clean, 1.0 / s.dt);
    const auto fit = fit_loes(frf, LoesStructure::roll_angle);
    const double wn = fit.natural_frequency(), z = fit.damping();
    o.check(std::abs(wn / 1.992 - 1.0) <= 0.02, fmt("wn %.4f rad/s (1.992 +- 2%%)", wn));
    o.check(std::abs(z / 0.978 - 1.0) <= 0.05, fmt("zeta %.4f (0.978 +- 5%%)", z));
    o.check(std::abs(fit.tau - 0.197) <= 0.02, fmt("tau %.4f s (0.197 +- 0.02)", fit.tau));
    double cmin = 1.0;
    for (std::size_t i = 0; i < frf.size(); ++i)
        if (frf.freqs[i] >= 0.5 && frf.freqs[i] <= 10.0) cmin = std::min(cmin, frf.coherence[i]);
    o.check(cmin > 0.99, fmt("noiseless min coherence %.4f (> 0.99)", cmin));
    const auto noisy = estimate_frf(sig.value, oracle::add_noise(clean, 10.0, 7), 1.0 / s.dt);
    double nmin = 1.0, nmax = 0.0;
    for (std::size_t i = 0; i < noisy.size(); ++i)
        if (noisy.freqs[i] >= 0.5 && noisy.freqs[i] <= 10.0) {
            nmin = std::min(nmin, noisy.coherence[i]);
            nmax = std::max(nmax, noisy.coherence[i]);
        }
    o.check(nmin >= 0.8 && nmax <= 1.0, fmt("10 dB coherence in [%.3f, %.3f]", nmin, nmax));
    return o;
}

Outcome end_to_end_criterion() {
    Outcome o;
    VehicleParams p;
    CascadeConfig cfg;
    const auto id = end_to_end_identify(p, cfg, Axis::roll, ChirpSpec{}, ImuNoise{}, 1);
    const auto truth = discrete_closed_loop(linearize_hover(p), cfg, Axis::roll, AttitudeSource::sensors);
    std::vector<double> band;
    for (std::size_t i = 0; i < id.frf.size(); ++i)
        if (id.frf.coherence[i] > 0.8 && id.frf.freqs[i] >= 0.6 && id.frf.freqs[i] <= 20.0)
            band.push_back(id.frf.freqs[i]);
    const auto ht = frequency_response(truth, band);
    const auto hm = tf_frequency_response(id.fit.model, band);
    double dmag = 0.0, dph = 0.0;
    for (std::size_t i = 0; i < band.size(); ++i) {
        dmag = std::max(dmag, std::abs(mag_db(hm[i]) - mag_db(ht[i])));
        dph = std::max(dph, std::abs(phase_error_deg(hm[i], ht[i])));
    }
    o.check(!band.empty() && dmag <= 1.0 && dph <= 10.0,
            std::to_string(band.size()) + " points with coherence > 0.8, " +
                fmt("max |dmag| %.3f dB, max |dphase| %.2f deg", dmag, dph));

    const auto d = doublet(10.0, 0.5, 1.0, 1.0 / cfg.loop_rate_hz, 8.0);
    Scenario sc;
    sc.duration = 8.0;
    sc.command = stick_sequence(Axis::roll, d.value, d.dt, hover_throttle(p));
    ClosedLoopOptions opt;
    opt.source = AttitudeSource::sensors;
    opt.noise = ImuNoise{};
    opt.seed = 2;
    const auto run = closed_loop_simulate(cfg, sc, p, opt);
    const auto v = validate_doublet(id.fit.model, run.log, Axis::roll);
    o.check(std::abs(v.lag) <= 0.05, fmt("doublet lag %.4f s (<= 0.05)", v.lag));
    return o;
}

double rise_time(const std::vector<double>& y, double dt) {
    auto crossing = [&](double level) {
        std::size_t i = 0;
        while (y[i] < level) ++i;
        if (i == 0) return 0.0;
        return (static_cast<double>(i - 1) + (level - y[i - 1]) / (y[i] - y[i - 1])) * dt;
    };
    return crossing(0.9 * y.back()) - crossing(0.1 * y.back());
}

Outcome filter_criterion() {
    Outcome o;
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0, angle = 0.0;
    for (int k = 0; k < 10000; ++k) {
        const double g = u(rng), a = u(rng);
        const double expect = 0.98 * (angle + g * 0.01) + 0.02 * a;
        angle = complementary_step(angle, g, a, 0.98, 0.01);
        worst = std::max(worst, std::abs(angle - expect));
    }
    o.check(worst <= 1e-12, fmt("identity residual %.1e (<= 1e-12)", worst));

    angle = 0.0;
    double peak = 0.0;
    for (int k = 0; k < 20000; ++k) {
        angle = complementary_step(angle, 0.05, 0.0, 0.98, 0.01);
        peak = std::max(peak, std::abs(angle));
    }
    const double bound = 0.98 * 0.05 * 0.01 / 0.02;
    o.check(peak <= bound + 1e-12, fmt("bias response peak %.5f rad (bound %.5f)", peak, bound));

    FilterConfig c;
    c.cutoff_hz = 5.0;
    const std::vector<double> step(400, 1.0);
    c.kind = FilterKind::butterworth2;
    const double tb = rise_time(filter_series(c, step), 0.01);
    c.kind = FilterKind::chebyshev1;
    const double tc = rise_time(filter_series(c, step), 0.01);
    o.check(tc < tb, fmt("rise Chebyshev %.4f s < Butterworth %.4f s", tc, tb));

    std::vector<double> x(400);
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = std::sin(2 * std::numbers::pi * 0.5 * k * 0.01);
    auto crossing = [](const std::vector<double>& v) {
        for (std::size_t k = 150; k + 1 < v.size(); ++k)
            if (v[k] <= 0 && v[k + 1] > 0) return k - v[k] / (v[k + 1] - v[k]);
        return 0.0;
    };
    double min_delay = 1e9;
    for (auto kind : {FilterKind::lowpass1, FilterKind::butterworth2, FilterKind::chebyshev1}) {
        c.kind = kind;
        min_delay = std::min(min_delay, (crossing(filter_series(c, x)) - crossing(x)) * 0.01);
    }
    o.check(min_delay > 0.0, fmt("filtered trace delay >= %.3f s", min_delay));
    return o;
}

Outcome pwm_criterion() {
    Outcome o;
    bool quant = true;
    for (double w = 1000.0; w <= 2100.0; w += 0.37) {
        const double q = pwm_quantize(w);
        quant = quant && q >= 1024 && q <= 2048 && std::fmod(q, 4.0) == 0.0;
    }
    o.check(quant, "quantized to 4 us in [1024, 2048]");
    PwmFrame f;
    f.width[channel::roll] = 1024;
    f.width[channel::pitch] = 2048;
    f.width[channel::yaw] = 1536;
    const auto c = pwm_map(f);
    o.check(c.roll_deg == -45.0 && c.pitch_deg == 45.0 && c.yaw_rate_dps == 0.0,
            "1024 -> -45, 2048 -> +45, 1536 -> 0");
    f.width[channel::yaw] = 2048;
    const double yhi = pwm_map(f).yaw_rate_dps;
    f.width[channel::yaw] = 1024;
    const double ylo = pwm_map(f).yaw_rate_dps;
    o.check(yhi == 135.0 && ylo == -135.0, "yaw +-135 deg/s");
    return o;
}

Outcome numerics_criterion() {
    Outcome o;
    VehicleParams p;
    BodyState s0;
    s0.p = 0.5;
    s0.q = -0.3;
    s0.r = 0.8;
    s0.u = 1.0;
    ControlEfforts e = hover_trim(p).efforts;
    e.u2 = 0.01;
    auto run = [&](double h) {
        BodyState s = s0;
        const int n = static_cast<int>(std::lround(1.0 / h));
        for (int i = 0; i < n; ++i) s = integrate_step(s, e, p, h);
        return s.vec();
    };
    const auto ref = run(1e-4);
    const double order = std::log2((run(0.02) - ref).norm() / (run(0.01) - ref).norm());
    o.check(order >= 3.7 && order <= 4.3, fmt("RK4 observed order %.3f", order));

    BodyState s = s0;
    s.phi = 0.2;
    s.theta = -0.1;
    s.psi = 0.6;
    e.omega_res = 3.0 * p.b;
    const auto lin = linearize_at(s, e, p);
    double jac = 0.0;
    for (int j = 0; j < 12; ++j) {
        auto cd = [&](double h) {
            StateVector xp = s.vec(), xm = s.vec();
            xp[j] += h;
            xm[j] -= h;
            return StateVector((eom_derivative(BodyState::from(xp), e, p) -
                                eom_derivative(BodyState::from(xm), e, p)) / (2 * h));
        };
        const StateVector col = (4.0 * cd(5e-4) - cd(1e-3)) / 3.0;
        jac = std::max(jac, (lin.a.col(j) - col).cwiseAbs().maxCoeff());
    }
    o.check(jac <= 1e-5, fmt("Jacobian vs half-step differences %.1e (<= 1e-5)", jac));

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(60.0, 180.0);
    double mix = 0.0;
    for (int i = 0; i < 1000; ++i) {
        MotorSpeeds m;
        for (auto& w : m.omega) w = u(rng);
        const auto back = unmix_motors(mix_motors(m, p), p);
        for (int k = 0; k < 4; ++k) mix = std::max(mix, std::abs(back[k] - m[k]));
    }
    o.check(mix <= 1e-9, fmt("mixing round trip %.1e (<= 1e-9)", mix));

    ClosedLoopOptions opt;
    opt.source = AttitudeSource::sensors;
    opt.noise = ImuNoise{};
    const auto log = closed_loop_simulate(CascadeConfig{}, rate_impulse(Axis::roll, 0.5, 5.0), p, opt).log;
    std::stringstream ls;
    write_log(ls, log);
    const auto back = read_log(ls);
    bool log_ok = back.size() == log.size();
    for (std::size_t k = 0; log_ok && k < log.size(); ++k) log_ok = back[k] == printed(log[k]);
    o.check(log_ok, std::to_string(log.size()) + "-record log round trip");

    WorkbenchConfig cfg;
    cfg.vehicle.mass = 1.0 / 3.0;
    cfg.filter.kind = FilterKind::chebyshev1;
    std::stringstream cs;
    write_config(cs, cfg);
    o.check(read_config(cs) == cfg, "config round trip");
    return o;
}

Outcome geo_criterion() {
    Outcome o;
    const double d = distance_between(0, 0, 0, 1);
    o.check(std::abs(d - std::numbers::pi * kEarthRadius / 180.0) <= 1.0, fmt("(0,0)->(0,1) %.3f m", d));
    const double north = course_to(0, 0, 1, 0), east = course_to(0, 0, 0, 1);
    o.check(std::abs(north) < 1e-9 && std::abs(east - 90.0) < 1e-9,
            fmt("bearings %.6f, %.6f deg", north, east));
    bool wrap = heading_error(10, 350) == 20.0 && heading_error(350, 10) == -20.0;
    for (int c = 0; c < 360; ++c)
        for (int h = 0; h < 360; h += 3) {
            const double e = heading_error(c, h);
            wrap = wrap && e > -180.0 && e <= 180.0;
        }
    o.check(wrap, "heading error in (-180, 180]");
    return o;
}

} // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"hover trim", hover_trim_criterion},
        {"linearization", linearization_criterion},
        {"open/closed loop", loop_behavior_criterion},
        {"loop rate", loop_rate_criterion},
        {"chirp", chirp_criterion},
        {"sysid round trip", sysid_criterion},
        {"end-to-end identification", end_to_end_criterion},
        {"filters", filter_criterion},
        {"pwm", pwm_criterion},
        {"numerics", numerics_criterion},
        {"geo", geo_criterion},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("threw: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("%s %2zu %s (%.2f s): %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, secs,
                    o.detail.c_str());
        failed += !o.pass;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
