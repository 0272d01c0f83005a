// quadlab command-line workbench.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "quadlab/quadlab.hpp"

using namespace quadlab;
using json = nlohmann::ordered_json;

namespace {

/// Divergence is reported through this code so scripts can tell it apart
/// from bad input.
constexpr int kExitDiverged = 2;

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    bool json = false;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "Workbench config file (key = value)")->check(CLI::ExistingFile);
    sub->add_option("--seed", c.seed, "RNG seed; overrides sim.seed");
    sub->add_flag("--json", c.json, "Print a JSON summary instead of text");
}

WorkbenchConfig load(const Common& c) {
    WorkbenchConfig cfg = c.config.empty() ? WorkbenchConfig{} : load_config(c.config);
    if (c.seed) cfg.sim.seed = *c.seed;
    return cfg;
}

void emit(const Common& c, const json& j, const std::string& text) {
    if (c.json)
        std::cout << j.dump(2) << "\n";
    else
        std::cout << text;
}

std::string g(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// ---------------------------------------------------------------------------
// Signal files: "# quadlab-v1 signal <kind>", "t,value", then one row per sample.

void write_signal(std::ostream& os, const Signal& s, const std::string& kind) {
    os << "# quadlab-v1 signal " << kind << "\nt,value\n";
    for (std::size_t k = 0; k < s.value.size(); ++k) os << g(s.t[k], 17) << "," << g(s.value[k], 17) << "\n";
}

Signal read_signal(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorCode::invalid_argument, "cannot open " + path.string());
    std::string line;
    if (!std::getline(is, line) || line.rfind("# quadlab-v1 signal", 0) != 0)
        throw Error(ErrorCode::header_mismatch, path.string() + " line 1: not a quadlab-v1 signal file");
    if (!std::getline(is, line) || line != "t,value")
        throw Error(ErrorCode::header_mismatch, path.string() + " line 2: expected 't,value'");
    Signal s;
    std::size_t lineno = 2;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto comma = line.find(',');
        char* end = nullptr;
        const double t = std::strtod(line.c_str(), &end);
        if (comma == std::string::npos || end != line.c_str() + comma)
            throw Error(ErrorCode::malformed_row, "line " + std::to_string(lineno) + ": expected 't,value'");
        const char* vstart = line.c_str() + comma + 1;
        const double v = std::strtod(vstart, &end);
        if (end == vstart || *end != '\0')
            throw Error(ErrorCode::malformed_row, "line " + std::to_string(lineno) + ": bad value");
        s.t.push_back(t);
        s.value.push_back(v);
    }
    if (s.t.size() < 2) throw Error(ErrorCode::record_too_short, path.string() + " has fewer than 2 samples");
    s.dt = (s.t.back() - s.t.front()) / static_cast<double>(s.t.size() - 1);
    for (std::size_t k = 1; k < s.t.size(); ++k)
        if (std::abs(s.t[k] - s.t[k - 1] - s.dt) > 1e-6 * s.dt)
            throw Error(ErrorCode::nonuniform_sampling, "sample spacing changes at line " + std::to_string(k + 3));
    return s;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
    Common common;
    std::string scenario = "impulse-roll";
    std::string input;
    std::string axis = "roll";
    std::string plant = "nonlinear";
    std::string attitude = "truth";
    bool open_loop = false;
    bool perturb = false;
    std::optional<double> loop_rate;
    std::optional<double> duration;
    double impulse = 0.5;
    std::string log;
};

void write_trajectory(const std::filesystem::path& path, const Trajectory& traj) {
    write_atomically(path, [&](std::ostream& os) {
        os << "# quadlab-v1 trajectory\nt";
        for (const char* n : kStateNames) os << "," << n;
        os << "\n";
        for (const auto& s : traj.samples) {
            os << g(s.t);
            const StateVector x = s.state.vec();
            for (int i = 0; i < x.size(); ++i) os << "," << g(x[i]);
            os << "\n";
        }
    });
}

int run_open_loop(const SimulateArgs& a, const WorkbenchConfig& cfg) {
    const double duration = a.duration.value_or(cfg.sim.duration);
    BodyState s0;
    if (a.perturb) s0.p = a.impulse;
    const auto trim = hover_trim(cfg.vehicle).speeds;
    const auto traj = simulate(s0, [&](double, const BodyState&) { return trim; }, cfg.vehicle, cfg.sim.dt, duration);
    if (!a.log.empty()) write_trajectory(a.log, traj);
    const auto& last = traj.samples.back().state;
    json j{{"mode", "open-loop"},
           {"perturb_roll_rate", a.perturb ? a.impulse : 0.0},
           {"diverged", traj.diverged},
           {"abort_time", traj.diverged ? json(traj.abort_time) : json(nullptr)},
           {"final_roll_deg", rad2deg(last.phi)},
           {"final_pitch_deg", rad2deg(last.theta)}};
    std::string text = "open-loop hover, roll-rate perturbation " + g(a.perturb ? a.impulse : 0.0) + " rad/s\n";
    if (traj.diverged) {
        text += "AttitudeDiverged: roll/pitch passed the crash limit at t = " + g(traj.abort_time) + " s\n";
    } else {
        text += "final roll " + g(rad2deg(last.phi)) + " deg, pitch " + g(rad2deg(last.theta)) + " deg\n";
    }
    emit(a.common, j, text);
    if (traj.diverged) {
        if (a.common.json)
            std::cerr << "AttitudeDiverged: roll/pitch passed the crash limit at t = " << g(traj.abort_time) << " s\n";
        return kExitDiverged;
    }
    return 0;
}

int run_simulate(const SimulateArgs& a) {
    WorkbenchConfig cfg = load(a.common);
    if (a.open_loop) return run_open_loop(a, cfg);

    if (a.loop_rate) {
        require(*a.loop_rate > 0.0, "--loop-rate must be > 0");
        cfg.control.loop_rate_hz = *a.loop_rate;
        if (cfg.control.derivative_cutoff_hz >= *a.loop_rate / 2.0)
            cfg.control.derivative_cutoff_hz = 0.45 * *a.loop_rate;
    }

    ClosedLoopOptions opt;
    opt.plant = a.plant == "linear" ? PlantKind::linear : PlantKind::nonlinear;
    opt.source = a.attitude == "sensors" ? AttitudeSource::sensors : AttitudeSource::truth;
    opt.dt = cfg.sim.dt;
    opt.noise = opt.source == AttitudeSource::sensors ? cfg.sensors : ImuNoise::none();
    opt.seed = cfg.sim.seed;
    opt.alpha = cfg.filter.alpha;

    Scenario sc;
    std::string what;
    const double duration = a.duration.value_or(cfg.sim.duration);
    if (!a.input.empty()) {
        const Axis axis = parse_axis(a.axis);
        const Signal sig = read_signal(a.input);
        const double frame = 1.0 / cfg.control.loop_rate_hz;
        if (std::abs(sig.dt - frame) > 1e-9 * frame)
            throw Error(ErrorCode::invalid_argument, "input sample time " + g(sig.dt) +
                                                         " s does not match the control frame " + g(frame) + " s");
        sc.duration = a.duration.value_or(sig.t.back() - sig.t.front());
        sc.command = stick_sequence(axis, sig.value, frame, hover_throttle(cfg.vehicle));
        what = "stick input " + a.input + " on " + to_string(axis);
    } else if (a.scenario.rfind("impulse-", 0) == 0) {
        const Axis axis = parse_axis(a.scenario.substr(8));
        sc = rate_impulse(axis, a.impulse, duration);
        what = to_string(axis) + " rate impulse " + g(a.impulse) + " rad/s";
    } else if (a.scenario == "tilt") {
        sc = initial_attitude(5.0, 0.0, duration);
        what = "5 deg roll offset";
    } else {
        throw Error(ErrorCode::invalid_argument, "unknown scenario '" + a.scenario +
                                                     "' (impulse-roll, impulse-pitch, impulse-yaw, tilt)");
    }

    const auto r = closed_loop_simulate(cfg.control, sc, cfg.vehicle, opt);
    if (!a.log.empty()) save_log(a.log, r.log);

    json j{{"mode", "closed-loop"},
           {"scenario", what},
           {"loop_rate_hz", cfg.control.loop_rate_hz},
           {"plant", a.plant},
           {"attitude_source", a.attitude},
           {"seed", cfg.sim.seed},
           {"records", r.log.size()},
           {"saturation_events", r.saturation_events},
           {"diverged", r.diverged},
           {"abort_time", r.diverged ? json(r.abort_time) : json(nullptr)},
           {"settling_s",
            a.input.empty() ? json{{"roll", finite_or_null(r.settling.roll)},
             {"pitch", finite_or_null(r.settling.pitch)},
             {"yaw_rate", finite_or_null(r.settling.yaw_rate)}}
                            : json(nullptr)}};
    std::ostringstream text;
    text << "closed loop, " << what << ", " << g(cfg.control.loop_rate_hz) << " Hz, " << a.plant << " plant, "
         << a.attitude << " attitude\n";
    text << "records " << r.log.size() << ", saturation events " << r.saturation_events << "\n";
    if (!r.diverged && a.input.empty()) {
        text << "2% settling: roll " << g(r.settling.roll) << " s, pitch " << g(r.settling.pitch)
             << " s, yaw rate " << g(r.settling.yaw_rate) << " s\n";
    }

    if (a.loop_rate) {
        const auto study = loop_rate_sweep(cfg.control, cfg.vehicle, {*a.loop_rate}, 10.0, cfg.sim.dt);
        const auto& row = study.rows.front();
        j["loop_rate_study"] = {{"reference_settling_s", finite_or_null(study.reference_settling)},
                                {"settling_s", finite_or_null(row.settling)},
                                {"verdict", to_string(row.verdict)}};
        text << "loop-rate check (5 deg roll offset): " << to_string(row.verdict) << ", settling "
             << g(row.settling) << " s vs " << g(study.reference_settling) << " s at 100 Hz";
        if (row.verdict != LoopVerdict::stable) text << "  << DEGRADED";
        text << "\n";
    }
    if (r.diverged) text << "AttitudeDiverged: crash limit passed at t = " << g(r.abort_time) << " s\n";
    emit(a.common, j, text.str());
    if (r.diverged) {
        if (a.common.json) std::cerr << "AttitudeDiverged: crash limit passed at t = " << g(r.abort_time) << " s\n";
        return kExitDiverged;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// linearize

struct LinearizeArgs {
    Common common;
    std::string out_dir;
    bool report_order = false;
};

json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

std::string report_order_label() {
    std::string s;
    for (int i : kReportOrder) s += (s.empty() ? "" : ",") + std::string(kStateNames[static_cast<std::size_t>(i)]);
    return s;
}

int run_linearize(const LinearizeArgs& a) {
    const WorkbenchConfig cfg = load(a.common);
    const auto m = linearize_hover(cfg.vehicle);
    const auto poles = eigenvalues(m);
    const auto ctrb = controllability(m);
    const auto list = errata(m);

    Matrix A = m.a, B = m.b, C = m.c, D = m.d;
    std::string label = canonical_order_label();
    if (a.report_order) {
        A = to_report_order(A);
        C = to_report_order(C);
        Matrix pb(B.rows(), B.cols()), pd(D.rows(), D.cols());
        for (int i = 0; i < 12; ++i) {
            pb.row(i) = B.row(kReportOrder[static_cast<std::size_t>(i)]);
            pd.row(i) = D.row(kReportOrder[static_cast<std::size_t>(i)]);
        }
        B = pb;
        D = pd;
        label = report_order_label();
    }
    if (!a.out_dir.empty()) {
        std::filesystem::create_directories(a.out_dir);
        for (auto [name, mat] : {std::pair<const char*, const Matrix*>{"A", &A}, {"B", &B}, {"C", &C}, {"D", &D}}) {
            write_atomically(std::filesystem::path(a.out_dir) / (std::string(name) + ".txt"),
                             [&](std::ostream& os) { write_matrix(os, name, *mat, label); });
        }
    }

    json jp = json::array();
    for (auto z : poles) jp.push_back({z.real(), z.imag()});
    json je = json::array();
    for (const auto& e : list)
        je.push_back({{"matrix", e.matrix},
                      {"row", kStateNames[static_cast<std::size_t>(e.printed.row)]},
                      {"col", e.matrix == "A" ? std::string(kStateNames[static_cast<std::size_t>(e.printed.col)])
                                              : "U" + std::to_string(e.printed.col + 1)},
                      {"published", e.printed.value},
                      {"computed", e.computed}});
    const json j{{"order", label},
                 {"gravity", {{"udot_theta", m.a(idx::u, idx::theta)}, {"vdot_phi", m.a(idx::v, idx::phi)}}},
                 {"eigenvalues", jp},
                 {"stability", classify(poles) == StabilityClass::asymptotically_stable ? "asymptotically stable"
                               : classify(poles) == StabilityClass::marginal           ? "marginal"
                                                                                        : "unstable"},
                 {"controllability_rank", ctrb.rank},
                 {"controllable", ctrb.is_controllable},
                 {"b_pattern_matches_published", same_pattern(Matrix(m.b), published_b(), 1e-7)},
                 {"errata", je},
                 {"A", matrix_json(A)},
                 {"B", matrix_json(B)}};

    std::ostringstream t;
    t << "hover linearization (" << label << ")\n";
    t << "gravity couplings: (udot, theta) = " << g(m.a(idx::u, idx::theta)) << ", (vdot, phi) = "
      << g(m.a(idx::v, idx::phi)) << "\n";
    t << "eigenvalues: ";
    for (auto z : poles) t << g(z.real(), 3) << (z.imag() >= 0 ? "+" : "") << g(z.imag(), 3) << "i ";
    t << "\nstability: " << j["stability"].get<std::string>() << "\n";
    t << "controllability rank " << ctrb.rank << "/12" << (ctrb.is_controllable ? " (controllable)" : "") << "\n";
    t << "\npublished vs computed\n";
    char line[160];
    std::snprintf(line, sizeof line, "  %-3s %-7s %-7s %12s %12s\n", "mat", "row", "col", "published", "computed");
    t << line;
    for (const auto& e : list) {
        const std::string col = e.matrix == "A" ? std::string(kStateNames[static_cast<std::size_t>(e.printed.col)])
                                                : "U" + std::to_string(e.printed.col + 1);
        std::snprintf(line, sizeof line, "  %-3s %-7s %-7s %12.6g %12.6g\n", e.matrix.c_str(),
                      kStateNames[static_cast<std::size_t>(e.printed.row)], col.c_str(), e.printed.value, e.computed);
        t << line;
    }
    t << "B nonzero pattern " << (j["b_pattern_matches_published"].get<bool>() ? "matches" : "differs from")
      << " the published one\n";
    if (!a.out_dir.empty()) t << "matrices written to " << a.out_dir << "/{A,B,C,D}.txt\n";
    emit(a.common, j, t.str());
    return 0;
}

// ---------------------------------------------------------------------------
// sysid

struct SysidArgs {
    Common common;
    std::string axis = "roll";
    std::string log;
    std::string structure = "yaw_rate";
    std::size_t window = 0;
    double band_lo = 0.6;
    double band_hi = 20.0;
    std::string frf_csv;
    std::string model_out;
    std::string log_out;
    bool noiseless = false;
};

int run_sysid(const SysidArgs& a) {
    const WorkbenchConfig cfg = load(a.common);
    const Axis axis = parse_axis(a.axis);
    const FitOptions band{a.band_lo, a.band_hi, 5};
    const LoesStructure structure = parse_structure(a.structure);

    FrequencyResponse frf;
    LoesFit fit;
    std::size_t records = 0;
    std::string source;
    if (!a.log.empty()) {
        const auto log = load_log(a.log);
        records = log.size();
        frf = frf_from_log(log, axis, {a.window, 0.5}, cfg.control.limits);
        fit = fit_loes_detailed(frf, structure, band);
        source = a.log;
    } else {
        IdentifyOptions opt;
        opt.dt = cfg.sim.dt;
        opt.window = {a.window, 0.5};
        opt.band = band;
        opt.structure = structure;
        opt.alpha = cfg.filter.alpha;
        auto rep = end_to_end_identify(cfg.vehicle, cfg.control, axis, cfg.chirp,
                                       a.noiseless ? ImuNoise::none() : cfg.sensors, cfg.sim.seed, opt);
        if (!a.log_out.empty()) save_log(a.log_out, rep.log);
        records = rep.log.size();
        frf = std::move(rep.frf);
        fit = std::move(rep.fit);
        source = "simulated chirp run";
    }
    if (!a.frf_csv.empty()) write_atomically(a.frf_csv, [&](std::ostream& os) { write_frf_csv(os, frf); });
    if (!a.model_out.empty()) write_atomically(a.model_out, [&](std::ostream& os) { write_model(os, fit.model); });

    std::size_t in_band = 0, above = 0;
    double lo = 1.0, hi = 0.0;
    for (std::size_t i = 0; i < frf.size(); ++i) {
        if (frf.freqs[i] < a.band_lo || frf.freqs[i] > a.band_hi) continue;
        ++in_band;
        above += frf.coherence[i] > 0.8;
        lo = std::min(lo, frf.coherence[i]);
        hi = std::max(hi, frf.coherence[i]);
    }
    const auto& m = fit.model;
    const json j{{"axis", to_string(axis)},
                 {"source", source},
                 {"records", records},
                 {"window", {{"length", frf.window_length}, {"step", frf.window_step}, {"count", frf.window_count}}},
                 {"band_rad_s", {a.band_lo, a.band_hi}},
                 {"coherence", {{"min", lo}, {"max", hi}, {"points", in_band}, {"above_0_8", above}}},
                 {"model",
                  {{"structure", to_string(m.structure)},
                   {"num", m.num},
                   {"den", m.den},
                   {"tau", m.tau},
                   {"natural_frequency", m.natural_frequency()},
                   {"damping", m.damping()},
                   {"dc_gain", m.dc_gain()},
                   {"cost", m.fit_cost},
                   {"points", fit.points},
                   {"text", describe(m)}}}};
    std::ostringstream t;
    t << to_string(axis) << " identification from " << source << " (" << records << " records)\n";
    t << "welch: window " << frf.window_length << ", step " << frf.window_step << ", " << frf.window_count
      << " averages\n";
    t << "coherence over [" << g(a.band_lo) << ", " << g(a.band_hi) << "] rad/s: " << g(lo, 3) << " .. " << g(hi, 3)
      << ", " << above << "/" << in_band << " points above 0.8\n";
    t << "model: " << describe(m) << "\n";
    t << "wn = " << g(m.natural_frequency(), 4) << " rad/s, zeta = " << g(m.damping(), 4) << ", tau = " << g(m.tau, 4)
      << " s, cost = " << g(m.fit_cost, 4) << " over " << fit.points << " points\n";
    emit(a.common, j, t.str());
    return 0;
}

// ---------------------------------------------------------------------------
// validate

struct ValidateArgs {
    Common common;
    std::string model;
    std::string log;
    std::string axis = "roll";
    std::string overlay;
};

int run_validate(const ValidateArgs& a) {
    const WorkbenchConfig cfg = load(a.common);
    const Axis axis = parse_axis(a.axis);
    std::ifstream ms(a.model);
    if (!ms) throw Error(ErrorCode::invalid_argument, "cannot open " + a.model);
    const auto model = read_model(ms);
    const auto r = validate_doublet(model, load_log(a.log), axis, cfg.control.limits);
    if (!a.overlay.empty()) write_atomically(a.overlay, [&](std::ostream& os) { write_overlay_csv(os, r); });
    const json j{{"axis", to_string(axis)},
                 {"model", describe(model)},
                 {"doublet_start", r.start_time},
                 {"window", {r.window_begin, r.window_end}},
                 {"rms_error", r.rms_error},
                 {"peak_ratio", r.peak_ratio},
                 {"lag_s", r.lag}};
    std::ostringstream t;
    t << to_string(axis) << " doublet at t = " << g(r.start_time) << " s, window [" << g(r.window_begin) << ", "
      << g(r.window_end) << "] s\n";
    t << "model: " << describe(model) << "\n";
    t << "rms error " << g(r.rms_error, 4) << ", predicted/measured peak " << g(r.peak_ratio, 4) << ", lag "
      << g(r.lag, 3) << " s\n";
    emit(a.common, j, t.str());
    return 0;
}

// ---------------------------------------------------------------------------
// chirp-gen

struct ChirpArgs {
    Common common;
    std::string kind = "chirp";
    std::optional<double> t_rec, amplitude, omega_min, omega_max, dt;
    double pulse_width = 0.5;
    double start = 1.0;
    double duration = 8.0;
    std::string out;
};

int run_chirp(const ChirpArgs& a) {
    const WorkbenchConfig cfg = load(a.common);
    ChirpSpec s = cfg.chirp;
    s.dt = a.dt.value_or(1.0 / cfg.control.loop_rate_hz);
    if (a.t_rec) s.t_rec = *a.t_rec;
    if (a.amplitude) s.amplitude = *a.amplitude;
    if (a.omega_min) s.omega_min = *a.omega_min;
    if (a.omega_max) s.omega_max = *a.omega_max;

    Signal sig;
    if (a.kind == "chirp") {
        sig = chirp_signal(s);
    } else if (a.kind == "doublet") {
        sig = doublet(a.amplitude.value_or(10.0), a.pulse_width, a.start, s.dt, a.duration);
        sig.t.resize(sig.value.size());
        for (std::size_t k = 0; k < sig.t.size(); ++k) sig.t[k] = static_cast<double>(k) * s.dt;
    } else {
        throw Error(ErrorCode::invalid_argument, "unknown signal kind '" + a.kind + "' (chirp, doublet)");
    }
    if (a.out.empty() || a.out == "-") {
        write_signal(std::cout, sig, a.kind);
        return 0;
    }
    write_atomically(a.out, [&](std::ostream& os) { write_signal(os, sig, a.kind); });
    json j{{"kind", a.kind}, {"samples", sig.value.size()}, {"dt", s.dt}, {"file", a.out}};
    if (a.kind == "chirp") {
        j["t_rec"] = s.t_rec;
        j["trim_pad"] = s.trim_pad;
        j["omega_end"] = chirp_omega(s, s.t_rec);
    }
    emit(a.common, j, a.kind + ": " + std::to_string(sig.value.size()) + " samples at " + g(s.dt) + " s -> " + a.out + "\n");
    return 0;
}

// ---------------------------------------------------------------------------
// geo

struct GeoArgs {
    Common common;
    std::vector<double> from, to;
    std::optional<double> heading;
    std::optional<double> course;
};

int run_geo(const GeoArgs& a) {
    json j;
    std::ostringstream t;
    std::optional<double> course = a.course;
    if (!a.from.empty() || !a.to.empty()) {
        require(a.from.size() == 2 && a.to.size() == 2, "--from and --to each take LAT LON");
        const double d = distance_between(a.from[0], a.from[1], a.to[0], a.to[1]);
        j["distance_m"] = d;
        t << "distance " << g(d, 10) << " m\n";
        if (d > 0.0) {
            try {
                course = course_to(a.from[0], a.from[1], a.to[0], a.to[1]);
                j["course_deg"] = *course;
                t << "course " << g(*course, 8) << " deg\n";
            } catch (const Error& e) {
                if (e.code() != ErrorCode::degenerate_bearing) throw;
                j["course_deg"] = nullptr;
                t << "course undefined (antipodal points)\n";
            }
        }
    }
    if (a.heading) {
        if (!course) throw Error(ErrorCode::invalid_argument, "--heading needs --course or --from/--to");
        const double e = heading_error(*course, *a.heading);
        j["heading_error_deg"] = e;
        t << "heading error " << g(e, 8) << " deg (" << (e >= 0 ? "turn clockwise" : "turn counter-clockwise") << ")\n";
    }
    if (j.empty()) throw Error(ErrorCode::invalid_argument, "nothing to compute; give --from/--to or --course/--heading");
    emit(a.common, j, t.str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"quadlab: quadcopter dynamics, control and identification workbench"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "Run an open- or closed-loop scenario");
    add_common(s, sim.common);
    s->add_option("--scenario", sim.scenario, "impulse-roll | impulse-pitch | impulse-yaw | tilt")
        ->capture_default_str();
    s->add_option("--input", sim.input, "Stick signal file (chirp-gen output) flown on --axis");
    s->add_option("--axis", sim.axis, "Axis for --input: roll | pitch | yaw")->capture_default_str();
    s->add_option("--plant", sim.plant, "nonlinear | linear")
        ->check(CLI::IsMember({"nonlinear", "linear"}))
        ->capture_default_str();
    s->add_option("--attitude", sim.attitude, "Attitude feedback: truth | sensors (IMU + complementary filter)")
        ->check(CLI::IsMember({"truth", "sensors"}))
        ->capture_default_str();
    s->add_flag("--open-loop", sim.open_loop, "Hold hover rotor speeds, no controller");
    s->add_flag("--perturb", sim.perturb, "Open loop: start with a roll-rate perturbation of --impulse rad/s");
    s->add_option("--impulse", sim.impulse, "Impulse / perturbation body rate, rad/s")->capture_default_str();
    s->add_option("--loop-rate", sim.loop_rate, "Control loop rate, Hz; also runs the loop-rate check");
    s->add_option("--duration", sim.duration, "Seconds; defaults to sim.duration or the input length");
    s->add_option("--log", sim.log, "Write the flight log (closed loop) or trajectory (open loop) here");

    LinearizeArgs lin;
    auto* l = app.add_subcommand("linearize", "Hover linearization, eigenvalues and controllability");
    add_common(l, lin.common);
    l->add_option("--out-dir", lin.out_dir, "Write A, B, C, D matrix files here");
    l->add_flag("--report-order", lin.report_order, "Order states X Y Z U V W phi theta psi P Q R");

    SysidArgs sid;
    auto* y = app.add_subcommand("sysid", "Frequency response and LOES fit from a log or a simulated chirp run");
    add_common(y, sid.common);
    y->add_option("--axis", sid.axis, "roll | pitch | yaw")->capture_default_str();
    y->add_option("--log", sid.log, "Flight log to identify; without it a chirp run is simulated");
    y->add_option("--structure", sid.structure, "roll_angle | pitch_angle | yaw_rate (b1 s + b0 numerator)")
        ->capture_default_str();
    y->add_option("--window", sid.window, "Welch window length in samples; 0 picks one automatically")
        ->capture_default_str();
    y->add_option("--band-lo", sid.band_lo, "Fit band lower edge, rad/s")->capture_default_str();
    y->add_option("--band-hi", sid.band_hi, "Fit band upper edge, rad/s")->capture_default_str();
    y->add_option("--frf", sid.frf_csv, "Write freq, mag_db, phase_deg, coherence CSV");
    y->add_option("--model", sid.model_out, "Write the fitted model");
    y->add_option("--log-out", sid.log_out, "Write the simulated chirp log");
    y->add_flag("--noiseless", sid.noiseless, "Simulated run without IMU noise");

    ValidateArgs val;
    auto* v = app.add_subcommand("validate", "Compare a fitted model with a doublet flight log");
    add_common(v, val.common);
    v->add_option("--model", val.model, "Model file from sysid")->required()->check(CLI::ExistingFile);
    v->add_option("--log", val.log, "Flight log containing a doublet")->required()->check(CLI::ExistingFile);
    v->add_option("--axis", val.axis, "roll | pitch | yaw")->capture_default_str();
    v->add_option("--overlay", val.overlay, "Write t, input, measured, predicted CSV");

    ChirpArgs ch;
    auto* c = app.add_subcommand("chirp-gen", "Write an exponential chirp or a doublet stick signal");
    add_common(c, ch.common);
    c->add_option("--kind", ch.kind, "chirp | doublet")->capture_default_str();
    c->add_option("--t-rec", ch.t_rec, "Sweep length, s");
    c->add_option("--amplitude", ch.amplitude, "Stick amplitude, deg or deg/s");
    c->add_option("--omega-min", ch.omega_min, "Start frequency, rad/s");
    c->add_option("--omega-max", ch.omega_max, "Nominal end frequency, rad/s");
    c->add_option("--dt", ch.dt, "Sample time, s; defaults to the control frame");
    c->add_option("--pulse-width", ch.pulse_width, "Doublet pulse width, s")->capture_default_str();
    c->add_option("--start", ch.start, "Doublet start, s")->capture_default_str();
    c->add_option("--duration", ch.duration, "Doublet record length, s")->capture_default_str();
    c->add_option("--out", ch.out, "Output file; stdout when omitted");

    GeoArgs geo;
    auto* gsub = app.add_subcommand("geo", "Great-circle distance, course and heading error");
    add_common(gsub, geo.common);
    gsub->add_option("--from", geo.from, "LAT LON, deg")->expected(2);
    gsub->add_option("--to", geo.to, "LAT LON, deg")->expected(2);
    gsub->add_option("--course", geo.course, "Course, deg (when no points are given)");
    gsub->add_option("--heading", geo.heading, "Compass heading, deg");

    CLI11_PARSE(app, argc, argv);

    try {
        if (s->parsed()) return run_simulate(sim);
        if (l->parsed()) return run_linearize(lin);
        if (y->parsed()) return run_sysid(sid);
        if (v->parsed()) return run_validate(val);
        if (c->parsed()) return run_chirp(ch);
        if (gsub->parsed()) return run_geo(geo);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
