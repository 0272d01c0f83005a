#pragma once

// Frequency-response estimation with coherence, and lower-order equivalent
// system (LOES) fitting with a pure time delay.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "quadlab/control.hpp"
#include "quadlab/detail/nelder_mead.hpp"
#include "quadlab/error.hpp"
#include "quadlab/excitation.hpp"
#include "quadlab/sensors.hpp"

namespace quadlab {

using cplx = std::complex<double>;

// ---------------------------------------------------------------------------
// Spectral estimation

struct WindowConfig {
    std::size_t length = 0;  // samples per segment; 0 picks automatically
    double overlap = 0.5;
};

inline constexpr std::size_t kMinWindows = 5;

inline std::size_t window_count(std::size_t n, std::size_t length, double overlap) {
    const auto step = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(static_cast<double>(length) * (1.0 - overlap))));
    return n < length ? 0 : (n - length) / step + 1;
}

/// Longest power-of-two segment that still yields five averaged windows.
inline std::size_t auto_window_length(std::size_t n, double overlap) {
    std::size_t best = 0;
    for (std::size_t len = 64; len <= n; len *= 2)
        if (window_count(n, len, overlap) >= kMinWindows) best = len;
    return best;
}

struct FrequencyResponse {
    std::vector<double> freqs;  // rad/s
    std::vector<cplx> response;
    std::vector<double> coherence;
    std::size_t window_length = 0;
    std::size_t window_step = 0;
    std::size_t window_count = 0;
    std::size_t coherence_violations = 0;  // raw values above 1 + 1e-9

    std::size_t size() const { return freqs.size(); }
};

/// Welch estimate with Hann windows, segment means removed. H = Gxy / Gxx, coherence
/// |Gxy|^2 / (Gxx Gyy), one-sided, DC bin dropped.
inline FrequencyResponse estimate_frf(const std::vector<double>& x, const std::vector<double>& y,
                                      double sample_rate, const WindowConfig& cfg = {}) {
    require(x.size() == y.size(), "input and output records differ in length");
    require(sample_rate > 0.0, "sample rate must be > 0");
    require(cfg.overlap >= 0.0 && cfg.overlap < 1.0, "overlap must lie in [0, 1)");
    require(cfg.length == 0 || cfg.length >= 8, "window length must be >= 8 (or 0 for auto)");
    std::size_t L = cfg.length;
    if (L == 0) L = std::max<std::size_t>(auto_window_length(x.size(), cfg.overlap), 64);
    const auto step = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(static_cast<double>(L) * (1.0 - cfg.overlap))));
    const std::size_t count = window_count(x.size(), L, cfg.overlap);
    if (count < kMinWindows) {
        throw Error(ErrorCode::record_too_short,
                    std::to_string(x.size()) + " samples give " + std::to_string(count) +
                        " windows of " + std::to_string(L) + "; need " +
                        std::to_string(kMinWindows));
    }

    std::vector<double> w(L);
    for (std::size_t i = 0; i < L; ++i)
        w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                    static_cast<double>(L));

    const std::size_t half = L / 2;
    std::vector<double> gxx(half + 1, 0.0), gyy(half + 1, 0.0);
    std::vector<cplx> gxy(half + 1, 0.0);
    Eigen::FFT<double> fft;
    std::vector<double> bx(L), by(L);
    std::vector<cplx> fx, fy;
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t off = k * step;
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < L; ++i) {
            mx += x[off + i];
            my += y[off + i];
        }
        mx /= static_cast<double>(L);
        my /= static_cast<double>(L);
        for (std::size_t i = 0; i < L; ++i) {
            bx[i] = (x[off + i] - mx) * w[i];
            by[i] = (y[off + i] - my) * w[i];
        }
        fft.fwd(fx, bx);
        fft.fwd(fy, by);
        for (std::size_t j = 1; j <= half; ++j) {
            gxx[j] += std::norm(fx[j]);
            gyy[j] += std::norm(fy[j]);
            gxy[j] += std::conj(fx[j]) * fy[j];
        }
    }

    FrequencyResponse out;
    out.window_length = L;
    out.window_step = step;
    out.window_count = count;
    for (std::size_t j = 1; j <= half; ++j) {
        out.freqs.push_back(2.0 * std::numbers::pi * static_cast<double>(j) * sample_rate /
                            static_cast<double>(L));
        if (gxx[j] <= 0.0 || gyy[j] <= 0.0) {
            out.response.push_back(gxx[j] > 0.0 ? gxy[j] / gxx[j] : cplx(0.0));
            out.coherence.push_back(0.0);
            continue;
        }
        out.response.push_back(gxy[j] / gxx[j]);
        const double c = std::norm(gxy[j]) / (gxx[j] * gyy[j]);
        if (c > 1.0 + 1e-9) ++out.coherence_violations;
        out.coherence.push_back(std::clamp(c, 0.0, 1.0));
    }
    return out;
}

/// Same, from time-stamped records. Rejects jitter above 1e-6 of the step.
inline FrequencyResponse estimate_frf(const std::vector<double>& t, const std::vector<double>& x,
                                      const std::vector<double>& y, const WindowConfig& cfg = {}) {
    require(t.size() == x.size() && t.size() == y.size(), "record columns differ in length");
    if (t.size() < 2) throw Error(ErrorCode::record_too_short, "fewer than two samples");
    const double dt = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
    for (std::size_t i = 1; i < t.size(); ++i) {
        if (std::abs((t[i] - t[i - 1]) - dt) > 1e-6 * dt + 1e-9) {
            throw Error(ErrorCode::nonuniform_sampling,
                        "sample " + std::to_string(i) + " breaks the uniform step " +
                            std::to_string(dt) + " s");
        }
    }
    return estimate_frf(x, y, 1.0 / dt, cfg);
}

// ---------------------------------------------------------------------------
// Transfer functions

enum class LoesStructure { roll_angle, pitch_angle, yaw_rate };

inline std::string to_string(LoesStructure s) {
    switch (s) {
    case LoesStructure::roll_angle: return "roll_angle";
    case LoesStructure::pitch_angle: return "pitch_angle";
    case LoesStructure::yaw_rate: return "yaw_rate";
    }
    return "?";
}

inline LoesStructure parse_structure(const std::string& s) {
    if (s == "roll_angle") return LoesStructure::roll_angle;
    if (s == "pitch_angle") return LoesStructure::pitch_angle;
    if (s == "yaw_rate") return LoesStructure::yaw_rate;
    throw Error(ErrorCode::invalid_argument,
                "unknown structure '" + s + "' (roll_angle, pitch_angle, yaw_rate)");
}

/// b1 s over a second-order denominator for the angle structures; the yaw-rate
/// structure adds a constant numerator term.
inline bool has_b0(LoesStructure s) { return s == LoesStructure::yaw_rate; }

/// num(s) / den(s) * exp(-tau s), coefficients in descending powers of s.
struct LoesModel {
    std::vector<double> num{1.0};
    std::vector<double> den{1.0};
    double tau = 0;
    double fit_cost = 0;
    LoesStructure structure = LoesStructure::yaw_rate;

    double natural_frequency() const {
        require(den.size() == 3, "needs a second-order denominator");
        return std::sqrt(den[2] / den[0]);
    }
    double damping() const { return den[1] / den[0] / (2.0 * natural_frequency()); }
    double dc_gain() const { return num.back() / den.back(); }
};

inline LoesModel make_loes(std::vector<double> num, std::vector<double> den, double tau,
                           LoesStructure s = LoesStructure::yaw_rate) {
    LoesModel m;
    m.num = std::move(num);
    m.den = std::move(den);
    m.tau = tau;
    m.structure = s;
    return m;
}

inline cplx polyval(const std::vector<double>& c, cplx s) {
    cplx v = 0.0;
    for (double a : c) v = v * s + a;
    return v;
}

inline std::vector<cplx> tf_frequency_response(const LoesModel& m, const std::vector<double>& w) {
    std::vector<cplx> out;
    out.reserve(w.size());
    for (double wi : w) {
        require(wi > 0.0, "frequencies must be > 0");
        const cplx s(0.0, wi);
        out.push_back(polyval(m.num, s) / polyval(m.den, s) * std::exp(-s * m.tau));
    }
    return out;
}

inline double mag_db(cplx h) { return 20.0 * std::log10(std::abs(h)); }
inline double phase_deg(cplx h) { return rad2deg(std::arg(h)); }

/// Phase of a / b in degrees, wrapped to (-180, 180].
inline double phase_error_deg(cplx a, cplx b) { return rad2deg(std::arg(a / b)); }

// ---------------------------------------------------------------------------
// LOES fit

inline constexpr double kCoherenceCutoff = 0.6;
inline constexpr double kPhaseWeight = 0.01745 * 0.01745;
inline constexpr double kMaxDelay = 0.5;

struct FitOptions {
    double w_lo = 0.5;   // rad/s
    double w_hi = 10.0;  // rad/s
    std::size_t min_run = 5;
};

struct FitPoint {
    double w;
    cplx h;
    double gamma2;
};

struct LoesFit {
    LoesModel model;
    std::vector<double> cost_history;  // best-so-far after each start
    std::size_t points = 0;
};

namespace detail {

inline std::vector<FitPoint> fit_points(const FrequencyResponse& frf, const FitOptions& opt) {
    std::vector<FitPoint> pts;
    std::size_t run = 0, best_run = 0;
    for (std::size_t i = 0; i < frf.size(); ++i) {
        const double w = frf.freqs[i];
        if (w < opt.w_lo || w > opt.w_hi) continue;
        if (frf.coherence[i] >= kCoherenceCutoff && std::abs(frf.response[i]) > 0.0) {
            pts.push_back({w, frf.response[i], frf.coherence[i]});
            best_run = std::max(best_run, ++run);
        } else {
            run = 0;
        }
    }
    if (best_run < opt.min_run) {
        throw Error(ErrorCode::insufficient_coherence,
                    "longest run with coherence >= 0.6 in [" + std::to_string(opt.w_lo) + ", " +
                        std::to_string(opt.w_hi) + "] rad/s has " + std::to_string(best_run) +
                        " points; need " + std::to_string(opt.min_run));
    }
    return pts;
}

inline double loes_cost(const LoesModel& m, const std::vector<FitPoint>& pts) {
    double j = 0.0;
    for (const auto& p : pts) {
        const cplx s(0.0, p.w);
        const cplx h = polyval(m.num, s) / polyval(m.den, s) * std::exp(-s * m.tau);
        const double dm = 20.0 * std::log10(std::abs(h) / std::abs(p.h));
        const double dp = phase_error_deg(h, p.h);
        j += p.gamma2 * (dm * dm + kPhaseWeight * dp * dp);
    }
    return j / static_cast<double>(pts.size());
}

/// Numerator minimizing the relative complex error for a fixed denominator and delay.
inline std::vector<double> ls_numerator(const std::vector<double>& den, double tau, bool b0,
                                        const std::vector<FitPoint>& pts) {
    const int cols = b0 ? 2 : 1;
    Eigen::MatrixXd a(2 * pts.size(), cols);
    Eigen::VectorXd rhs(2 * pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const cplx s(0.0, pts[i].w);
        const cplx g = std::exp(-s * tau) / polyval(den, s);
        const double wt = std::sqrt(pts[i].gamma2) / std::abs(pts[i].h);
        const cplx c1 = s * g * wt;
        a(2 * i, 0) = c1.real();
        a(2 * i + 1, 0) = c1.imag();
        if (b0) {
            const cplx c0 = g * wt;
            a(2 * i, 1) = c0.real();
            a(2 * i + 1, 1) = c0.imag();
        }
        rhs(2 * i) = (pts[i].h * wt).real();
        rhs(2 * i + 1) = (pts[i].h * wt).imag();
    }
    const Eigen::VectorXd sol = a.colPivHouseholderQr().solve(rhs);
    return b0 ? std::vector<double>{sol(0), sol(1)} : std::vector<double>{sol(0), 0.0};
}

} // namespace detail

/// Coherence-weighted magnitude/phase fit, multi-start Nelder-Mead from
/// 8 starts (wn in {2, 8} x zeta in {0.5, 1} x tau in {0.02, 0.2}).
inline LoesFit fit_loes_detailed(const FrequencyResponse& frf, LoesStructure structure,
                                 const FitOptions& opt = {}) {
    require(opt.w_lo > 0.0 && opt.w_lo < opt.w_hi, "fit band needs 0 < w_lo < w_hi");
    const auto pts = detail::fit_points(frf, opt);
    const bool b0 = has_b0(structure);

    // x = [ln wn, zeta, tau, b1, (b0)]
    auto model_of = [&](const std::vector<double>& x) {
        const double wn = std::exp(x[0]);
        return make_loes({x[3], b0 ? x[4] : 0.0}, {1.0, 2.0 * x[1] * wn, wn * wn}, x[2],
                         structure);
    };
    auto cost = [&](const std::vector<double>& x) {
        double pen = 0.0;
        if (x[2] < 0.0) pen += 1e3 * x[2] * x[2] + 1.0;
        if (x[2] > kMaxDelay) pen += 1e3 * (x[2] - kMaxDelay) * (x[2] - kMaxDelay) + 1.0;
        if (x[1] <= 0.0) pen += 1e3 * x[1] * x[1] + 1.0;
        auto m = model_of(x);
        m.tau = std::clamp(m.tau, 0.0, kMaxDelay);
        return detail::loes_cost(m, pts) + pen;
    };

    LoesFit fit;
    fit.points = pts.size();
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> best_x;
    for (double wn : {2.0, 8.0}) {
        for (double zeta : {0.5, 1.0}) {
            for (double tau : {0.02, 0.2}) {
                const std::vector<double> den{1.0, 2.0 * zeta * wn, wn * wn};
                const auto num = detail::ls_numerator(den, tau, b0, pts);
                std::vector<double> x{std::log(wn), zeta, tau, num[0]};
                std::vector<double> step{0.3, 0.2, 0.05, 0.3 * std::abs(num[0]) + 1e-3};
                if (b0) {
                    x.push_back(num[1]);
                    step.push_back(0.3 * std::abs(num[1]) + 1e-3);
                }
                auto r = detail::nelder_mead(cost, x, step);
                for (int restart = 0; restart < 2; ++restart) {
                    std::vector<double> st(step.size());
                    for (std::size_t i = 0; i < st.size(); ++i)
                        st[i] = 0.1 * step[i] + 0.05 * std::abs(r.x[i]);
                    auto r2 = detail::nelder_mead(cost, r.x, st);
                    if (r2.f < r.f) r = r2;
                }
                if (r.f < best) {
                    best = r.f;
                    best_x = r.x;
                }
                fit.cost_history.push_back(best);
            }
        }
    }

    fit.model = model_of(best_x);
    fit.model.fit_cost = best;

    // Accept only stable, non-degenerate fits: both poles in the left half
    // plane and within a factor of five of the fit band.
    const double a1 = fit.model.den[1], a0 = fit.model.den[2];
    const cplx disc = std::sqrt(cplx(a1 * a1 - 4.0 * a0, 0.0));
    const cplx p1 = (-a1 + disc) / 2.0, p2 = (-a1 - disc) / 2.0;
    const bool stable = a1 > 0.0 && a0 > 0.0 && p1.real() < 0.0 && p2.real() < 0.0;
    auto in_band = [&](cplx p) {
        return std::abs(p) >= opt.w_lo / 5.0 && std::abs(p) <= 5.0 * opt.w_hi;
    };
    if (!stable) {
        throw Error(ErrorCode::no_stable_fit,
                    "best fit has an unstable denominator (a1 = " + std::to_string(a1) +
                        ", a0 = " + std::to_string(a0) + ")");
    }
    if (!in_band(p1) || !in_band(p2)) {
        throw Error(ErrorCode::no_stable_fit,
                    "degenerate fit: poles at |" + std::to_string(std::abs(p1)) + "| and |" +
                        std::to_string(std::abs(p2)) + "| rad/s fall outside the fit band; " +
                        "the " + to_string(structure) + " structure does not match the data");
    }
    if (fit.model.tau < 0.0 || fit.model.tau > kMaxDelay) {
        throw Error(ErrorCode::no_stable_fit, "delay outside [0, 0.5] s");
    }
    return fit;
}

inline LoesModel fit_loes(const FrequencyResponse& frf, LoesStructure structure,
                          const FitOptions& opt = {}) {
    return fit_loes_detailed(frf, structure, opt).model;
}

// ---------------------------------------------------------------------------
// Text formats

/// freq_rad_s,mag_db,phase_deg,coherence
inline void write_frf_csv(std::ostream& os, const FrequencyResponse& frf) {
    os << "# quadlab-v1 frf windows=" << frf.window_count << " length=" << frf.window_length
       << " step=" << frf.window_step << "\n";
    os << "freq_rad_s,mag_db,phase_deg,coherence\n";
    for (std::size_t i = 0; i < frf.size(); ++i) {
        os << format_g6(frf.freqs[i]) << "," << format_g6(mag_db(frf.response[i])) << ","
           << format_g6(phase_deg(frf.response[i])) << "," << format_g6(frf.coherence[i]) << "\n";
    }
}

inline std::string format_poly(const std::vector<double>& c) {
    std::ostringstream os;
    bool first = true;
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (c[i] == 0.0) continue;
        const std::size_t pw = c.size() - 1 - i;
        os << (first ? (c[i] < 0 ? "-" : "") : (c[i] < 0 ? " - " : " + "));
        const double a = std::abs(c[i]);
        if (!(a == 1.0 && pw > 0)) os << format_g6(a);
        if (pw >= 1) os << "s";
        if (pw >= 2) os << "^" << pw;
        first = false;
    }
    return first ? "0" : os.str();
}

inline std::string describe(const LoesModel& m) {
    std::ostringstream os;
    os << "(" << format_poly(m.num) << ") / (" << format_poly(m.den) << ") * exp(-"
       << format_g6(m.tau) << " s)";
    return os.str();
}

inline void write_model(std::ostream& os, const LoesModel& m) {
    auto list = [&](const std::vector<double>& v) {
        std::string s;
        char buf[40];
        for (std::size_t i = 0; i < v.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", v[i]);
            s += (i ? " " : "") + std::string(buf);
        }
        return s;
    };
    char buf[40];
    os << "# quadlab-v1 loes-model\n";
    os << "# H(s) = " << describe(m) << "\n";
    os << "structure = " << to_string(m.structure) << "\n";
    os << "num = " << list(m.num) << "\n";
    os << "den = " << list(m.den) << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", m.tau);
    os << "tau = " << buf << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", m.fit_cost);
    os << "fit_cost = " << buf << "\n";
}

inline LoesModel read_model(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "# quadlab-v1 loes-model")
        throw Error(ErrorCode::header_mismatch, "expected '# quadlab-v1 loes-model'");
    LoesModel m;
    bool have_num = false, have_den = false, have_tau = false;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::malformed_row, "line " + std::to_string(lineno) + ": no '='");
        auto trim = [](std::string s) {
            s.erase(0, s.find_first_not_of(" \t"));
            s.erase(s.find_last_not_of(" \t\r") + 1);
            return s;
        };
        const std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
        auto numbers = [&] {
            std::istringstream ss(val);
            std::vector<double> v;
            double d;
            while (ss >> d) v.push_back(d);
            if (!ss.eof() || v.empty())
                throw Error(ErrorCode::malformed_row,
                            "line " + std::to_string(lineno) + ": bad number list");
            return v;
        };
        if (key == "structure") m.structure = parse_structure(val);
        else if (key == "num") { m.num = numbers(); have_num = true; }
        else if (key == "den") { m.den = numbers(); have_den = true; }
        else if (key == "tau") { m.tau = numbers().at(0); have_tau = true; }
        else if (key == "fit_cost") m.fit_cost = numbers().at(0);
        else throw Error(ErrorCode::unknown_key, "model key '" + key + "'");
    }
    if (!have_num || !have_den || !have_tau)
        throw Error(ErrorCode::missing_required, "model needs num, den and tau");
    return m;
}

// ---------------------------------------------------------------------------
// End-to-end identification on the simulated vehicle

struct IdentifyOptions {
    PlantKind plant = PlantKind::nonlinear;
    double dt = 1e-3;  // plant step
    WindowConfig window;
    FitOptions band{0.6, 20.0, 5};
    /// The closed loop keeps a nonzero DC gain, so the numerator carries a
    /// constant term by default.
    LoesStructure structure = LoesStructure::yaw_rate;
    double alpha = 0.98;
};

struct IdentifyReport {
    LoesFit fit;
    FrequencyResponse frf;
    FlightLog log;
    std::size_t saturation_events = 0;
};

/// Logged stick input for an axis, in deg or deg/s.
inline std::vector<double> logged_input(const FlightLog& log, Axis axis,
                                        const StickLimits& lim = {}) {
    std::vector<double> v;
    v.reserve(log.size());
    for (const auto& r : log) {
        PwmFrame f;
        f.width = r.pwm;
        const auto c = pwm_map(f, lim);
        v.push_back(axis == Axis::roll ? c.roll_deg : axis == Axis::pitch ? c.pitch_deg
                                                                          : c.yaw_rate_dps);
    }
    return v;
}

/// Logged response for an axis: filtered roll/pitch angle or yaw rate.
inline std::vector<double> logged_output(const FlightLog& log, Axis axis) {
    std::vector<double> v;
    v.reserve(log.size());
    for (const auto& r : log) v.push_back(axis == Axis::roll ? r.phi : axis == Axis::pitch ? r.theta : r.r);
    return v;
}

inline FrequencyResponse frf_from_log(const FlightLog& log, Axis axis, const WindowConfig& w,
                                      const StickLimits& lim = {}) {
    std::vector<double> t;
    t.reserve(log.size());
    for (const auto& r : log) t.push_back(r.t);
    return estimate_frf(t, logged_input(log, axis, lim), logged_output(log, axis), w);
}

/// Chirp on one stick, flown through the closed loop with the IMU and the
/// complementary filter in the loop, then estimated and fitted.
inline IdentifyReport end_to_end_identify(const VehicleParams& params, const CascadeConfig& cfg,
                                          Axis axis, const ChirpSpec& chirp,
                                          const ImuNoise& noise, std::uint64_t seed,
                                          const IdentifyOptions& opt = {}) {
    ChirpSpec spec = chirp;
    spec.dt = 1.0 / cfg.loop_rate_hz;
    const Signal sig = chirp_signal(spec);

    Scenario sc;
    sc.duration = static_cast<double>(sig.value.size() - 1) * spec.dt;
    sc.command = stick_sequence(axis, sig.value, spec.dt, hover_throttle(params));

    ClosedLoopOptions clo;
    clo.plant = opt.plant;
    clo.source = AttitudeSource::sensors;
    clo.dt = opt.dt;
    clo.noise = noise;
    clo.seed = seed;
    clo.alpha = opt.alpha;
    auto run = closed_loop_simulate(cfg, sc, params, clo);
    if (run.diverged) {
        throw Error(ErrorCode::attitude_diverged,
                    "identification run crashed at t = " + std::to_string(run.abort_time) + " s");
    }

    IdentifyReport rep;
    rep.frf = frf_from_log(run.log, axis, opt.window, cfg.limits);
    rep.fit = fit_loes_detailed(rep.frf, opt.structure, opt.band);
    rep.log = std::move(run.log);
    rep.saturation_events = run.saturation_events;
    return rep;
}

} // namespace quadlab
