#pragma once

// Workbench configuration: flat "key = value" text with '#' comments.
//
//   format = quadlab-v1          optional; any other value is rejected
//   vehicle.mass = 1.8
//   control.roll_rate.kp = 0.2209
//
// Keys may appear in any order; absent keys keep their defaults. Numbers are
// written with 17 significant digits so a write/read cycle is exact.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "quadlab/control.hpp"
#include "quadlab/dynamics.hpp"
#include "quadlab/error.hpp"
#include "quadlab/excitation.hpp"
#include "quadlab/flight_log.hpp"
#include "quadlab/sensors.hpp"

namespace quadlab {

inline constexpr std::string_view kConfigFormat = "quadlab-v1";

struct SimSettings {
    std::uint64_t seed = 1;
    double dt = 1e-3;       // s, plant step
    double duration = 5.0;  // s
};

struct WorkbenchConfig {
    VehicleParams vehicle;
    CascadeConfig control;
    FilterConfig filter;
    ImuNoise sensors;
    ChirpSpec chirp;
    SimSettings sim;

    bool operator==(const WorkbenchConfig& o) const;
};

inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string to_string(FilterKind k) {
    switch (k) {
    case FilterKind::complementary: return "complementary";
    case FilterKind::lowpass1: return "lowpass1";
    case FilterKind::butterworth2: return "butterworth2";
    case FilterKind::chebyshev1: return "chebyshev1";
    }
    return "complementary";
}

namespace detail {

struct ConfigKey {
    std::string name;
    std::string note;
    std::function<std::string(const WorkbenchConfig&)> get;
    std::function<void(WorkbenchConfig&, const std::string&)> set;
};

inline double parse_double(const std::string& key, const std::string& text) {
    double v = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v))
        throw Error(ErrorCode::type_mismatch, key + ": '" + text + "' is not a finite number");
    return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw Error(ErrorCode::type_mismatch, key + ": '" + text + "' is not true/false");
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& text) {
    std::uint64_t v = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end)
        throw Error(ErrorCode::type_mismatch, key + ": '" + text + "' is not an unsigned integer");
    return v;
}

enum class Bound { any, positive, nonnegative, unit };

inline void check_bound(const std::string& key, double v, Bound b) {
    const bool ok = b == Bound::any || (b == Bound::positive && v > 0.0) ||
                    (b == Bound::nonnegative && v >= 0.0) ||
                    (b == Bound::unit && v >= 0.0 && v <= 1.0);
    if (!ok) {
        const char* what = b == Bound::positive ? "> 0" : b == Bound::nonnegative ? ">= 0" : "in [0, 1]";
        throw Error(ErrorCode::type_mismatch, key + " must be " + what + ", got " + format_g17(v));
    }
}

template <typename Member>
ConfigKey number(std::string name, std::string note, Member member, Bound bound) {
    return {name, std::move(note),
            [member](WorkbenchConfig c) { return format_g17(member(c)); },
            [member, name, bound](WorkbenchConfig& c, const std::string& text) {
                const double v = parse_double(name, text);
                check_bound(name, v, bound);
                member(c) = v;
            }};
}

template <typename Member>
ConfigKey flag(std::string name, std::string note, Member member) {
    return {name, std::move(note),
            [member](WorkbenchConfig c) { return std::string(member(c) ? "true" : "false"); },
            [member, name](WorkbenchConfig& c, const std::string& text) {
                member(c) = parse_bool(name, text);
            }};
}

inline std::vector<ConfigKey> build_keys() {
    std::vector<ConfigKey> k;
    using W = WorkbenchConfig;
    auto num = [&](std::string name, std::string note, auto member, Bound b) {
        k.push_back(number(std::move(name), std::move(note), member, b));
    };

    num("vehicle.mass", "kg", [](W& c) -> double& { return c.vehicle.mass; }, Bound::positive);
    num("vehicle.ixx", "kg m^2", [](W& c) -> double& { return c.vehicle.ixx; }, Bound::positive);
    num("vehicle.iyy", "kg m^2", [](W& c) -> double& { return c.vehicle.iyy; }, Bound::positive);
    num("vehicle.izz", "kg m^2", [](W& c) -> double& { return c.vehicle.izz; }, Bound::positive);
    num("vehicle.jtp", "kg m^2, rotor polar inertia", [](W& c) -> double& { return c.vehicle.jtp; },
        Bound::nonnegative);
    num("vehicle.b", "N s^2, thrust factor", [](W& c) -> double& { return c.vehicle.b; }, Bound::positive);
    num("vehicle.d", "N m s^2, drag factor", [](W& c) -> double& { return c.vehicle.d; }, Bound::positive);
    num("vehicle.l", "m; the vehicle table lists 8.25, read as inches",
        [](W& c) -> double& { return c.vehicle.l; }, Bound::positive);
    num("vehicle.g", "m/s^2", [](W& c) -> double& { return c.vehicle.g; }, Bound::positive);
    num("vehicle.omega_max", "rad/s; 0 = twice hover speed",
        [](W& c) -> double& { return c.vehicle.omega_max; }, Bound::nonnegative);
    k.push_back(flag("vehicle.omega_residual_includes_b", "residual rotor speed carries the b factor",
                     [](W& c) -> bool& { return c.vehicle.omega_residual_includes_b; }));
    k.push_back(flag("vehicle.printed_q_gyro_sign", "use -J/Iyy p Omega in the pitch row",
                     [](W& c) -> bool& { return c.vehicle.printed_q_gyro_sign; }));

    struct Loop {
        const char* name;
        PidGains CascadeGains::*gains;
    };
    for (const Loop loop : {Loop{"roll_angle", &CascadeGains::roll_angle},
                            Loop{"pitch_angle", &CascadeGains::pitch_angle},
                            Loop{"roll_rate", &CascadeGains::roll_rate},
                            Loop{"pitch_rate", &CascadeGains::pitch_rate},
                            Loop{"yaw_rate", &CascadeGains::yaw_rate}}) {
        const std::string base = std::string("control.") + loop.name;
        const auto g = loop.gains;
        num(base + ".kp", "", [g](W& c) -> double& { return (c.control.gains.*g).kp; }, Bound::nonnegative);
        num(base + ".ki", "", [g](W& c) -> double& { return (c.control.gains.*g).ki; }, Bound::nonnegative);
        num(base + ".td", "s", [g](W& c) -> double& { return (c.control.gains.*g).td; }, Bound::nonnegative);
    }
    num("control.loop_rate_hz", "Hz", [](W& c) -> double& { return c.control.loop_rate_hz; },
        Bound::positive);
    num("control.rate_setpoint_limit", "rad/s", [](W& c) -> double& { return c.control.rate_setpoint_limit; },
        Bound::positive);
    num("control.roll_pitch_torque_limit", "N m",
        [](W& c) -> double& { return c.control.roll_pitch_torque_limit; }, Bound::positive);
    num("control.yaw_torque_limit", "N m", [](W& c) -> double& { return c.control.yaw_torque_limit; },
        Bound::positive);
    num("control.derivative_cutoff_hz", "Hz; 0 = raw derivative",
        [](W& c) -> double& { return c.control.derivative_cutoff_hz; }, Bound::nonnegative);
    k.push_back(flag("control.negate_derivative", "derivative on measurement",
                     [](W& c) -> bool& { return c.control.negate_derivative; }));
    num("control.stick_roll_deg", "deg at full stick", [](W& c) -> double& { return c.control.limits.roll_deg; },
        Bound::positive);
    num("control.stick_pitch_deg", "deg at full stick",
        [](W& c) -> double& { return c.control.limits.pitch_deg; }, Bound::positive);
    num("control.stick_yaw_rate_dps", "deg/s at full stick",
        [](W& c) -> double& { return c.control.limits.yaw_rate_dps; }, Bound::positive);

    k.push_back({"filter.kind", "complementary | lowpass1 | butterworth2 | chebyshev1",
                 [](const W& c) { return to_string(c.filter.kind); },
                 [](W& c, const std::string& text) {
                     for (auto kind : {FilterKind::complementary, FilterKind::lowpass1,
                                       FilterKind::butterworth2, FilterKind::chebyshev1})
                         if (to_string(kind) == text) {
                             c.filter.kind = kind;
                             return;
                         }
                     throw Error(ErrorCode::type_mismatch,
                                 "filter.kind: '" + text +
                                     "' is not one of complementary, lowpass1, butterworth2, chebyshev1");
                 }});
    num("filter.alpha", "complementary weight", [](W& c) -> double& { return c.filter.alpha; }, Bound::unit);
    num("filter.cutoff_hz", "Hz", [](W& c) -> double& { return c.filter.cutoff_hz; }, Bound::positive);
    num("filter.ripple_db", "dB, Chebyshev only", [](W& c) -> double& { return c.filter.ripple_db; },
        Bound::positive);
    num("filter.sample_rate_hz", "Hz", [](W& c) -> double& { return c.filter.sample_rate_hz; },
        Bound::positive);

    num("sensors.accel_sigma", "m/s^2", [](W& c) -> double& { return c.sensors.accel_sigma; },
        Bound::nonnegative);
    num("sensors.gyro_sigma", "rad/s", [](W& c) -> double& { return c.sensors.gyro_sigma; },
        Bound::nonnegative);
    num("sensors.gyro_bias_init", "rad/s", [](W& c) -> double& { return c.sensors.gyro_bias_init; },
        Bound::any);
    num("sensors.gyro_bias_walk", "rad/s/sqrt(s)", [](W& c) -> double& { return c.sensors.gyro_bias_walk; },
        Bound::nonnegative);

    num("chirp.c1", "", [](W& c) -> double& { return c.chirp.c1; }, Bound::positive);
    num("chirp.c2", "", [](W& c) -> double& { return c.chirp.c2; }, Bound::positive);
    num("chirp.omega_min", "rad/s", [](W& c) -> double& { return c.chirp.omega_min; }, Bound::positive);
    num("chirp.omega_max", "rad/s", [](W& c) -> double& { return c.chirp.omega_max; }, Bound::positive);
    num("chirp.amplitude", "deg or deg/s of stick", [](W& c) -> double& { return c.chirp.amplitude; },
        Bound::positive);
    num("chirp.t_rec", "s", [](W& c) -> double& { return c.chirp.t_rec; }, Bound::positive);
    num("chirp.trim_pad", "s", [](W& c) -> double& { return c.chirp.trim_pad; }, Bound::nonnegative);
    num("chirp.dt", "s", [](W& c) -> double& { return c.chirp.dt; }, Bound::positive);

    k.push_back({"sim.seed", "", [](const W& c) { return std::to_string(c.sim.seed); },
                 [](W& c, const std::string& text) { c.sim.seed = parse_u64("sim.seed", text); }});
    num("sim.dt", "s, plant step", [](W& c) -> double& { return c.sim.dt; }, Bound::positive);
    num("sim.duration", "s", [](W& c) -> double& { return c.sim.duration; }, Bound::positive);
    return k;
}

inline const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = build_keys();
    return keys;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace detail

inline std::vector<std::string> config_key_names() {
    std::vector<std::string> out;
    for (const auto& k : detail::config_keys()) out.push_back(k.name);
    return out;
}

inline bool WorkbenchConfig::operator==(const WorkbenchConfig& o) const {
    for (const auto& k : detail::config_keys())
        if (k.get(*this) != k.get(o)) return false;
    return true;
}

/// Cross-field checks after all keys are applied.
inline void check_config(const WorkbenchConfig& c) {
    try {
        check_params(c.vehicle);
        check_cascade(c.control);
        check_filter(c.filter);
        check_chirp(c.chirp);
    } catch (const Error& e) {
        throw Error(ErrorCode::type_mismatch, std::string(e.what()));
    }
}

/// Applies one key; throws UnknownKey, MissingRequired (empty value) or TypeMismatch.
inline void set_config_value(WorkbenchConfig& c, const std::string& key, const std::string& value) {
    for (const auto& k : detail::config_keys()) {
        if (k.name != key) continue;
        if (value.empty()) throw Error(ErrorCode::missing_required, key + " has no value");
        k.set(c, value);
        return;
    }
    throw Error(ErrorCode::unknown_key, "'" + key + "' is not a configuration key");
}

inline std::string get_config_value(const WorkbenchConfig& c, const std::string& key) {
    for (const auto& k : detail::config_keys())
        if (k.name == key) return k.get(c);
    throw Error(ErrorCode::unknown_key, "'" + key + "' is not a configuration key");
}

inline WorkbenchConfig read_config(std::istream& is) {
    WorkbenchConfig c;
    std::map<std::string, std::size_t> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        const std::string body = detail::trim(hash == std::string::npos ? line : line.substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        const std::string where = "line " + std::to_string(lineno) + ": ";
        if (eq == std::string::npos)
            throw Error(ErrorCode::type_mismatch, where + "expected 'key = value'");
        const std::string key = detail::trim(body.substr(0, eq));
        const std::string value = detail::trim(body.substr(eq + 1));
        if (key.empty()) throw Error(ErrorCode::type_mismatch, where + "empty key");
        if (const auto it = seen.find(key); it != seen.end()) {
            throw Error(ErrorCode::type_mismatch,
                        where + "'" + key + "' repeats line " + std::to_string(it->second));
        }
        seen[key] = lineno;
        if (key == "format") {
            if (value != kConfigFormat)
                throw Error(ErrorCode::header_mismatch, where + "format '" + value + "' is not quadlab-v1");
            continue;
        }
        try {
            set_config_value(c, key, value);
        } catch (const Error& e) {
            throw Error(e.code(), where + std::string(e.what()).substr(to_string(e.code()).size() + 2));
        }
    }
    check_config(c);
    return c;
}

inline WorkbenchConfig parse_config(const std::string& text) {
    std::istringstream is(text);
    return read_config(is);
}

inline void write_config(std::ostream& os, const WorkbenchConfig& c) {
    os << "# quadlab workbench configuration\n";
    os << "format = " << kConfigFormat << "\n";
    std::string section;
    for (const auto& k : detail::config_keys()) {
        const std::string sec = k.name.substr(0, k.name.find('.'));
        if (sec != section) {
            os << "\n";
            section = sec;
        }
        os << k.name << " = " << k.get(c);
        if (!k.note.empty()) os << "  # " << k.note;
        os << "\n";
    }
}

inline WorkbenchConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorCode::invalid_argument, "cannot open " + path.string());
    return read_config(is);
}

inline void save_config(const std::filesystem::path& path, const WorkbenchConfig& c) {
    write_atomically(path, [&](std::ostream& os) { write_config(os, c); });
}

} // namespace quadlab
