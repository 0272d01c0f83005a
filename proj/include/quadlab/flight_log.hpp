#pragma once

// Flight-log CSV records, one per control frame.
//
// File layout:
//   line 1: "# quadlab-v1 flight-log"
//   line 2: the column header below, in this exact order
//   then one comma-separated record per line
//
// Numbers are printed with 6 significant digits ("%.6g"). pwm1..6 hold the
// receiver-equivalent pulse width of the applied pilot command (throttle,
// roll, pitch, yaw, trigger, kill), not quantized, so software-injected
// excitation is recoverable through pwm_map. motor1..4 map rotor speed onto
// 1024 + 1024 * Omega / omega_max us.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "quadlab/error.hpp"

namespace quadlab {

struct FlightLogRecord {
    double t = 0;                    // s
    std::array<double, 6> pwm{};     // us
    double phi = 0, theta = 0;       // deg, filtered estimate
    double p = 0, q = 0, r = 0;      // deg/s, gyro
    double ax = 0, ay = 0, az = 0;   // m/s^2
    std::array<double, 4> motor{};   // us-equivalent
    std::array<double, 4> u{};       // U1..U4
    bool trigger = false;
    bool kill = false;

    bool operator==(const FlightLogRecord&) const = default;
};

using FlightLog = std::vector<FlightLogRecord>;

inline constexpr std::string_view kLogTag = "# quadlab-v1 flight-log";
inline constexpr std::string_view kLogHeader =
    "t,pwm1,pwm2,pwm3,pwm4,pwm5,pwm6,phi,theta,p,q,r,ax,ay,az,motor1,motor2,motor3,motor4,"
    "u1,u2,u3,u4,trigger,kill";
inline constexpr std::size_t kLogColumns = 25;

inline std::string format_g6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

/// Value as it reads back after a write (6 significant digits).
inline double round_g6(double v) { return std::strtod(format_g6(v).c_str(), nullptr); }

inline std::array<double, kLogColumns> to_columns(const FlightLogRecord& r) {
    return {r.t,      r.pwm[0],   r.pwm[1],   r.pwm[2],   r.pwm[3], r.pwm[4], r.pwm[5],
            r.phi,    r.theta,    r.p,        r.q,        r.r,      r.ax,     r.ay,
            r.az,     r.motor[0], r.motor[1], r.motor[2], r.motor[3], r.u[0], r.u[1],
            r.u[2],   r.u[3],     r.trigger ? 1.0 : 0.0, r.kill ? 1.0 : 0.0};
}

inline FlightLogRecord from_columns(const std::array<double, kLogColumns>& c) {
    FlightLogRecord r;
    r.t = c[0];
    for (int i = 0; i < 6; ++i) r.pwm[i] = c[1 + i];
    r.phi = c[7];
    r.theta = c[8];
    r.p = c[9];
    r.q = c[10];
    r.r = c[11];
    r.ax = c[12];
    r.ay = c[13];
    r.az = c[14];
    for (int i = 0; i < 4; ++i) r.motor[i] = c[15 + i];
    for (int i = 0; i < 4; ++i) r.u[i] = c[19 + i];
    r.trigger = c[23] != 0.0;
    r.kill = c[24] != 0.0;
    return r;
}

/// Record with every field rounded the way the writer prints it.
inline FlightLogRecord printed(const FlightLogRecord& r) {
    auto c = to_columns(r);
    for (auto& v : c) v = round_g6(v);
    return from_columns(c);
}

inline void write_log(std::ostream& os, const FlightLog& log) {
    os << kLogTag << "\n" << kLogHeader << "\n";
    for (const auto& rec : log) {
        const auto c = to_columns(rec);
        for (std::size_t i = 0; i < c.size(); ++i) os << (i ? "," : "") << format_g6(c[i]);
        os << "\n";
    }
}

inline FlightLog read_log(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != kLogTag) {
        throw Error(ErrorCode::header_mismatch, "line 1: expected '" + std::string(kLogTag) + "'");
    }
    if (!std::getline(is, line) || line != kLogHeader) {
        throw Error(ErrorCode::header_mismatch, "line 2: column header does not match the v1 layout");
    }
    FlightLog log;
    std::size_t lineno = 2;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::array<double, kLogColumns> c{};
        std::size_t col = 0, pos = 0;
        while (true) {
            const auto comma = line.find(',', pos);
            const std::string_view field(line.data() + pos,
                                         (comma == std::string::npos ? line.size() : comma) - pos);
            if (col >= kLogColumns) {
                throw Error(ErrorCode::malformed_row, "line " + std::to_string(lineno) +
                                                          ": more than " +
                                                          std::to_string(kLogColumns) + " fields");
            }
            char* end = nullptr;
            const std::string tmp(field);
            c[col] = std::strtod(tmp.c_str(), &end);
            if (tmp.empty() || end != tmp.c_str() + tmp.size()) {
                throw Error(ErrorCode::malformed_row, "line " + std::to_string(lineno) +
                                                          ": field " + std::to_string(col + 1) +
                                                          " is not a number");
            }
            ++col;
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (col != kLogColumns) {
            throw Error(ErrorCode::malformed_row, "line " + std::to_string(lineno) + ": expected " +
                                                      std::to_string(kLogColumns) + " fields, got " +
                                                      std::to_string(col));
        }
        auto rec = from_columns(c);
        if (!log.empty() && !(rec.t > log.back().t)) {
            throw Error(ErrorCode::malformed_row,
                        "line " + std::to_string(lineno) + ": time is not strictly increasing");
        }
        log.push_back(rec);
    }
    return log;
}

/// Writes to a sibling temporary and renames it into place.
template <typename Writer>
void write_atomically(const std::filesystem::path& path, Writer&& writer) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp);
        if (!os) throw Error(ErrorCode::invalid_argument, "cannot open " + tmp.string());
        writer(os);
        if (!os) throw Error(ErrorCode::invalid_argument, "write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline void save_log(const std::filesystem::path& path, const FlightLog& log) {
    write_atomically(path, [&](std::ostream& os) { write_log(os, log); });
}

inline FlightLog load_log(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorCode::invalid_argument, "cannot open " + path.string());
    return read_log(is);
}

} // namespace quadlab
