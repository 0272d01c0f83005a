#pragma once

// Great-circle waypoint geometry on a spherical earth.

#include <cmath>
#include <numbers>

#include "quadlab/error.hpp"

namespace quadlab {

inline constexpr double kEarthRadius = 6372795.0;  // m

namespace detail {
inline double radians(double deg) { return deg * std::numbers::pi / 180.0; }
inline double degrees(double rad) { return rad * 180.0 / std::numbers::pi; }

inline void check_point(double lat, double lon) {
    require(lat >= -90.0 && lat <= 90.0, "latitude must lie in [-90, 90]");
    require(lon >= -180.0 && lon <= 180.0, "longitude must lie in [-180, 180]");
}
} // namespace detail

/// Haversine distance in meters.
inline double distance_between(double lat1, double lon1, double lat2, double lon2) {
    detail::check_point(lat1, lon1);
    detail::check_point(lat2, lon2);
    const double p1 = detail::radians(lat1), p2 = detail::radians(lat2);
    const double dp = p2 - p1, dl = detail::radians(lon2 - lon1);
    const double a = std::pow(std::sin(dp / 2.0), 2) +
                     std::cos(p1) * std::cos(p2) * std::pow(std::sin(dl / 2.0), 2);
    return 2.0 * kEarthRadius * std::asin(std::sqrt(std::min(1.0, a)));
}

/// Initial bearing from point 1 to point 2, degrees in [0, 360), North = 0.
inline double course_to(double lat1, double lon1, double lat2, double lon2) {
    const double d = distance_between(lat1, lon1, lat2, lon2);
    if (d < 1e-6 || std::abs(d - std::numbers::pi * kEarthRadius) < 1e-6) {
        throw Error(ErrorCode::degenerate_bearing, "points are identical or antipodal");
    }
    const double p1 = detail::radians(lat1), p2 = detail::radians(lat2);
    const double dl = detail::radians(lon2 - lon1);
    const double y = std::sin(dl) * std::cos(p2);
    const double x = std::cos(p1) * std::sin(p2) - std::sin(p1) * std::cos(p2) * std::cos(dl);
    double c = std::fmod(detail::degrees(std::atan2(y, x)) + 360.0, 360.0);
    if (c >= 360.0) c -= 360.0;
    return c;
}

/// Turn from the compass heading to the course, in (-180, 180]; positive is clockwise.
inline double heading_error(double course_deg, double heading_deg) {
    double e = std::fmod(course_deg - heading_deg, 360.0);
    if (e <= -180.0) e += 360.0;
    if (e > 180.0) e -= 360.0;
    return e;
}

} // namespace quadlab
