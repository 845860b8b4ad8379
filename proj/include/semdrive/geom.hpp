#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace semdrive {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double norm() const { return std::hypot(x, y); }
    double norm2() const { return x * x + y * y; }
};

inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

// Rotate by angle (counter-clockwise, radians).
inline Vec2 rotate(const Vec2& v, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c * v.x - s * v.y, s * v.x + c * v.y};
}

inline double wrap_angle(double a) {
    a = std::fmod(a + M_PI, 2.0 * M_PI);
    if (a < 0) a += 2.0 * M_PI;
    return a - M_PI;
}

// Distance from point p to segment [a, b].
double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b);

double polyline_length(const std::vector<Vec2>& pts);

// Closest point on a polyline: arc length at the projection, lateral
// distance, and the tangent heading of the segment it falls on.
struct PolylineProjection {
    double arc_length = 0.0;
    double lateral_distance = 0.0;
    double tangent_heading = 0.0;
    std::size_t segment_index = 0;
};

PolylineProjection project_to_polyline(const Vec2& p, const std::vector<Vec2>& pts);

// Point at a given arc length along the polyline (clamped to the ends).
Vec2 point_at_arc_length(const std::vector<Vec2>& pts, double s);

// Oriented rectangle: center, heading of the long axis, full length/width.
struct OrientedRect {
    Vec2 center;
    double heading = 0.0;
    double length = 0.0;
    double width = 0.0;
};

bool point_in_rect(const Vec2& p, const OrientedRect& r);

// Separating-axis overlap test for two oriented rectangles.
bool rects_overlap(const OrientedRect& a, const OrientedRect& b);

}  // namespace semdrive
