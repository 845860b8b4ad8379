#include "semdrive/geom.hpp"

#include <algorithm>
#include <cmath>

namespace semdrive {

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    Vec2 ab = b - a;
    double len2 = ab.norm2();
    if (len2 == 0.0) return distance(p, a);
    double t = dot(p - a, ab) / len2;
    t = std::clamp(t, 0.0, 1.0);
    Vec2 closest{a.x + t * ab.x, a.y + t * ab.y};
    return distance(p, closest);
}

double polyline_length(const std::vector<Vec2>& pts) {
    double total = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) total += distance(pts[i - 1], pts[i]);
    return total;
}

PolylineProjection project_to_polyline(const Vec2& p, const std::vector<Vec2>& pts) {
    PolylineProjection best;
    if (pts.empty()) return best;
    if (pts.size() == 1) {
        best.arc_length = 0.0;
        best.lateral_distance = distance(p, pts[0]);
        best.tangent_heading = 0.0;
        best.segment_index = 0;
        return best;
    }
    double best_d2 = std::numeric_limits<double>::infinity();
    double prefix = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const Vec2& a = pts[i];
        const Vec2& b = pts[i + 1];
        Vec2 ab = b - a;
        double len2 = ab.norm2();
        double t = len2 == 0.0 ? 0.0 : std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
        Vec2 closest{a.x + t * ab.x, a.y + t * ab.y};
        double d2 = (p - closest).norm2();
        // strict < keeps the earliest segment on ties (shared vertices)
        if (d2 < best_d2) {
            best_d2 = d2;
            best.arc_length = prefix + t * std::sqrt(len2);
            best.lateral_distance = std::sqrt(d2);
            best.tangent_heading = std::atan2(ab.y, ab.x);
            best.segment_index = static_cast<int>(i);
        }
        prefix += std::sqrt(len2);
    }
    return best;
}

Vec2 point_at_arc_length(const std::vector<Vec2>& pts, double s) {
    if (pts.empty()) return {};
    if (s <= 0.0) return pts.front();
    double prefix = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        double seg = distance(pts[i], pts[i + 1]);
        if (prefix + seg >= s && seg > 0.0) {
            double t = (s - prefix) / seg;
            return {pts[i].x + t * (pts[i + 1].x - pts[i].x),
                    pts[i].y + t * (pts[i + 1].y - pts[i].y)};
        }
        prefix += seg;
    }
    return pts.back();
}

bool point_in_rect(const Vec2& p, const OrientedRect& r) {
    // express p in the rect frame; inclusive boundary
    Vec2 local = rotate(p - r.center, -r.heading);
    return std::abs(local.x) <= r.length * 0.5 && std::abs(local.y) <= r.width * 0.5;
}

namespace {

void rect_corners(const OrientedRect& r, Vec2 out[4]) {
    double hl = r.length * 0.5, hw = r.width * 0.5;
    const Vec2 local[4] = {{hl, hw}, {hl, -hw}, {-hl, -hw}, {-hl, hw}};
    for (int i = 0; i < 4; ++i) out[i] = r.center + rotate(local[i], r.heading);
}

// project both rects onto `axis`; true if the intervals are disjoint
bool separated_on(const Vec2& axis, const Vec2 a[4], const Vec2 b[4]) {
    double amin = std::numeric_limits<double>::infinity(), amax = -amin;
    double bmin = amin, bmax = amax;
    for (int i = 0; i < 4; ++i) {
        double pa = dot(a[i], axis);
        double pb = dot(b[i], axis);
        amin = std::min(amin, pa);
        amax = std::max(amax, pa);
        bmin = std::min(bmin, pb);
        bmax = std::max(bmax, pb);
    }
    return amax < bmin || bmax < amin;
}

}  // namespace

bool rects_overlap(const OrientedRect& a, const OrientedRect& b) {
    Vec2 ca[4], cb[4];
    rect_corners(a, ca);
    rect_corners(b, cb);
    const Vec2 axes[4] = {
        rotate({1.0, 0.0}, a.heading), rotate({0.0, 1.0}, a.heading),
        rotate({1.0, 0.0}, b.heading), rotate({0.0, 1.0}, b.heading)};
    for (const Vec2& axis : axes)
        if (separated_on(axis, ca, cb)) return false;
    return true;
}

}  // namespace semdrive
