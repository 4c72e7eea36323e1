#include "xqc/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace xqc {

namespace {

double sd_circle(const Circle& c, const Vec2& p) {
    return (p - c.center).norm() - c.radius;
}

double sd_square(const Square& s, const Vec2& p) {
    // Exact distance to the boundary of an axis-aligned square.
    const double dx = std::abs(p.x() - s.center.x()) - s.half_edge;
    const double dy = std::abs(p.y() - s.center.y()) - s.half_edge;
    if (dx <= 0.0 && dy <= 0.0) return std::max(dx, dy);
    const double ox = std::max(dx, 0.0);
    const double oy = std::max(dy, 0.0);
    return std::hypot(ox, oy);
}

double sd_segment(const Segment& s, const Vec2& p) {
    const Vec2 d = s.p1 - s.p0;
    const double len2 = d.squaredNorm();
    double t = len2 > 0.0 ? (p - s.p0).dot(d) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return (p - (s.p0 + t * d)).norm();
}

} // namespace

double signed_distance(const InterfaceGeometry& geom, const Vec2& point) {
    return std::visit(
        [&](const auto& g) -> double {
            using T = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<T, Circle>) return sd_circle(g, point);
            else if constexpr (std::is_same_v<T, Square>) return sd_square(g, point);
            else return sd_segment(g, point);
        },
        geom);
}

bool is_closed(const InterfaceGeometry& geom) {
    return !std::holds_alternative<Segment>(geom);
}

void validate(const InterfaceGeometry& geom) {
    std::visit(
        [](const auto& g) {
            using T = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<T, Circle>) {
                if (!(g.radius > 0.0)) throw InvalidGeometryError("circle radius must be positive");
            } else if constexpr (std::is_same_v<T, Square>) {
                if (!(g.half_edge > 0.0)) throw InvalidGeometryError("square half edge must be positive");
            } else {
                if (!((g.p1 - g.p0).norm() > 0.0))
                    throw InvalidGeometryError("segment must have positive length");
            }
        },
        geom);
}

} // namespace xqc
