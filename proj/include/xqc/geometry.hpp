#pragma once

#include "xqc/common.hpp"

#include <variant>

namespace xqc {

// Material interface shapes used by the benchmark problems. The signed
// distance is negative inside a closed interface and zero on it. A segment
// (fiber) has no interior; its distance is nonnegative everywhere.
struct Circle {
    Vec2 center;
    double radius;
};

struct Square {
    Vec2 center;
    double half_edge; // axis-aligned
};

struct Segment {
    Vec2 p0;
    Vec2 p1;
};

using InterfaceGeometry = std::variant<Circle, Square, Segment>;

double signed_distance(const InterfaceGeometry& geom, const Vec2& point);

// True for closed shapes (circle, square); false for the open fiber segment.
bool is_closed(const InterfaceGeometry& geom);

void validate(const InterfaceGeometry& geom);

} // namespace xqc
