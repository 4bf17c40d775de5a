#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace pillarcast {

struct Vec2 {
  double x{0.0};
  double y{0.0};

  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }
  double squared_norm() const { return x * x + y * y; }
  Vec2 rotated(double angle) const {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c * x - s * y, s * x + c * y};
  }
};

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

/// Normalize an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * M_PI);
  if (a <= -M_PI) a += 2.0 * M_PI;
  if (a > M_PI) a -= 2.0 * M_PI;
  return a;
}

/// Oriented rectangle; heading points along the length axis.
struct OrientedBox {
  Vec2 center;
  double heading{0.0};
  double width{0.0};
  double length{0.0};

  std::array<Vec2, 4> corners() const {
    const Vec2 u = Vec2{std::cos(heading), std::sin(heading)} * (0.5 * length);
    const Vec2 v = Vec2{-std::sin(heading), std::cos(heading)} * (0.5 * width);
    return {center + u + v, center + u - v, center - u - v, center - u + v};
  }

  // Half-open containment: boundary counts as inside on the min edge of each
  // local axis, outside on the max edge.
  bool contains(const Vec2& p) const {
    const Vec2 d = p - center;
    const double c = std::cos(heading), s = std::sin(heading);
    const double lu = c * d.x + s * d.y;   // along length
    const double lv = -s * d.x + c * d.y;  // along width
    return lu >= -0.5 * length && lu < 0.5 * length && lv >= -0.5 * width &&
           lv < 0.5 * width;
  }
};

/// Area of the convex polygon given by vertices in order (shoelace).
double polygon_area(const std::vector<Vec2>& poly);

/// Sutherland-Hodgman clip of a convex polygon against another convex polygon
/// (both counter-clockwise). Returns the intersection polygon.
std::vector<Vec2> clip_convex(const std::vector<Vec2>& subject,
                              const std::vector<Vec2>& clip);

/// Exact intersection area of two oriented boxes.
double box_intersection_area(const OrientedBox& a, const OrientedBox& b);

/// Distance from a point to a polyline (closest point on any segment).
double point_to_polyline_distance(const Vec2& p, const std::vector<Vec2>& line);

}  // namespace pillarcast
