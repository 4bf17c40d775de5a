#include "pillarcast/geometry.hpp"

#include <algorithm>

namespace pillarcast {

double polygon_area(const std::vector<Vec2>& poly) {
  if (poly.size() < 3) return 0.0;
  double acc = 0.0;
  for (size_t i = 0; i < poly.size(); ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % poly.size()];
    acc += a.x * b.y - b.x * a.y;
  }
  return 0.5 * std::abs(acc);
}

namespace {

// Signed distance of p to the directed edge a->b (positive = left of edge).
double edge_side(const Vec2& a, const Vec2& b, const Vec2& p) {
  return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
}

Vec2 segment_intersection(const Vec2& a, const Vec2& b, const Vec2& c,
                          const Vec2& d) {
  const double a1 = b.y - a.y, b1 = a.x - b.x;
  const double c1 = a1 * a.x + b1 * a.y;
  const double a2 = d.y - c.y, b2 = c.x - d.x;
  const double c2 = a2 * c.x + b2 * c.y;
  const double det = a1 * b2 - a2 * b1;
  if (det == 0.0) return a;  // parallel; degenerate input
  return {(b2 * c1 - b1 * c2) / det, (a1 * c2 - a2 * c1) / det};
}

std::vector<Vec2> ccw(std::vector<Vec2> poly) {
  double acc = 0.0;
  for (size_t i = 0; i < poly.size(); ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % poly.size()];
    acc += a.x * b.y - b.x * a.y;
  }
  if (acc < 0.0) std::reverse(poly.begin(), poly.end());
  return poly;
}

}  // namespace

std::vector<Vec2> clip_convex(const std::vector<Vec2>& subject,
                              const std::vector<Vec2>& clip) {
  std::vector<Vec2> output = ccw(subject);
  const std::vector<Vec2> clipper = ccw(clip);
  for (size_t i = 0; i < clipper.size() && !output.empty(); ++i) {
    const Vec2& ca = clipper[i];
    const Vec2& cb = clipper[(i + 1) % clipper.size()];
    std::vector<Vec2> input;
    input.swap(output);
    for (size_t j = 0; j < input.size(); ++j) {
      const Vec2& cur = input[j];
      const Vec2& prv = input[(j + input.size() - 1) % input.size()];
      const bool cur_in = edge_side(ca, cb, cur) >= 0.0;
      const bool prv_in = edge_side(ca, cb, prv) >= 0.0;
      if (cur_in) {
        if (!prv_in) output.push_back(segment_intersection(prv, cur, ca, cb));
        output.push_back(cur);
      } else if (prv_in) {
        output.push_back(segment_intersection(prv, cur, ca, cb));
      }
    }
  }
  return output;
}

double box_intersection_area(const OrientedBox& a, const OrientedBox& b) {
  const auto ca = a.corners();
  const auto cb = b.corners();
  const std::vector<Vec2> pa(ca.begin(), ca.end());
  const std::vector<Vec2> pb(cb.begin(), cb.end());
  return polygon_area(clip_convex(pa, pb));
}

double point_to_polyline_distance(const Vec2& p,
                                  const std::vector<Vec2>& line) {
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i + 1 < line.size(); ++i) {
    const Vec2 a = line[i];
    const Vec2 d = line[i + 1] - a;
    const double len2 = d.squared_norm();
    double t = len2 > 0.0 ? (p - a).dot(d) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    best = std::min(best, distance(p, a + d * t));
  }
  if (line.size() == 1) best = distance(p, line[0]);
  return best;
}

}  // namespace pillarcast
