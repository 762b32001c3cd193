#pragma once

#include <algorithm>
#include <cmath>
#include <optional>

namespace csac {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2 a, Vec2 b) { return a.x == b.x && a.y == b.y; }
  double norm() const { return std::hypot(x, y); }
};

inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

struct Segment {
  Vec2 a;
  Vec2 b;
  Vec2 midpoint() const { return 0.5 * (a + b); }
  double length() const { return distance(a, b); }
};

// Axis-aligned box. Membership is half-open, [min, max), so boxes that share
// an edge never both contain a point.
struct Rect {
  double xMin = 0.0;
  double yMin = 0.0;
  double xMax = 0.0;
  double yMax = 0.0;

  bool contains(Vec2 p) const { return p.x >= xMin && p.x < xMax && p.y >= yMin && p.y < yMax; }
  bool containsClosed(Vec2 p, double tol = 1e-9) const {
    return p.x >= xMin - tol && p.x <= xMax + tol && p.y >= yMin - tol && p.y <= yMax + tol;
  }
  bool containsRect(const Rect& r, double tol = 1e-9) const {
    return r.xMin >= xMin - tol && r.xMax <= xMax + tol && r.yMin >= yMin - tol && r.yMax <= yMax + tol;
  }
  bool overlaps(const Rect& r) const {
    return xMin < r.xMax && r.xMin < xMax && yMin < r.yMax && r.yMin < yMax;
  }
  double width() const { return xMax - xMin; }
  double height() const { return yMax - yMin; }
  double area() const { return width() * height(); }
  Vec2 center() const { return {0.5 * (xMin + xMax), 0.5 * (yMin + yMax)}; }
};

// Parameter t >= 0 at which origin + t * direction meets the segment, if it
// does. Parallel (including collinear) configurations count as a miss.
inline std::optional<double> rayHit(Vec2 origin, Vec2 direction, const Segment& s) {
  const Vec2 e = s.b - s.a;
  const double denom = cross(direction, e);
  if (std::abs(denom) < 1e-15) return std::nullopt;
  const Vec2 w = s.a - origin;
  const double t = cross(w, e) / denom;
  const double u = cross(w, direction) / denom;
  if (t < 0.0 || u < 0.0 || u > 1.0) return std::nullopt;
  return t;
}

// Fraction along p -> q where the motion first touches the segment.
inline std::optional<double> sweepHit(Vec2 p, Vec2 q, const Segment& s) {
  auto t = rayHit(p, q - p, s);
  if (t && *t <= 1.0) return t;
  return std::nullopt;
}

inline double pointSegmentDistance(Vec2 p, const Segment& s) {
  const Vec2 e = s.b - s.a;
  const double len2 = dot(e, e);
  const double t = len2 > 0.0 ? std::clamp(dot(p - s.a, e) / len2, 0.0, 1.0) : 0.0;
  return distance(p, s.a + t * e);
}

}  // namespace csac
