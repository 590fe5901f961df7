#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace symbox::geom {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
};

inline double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double norm(const Vec2& a) { return std::sqrt(dot(a, a)); }

// Rotated box in image coordinates (y down, positive angle clockwise on
// screen). canonicalize() puts it in long-edge form: w >= h and
// theta in [-pi/2, pi/2); raw construction allows any finite angle.
struct OrientedBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;
  double theta = 0.0;

  double area() const { return w * h; }
};

struct AlignedBox {
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 0.0;
  double ymax = 0.0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  double area() const { return width() * height(); }
};

// Convex polygon, vertices in positive-shoelace (counter-clockwise) order.
// Fewer than 3 vertices marks the empty region.
struct ConvexPolygon {
  std::vector<Vec2> vertices;

  bool empty() const { return vertices.size() < 3; }
};

inline bool is_finite_box(const OrientedBox& b) {
  return std::isfinite(b.cx) && std::isfinite(b.cy) && std::isfinite(b.w) &&
         std::isfinite(b.h) && std::isfinite(b.theta);
}

inline void validate_box(const OrientedBox& b) {
  if (!is_finite_box(b)) throw std::invalid_argument("OrientedBox: non-finite field");
  if (!(b.w > 0.0) || !(b.h > 0.0)) throw std::invalid_argument("OrientedBox: w and h must be > 0");
}

// theta -> [-pi/2, pi/2), period pi
inline double wrap_half_pi(double theta) {
  double t = std::remainder(theta, kPi);
  if (t >= kPi / 2.0) t -= kPi;
  return t;
}

// Long-edge form covering the identical point set: w >= h, theta in [-pi/2, pi/2).
inline OrientedBox canonicalize(const OrientedBox& b) {
  validate_box(b);
  OrientedBox r = b;
  if (r.w < r.h) {
    std::swap(r.w, r.h);
    r.theta += kPi / 2.0;
  }
  r.theta = wrap_half_pi(r.theta);
  return r;
}

inline ConvexPolygon vertices(const OrientedBox& b) {
  validate_box(b);
  const double c = std::cos(b.theta), s = std::sin(b.theta);
  const double hw = b.w / 2.0, hh = b.h / 2.0;
  // local corner order gives positive shoelace after rotation
  const Vec2 local[4] = {{-hw, -hh}, {hw, -hh}, {hw, hh}, {-hw, hh}};
  ConvexPolygon p;
  p.vertices.reserve(4);
  for (const Vec2& q : local)
    p.vertices.push_back({b.cx + c * q.x - s * q.y, b.cy + s * q.x + c * q.y});
  return p;
}

inline double polygon_area(const ConvexPolygon& p) {
  if (p.empty()) return 0.0;
  double acc = 0.0;
  const auto& v = p.vertices;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++)
    acc += cross(v[j], v[i]);
  return 0.5 * acc;
}

namespace detail {

inline constexpr double kOnEdgeEps = 1e-9;

// Intersection of segment a-b with the (infinite) line through c-d.
inline Vec2 line_intersection(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  const Vec2 ab = b - a, cd = d - c;
  const double denom = cross(ab, cd);
  if (denom == 0.0) return a;  // parallel within fp; caller classified endpoints as straddling
  const double t = cross(c - a, cd) / denom;
  return a + ab * t;
}

inline ConvexPolygon merge_degenerate(const ConvexPolygon& in) {
  ConvexPolygon out;
  const auto& v = in.vertices;
  const std::size_t n = v.size();
  // drop near-duplicate consecutive vertices
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& prev = out.vertices.empty() ? v[n - 1] : out.vertices.back();
    if (norm(v[i] - prev) > kOnEdgeEps) out.vertices.push_back(v[i]);
  }
  if (out.vertices.size() >= 2 &&
      norm(out.vertices.front() - out.vertices.back()) <= kOnEdgeEps)
    out.vertices.pop_back();
  // drop collinear middle vertices
  if (out.vertices.size() >= 3) {
    std::vector<Vec2> kept;
    const auto& u = out.vertices;
    const std::size_t m = u.size();
    for (std::size_t i = 0; i < m; ++i) {
      const Vec2& a = u[(i + m - 1) % m];
      const Vec2& b = u[i];
      const Vec2& c = u[(i + 1) % m];
      if (std::fabs(cross(b - a, c - b)) > kOnEdgeEps * std::max(1.0, norm(b - a) * norm(c - b)))
        kept.push_back(b);
    }
    out.vertices = std::move(kept);
  }
  if (out.vertices.size() < 3) out.vertices.clear();
  return out;
}

}  // namespace detail

// Sutherland-Hodgman clip of p against convex CCW polygon q.
inline ConvexPolygon clip(const ConvexPolygon& p, const ConvexPolygon& q) {
  if (p.empty() || q.empty()) return {};
  std::vector<Vec2> cur = p.vertices;
  const auto& qu = q.vertices;
  const std::size_t m = qu.size();
  for (std::size_t e = 0, f = m - 1; e < m && !cur.empty(); f = e++) {
    const Vec2& a = qu[f];
    const Vec2& b = qu[e];
    const Vec2 edge = b - a;
    std::vector<Vec2> next;
    next.reserve(cur.size() + 1);
    const std::size_t n = cur.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const double sj = cross(edge, cur[j] - a);
      const double si = cross(edge, cur[i] - a);
      const bool inj = sj >= -detail::kOnEdgeEps;
      const bool ini = si >= -detail::kOnEdgeEps;
      if (inj != ini) next.push_back(detail::line_intersection(cur[j], cur[i], a, b));
      if (ini) next.push_back(cur[i]);
    }
    cur = std::move(next);
  }
  ConvexPolygon result;
  result.vertices = std::move(cur);
  result = detail::merge_degenerate(result);
  if (polygon_area(result) < 1e-12) return {};
  return result;
}

inline double rotated_iou(const OrientedBox& a, const OrientedBox& b) {
  validate_box(a);
  validate_box(b);
  const double inter = polygon_area(clip(vertices(a), vertices(b)));
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

inline AlignedBox circumscribed_hbox(const OrientedBox& b) {
  const ConvexPolygon p = vertices(b);
  AlignedBox r{p.vertices[0].x, p.vertices[0].y, p.vertices[0].x, p.vertices[0].y};
  for (const Vec2& v : p.vertices) {
    r.xmin = std::min(r.xmin, v.x);
    r.ymin = std::min(r.ymin, v.y);
    r.xmax = std::max(r.xmax, v.x);
    r.ymax = std::max(r.ymax, v.y);
  }
  return r;
}

// Circumscribed rectangle of pred in the frame rotated by target_theta:
// same center, angle pinned to the target, extents grown by the residual
// rotation. Identity when pred.theta == target_theta.
inline OrientedBox project_box(const OrientedBox& pred, double target_theta) {
  validate_box(pred);
  const double d = pred.theta - target_theta;
  const double ac = std::fabs(std::cos(d)), as = std::fabs(std::sin(d));
  OrientedBox r;
  r.cx = pred.cx;
  r.cy = pred.cy;
  r.w = pred.w * ac + pred.h * as;
  r.h = pred.w * as + pred.h * ac;
  r.theta = target_theta;
  return r;
}

}  // namespace symbox::geom
