#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "symbox/geometry.hpp"
#include "symbox/rng.hpp"

using namespace symbox::geom;
using symbox::rng::SplitMix64;

namespace {

// max over vertices of a of the distance to the nearest vertex of b
double vertex_set_distance(const ConvexPolygon& a, const ConvexPolygon& b) {
  double worst = 0.0;
  for (const Vec2& va : a.vertices) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec2& vb : b.vertices) best = std::min(best, norm(va - vb));
    worst = std::max(worst, best);
  }
  return worst;
}

double hausdorff_vertices(const ConvexPolygon& a, const ConvexPolygon& b) {
  return std::max(vertex_set_distance(a, b), vertex_set_distance(b, a));
}

Vec2 centroid(const ConvexPolygon& p) {
  Vec2 c{0, 0};
  for (const Vec2& v : p.vertices) c = c + v;
  return c * (1.0 / static_cast<double>(p.vertices.size()));
}

}  // namespace

TEST_CASE("canonicalize puts boxes in long-edge form") {
  const OrientedBox tall = canonicalize({0, 0, 2, 4, 0});
  CHECK(tall.w == 4.0);
  CHECK(tall.h == 2.0);
  CHECK(tall.theta == Catch::Approx(-kPi / 2).margin(1e-15));
  CHECK(hausdorff_vertices(vertices(tall), vertices({0, 0, 2, 4, 0})) < 1e-9);

  const OrientedBox flat = canonicalize({0, 0, 4, 2, 0});
  CHECK(flat.w == 4.0);
  CHECK(flat.h == 2.0);
  CHECK(flat.theta == 0.0);

  const OrientedBox wrapped = canonicalize({0, 0, 4, 2, kPi});
  CHECK(wrapped.theta == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("canonicalize rejects invalid boxes") {
  CHECK_THROWS_AS(canonicalize({0, 0, 2, 2, std::nan("")}), std::invalid_argument);
  CHECK_THROWS_AS(canonicalize({0, 0, -1, 2, 0}), std::invalid_argument);
  CHECK_THROWS_AS(canonicalize({0, 0, 2, 0, 0}), std::invalid_argument);
}

TEST_CASE("canonicalize preserves the vertex point set") {
  SplitMix64 rng(11);
  for (int i = 0; i < 500; ++i) {
    OrientedBox b = oracle::random_box(rng);
    b.theta = rng.uniform(-8.0, 8.0);
    const OrientedBox c = canonicalize(b);
    CHECK(c.w >= c.h);
    CHECK(c.theta >= -kPi / 2);
    CHECK(c.theta < kPi / 2);
    REQUIRE(hausdorff_vertices(vertices(b), vertices(c)) < 1e-9);
  }
}

TEST_CASE("vertices are CCW with centroid at the box center") {
  const ConvexPolygon sq = vertices({0, 0, 2, 2, 0});
  REQUIRE(sq.vertices.size() == 4);
  CHECK(polygon_area(sq) == Catch::Approx(4.0));
  const ConvexPolygon want{{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}};
  CHECK(hausdorff_vertices(sq, want) < 1e-12);

  // square is invariant under a quarter turn
  CHECK(hausdorff_vertices(vertices({0, 0, 2, 2, kPi / 2}), want) < 1e-12);

  const ConvexPolygon rot = vertices({1, 1, 2, 4, kPi / 4});
  for (const Vec2& v : rot.vertices)
    CHECK(norm(v - Vec2{1, 1}) == Catch::Approx(std::sqrt(5.0)).margin(1e-12));
  const Vec2 c = centroid(rot);
  CHECK(norm(c - Vec2{1, 1}) < 1e-9);
}

TEST_CASE("clip handles identity, disjoint and rotated overlap") {
  const ConvexPolygon sq = vertices({0, 0, 1, 1, 0});
  const ConvexPolygon self = clip(sq, sq);
  CHECK(polygon_area(self) == Catch::Approx(1.0).margin(1e-9));

  const ConvexPolygon far = vertices({10, 10, 1, 1, 0});
  CHECK(clip(sq, far).empty());

  const ConvexPolygon rot = vertices({0, 0, 1, 1, kPi / 4});
  const ConvexPolygon octagon = clip(sq, rot);
  REQUIRE_FALSE(octagon.empty());
  CHECK(octagon.vertices.size() == 8);
  const double area = polygon_area(octagon);
  CHECK(area == Catch::Approx(2.0 * (std::sqrt(2.0) - 1.0)).margin(1e-9));
  CHECK(area == Catch::Approx(oracle::raster_intersection_area({0, 0, 1, 1, 0},
                                                               {0, 0, 1, 1, kPi / 4}))
                    .margin(5e-3));
}

TEST_CASE("clip area never exceeds either operand") {
  SplitMix64 rng(12);
  for (int i = 0; i < 300; ++i) {
    const OrientedBox a = oracle::random_box(rng);
    const OrientedBox b = oracle::random_box(rng);
    const double inter = polygon_area(clip(vertices(a), vertices(b)));
    CHECK(inter <= std::min(a.area(), b.area()) + 1e-9);
  }
}

TEST_CASE("clip area agrees with the rasterization oracle") {
  SplitMix64 rng(13);
  for (int i = 0; i < 250; ++i) {
    const OrientedBox a = oracle::random_box(rng);
    const OrientedBox b = oracle::random_box(rng);
    const double inter = polygon_area(clip(vertices(a), vertices(b)));
    const double ref = oracle::raster_intersection_area(a, b);
    const double rel = std::fabs(inter - ref) / std::min(a.area(), b.area());
    REQUIRE(rel <= 5e-3);
  }
}

TEST_CASE("rotated_iou basics") {
  const OrientedBox a{0, 0, 2, 1, 0.3};
  CHECK(rotated_iou(a, a) == Catch::Approx(1.0).margin(1e-12));
  CHECK(rotated_iou(a, {10, 10, 1, 1, 0}) == 0.0);

  const double iou45 = rotated_iou({0, 0, 1, 1, 0}, {0, 0, 1, 1, kPi / 4});
  CHECK(iou45 == Catch::Approx(0.7071).margin(5e-3));
}

TEST_CASE("rotated_iou is symmetric and rigid-motion invariant") {
  SplitMix64 rng(14);
  for (int i = 0; i < 200; ++i) {
    const OrientedBox a = oracle::random_box(rng);
    const OrientedBox b = oracle::random_box(rng);
    const double iou = rotated_iou(a, b);
    CHECK(std::fabs(iou - rotated_iou(b, a)) < 1e-6);

    const double phi = rng.uniform(-kPi, kPi);
    const double tx = rng.uniform(-5, 5), ty = rng.uniform(-5, 5);
    const auto move = [&](const OrientedBox& q) {
      const double c = std::cos(phi), s = std::sin(phi);
      return OrientedBox{c * q.cx - s * q.cy + tx, s * q.cx + c * q.cy + ty, q.w, q.h,
                         q.theta + phi};
    };
    CHECK(std::fabs(iou - rotated_iou(move(a), move(b))) < 1e-6);
  }
}

TEST_CASE("circumscribed_hbox") {
  const AlignedBox flat = circumscribed_hbox({0, 0, 4, 2, 0});
  CHECK(flat.xmin == Catch::Approx(-2.0));
  CHECK(flat.ymin == Catch::Approx(-1.0));
  CHECK(flat.xmax == Catch::Approx(2.0));
  CHECK(flat.ymax == Catch::Approx(1.0));

  const AlignedBox diag = circumscribed_hbox({0, 0, 2, 2, kPi / 4});
  const double r = std::sqrt(2.0);
  CHECK(diag.xmin == Catch::Approx(-r));
  CHECK(diag.ymin == Catch::Approx(-r));
  CHECK(diag.xmax == Catch::Approx(r));
  CHECK(diag.ymax == Catch::Approx(r));

  const AlignedBox up = circumscribed_hbox({5, 5, 4, 2, kPi / 2});
  CHECK(up.xmin == Catch::Approx(4.0));
  CHECK(up.ymin == Catch::Approx(3.0));
  CHECK(up.xmax == Catch::Approx(6.0));
  CHECK(up.ymax == Catch::Approx(7.0));
}

TEST_CASE("project_box matches the closed form") {
  const OrientedBox p{0.5, -0.25, 4, 2, 0.7};
  const OrientedBox same = project_box(p, 0.7);
  CHECK(same.w == Catch::Approx(4.0));
  CHECK(same.h == Catch::Approx(2.0));
  CHECK(same.theta == 0.7);

  const OrientedBox quarter = project_box({0, 0, 4, 2, kPi / 2}, 0.0);
  CHECK(quarter.w == Catch::Approx(2.0).margin(1e-12));
  CHECK(quarter.h == Catch::Approx(4.0).margin(1e-12));
  CHECK(quarter.theta == 0.0);

  const OrientedBox diag = project_box({0, 0, 2, 2, kPi / 4}, 0.0);
  CHECK(diag.w == Catch::Approx(2.0 * std::sqrt(2.0)));
  CHECK(diag.h == Catch::Approx(2.0 * std::sqrt(2.0)));
}

TEST_CASE("predictions are contained in their projection") {
  SplitMix64 rng(15);
  for (int i = 0; i < 300; ++i) {
    const OrientedBox p = oracle::random_box(rng);
    const double target = rng.uniform(-kPi, kPi);
    const OrientedBox proj = project_box(p, target);
    const double iou = rotated_iou(p, proj);
    REQUIRE(std::fabs(iou - p.area() / proj.area()) < 1e-6);
  }
}
