#include <gtest/gtest.h>

#include <random>

#include "refmap/errors.hpp"
#include "refmap/geometry.hpp"
#include "test_util.hpp"

namespace refmap {
namespace {

using testing::kDeg;

std::vector<Vec2> unit_square() { return {{0, 0}, {1, 0}, {1, 1}, {0, 1}}; }

BoundaryHull xy_hull(std::vector<Vec2> vertices) {
  return BoundaryHull(Plane::from_normal_offset(Vec3::UnitZ(), 0.0), Vec3::UnitX(), Vec3::UnitY(),
                      std::move(vertices));
}

TEST(Plane, NormalizesAndFlipsToNonNegativeOffset) {
  const Plane p = Plane::from_normal_offset(Vec3(0, 0, 2), -3.0);
  EXPECT_NEAR(p.normal().norm(), 1.0, 1e-12);
  EXPECT_NEAR(p.normal().z(), -1.0, 1e-12);
  EXPECT_NEAR(p.d(), 1.5, 1e-12);
}

TEST(Plane, ZeroOffsetKeepsOrientation) {
  const Plane p = Plane::from_normal_offset(Vec3(0, -1, 0), 0.0);
  EXPECT_EQ(p.normal(), Vec3(0, -1, 0));
  EXPECT_EQ(p.d(), 0.0);
}

TEST(Plane, ThroughPointContainsPoint) {
  const Point3 q(1, 2, 3);
  const Plane p = Plane::through_point(Vec3(1, 1, 0), q);
  EXPECT_NEAR(p.signed_distance(q), 0.0, 1e-12);
  EXPECT_GE(p.d(), 0.0);
}

TEST(Plane, ZeroNormalThrows) {
  EXPECT_THROW(Plane::from_normal_offset(Vec3::Zero(), 1.0), Error);
}

TEST(Plane, KindRoundTripsThroughString) {
  for (auto k : {PlaneKind::Reflective, PlaneKind::Ordinary, PlaneKind::Ground}) {
    EXPECT_EQ(plane_kind_from_string(to_string(k)), k);
  }
  EXPECT_THROW(plane_kind_from_string("Window"), Error);
}

TEST(Mirror, OriginAcrossOffsetPlane) {
  const Plane p = Plane::from_normal_offset(Vec3(1, 0, 0), 2.0);
  EXPECT_TRUE(mirror_point(Point3::Zero(), p).isApprox(Point3(-4, 0, 0)));
}

TEST(Mirror, PointOnPlaneIsFixed) {
  const Plane p = Plane::from_normal_offset(Vec3(0, 1, 0), 1.0);
  EXPECT_TRUE(mirror_point(Point3(0, -1, 0), p).isApprox(Point3(0, -1, 0)));
}

TEST(Mirror, InvolutionAndIsometry) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const Plane plane = testing::random_plane(rng);
    std::vector<Point3> pts;
    for (int k = 0; k < 5; ++k) pts.push_back(testing::random_point(rng, 10.0));
    const auto m = mirror_points(pts, plane);
    ASSERT_EQ(m.size(), pts.size());
    const auto back = mirror_points(m, plane);
    for (std::size_t k = 0; k < pts.size(); ++k) {
      EXPECT_LE((back[k] - pts[k]).norm(), 1e-12);
      for (std::size_t j = 0; j < k; ++j) {
        EXPECT_NEAR((m[k] - m[j]).norm(), (pts[k] - pts[j]).norm(), 1e-9);
      }
    }
  }
}

TEST(RayPlane, HitsPlaneAhead) {
  const Plane x5 = Plane::from_normal_offset(Vec3(-1, 0, 0), 5.0);
  const auto hit = ray_plane_intersection(Point3::Zero(), Vec3::UnitX(), x5);
  ASSERT_TRUE(hit);
  EXPECT_NEAR(hit->t, 5.0, 1e-12);
  EXPECT_TRUE(hit->point.isApprox(Point3(5, 0, 0)));
}

TEST(RayPlane, ParallelAndBackwardMiss) {
  const Plane x5 = Plane::from_normal_offset(Vec3(-1, 0, 0), 5.0);
  EXPECT_FALSE(ray_plane_intersection(Point3::Zero(), Vec3::UnitY(), x5));
  EXPECT_FALSE(ray_plane_intersection(Point3::Zero(), -Vec3::UnitX(), x5));
}

TEST(HullFrame, ProjectAndLiftRoundTrip) {
  std::mt19937_64 rng(2);
  const Plane plane = testing::random_plane(rng);
  const auto [u, v] = plane_basis(plane.normal());
  const BoundaryHull hull(plane, u, v, unit_square());
  EXPECT_LE(project_to_hull_frame(hull, plane.foot()).norm(), 1e-12);
  EXPECT_LE((project_to_hull_frame(hull, plane.foot() + u) - Vec2(1, 0)).norm(), 1e-12);
  for (int i = 0; i < 50; ++i) {
    const Point3 p = plane.project(testing::random_point(rng, 5.0));
    EXPECT_LE((hull.lift(hull.project(p)) - p).norm(), 1e-9);
  }
}

TEST(PlaneBasis, RightHandedOrthonormal) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const Vec3 n = testing::random_unit(rng);
    const auto [u, v] = plane_basis(n);
    EXPECT_NEAR(u.norm(), 1.0, 1e-12);
    EXPECT_NEAR(u.dot(n), 0.0, 1e-12);
    EXPECT_LE((u.cross(v) - n).norm(), 1e-12);
  }
}

TEST(PointInHull, InsideOutsideAndBoundary) {
  const auto hull = xy_hull(unit_square());
  EXPECT_TRUE(point_in_hull(hull, {0.5, 0.5}));
  EXPECT_FALSE(point_in_hull(hull, {1.5, 0.5}));
  EXPECT_TRUE(point_in_hull(hull, {1.0, 1.0}));
  EXPECT_TRUE(point_in_hull(hull, {0.5, 0.0}));
}

TEST(ConvexHull, DropsInteriorPoints) {
  std::vector<Vec2> pts = unit_square();
  pts.push_back({0.5, 0.5});
  pts.push_back({0.2, 0.7});
  pts.push_back({0.5, 0.0});  // collinear on an edge
  const auto hull = convex_hull_2d(pts);
  ASSERT_EQ(hull.size(), 4u);
  EXPECT_NEAR(polygon_area(hull), 1.0, 1e-12);
}

TEST(ConvexHull, TriangleComesBackCounterClockwise) {
  const std::vector<Vec2> tri = {{0, 0}, {0, 1}, {1, 0}};
  const auto hull = convex_hull_2d(tri);
  ASSERT_EQ(hull.size(), 3u);
  const double cross = (hull[1] - hull[0]).x() * (hull[2] - hull[0]).y() -
                       (hull[1] - hull[0]).y() * (hull[2] - hull[0]).x();
  EXPECT_GT(cross, 0.0);
}

TEST(ConvexHull, CollinearThrows) {
  const std::vector<Vec2> line = {{0, 0}, {1, 1}, {2, 2}, {3, 3}};
  EXPECT_THROW(convex_hull_2d(line), Error);
}

TEST(ConvexHull, RandomPointsSatisfyBruteForceHalfPlanes) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vec2> pts;
    for (int i = 0; i < 200; ++i) pts.push_back({u(rng), u(rng)});
    const auto hull = convex_hull_2d(pts);
    // Every edge keeps all inputs on its left, every turn is strictly convex.
    for (std::size_t i = 0; i < hull.size(); ++i) {
      const Vec2& a = hull[i];
      const Vec2& b = hull[(i + 1) % hull.size()];
      const Vec2& c = hull[(i + 2) % hull.size()];
      const double turn = (b - a).x() * (c - b).y() - (b - a).y() * (c - b).x();
      EXPECT_GT(turn, 0.0);
      for (const auto& p : pts) {
        const double side = (b - a).x() * (p - a).y() - (b - a).y() * (p - a).x();
        EXPECT_GE(side, -1e-9);
      }
    }
  }
}

TEST(PolygonArea, KnownShapesAndRotationInvariance) {
  EXPECT_NEAR(polygon_area(unit_square()), 1.0, 1e-12);
  const std::vector<Vec2> tri = {{0, 0}, {2, 0}, {0, 2}};
  EXPECT_NEAR(polygon_area(tri), 2.0, 1e-12);
  auto sq = unit_square();
  std::rotate(sq.begin(), sq.begin() + 1, sq.end());
  EXPECT_NEAR(polygon_area(sq), 1.0, 1e-12);
}

TEST(Overlap, IdenticalOffsetAndDisjoint) {
  const auto a = xy_hull(unit_square());
  EXPECT_NEAR(hull_overlap_ratio(a, a), 1.0, 1e-12);
  const auto b = xy_hull({{0.5, 0.5}, {1.5, 0.5}, {1.5, 1.5}, {0.5, 1.5}});
  EXPECT_NEAR(hull_overlap_ratio(a, b), 0.25, 1e-12);
  const auto c = xy_hull({{3, 3}, {4, 3}, {4, 4}, {3, 4}});
  EXPECT_EQ(hull_overlap_ratio(a, c), 0.0);
}

TEST(Overlap, AgreesWithMonteCarloEstimate) {
  const auto a = xy_hull(unit_square());
  const auto b = xy_hull({{0.5, 0.5}, {1.5, 0.5}, {1.5, 1.5}, {0.5, 1.5}});
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 1000000;
  int inside = 0;
  for (int i = 0; i < n; ++i) {
    const Vec2 p(u(rng), u(rng));
    if (point_in_hull(b, p)) ++inside;
  }
  EXPECT_NEAR(static_cast<double>(inside) / n, hull_overlap_ratio(a, b), 1e-2);
}

TEST(Overlap, SymmetricAndBounded) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Vec2> pa, pb;
    for (int i = 0; i < 8; ++i) {
      pa.push_back({u(rng), u(rng)});
      pb.push_back({u(rng) + 1.0, u(rng)});
    }
    const auto a = xy_hull(convex_hull_2d(pa));
    const auto b = xy_hull(convex_hull_2d(pb));
    const double ab = hull_overlap_ratio(a, b);
    EXPECT_NEAR(ab, hull_overlap_ratio(b, a), 1e-9);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
  }
}

TEST(MergeHulls, SelfMergeAndAdjacentSquares) {
  const auto a = xy_hull(unit_square());
  const auto self = merge_hulls(a, a, a.plane());
  EXPECT_EQ(self.vertices().size(), 4u);
  EXPECT_NEAR(self.area(), 1.0, 1e-12);
  const auto b = xy_hull({{1, 0}, {2, 0}, {2, 1}, {1, 1}});
  EXPECT_NEAR(merge_hulls(a, b, a.plane()).area(), 2.0, 1e-12);
}

TEST(MergeHulls, ContainsEveryInputVertex) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Vec2> pa, pb;
    for (int i = 0; i < 10; ++i) {
      pa.push_back({u(rng), u(rng)});
      pb.push_back({u(rng) + 2.0, u(rng) - 1.0});
    }
    const auto a = xy_hull(convex_hull_2d(pa));
    const auto b = xy_hull(convex_hull_2d(pb));
    const auto m = merge_hulls(a, b, a.plane());
    EXPECT_GE(m.area(), std::max(a.area(), b.area()) - 1e-9);
    for (const auto& p : a.lifted_vertices()) EXPECT_TRUE(m.contains(p));
    for (const auto& p : b.lifted_vertices()) EXPECT_TRUE(m.contains(p));
  }
}

TEST(SimplifyHull, CapsVertexCountWithSubset) {
  std::vector<Vec2> circle;
  for (int i = 0; i < 200; ++i) {
    const double a = 2.0 * 3.14159265358979323846 * i / 200.0;
    circle.push_back({std::cos(a), std::sin(a)});
  }
  const auto hull = convex_hull_2d(circle);
  const auto simple = simplify_hull(hull, kMaxHullVertices);
  EXPECT_EQ(simple.size(), kMaxHullVertices);
  for (const auto& v : simple) {
    EXPECT_NE(std::find(hull.begin(), hull.end(), v), hull.end());
  }
  EXPECT_GT(polygon_area(simple), 0.99 * polygon_area(hull));
}

TEST(Hull, FromPointsIsConvexAndCoplanar) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const Plane plane = testing::random_plane(rng);
    std::vector<Point3> pts;
    for (int i = 0; i < 30; ++i) pts.push_back(plane.project(testing::random_point(rng, 3.0)));
    const auto hull = BoundaryHull::from_points(plane, pts);
    ASSERT_GE(hull.vertices().size(), 3u);
    for (const auto& v : hull.lifted_vertices()) EXPECT_LE(std::abs(plane.signed_distance(v)), 1e-6);
    for (const auto& p : pts) EXPECT_TRUE(hull.contains(p));
  }
}

TEST(Pose, CompositionAndInverse) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 50; ++i) {
    const Pose a = testing::random_pose(rng, 1.0, 3.0);
    const Pose b = testing::random_pose(rng, 1.0, 3.0);
    const Point3 p = testing::random_point(rng, 5.0);
    EXPECT_LE(((a * b).apply(p) - a.apply(b.apply(p))).norm(), 1e-12);
    EXPECT_LE((a.inverse().apply(a.apply(p)) - p).norm(), 1e-12);
    const Mat3 r = a.rotation();
    EXPECT_LE((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(PoseVec6, RoundTripWithinHalfPi) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> a(-1.5, 1.5);
  std::uniform_real_distribution<double> t(-5.0, 5.0);
  for (int i = 0; i < 200; ++i) {
    const PoseVec6 v{t(rng), t(rng), t(rng), a(rng), a(rng), a(rng)};
    const PoseVec6 w = PoseVec6::from_pose(v.to_pose());
    EXPECT_LE((v.to_vector() - w.to_vector()).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(PoseVec6, ZyxOrder) {
  const Mat3 r = rotation_from_angles(0.1, 0.2, 0.3);
  const Mat3 expected = (Eigen::AngleAxisd(0.3, Vec3::UnitZ()) * Eigen::AngleAxisd(0.2, Vec3::UnitY()) *
                         Eigen::AngleAxisd(0.1, Vec3::UnitX()))
                            .toRotationMatrix();
  EXPECT_LE((r - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PoseVec6, AngleDerivativesMatchFiniteDifferences) {
  const double rx = 0.3, ry = -0.2, rz = 0.7, h = 1e-6;
  const auto d = rotation_angle_derivatives(rx, ry, rz);
  const Mat3 dx = (rotation_from_angles(rx + h, ry, rz) - rotation_from_angles(rx - h, ry, rz)) / (2 * h);
  const Mat3 dy = (rotation_from_angles(rx, ry + h, rz) - rotation_from_angles(rx, ry - h, rz)) / (2 * h);
  const Mat3 dz = (rotation_from_angles(rx, ry, rz + h) - rotation_from_angles(rx, ry, rz - h)) / (2 * h);
  EXPECT_LE((d[0] - dx).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE((d[1] - dy).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE((d[2] - dz).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(TransformPlane, IdentityAndTranslation) {
  const Plane x5 = Plane::from_normal_offset(Vec3(-1, 0, 0), 5.0);
  const Plane same = transform_plane(x5, Pose::identity());
  EXPECT_EQ(same.normal(), x5.normal());
  EXPECT_EQ(same.d(), x5.d());
  const Plane x6 = transform_plane(x5, Pose(Mat3::Identity(), Vec3(1, 0, 0)));
  EXPECT_LE((x6.normal() - Vec3(-1, 0, 0)).norm(), 1e-12);
  EXPECT_NEAR(x6.d(), 6.0, 1e-12);
}

TEST(TransformPlane, PointsStayOnPlaneAndComposition) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 100; ++i) {
    const Plane plane = testing::random_plane(rng);
    const Pose t1 = testing::random_pose(rng, 3.0, 4.0);
    const Pose t2 = testing::random_pose(rng, 3.0, 4.0);
    const Plane moved = transform_plane(plane, t1);
    EXPECT_GE(moved.d(), 0.0);
    std::vector<Point3> samples;
    for (int k = 0; k < 3; ++k) {
      const Point3 p = plane.project(testing::random_point(rng, 3.0));
      EXPECT_LE(std::abs(moved.signed_distance(t1.apply(p))), 1e-9);
      samples.push_back(t1.apply(p));
    }
    const auto refit = fit_plane_lsq(samples);
    ASSERT_TRUE(refit);
    EXPECT_LE(std::min(normal_angle(*refit, moved), 3.14159265358979323846 - normal_angle(*refit, moved)),
              1e-6);
    const Plane twice = transform_plane(moved, t2);
    const Plane once = transform_plane(plane, t2 * t1);
    EXPECT_LE((twice.normal() - once.normal()).norm(), 1e-9);
    EXPECT_NEAR(twice.d(), once.d(), 1e-9);
  }
}

TEST(Ransac, ExactPlaneZEqualsOne) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<Point3> pts;
  for (int i = 0; i < 100; ++i) pts.push_back({u(rng), u(rng), 1.0});
  const auto fit = fit_plane_ransac(pts, {0.05, 3, 200, 0.0}, 7);
  ASSERT_TRUE(fit);
  EXPECT_LE((fit->plane.normal() - Vec3(0, 0, -1)).norm(), 1e-9);
  EXPECT_NEAR(fit->plane.d(), 1.0, 1e-9);
  EXPECT_EQ(fit->inliers.size(), 100u);
}

TEST(Ransac, RecoversPlaneUnderOutliers) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const Plane truth = testing::random_plane(rng, 3.0);
    const auto [u, v] = plane_basis(truth.normal());
    std::uniform_real_distribution<double> s(-2.0, 2.0);
    std::vector<Point3> pts;
    for (int i = 0; i < 80; ++i) pts.push_back(truth.foot() + s(rng) * u + s(rng) * v);
    for (int i = 0; i < 20; ++i) pts.push_back(testing::random_point(rng, 3.0));
    const auto fit = fit_plane_ransac(pts, {0.05, 3, 500, 0.0}, static_cast<std::uint64_t>(trial));
    ASSERT_TRUE(fit);
    EXPECT_GE(fit->inliers.size(), 80u);
    EXPECT_LE(normal_angle(fit->plane, truth), 1.0 * kDeg);
  }
}

TEST(Ransac, CollinearInputYieldsNone) {
  std::vector<Point3> pts;
  for (int i = 0; i < 10; ++i) pts.push_back({0.1 * i, 0.2 * i, 0.3 * i});
  EXPECT_FALSE(fit_plane_ransac(pts, {}, 1));
}

TEST(Ransac, TooFewPointsThrows) {
  const std::vector<Point3> pts = {{0, 0, 0}, {1, 0, 0}};
  try {
    fit_plane_ransac(pts, {}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientPoints);
  }
}

TEST(Ransac, DeterministicForSeed) {
  std::mt19937_64 rng(14);
  std::vector<Point3> pts;
  for (int i = 0; i < 300; ++i) pts.push_back(testing::random_point(rng, 2.0));
  const auto a = fit_plane_ransac(pts, {0.1, 3, 100, 0.0}, 99);
  const auto b = fit_plane_ransac(pts, {0.1, 3, 100, 0.0}, 99);
  ASSERT_TRUE(a && b);
  EXPECT_EQ(a->inliers, b->inliers);
  EXPECT_EQ(a->plane.normal(), b->plane.normal());
  EXPECT_EQ(a->plane.d(), b->plane.d());
}

TEST(Ransac, MinInliersRejectsWeakConsensus) {
  std::mt19937_64 rng(15);
  std::vector<Point3> pts;
  for (int i = 0; i < 50; ++i) pts.push_back(testing::random_point(rng, 5.0));
  EXPECT_FALSE(fit_plane_ransac(pts, {0.01, 40, 200, 0.0}, 3));
}

}  // namespace
}  // namespace refmap
