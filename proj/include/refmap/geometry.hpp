#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace refmap {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Point3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

enum class PlaneKind { Reflective, Ordinary, Ground };

const char* to_string(PlaneKind kind);
PlaneKind plane_kind_from_string(const std::string& token);

/// Plane n·p + d = 0 with unit normal and d >= 0, so the origin of the frame
/// the plane is expressed in always lies on the positive side.
class Plane {
 public:
  Plane() = default;

  /// Normalizes `normal` and flips (n, d) when d < 0. For d == 0 the given
  /// orientation is kept.
  static Plane from_normal_offset(const Vec3& normal, double d,
                                  PlaneKind kind = PlaneKind::Ordinary);
  static Plane through_point(const Vec3& normal, const Point3& point,
                             PlaneKind kind = PlaneKind::Ordinary);

  const Vec3& normal() const { return normal_; }
  double d() const { return d_; }
  PlaneKind kind() const { return kind_; }

  double signed_distance(const Point3& p) const { return normal_.dot(p) + d_; }
  Point3 foot() const { return -d_ * normal_; }
  Point3 project(const Point3& p) const { return p - signed_distance(p) * normal_; }
  Plane with_kind(PlaneKind kind) const;

 private:
  Vec3 normal_{0.0, 0.0, 1.0};
  double d_ = 0.0;
  PlaneKind kind_ = PlaneKind::Ordinary;
};

/// Angle between plane normals, radians in [0, pi].
double normal_angle(const Plane& a, const Plane& b);

/// Rigid transform p' = R p + t.
class Pose {
 public:
  Pose() = default;
  Pose(const Mat3& rotation, const Vec3& translation);

  static Pose identity() { return {}; }

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Point3 apply(const Point3& p) const { return rotation_ * p + translation_; }
  Vec3 rotate(const Vec3& v) const { return rotation_ * v; }
  Pose inverse() const;

  /// (a * b).apply(p) == a.apply(b.apply(p))
  friend Pose operator*(const Pose& a, const Pose& b);

 private:
  Mat3 rotation_ = Mat3::Identity();
  Vec3 translation_ = Vec3::Zero();
};

/// Angle of the relative rotation between two poses, radians.
double rotation_angle_between(const Mat3& a, const Mat3& b);

/// (x, y, z, rx, ry, rz) with R = Rz(rz) * Ry(ry) * Rx(rx).
struct PoseVec6 {
  double x = 0, y = 0, z = 0;
  double rx = 0, ry = 0, rz = 0;

  static PoseVec6 from_pose(const Pose& pose);
  static PoseVec6 from_vector(const Eigen::Matrix<double, 6, 1>& v);
  Pose to_pose() const;
  Eigen::Matrix<double, 6, 1> to_vector() const;
};

Mat3 rotation_from_angles(double rx, double ry, double rz);
/// Partial derivatives of Rz*Ry*Rx with respect to rx, ry, rz.
std::array<Mat3, 3> rotation_angle_derivatives(double rx, double ry, double rz);

/// 2D convex polygon in the (u, v) frame of a plane.
class BoundaryHull {
 public:
  BoundaryHull() = default;
  BoundaryHull(Plane plane, Vec3 basis_u, Vec3 basis_v, std::vector<Vec2> vertices);

  /// Hull of the projections of `points`, with a basis derived from the plane
  /// normal. Throws DegenerateInput when the projections are collinear.
  static BoundaryHull from_points(const Plane& plane, std::span<const Point3> points);
  /// Same, but with an explicit in-plane basis.
  static BoundaryHull from_points(const Plane& plane, const Vec3& basis_u,
                                  std::span<const Point3> points);

  const Plane& plane() const { return plane_; }
  const Vec3& basis_u() const { return basis_u_; }
  const Vec3& basis_v() const { return basis_v_; }
  const std::vector<Vec2>& vertices() const { return vertices_; }

  Vec2 project(const Point3& p) const;
  Point3 lift(const Vec2& uv) const;
  std::vector<Point3> lifted_vertices() const;
  bool contains(const Point3& p) const;
  double area() const;
  /// Area centroid of the polygon, lifted to 3D.
  Point3 centroid() const;

 private:
  Plane plane_;
  Vec3 basis_u_{1.0, 0.0, 0.0};
  Vec3 basis_v_{0.0, 1.0, 0.0};
  std::vector<Vec2> vertices_;
};

inline constexpr std::size_t kMaxHullVertices = 64;

/// Deterministic orthonormal in-plane basis (u, v) with u x v = n.
std::pair<Vec3, Vec3> plane_basis(const Vec3& normal);

// Householder reflection m = p - 2 (n·p + d) n.
Point3 mirror_point(const Point3& p, const Plane& plane);
std::vector<Point3> mirror_points(std::span<const Point3> points, const Plane& plane);

struct RayHit {
  double t = 0.0;
  Point3 point;
};

/// Forward intersection (t > 0) of origin + t * direction with the plane.
std::optional<RayHit> ray_plane_intersection(const Point3& origin, const Vec3& direction,
                                             const Plane& plane);

Vec2 project_to_hull_frame(const BoundaryHull& hull, const Point3& point);

/// Inclusive of the boundary, 1e-9 m tolerance.
bool point_in_hull(const BoundaryHull& hull, const Vec2& point);
bool point_in_polygon(std::span<const Vec2> polygon, const Vec2& point, double tol = 1e-9);

/// Andrew's monotone chain. CCW, no three collinear output vertices.
std::vector<Vec2> convex_hull_2d(std::span<const Vec2> points);

double polygon_area(std::span<const Vec2> vertices);
Vec2 polygon_centroid(std::span<const Vec2> vertices);

/// Intersection of two convex CCW polygons by successive half-plane clipping.
std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip);

/// Reduces a convex polygon to at most `max_vertices` by farthest-point
/// insertion; the result is a subset of the input vertices in the same order.
std::vector<Vec2> simplify_hull(std::span<const Vec2> vertices, std::size_t max_vertices);

/// intersection_area / min(area_a, area_b), with b projected onto a's plane.
double hull_overlap_ratio(const BoundaryHull& a, const BoundaryHull& b);

/// Convex hull of both vertex sets projected onto target_plane. The result
/// reuses a's basis projected into the target plane.
BoundaryHull merge_hulls(const BoundaryHull& a, const BoundaryHull& b, const Plane& target_plane);

Plane transform_plane(const Plane& plane, const Pose& pose);
BoundaryHull transform_hull(const BoundaryHull& hull, const Pose& pose);

struct PlaneFit {
  Plane plane;
  std::vector<std::size_t> inliers;
};

/// Total least squares fit (centroid + smallest eigenvector). Requires >= 3
/// points; returns nullopt for rank-deficient sets.
std::optional<Plane> fit_plane_lsq(std::span<const Point3> points,
                                   PlaneKind kind = PlaneKind::Ordinary);

struct RansacParams {
  double dist_threshold = 0.05;
  std::size_t min_inliers = 3;
  std::size_t max_iters = 500;
  /// When in (0, 1), stops early once enough samples were drawn to hit an
  /// all-inlier triple with this probability (given the best ratio so far).
  /// 0 always draws max_iters samples.
  double confidence = 0.0;
};

/// Max-consensus plane over `max_iters` random 3-samples, refined by least
/// squares over its inliers; the returned inlier set is recounted against the
/// refined plane. Degenerate (collinear) samples are skipped, so a fully
/// collinear input yields nullopt. Throws InsufficientPoints for < 3 points.
std::optional<PlaneFit> fit_plane_ransac(std::span<const Point3> points,
                                         const RansacParams& params, std::uint64_t rng_seed,
                                         PlaneKind kind = PlaneKind::Ordinary);

}  // namespace refmap
