#include "refmap/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "refmap/errors.hpp"

namespace refmap {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::InsufficientPoints: return "InsufficientPoints";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::DegenerateNormals: return "DegenerateNormals";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NoValidModel: return "NoValidModel";
    case ErrorCode::SingularNormalEquations: return "SingularNormalEquations";
    case ErrorCode::MissingPose: return "MissingPose";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "UnknownError";
}

const char* to_string(PlaneKind kind) {
  switch (kind) {
    case PlaneKind::Reflective: return "Reflective";
    case PlaneKind::Ordinary: return "Ordinary";
    case PlaneKind::Ground: return "Ground";
  }
  return "Ordinary";
}

PlaneKind plane_kind_from_string(const std::string& token) {
  if (token == "Reflective") return PlaneKind::Reflective;
  if (token == "Ordinary") return PlaneKind::Ordinary;
  if (token == "Ground") return PlaneKind::Ground;
  throw Error(ErrorCode::ParseError, "unknown plane kind '" + token + "'");
}

// ---------------------------------------------------------------------------
// Plane

Plane Plane::from_normal_offset(const Vec3& normal, double d, PlaneKind kind) {
  const double norm = normal.norm();
  if (!(norm > 0.0) || !std::isfinite(norm) || !std::isfinite(d)) {
    throw Error(ErrorCode::DegenerateInput, "plane normal must be finite and non-zero");
  }
  Plane p;
  // Already-unit normals are kept bit-for-bit so parse/format round trips.
  if (std::abs(norm - 1.0) <= 4.0 * std::numeric_limits<double>::epsilon()) {
    p.normal_ = normal;
    p.d_ = d;
  } else {
    p.normal_ = normal / norm;
    p.d_ = d / norm;
  }
  if (p.d_ < 0.0) {
    p.normal_ = -p.normal_;
    p.d_ = -p.d_;
  }
  p.kind_ = kind;
  return p;
}

Plane Plane::through_point(const Vec3& normal, const Point3& point, PlaneKind kind) {
  const Vec3 n = normal.normalized();
  return from_normal_offset(n, -n.dot(point), kind);
}

Plane Plane::with_kind(PlaneKind kind) const {
  Plane p = *this;
  p.kind_ = kind;
  return p;
}

double normal_angle(const Plane& a, const Plane& b) {
  return std::acos(std::clamp(a.normal().dot(b.normal()), -1.0, 1.0));
}

// ---------------------------------------------------------------------------
// Pose

Pose::Pose(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {}

Pose Pose::inverse() const {
  const Mat3 rt = rotation_.transpose();
  return {rt, -(rt * translation_)};
}

Pose operator*(const Pose& a, const Pose& b) {
  return {a.rotation_ * b.rotation_, a.rotation_ * b.translation_ + a.translation_};
}

double rotation_angle_between(const Mat3& a, const Mat3& b) {
  const Mat3 rel = a.transpose() * b;
  // atan2 keeps precision near zero where acos of the trace loses half the digits.
  const Vec3 s(rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0), rel(1, 0) - rel(0, 1));
  return std::atan2(0.5 * s.norm(), 0.5 * (rel.trace() - 1.0));
}

Mat3 rotation_from_angles(double rx, double ry, double rz) {
  const Mat3 mx = Eigen::AngleAxisd(rx, Vec3::UnitX()).toRotationMatrix();
  const Mat3 my = Eigen::AngleAxisd(ry, Vec3::UnitY()).toRotationMatrix();
  const Mat3 mz = Eigen::AngleAxisd(rz, Vec3::UnitZ()).toRotationMatrix();
  return mz * my * mx;
}

std::array<Mat3, 3> rotation_angle_derivatives(double rx, double ry, double rz) {
  const double cx = std::cos(rx), sx = std::sin(rx);
  const double cy = std::cos(ry), sy = std::sin(ry);
  const double cz = std::cos(rz), sz = std::sin(rz);
  Mat3 mx, my, mz, dmx, dmy, dmz;
  mx << 1, 0, 0, 0, cx, -sx, 0, sx, cx;
  my << cy, 0, sy, 0, 1, 0, -sy, 0, cy;
  mz << cz, -sz, 0, sz, cz, 0, 0, 0, 1;
  dmx << 0, 0, 0, 0, -sx, -cx, 0, cx, -sx;
  dmy << -sy, 0, cy, 0, 0, 0, -cy, 0, -sy;
  dmz << -sz, -cz, 0, cz, -sz, 0, 0, 0, 0;
  return {mz * my * dmx, mz * dmy * mx, dmz * my * mx};
}

PoseVec6 PoseVec6::from_pose(const Pose& pose) {
  const Mat3& r = pose.rotation();
  PoseVec6 v;
  v.x = pose.translation().x();
  v.y = pose.translation().y();
  v.z = pose.translation().z();
  v.ry = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  v.rx = std::atan2(r(2, 1), r(2, 2));
  v.rz = std::atan2(r(1, 0), r(0, 0));
  return v;
}

PoseVec6 PoseVec6::from_vector(const Eigen::Matrix<double, 6, 1>& v) {
  return {v[0], v[1], v[2], v[3], v[4], v[5]};
}

Pose PoseVec6::to_pose() const { return {rotation_from_angles(rx, ry, rz), Vec3(x, y, z)}; }

Eigen::Matrix<double, 6, 1> PoseVec6::to_vector() const {
  Eigen::Matrix<double, 6, 1> v;
  v << x, y, z, rx, ry, rz;
  return v;
}

// ---------------------------------------------------------------------------
// Polygons

namespace {

double cross2(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

}  // namespace

std::vector<Vec2> convex_hull_2d(std::span<const Vec2> points) {
  std::vector<Vec2> pts(points.begin(), points.end());
  if (pts.size() < 3) {
    throw Error(ErrorCode::DegenerateInput, "convex hull needs at least 3 points");
  }
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  double extent = 0.0;
  for (const auto& p : pts) extent = std::max(extent, (p - pts.front()).norm());
  const double eps = 1e-12 * std::max(extent * extent, 1e-300);

  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross2(hull[k - 2], hull[k - 1], p) <= eps) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    const auto& p = pts[i];
    while (k >= lower && cross2(hull[k - 2], hull[k - 1], p) <= eps) --k;
    hull[k++] = p;
  }
  hull.resize(k > 0 ? k - 1 : 0);
  if (hull.size() < 3) {
    throw Error(ErrorCode::DegenerateInput, "points are collinear");
  }
  return hull;
}

double polygon_area(std::span<const Vec2> v) {
  if (v.size() < 3) return 0.0;
  double a = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec2& p = v[i];
    const Vec2& q = v[(i + 1) % v.size()];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return std::abs(0.5 * a);
}

Vec2 polygon_centroid(std::span<const Vec2> v) {
  if (v.empty()) return Vec2::Zero();
  double a = 0.0;
  Vec2 c = Vec2::Zero();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec2& p = v[i];
    const Vec2& q = v[(i + 1) % v.size()];
    const double w = p.x() * q.y() - q.x() * p.y();
    a += w;
    c += w * (p + q);
  }
  if (std::abs(a) < 1e-300) {
    Vec2 mean = Vec2::Zero();
    for (const auto& p : v) mean += p;
    return mean / static_cast<double>(v.size());
  }
  return c / (3.0 * a);
}

bool point_in_polygon(std::span<const Vec2> polygon, const Vec2& point, double tol) {
  if (polygon.size() < 3) return false;
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    const Vec2& a = polygon[i];
    const Vec2& b = polygon[(i + 1) % polygon.size()];
    const double len = (b - a).norm();
    if (len == 0.0) continue;
    // signed distance of point to the left of edge a->b
    if (cross2(a, b, point) / len < -tol) return false;
  }
  return true;
}

std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip) {
  std::vector<Vec2> out(subject.begin(), subject.end());
  if (clip.size() < 3) return {};
  for (std::size_t i = 0; i < clip.size() && !out.empty(); ++i) {
    const Vec2& a = clip[i];
    const Vec2& b = clip[(i + 1) % clip.size()];
    std::vector<Vec2> in = std::move(out);
    out.clear();
    for (std::size_t j = 0; j < in.size(); ++j) {
      const Vec2& p = in[j];
      const Vec2& q = in[(j + 1) % in.size()];
      const double sp = cross2(a, b, p);
      const double sq = cross2(a, b, q);
      if (sp >= 0.0) out.push_back(p);
      if ((sp >= 0.0) != (sq >= 0.0)) {
        const double t = sp / (sp - sq);
        out.push_back(p + t * (q - p));
      }
    }
  }
  return out;
}

std::vector<Vec2> simplify_hull(std::span<const Vec2> vertices, std::size_t max_vertices) {
  const std::size_t n = vertices.size();
  if (n <= max_vertices || max_vertices < 3) {
    return {vertices.begin(), vertices.end()};
  }
  std::vector<bool> chosen(n, false);
  std::size_t ia = 0, ib = 1;
  double best = -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dist = (vertices[i] - vertices[j]).squaredNorm();
      if (dist > best) {
        best = dist;
        ia = i;
        ib = j;
      }
    }
  }
  chosen[ia] = chosen[ib] = true;
  std::size_t count = 2;

  auto seg_dist = [](const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double l2 = ab.squaredNorm();
    const double t = l2 > 0.0 ? std::clamp((p - a).dot(ab) / l2, 0.0, 1.0) : 0.0;
    return (p - (a + t * ab)).norm();
  };

  while (count < max_vertices) {
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < n; ++i)
      if (chosen[i]) order.push_back(i);
    std::size_t pick = n;
    double far = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (chosen[i]) continue;
      double dmin = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < order.size(); ++k) {
        const Vec2& a = vertices[order[k]];
        const Vec2& b = vertices[order[(k + 1) % order.size()]];
        dmin = std::min(dmin, seg_dist(vertices[i], a, b));
      }
      if (dmin > far) {
        far = dmin;
        pick = i;
      }
    }
    if (pick == n) break;
    chosen[pick] = true;
    ++count;
  }
  std::vector<Vec2> out;
  for (std::size_t i = 0; i < n; ++i)
    if (chosen[i]) out.push_back(vertices[i]);
  return out;
}

// ---------------------------------------------------------------------------
// BoundaryHull

std::pair<Vec3, Vec3> plane_basis(const Vec3& normal) {
  int axis = 0;
  if (std::abs(normal.y()) < std::abs(normal[axis])) axis = 1;
  if (std::abs(normal.z()) < std::abs(normal[axis])) axis = 2;
  const Vec3 e = Vec3::Unit(axis);
  const Vec3 u = (e - e.dot(normal) * normal).normalized();
  return {u, normal.cross(u)};
}

BoundaryHull::BoundaryHull(Plane plane, Vec3 basis_u, Vec3 basis_v, std::vector<Vec2> vertices)
    : plane_(plane),
      basis_u_(std::move(basis_u)),
      basis_v_(std::move(basis_v)),
      vertices_(std::move(vertices)) {}

BoundaryHull BoundaryHull::from_points(const Plane& plane, std::span<const Point3> points) {
  return from_points(plane, plane_basis(plane.normal()).first, points);
}

BoundaryHull BoundaryHull::from_points(const Plane& plane, const Vec3& basis_u,
                                       std::span<const Point3> points) {
  const Vec3& n = plane.normal();
  Vec3 u = basis_u - basis_u.dot(n) * n;
  if (u.norm() < 1e-9) u = plane_basis(n).first;
  u.normalize();
  const Vec3 v = n.cross(u);
  BoundaryHull hull(plane, u, v, {});
  std::vector<Vec2> uv;
  uv.reserve(points.size());
  for (const auto& p : points) uv.push_back(hull.project(p));
  hull.vertices_ = simplify_hull(convex_hull_2d(uv), kMaxHullVertices);
  return hull;
}

Vec2 BoundaryHull::project(const Point3& p) const {
  const Vec3 rel = p - plane_.foot();
  return {basis_u_.dot(rel), basis_v_.dot(rel)};
}

Point3 BoundaryHull::lift(const Vec2& uv) const {
  return plane_.foot() + uv.x() * basis_u_ + uv.y() * basis_v_;
}

std::vector<Point3> BoundaryHull::lifted_vertices() const {
  std::vector<Point3> out;
  out.reserve(vertices_.size());
  for (const auto& v : vertices_) out.push_back(lift(v));
  return out;
}

bool BoundaryHull::contains(const Point3& p) const { return point_in_hull(*this, project(p)); }

double BoundaryHull::area() const { return polygon_area(vertices_); }

Point3 BoundaryHull::centroid() const { return lift(polygon_centroid(vertices_)); }

// ---------------------------------------------------------------------------
// Operations

Point3 mirror_point(const Point3& p, const Plane& plane) {
  return p - 2.0 * plane.signed_distance(p) * plane.normal();
}

std::vector<Point3> mirror_points(std::span<const Point3> points, const Plane& plane) {
  std::vector<Point3> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(mirror_point(p, plane));
  return out;
}

std::optional<RayHit> ray_plane_intersection(const Point3& origin, const Vec3& direction,
                                             const Plane& plane) {
  const double denom = plane.normal().dot(direction);
  if (std::abs(denom) < 1e-12) return std::nullopt;
  const double t = -plane.signed_distance(origin) / denom;
  if (!(t > 0.0)) return std::nullopt;
  return RayHit{t, origin + t * direction};
}

Vec2 project_to_hull_frame(const BoundaryHull& hull, const Point3& point) {
  return hull.project(point);
}

bool point_in_hull(const BoundaryHull& hull, const Vec2& point) {
  return point_in_polygon(hull.vertices(), point, 1e-9);
}

double hull_overlap_ratio(const BoundaryHull& a, const BoundaryHull& b) {
  std::vector<Vec2> projected;
  projected.reserve(b.vertices().size());
  for (const auto& p : b.lifted_vertices()) projected.push_back(a.project(p));
  std::vector<Vec2> b_in_a;
  try {
    b_in_a = convex_hull_2d(projected);
  } catch (const Error&) {
    return 0.0;
  }
  const double denom = std::min(a.area(), polygon_area(b_in_a));
  if (!(denom > 0.0)) return 0.0;
  const double inter = polygon_area(clip_convex(a.vertices(), b_in_a));
  return std::clamp(inter / denom, 0.0, 1.0);
}

BoundaryHull merge_hulls(const BoundaryHull& a, const BoundaryHull& b, const Plane& target_plane) {
  std::vector<Point3> pts = a.lifted_vertices();
  const auto pb = b.lifted_vertices();
  pts.insert(pts.end(), pb.begin(), pb.end());
  return BoundaryHull::from_points(target_plane, a.basis_u(), pts);
}

Plane transform_plane(const Plane& plane, const Pose& pose) {
  const Vec3 n = pose.rotate(plane.normal());
  return Plane::from_normal_offset(n, plane.d() - n.dot(pose.translation()), plane.kind());
}

BoundaryHull transform_hull(const BoundaryHull& hull, const Pose& pose) {
  const Plane plane = transform_plane(hull.plane(), pose);
  std::vector<Point3> pts;
  for (const auto& p : hull.lifted_vertices()) pts.push_back(pose.apply(p));
  return BoundaryHull::from_points(plane, pose.rotate(hull.basis_u()), pts);
}

std::optional<Plane> fit_plane_lsq(std::span<const Point3> points, PlaneKind kind) {
  if (points.size() < 3) return std::nullopt;
  Vec3 c = Vec3::Zero();
  for (const auto& p : points) c += p;
  c /= static_cast<double>(points.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : points) {
    const Vec3 q = p - c;
    cov += q * q.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  const auto& ev = eig.eigenvalues();
  // Rank check: the middle eigenvalue must be non-negligible.
  if (!(ev[1] > 1e-18 * std::max(ev[2], 1e-300)) || ev[2] <= 0.0) return std::nullopt;
  const Vec3 n = eig.eigenvectors().col(0);
  return Plane::through_point(n, c, kind);
}

std::optional<PlaneFit> fit_plane_ransac(std::span<const Point3> points,
                                         const RansacParams& params, std::uint64_t rng_seed,
                                         PlaneKind kind) {
  const std::size_t n = points.size();
  if (n < 3) {
    throw Error(ErrorCode::InsufficientPoints, "RANSAC plane fit needs at least 3 points");
  }
  std::mt19937_64 rng(rng_seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);

  double scale = 0.0;
  for (const auto& p : points) scale = std::max(scale, (p - points[0]).norm());

  std::size_t best_count = 0;
  Vec3 best_n = Vec3::Zero();
  double best_d = 0.0;
  double needed = static_cast<double>(params.max_iters);
  for (std::size_t it = 0; it < params.max_iters && static_cast<double>(it) < needed; ++it) {
    const std::size_t i = pick(rng);
    std::size_t j = pick(rng);
    std::size_t k = pick(rng);
    if (i == j || j == k || i == k) continue;
    const Vec3 nrm = (points[j] - points[i]).cross(points[k] - points[i]);
    const double len = nrm.norm();
    if (len <= 1e-12 * std::max(scale * scale, 1e-300)) continue;
    const Vec3 unit = nrm / len;
    const double d = -unit.dot(points[i]);
    std::size_t count = 0;
    for (const auto& p : points) {
      if (std::abs(unit.dot(p) + d) <= params.dist_threshold) ++count;
    }
    if (count > best_count) {
      best_count = count;
      best_n = unit;
      best_d = d;
      if (params.confidence > 0.0 && params.confidence < 1.0) {
        const double w = static_cast<double>(count) / static_cast<double>(n);
        const double miss = 1.0 - w * w * w;
        needed = miss <= 0.0 ? 0.0 : std::log(1.0 - params.confidence) / std::log(miss);
      }
    }
  }
  if (best_count < std::max<std::size_t>(params.min_inliers, 3)) return std::nullopt;

  auto collect = [&](const Vec3& nn, double dd) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::abs(nn.dot(points[i]) + dd) <= params.dist_threshold) idx.push_back(i);
    }
    return idx;
  };

  std::vector<std::size_t> inliers = collect(best_n, best_d);
  std::vector<Point3> sel;
  sel.reserve(inliers.size());
  for (auto i : inliers) sel.push_back(points[i]);
  auto refined = fit_plane_lsq(sel, kind);
  Plane plane = refined ? *refined : Plane::from_normal_offset(best_n, best_d, kind);
  std::vector<std::size_t> recount = collect(plane.normal(), plane.d());
  if (recount.size() < std::max<std::size_t>(params.min_inliers, 3)) return std::nullopt;
  return PlaneFit{plane, std::move(recount)};
}

}  // namespace refmap
