#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "refmap/detect.hpp"
#include "refmap/geometry.hpp"

namespace refmap {

struct MatchThresholds {
  double min_cos = 0.8;
  double max_d_gap = 0.1;
  /// Unsquared Euclidean distance between centroids, meters.
  double max_centroid_gap = 0.5;
  double max_area_ratio = 1.5;
};

/// What the matcher needs to know about a plane.
struct PlaneFeature {
  Plane plane;
  Point3 centroid = Point3::Zero();
  double area = 0.0;
};

PlaneFeature feature_of(const DetectedPlane& plane);

struct PlaneMatch {
  std::size_t source_idx = 0;
  std::size_t target_idx = 0;
  double cos_angle = 1.0;
  double d_gap = 0.0;
  double centroid_gap = 0.0;
  double area_ratio = 1.0;
};

struct RegisterConfig {
  MatchThresholds match;
  double inlier_angle_deg = 5.0;
  double inlier_d_gap = 0.05;
  /// Minimum ratio of smallest to largest singular value of the stacked
  /// target normals for translation to count as observable.
  double rank_tolerance = 0.1;
  /// Exhaustive triple search up to this many combinations, random sampling
  /// beyond it.
  std::size_t max_triples = 5000;
  double gn_eps = 1e-8;
  std::size_t gn_max_iters = 50;
  std::size_t gn_max_halvings = 8;
  double gn_damping = 1e-6;
};

struct RegistrationResult {
  Pose pose;
  std::vector<PlaneMatch> inlier_matches;
  std::size_t iterations = 0;
  double final_residual = 0.0;
  /// False when Gauss-Newton hit max_iters; pose is then the best iterate.
  bool converged = true;
};

/// Pairwise scan under the four thresholds, kind-segregated, then greedy
/// one-to-one selection by descending cosine.
std::vector<PlaneMatch> match_planes(std::span<const PlaneFeature> source,
                                     std::span<const PlaneFeature> target,
                                     const MatchThresholds& thresholds);
std::vector<PlaneMatch> match_planes(std::span<const DetectedPlane> source,
                                     std::span<const DetectedPlane> target,
                                     const MatchThresholds& thresholds);

/// R minimizing sum |R n_s - n_t|^2 over (n_s, n_t) pairs. Throws
/// DegenerateNormals when the normals span fewer than two directions.
Mat3 rotation_svd(std::span<const std::pair<Vec3, Vec3>> correspondences);

struct TranslationCorrespondence {
  Vec3 target_normal;
  double source_d = 0.0;
  double target_d = 0.0;
};

/// Least-squares t with n_t . t = d_s - d_t. Throws RankDeficient when the
/// normals do not span 3D (singular value ratio below `rank_tolerance`).
Vec3 translation_lsq(std::span<const TranslationCorrespondence> correspondences,
                     double rank_tolerance = 0.1);

/// Ratio of smallest to largest singular value of the stacked normals; 0 for
/// fewer than three normals.
double normal_span_ratio(std::span<const Vec3> normals);

/// Closed-form pose (rotation_svd then translation_lsq) over the given matches.
Pose closed_form_pose(std::span<const PlaneMatch> matches, std::span<const Plane> source,
                      std::span<const Plane> target, double rank_tolerance = 0.1);

/// Source plane mapped by `pose` without sign renormalization, compared
/// against the target under the inlier thresholds.
bool match_agrees(const Plane& source, const Plane& target, const Pose& pose,
                  const RegisterConfig& cfg);

struct MatchFilterResult {
  Pose pose;
  std::vector<PlaneMatch> inliers;
};

/// Max-consensus pose over 3-match combinations (the ground match always
/// included when present). Throws NoValidModel when no combination spans 3D.
MatchFilterResult ransac_match_filter(std::span<const PlaneMatch> matches,
                                      std::span<const Plane> source, std::span<const Plane> target,
                                      const RegisterConfig& cfg, std::uint64_t rng_seed);

/// Stacked residuals e_i = (R n_s - n_t; (R n_s)^T t + d_t - d_s) and their
/// Jacobian with respect to (x, y, z, rx, ry, rz).
void plane_residuals(std::span<const PlaneMatch> matches, std::span<const Plane> source,
                     std::span<const Plane> target, const PoseVec6& state, Eigen::VectorXd& e,
                     Eigen::MatrixXd* jacobian);

RegistrationResult gauss_newton_refine(std::span<const PlaneMatch> inliers,
                                       std::span<const Plane> source, std::span<const Plane> target,
                                       const Pose& initial, const RegisterConfig& cfg);

/// Pose mapping source-frame coordinates into the target frame.
RegistrationResult register_frames(std::span<const DetectedPlane> source,
                                   std::span<const DetectedPlane> target,
                                   const RegisterConfig& cfg, std::uint64_t rng_seed);

}  // namespace refmap
