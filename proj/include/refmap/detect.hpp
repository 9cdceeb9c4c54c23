#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "refmap/cloud.hpp"
#include "refmap/geometry.hpp"

namespace refmap {

struct DetectConfig {
  // dual return
  double divergence_threshold = 0.1;
  // intensity peak
  double intensity_low = 0.2;
  double intensity_high = 0.8;
  double max_gap = 0.5;
  double horizontal_elevation_deg = 2.0;
  std::size_t min_peak_run = 5;
  std::size_t min_peak_inliers = 30;
  // reflective plane fitting
  std::size_t min_reflective_inliers = 100;
  double ransac_dist = 0.05;
  std::size_t ransac_max_iters = 500;
  double ransac_confidence = 0.999;
  double dedup_overlap = 0.7;
  // ordinary planes
  std::size_t normal_k = 16;
  double grow_radius = 0.5;
  double normal_angle_deg = 3.0;
  std::size_t min_plane_inliers = 200;
  double min_plane_area = 0.3;
  double min_plane_density = 100.0;
  std::size_t low_density_min_inliers = 500;
  std::size_t max_planes = 25;
  std::size_t ground_min_inliers = 200;
};

enum class PlaneSource { IntensityPeak, DualReturn, RegionGrowing, Ground };

const char* to_string(PlaneSource source);

struct DetectedPlane {
  Plane plane;
  BoundaryHull hull;
  std::size_t inlier_count = 0;
  double area = 0.0;
  Point3 centroid = Point3::Zero();
  PlaneSource source = PlaneSource::RegionGrowing;
  /// Indices into the point list the plane was fitted from.
  std::vector<std::size_t> inliers;
};

/// Builds a DetectedPlane from `points[inliers]`; nullopt when the inlier
/// projections are degenerate.
std::optional<DetectedPlane> make_detected_plane(const Plane& plane, std::span<const Point3> points,
                                                 std::vector<std::size_t> inliers,
                                                 PlaneSource source);

DetectedPlane transform_detected_plane(const DetectedPlane& plane, const Pose& pose);

/// Strongest-layer runs on horizontal rings whose intensity rises from below
/// `intensity_low` to a peak >= `intensity_high` and falls back below
/// `intensity_low`, confirmed by the same ordering on the adjacent rings.
/// Each set contains the run cells plus the confirming cells.
std::vector<std::vector<CellRef>> find_intensity_peaks(const OrganizedCloud& cloud,
                                                       const DetectConfig& cfg);

struct DualReturnMask {
  int n_rings = 0;
  int n_bins = 0;
  std::vector<std::uint8_t> diverged;          // ring-major
  std::vector<std::optional<Return>> candidate;  // nearer return of diverged cells

  bool is_diverged(int ring, int bin) const {
    return diverged[static_cast<std::size_t>(ring) * static_cast<std::size_t>(n_bins) +
                    static_cast<std::size_t>(bin)] != 0;
  }
  std::vector<Return> candidates() const;
};

DualReturnMask detect_dual_return(const OrganizedCloud& cloud, const DetectConfig& cfg);

/// Sequential RANSAC over the candidate points until fewer than `min_inliers`
/// remain or a fit fails. Inlier indices refer to `candidates`.
std::vector<DetectedPlane> fit_reflective_planes(std::span<const Return> candidates,
                                                 const DetectConfig& cfg, std::uint64_t rng_seed,
                                                 std::size_t min_inliers,
                                                 PlaneSource source = PlaneSource::DualReturn);
std::vector<DetectedPlane> fit_reflective_planes(std::span<const Return> candidates,
                                                 const DetectConfig& cfg, std::uint64_t rng_seed);

/// RANSAC over the z < 0 subset (sensor frame). Inlier indices refer to `points`.
std::optional<DetectedPlane> extract_ground_plane(std::span<const Point3> points,
                                                  const DetectConfig& cfg, std::uint64_t rng_seed);

/// Region growing on kNN normals, then per-region RANSAC (largest region
/// first) under the inlier/area/density acceptance rule, up to max_planes.
std::vector<DetectedPlane> extract_ordinary_planes(std::span<const Point3> points,
                                                   const DetectConfig& cfg, std::uint64_t rng_seed);

/// Keeps the higher-inlier plane of every coplanar pair whose hulls overlap
/// by at least `dedup_overlap`.
std::vector<DetectedPlane> dedup_planes(std::vector<DetectedPlane> planes, const DetectConfig& cfg);

struct ReflectiveDetection {
  std::vector<DetectedPlane> planes;
  /// Cells (both layers) flagged by either detector.
  std::vector<CellRef> affected_cells;
};

/// Intensity-peak and dual-return detection on one scan, deduplicated.
ReflectiveDetection detect_reflective_planes(const OrganizedCloud& cloud, const DetectConfig& cfg,
                                             std::uint64_t rng_seed);

}  // namespace refmap
