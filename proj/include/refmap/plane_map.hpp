#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "refmap/detect.hpp"
#include "refmap/geometry.hpp"
#include "refmap/register.hpp"

namespace refmap {

struct MapPlane {
  Plane plane;  // world frame
  BoundaryHull hull;
  std::size_t observations = 1;
  std::size_t first_seen = 0;
  std::size_t last_seen = 0;

  PlaneKind kind() const { return plane.kind(); }
};

struct GlobalPlaneMap {
  std::vector<MapPlane> planes;
  std::size_t frame_count = 0;

  std::size_t count(PlaneKind kind) const;
};

struct MapConfig {
  /// Normal, offset and centroid gates; the area-ratio gate is not used
  /// against the map.
  MatchThresholds match;
  double min_overlap = 0.7;
  std::size_t probation_frames = 10;
  std::size_t min_observations = 3;
  /// Same-plane test used to merge duplicate map planes.
  double merge_angle_deg = 5.0;
  double merge_d_gap = 0.05;
  RegisterConfig registration;
};

/// Local planes (already in the world frame) against map planes. Source
/// indices refer to `local`, target indices to `map.planes`.
std::vector<PlaneMatch> match_to_map(std::span<const DetectedPlane> local, const GlobalPlaneMap& map,
                                     const MapConfig& cfg);

struct ScanToMapResult {
  RegistrationResult registration;
  /// False when matching or registration failed and the initial pose was
  /// returned unchanged.
  bool refined = false;
  std::string failure;
};

/// `local` is in the sensor frame, `initial_pose` maps sensor to world.
ScanToMapResult scan_to_map_optimize(std::span<const DetectedPlane> local, const GlobalPlaneMap& map,
                                     const Pose& initial_pose, const MapConfig& cfg,
                                     std::uint64_t rng_seed);

/// Weighted (k, 1) fusion of matched planes, insertion of unmatched ones,
/// then merging of duplicate coplanar overlapping planes. Advances
/// frame_count by one.
GlobalPlaneMap update_map(GlobalPlaneMap map, std::span<const DetectedPlane> local,
                          std::span<const PlaneMatch> matches, const MapConfig& cfg);

/// Drops planes past probation with too few observations.
GlobalPlaneMap prune_map(GlobalPlaneMap map, const MapConfig& cfg);

/// Fuses `b` into `a` with weights proportional to their observation counts.
MapPlane fuse_planes(const MapPlane& a, const MapPlane& b);

std::string format_gpm(const GlobalPlaneMap& map);
GlobalPlaneMap parse_gpm(const std::string& text);
void save_gpm(const std::filesystem::path& path, const GlobalPlaneMap& map);
GlobalPlaneMap load_gpm(const std::filesystem::path& path);

}  // namespace refmap
