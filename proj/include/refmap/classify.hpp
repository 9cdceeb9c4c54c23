#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "refmap/cloud.hpp"
#include "refmap/geometry.hpp"
#include "refmap/plane_map.hpp"

namespace refmap {

enum class PointLabel : int { Normal = 0, Surface = 1, Reflection = 2, Obstacle = 3, Unclassified = 4 };

const char* to_string(PointLabel label);

struct ClassifyConfig {
  /// Half-width of the on-plane band around the ray/plane intersection.
  double surface_band = 0.08;
  /// Angular cell: same ring, azimuth within +- bin_window bins. Off-grid
  /// directions belong to both rings bracketing their elevation.
  int bin_window = 1;
  double neighbor_radius = 0.3;
};

enum class OutputMode { Indoor, Full };

enum class Side { Front, OnPlane, Behind, NoIntersect };

struct PartitionEntry {
  Side side = Side::NoIntersect;
  /// Map index of the nearest hit reflective plane.
  std::optional<std::size_t> plane;
  double hit_range = 0.0;
};

/// Entries follow `cloud.flatten()` order. Only Reflective map planes are
/// considered; the nearest hull hit wins.
std::vector<PartitionEntry> partition_by_planes(const OrganizedCloud& cloud, const Pose& pose,
                                                const GlobalPlaneMap& map, const ClassifyConfig& cfg);

/// Labels from a partition: Front/NoIntersect -> Normal, OnPlane -> Surface,
/// Behind -> Unclassified (pending resolve_behind).
std::vector<PointLabel> initial_labels(std::span<const PartitionEntry> partition);

/// Resolves Behind points into Obstacle / Reflection / Unclassified in place.
/// When `decided_by` is given it receives, per return, the step (1-4) that
/// labeled it, 0 for returns left untouched.
void resolve_behind(const OrganizedCloud& cloud, const Pose& pose, const GlobalPlaneMap& map,
                    std::span<const PartitionEntry> partition, std::vector<PointLabel>& labels,
                    const ClassifyConfig& cfg, std::vector<std::uint8_t>* decided_by = nullptr);

struct LabeledCloud {
  std::int64_t frame_id = 0;
  OrganizedCloud cloud;  // sensor frame
  Pose pose;
  std::vector<CellRef> refs;  // flatten() order
  std::vector<PointLabel> labels;
  std::vector<std::optional<std::size_t>> plane;  // reflective plane per return, if any
};

LabeledCloud classify_cloud(const OrganizedCloud& cloud, const Pose& pose, const GlobalPlaneMap& map,
                            const ClassifyConfig& cfg);

/// Reflection points mirrored across their plane, world frame.
std::vector<Point3> mirror_back(const LabeledCloud& labeled, const GlobalPlaneMap& map);

/// Drops Reflection and Unclassified returns; Indoor mode also drops Obstacle.
OrganizedCloud filtered_cloud(const LabeledCloud& labeled, OutputMode mode);

/// .lbc: `LBC1 frame_id n`, then `ring bin layer x y z label` in world frame.
std::string format_labeled(const LabeledCloud& labeled);
void save_labeled(const std::filesystem::path& path, const LabeledCloud& labeled);

struct LabeledRecord {
  int ring = 0;
  int bin = 0;
  Layer layer = Layer::Strongest;
  Point3 point = Point3::Zero();  // world frame
  PointLabel label = PointLabel::Normal;
};

struct LabeledFile {
  std::int64_t frame_id = 0;
  std::vector<LabeledRecord> records;
};

LabeledFile parse_labeled(const std::string& text);
LabeledFile load_labeled(const std::filesystem::path& path);

}  // namespace refmap
