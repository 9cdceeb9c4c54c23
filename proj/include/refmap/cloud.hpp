#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "refmap/geometry.hpp"

namespace refmap {

enum class Layer : std::uint8_t { Strongest, Last };

char layer_code(Layer layer);

/// One echo of a beam, in the sensor frame.
struct Return {
  Point3 point = Point3::Zero();
  double range = 0.0;
  double intensity = 0.0;
  int ring = 0;
  int bin = 0;

  static Return make(const Point3& point, double intensity, int ring, int bin);
};

struct CellRef {
  Layer layer;
  int ring;
  int bin;
  friend bool operator==(const CellRef&, const CellRef&) = default;
};

/// Ring x azimuth grid of optional returns, one grid per layer. Flattening
/// order is the strongest layer row-major (ring-major), then the last layer.
class OrganizedCloud {
 public:
  OrganizedCloud() = default;
  OrganizedCloud(int n_rings, int n_bins);

  int n_rings() const { return n_rings_; }
  int n_bins() const { return n_bins_; }

  const std::optional<Return>& at(Layer layer, int ring, int bin) const;
  const std::optional<Return>& at(const CellRef& ref) const { return at(ref.layer, ref.ring, ref.bin); }
  void set(Layer layer, const Return& r);
  void clear(Layer layer, int ring, int bin);

  /// Places `r` unless the cell already holds a better candidate: higher
  /// intensity (tie: nearer) for the strongest layer, larger range for last.
  void merge(Layer layer, const Return& r);

  std::size_t populated_count() const;
  std::vector<CellRef> flatten() const;
  std::vector<Point3> points(Layer layer) const;

  friend bool operator==(const OrganizedCloud& a, const OrganizedCloud& b);

 private:
  std::size_t index(int ring, int bin) const {
    return static_cast<std::size_t>(ring) * static_cast<std::size_t>(n_bins_) +
           static_cast<std::size_t>(bin);
  }
  std::vector<std::optional<Return>>& grid(Layer layer) {
    return layer == Layer::Strongest ? strongest_ : last_;
  }
  const std::vector<std::optional<Return>>& grid(Layer layer) const {
    return layer == Layer::Strongest ? strongest_ : last_;
  }
  void check(int ring, int bin) const;

  int n_rings_ = 0;
  int n_bins_ = 0;
  std::vector<std::optional<Return>> strongest_;
  std::vector<std::optional<Return>> last_;
};

bool operator==(const Return& a, const Return& b);

/// Builds both layers from raw beam echoes: strongest holds the max-intensity
/// echo per cell (tie: nearer), last holds the farthest.
OrganizedCloud organize_points(std::span<const Return> returns, int n_rings, int n_bins);

/// Median elevation (radians) of each ring's strongest-layer points; rings
/// without points get NaN.
std::vector<double> ring_elevations(const OrganizedCloud& cloud);

struct TrajectoryEntry {
  std::int64_t frame_id = 0;
  Pose pose;
};

struct Trajectory {
  std::vector<TrajectoryEntry> entries;

  const Pose* find(std::int64_t frame_id) const;
};

enum class TruthLabel : int {
  Normal = 0,
  Glass = 1,
  Mirror = 2,
  OtherRef = 3,
  Reflection = 4,
  Obstacle = 5,
};

struct GroundTruthLabels {
  std::int64_t frame_id = 0;
  std::vector<int> labels;
};

// File formats: .drs scans, .tum trajectories, .lbl ground-truth labels.
OrganizedCloud load_dual_scan(const std::filesystem::path& path);
void save_dual_scan(const std::filesystem::path& path, const OrganizedCloud& cloud);
OrganizedCloud parse_dual_scan(const std::string& text);
std::string format_dual_scan(const OrganizedCloud& cloud);

Trajectory load_trajectory(const std::filesystem::path& path);
void save_trajectory(const std::filesystem::path& path, const Trajectory& traj);
Trajectory parse_trajectory(const std::string& text);
std::string format_trajectory(const Trajectory& traj);

GroundTruthLabels load_labels(const std::filesystem::path& path);
void save_labels(const std::filesystem::path& path, const GroundTruthLabels& labels);
GroundTruthLabels parse_labels(const std::string& text);
std::string format_labels(const GroundTruthLabels& labels);

}  // namespace refmap
