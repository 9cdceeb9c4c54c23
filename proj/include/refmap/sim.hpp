#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "refmap/cloud.hpp"
#include "refmap/geometry.hpp"
#include "refmap/plane_map.hpp"

namespace refmap::sim {

enum class Material { Diffuse, Ground, Mirror, Glass };

const char* to_string(Material m);

/// Rectangle center +- u +- v; u and v are orthogonal half-extent vectors and
/// the geometric normal is normalize(u x v).
struct Surface {
  Material material = Material::Diffuse;
  Point3 center = Point3::Zero();
  Vec3 u = Vec3::UnitX();
  Vec3 v = Vec3::UnitY();
  double albedo = 0.5;          // Diffuse, Ground
  double reflectance = 0.9;     // Mirror, Glass
  double transmittance = 0.0;   // Glass
  /// Incidence cone for a surface return; nullopt uses SimConfig::cone_deg.
  std::optional<double> cone_deg;

  Vec3 normal() const { return u.cross(v).normalized(); }
  Plane plane() const;
  bool is_diffuse() const { return material == Material::Diffuse || material == Material::Ground; }
  bool is_reflective() const { return !is_diffuse(); }
  /// Validates orthogonality and parameter ranges; throws DegenerateInput.
  void validate() const;
};

struct Scene {
  std::vector<Surface> surfaces;
};

enum class ReturnMode { StrongestLast, FirstLast };

struct SensorModel {
  std::vector<double> elevations_deg;  // strictly increasing, one per ring
  int n_bins = 600;
  double max_range = 30.0;
  ReturnMode mode = ReturnMode::StrongestLast;

  int n_rings() const { return static_cast<int>(elevations_deg.size()); }
  /// Unit beam direction in the sensor frame; azimuth = 2 pi bin / n_bins.
  Vec3 direction(int ring, int bin) const;
  void validate() const;

  /// 64 rings evenly spaced over [-52.1, 52.1] degrees, 600 bins, 30 m.
  static SensorModel hesai_qt64();
};

struct SimConfig {
  double cone_deg = 15.0;
  /// Width of the surface-return intensity falloff with incidence angle.
  double surface_falloff_deg = 10.0;
  /// Range at which diffuse intensity halves.
  double range_scale = 10.0;
  double i_min = 0.005;
  double noise_sigma = 0.0;
};

struct Candidate {
  double range = 0.0;
  double intensity = 0.0;
  TruthLabel label = TruthLabel::Normal;
  /// Surface that produced the echo; for continuations the surface the
  /// beam bounced off or passed through is in `via`.
  std::size_t surface = 0;
  std::optional<std::size_t> via;
};

/// Candidate echoes of one beam sorted by range, at most three.
std::vector<Candidate> trace_beam(const Point3& origin, const Vec3& direction, const Scene& scene,
                                  double max_range, const SimConfig& cfg);

struct DualSelection {
  std::optional<Candidate> strongest;  // or first, in FirstLast mode
  std::optional<Candidate> last;
};

DualSelection select_dual_returns(std::vector<Candidate> candidates, ReturnMode mode, double i_min);

struct RenderedScan {
  OrganizedCloud cloud;  // sensor frame
  GroundTruthLabels labels;
  /// Per flattened return, the generating surface and, for continuations,
  /// the surface bounced off or passed through.
  std::vector<std::size_t> surface;
  std::vector<std::optional<std::size_t>> via;
};

/// `pose` maps sensor to world coordinates. Range noise is applied per
/// candidate before selection.
RenderedScan render_scan(const Scene& scene, const SensorModel& sensor, const Pose& pose,
                         std::uint64_t rng_seed, const SimConfig& cfg);

/// Ground-truth map from the scene's surfaces: Reflective for mirrors and
/// glass, Ground for ground, Ordinary otherwise.
GlobalPlaneMap ground_truth_map(const Scene& scene);

struct Fixture {
  std::string name;
  Scene scene;
  Trajectory trajectory;
};

/// "box-room", "mirror-room" or "glass-corridor"; throws ConfigError otherwise.
Fixture make_fixture(const std::string& name);
std::vector<std::string> fixture_names();

/// Writes scans/<id>.drs, labels/<id>.lbl, trajectory.tum, ground_truth.gpm
/// and scene.scn under `out_dir`. Frame seeds are rng_seed + frame_id.
void render_sequence(const Scene& scene, const SensorModel& sensor, const Trajectory& trajectory,
                     const SimConfig& cfg, std::uint64_t rng_seed,
                     const std::filesystem::path& out_dir);

std::string frame_file_stem(std::int64_t frame_id);

// .scn: one surface per line, `material cx cy cz ux uy uz vx vy vz params...`
// with params `albedo` (diffuse, ground), `reflectance [cone_deg]` (mirror)
// or `reflectance transmittance [cone_deg]` (glass). '#' starts a comment.
Scene parse_scene(const std::string& text);
std::string format_scene(const Scene& scene);
Scene load_scene(const std::filesystem::path& path);
void save_scene(const std::filesystem::path& path, const Scene& scene);

}  // namespace refmap::sim
