#include "refmap/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "refmap/errors.hpp"
#include "refmap/text_io.hpp"

namespace refmap::sim {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kMinT = 1e-6;

struct Hit {
  double t;
  std::size_t surface;
  Point3 point;
  double cos_incidence;  // |d . n|
};

std::optional<Hit> intersect(const Surface& s, std::size_t id, const Point3& o, const Vec3& d) {
  const Vec3 n = s.normal();
  const double denom = d.dot(n);
  if (std::abs(denom) < 1e-12) return std::nullopt;
  const double t = (s.center - o).dot(n) / denom;
  if (!(t > kMinT)) return std::nullopt;
  const Point3 p = o + t * d;
  const Vec3 q = p - s.center;
  const double a = q.dot(s.u) / s.u.squaredNorm();
  const double b = q.dot(s.v) / s.v.squaredNorm();
  if (std::abs(a) > 1.0 + 1e-9 || std::abs(b) > 1.0 + 1e-9) return std::nullopt;
  return Hit{t, id, p, std::abs(denom)};
}

std::optional<Hit> nearest_hit(const Scene& scene, const Point3& o, const Vec3& d, bool diffuse_only) {
  std::optional<Hit> best;
  for (std::size_t i = 0; i < scene.surfaces.size(); ++i) {
    const auto& s = scene.surfaces[i];
    if (diffuse_only && !s.is_diffuse()) continue;
    const auto h = intersect(s, i, o, d);
    if (h && (!best || h->t < best->t)) best = h;
  }
  return best;
}

double diffuse_intensity(const Surface& s, double range, double cos_incidence, const SimConfig& cfg) {
  const double q = range / cfg.range_scale;
  return s.albedo * cos_incidence / (1.0 + q * q);
}

Material material_from_string(std::string_view token, std::size_t line_no) {
  if (token == "diffuse") return Material::Diffuse;
  if (token == "ground") return Material::Ground;
  if (token == "mirror") return Material::Mirror;
  if (token == "glass") return Material::Glass;
  throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": unknown material");
}

Surface rect(Material m, Point3 c, Vec3 u, Vec3 v, double param = 0.6) {
  Surface s;
  s.material = m;
  s.center = c;
  s.u = u;
  s.v = v;
  if (m == Material::Diffuse || m == Material::Ground) s.albedo = param;
  if (m == Material::Mirror || m == Material::Glass) s.reflectance = param;
  return s;
}

// Axis-aligned room centered on the xy origin, floor at z0, ceiling at z1.
void add_room(Scene& scene, double hx, double hy, double z0, double z1) {
  const double zc = 0.5 * (z0 + z1);
  const double hz = 0.5 * (z1 - z0);
  scene.surfaces.push_back(rect(Material::Ground, {0, 0, z0}, {hx, 0, 0}, {0, hy, 0}, 0.5));
  scene.surfaces.push_back(rect(Material::Diffuse, {0, 0, z1}, {hx, 0, 0}, {0, hy, 0}, 0.6));
  scene.surfaces.push_back(rect(Material::Diffuse, {hx, 0, zc}, {0, hy, 0}, {0, 0, hz}, 0.6));
  scene.surfaces.push_back(rect(Material::Diffuse, {-hx, 0, zc}, {0, hy, 0}, {0, 0, hz}, 0.6));
  scene.surfaces.push_back(rect(Material::Diffuse, {0, hy, zc}, {hx, 0, 0}, {0, 0, hz}, 0.6));
  scene.surfaces.push_back(rect(Material::Diffuse, {0, -hy, zc}, {hx, 0, 0}, {0, 0, hz}, 0.6));
}

Pose pose_of(double x, double y, double z, double roll, double pitch, double yaw) {
  return PoseVec6{x, y, z, roll, pitch, yaw}.to_pose();
}

Trajectory loop_trajectory(std::size_t frames, double ax, double ay, double az, double yaw,
                           double tilt) {
  Trajectory traj;
  for (std::size_t k = 0; k < frames; ++k) {
    const double phi = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(frames);
    traj.entries.push_back({static_cast<std::int64_t>(k),
                            pose_of(ax * std::sin(phi), ay * std::sin(2.0 * phi), az * std::sin(phi),
                                    tilt * std::sin(2.0 * phi), 0.75 * tilt * std::sin(3.0 * phi),
                                    yaw * std::sin(phi))});
  }
  return traj;
}

Fixture box_room() {
  Fixture f;
  f.name = "box-room";
  add_room(f.scene, 4.0, 3.0, -1.2, 1.8);
  f.trajectory = loop_trajectory(200, 1.5, 0.8, 0.05, 0.35, 0.02);
  return f;
}

Fixture mirror_room() {
  Fixture f;
  f.name = "mirror-room";
  add_room(f.scene, 3.0, 2.5, -1.2, 1.8);
  f.scene.surfaces.push_back(rect(Material::Mirror, {2.98, 0.0, 0.3}, {0, 1.0, 0}, {0, 0, 0.6}, 0.9));
  f.trajectory = loop_trajectory(50, 0.6, 0.7, 0.03, 0.3, 0.01);
  return f;
}

Fixture glass_corridor() {
  Fixture f;
  f.name = "glass-corridor";
  auto& s = f.scene.surfaces;
  const double len = 45.0, hy = 1.5, z0 = -1.2, z1 = 1.3;
  const double w0 = -0.4, w1 = 0.9;  // window sill and head heights
  s.push_back(rect(Material::Ground, {0, 0, z0}, {len, 0, 0}, {0, hy, 0}, 0.5));
  s.push_back(rect(Material::Diffuse, {0, 0, z1}, {len, 0, 0}, {0, hy, 0}, 0.6));
  s.push_back(rect(Material::Diffuse, {0, -hy, 0.5 * (z0 + z1)}, {len, 0, 0}, {0, 0, 0.5 * (z1 - z0)}, 0.6));
  // Wall y = +hy: strips below and above the windows, piers between them.
  s.push_back(rect(Material::Diffuse, {0, hy, 0.5 * (z0 + w0)}, {len, 0, 0}, {0, 0, 0.5 * (w0 - z0)}, 0.6));
  s.push_back(rect(Material::Diffuse, {0, hy, 0.5 * (w1 + z1)}, {len, 0, 0}, {0, 0, 0.5 * (z1 - w1)}, 0.6));
  const std::vector<std::pair<double, double>> windows{{-5, -3}, {2, 4}, {7, 9}, {12, 14}};
  double x = -len;
  const double wc = 0.5 * (w0 + w1), wh = 0.5 * (w1 - w0);
  for (const auto& [a, b] : windows) {
    s.push_back(rect(Material::Diffuse, {0.5 * (x + a), hy, wc}, {0.5 * (a - x), 0, 0}, {0, 0, wh}, 0.6));
    Surface glass = rect(Material::Glass, {0.5 * (a + b), hy, wc}, {0.5 * (b - a), 0, 0}, {0, 0, wh}, 0.08);
    glass.transmittance = 0.85;
    s.push_back(glass);
    x = b;
  }
  s.push_back(rect(Material::Diffuse, {0.5 * (x + len), hy, wc}, {0.5 * (len - x), 0, 0}, {0, 0, wh}, 0.6));
  // Outdoor obstacles behind two of the windows.
  s.push_back(rect(Material::Diffuse, {3.0, 5.5, 0.4}, {3.0, 0, 0}, {0, 0, 1.6}, 0.6));
  s.push_back(rect(Material::Diffuse, {13.0, 5.5, 0.4}, {3.0, 0, 0}, {0, 0, 1.6}, 0.6));

  for (std::size_t k = 0; k < 30; ++k) {
    const double phi = 2.0 * std::numbers::pi * static_cast<double>(k) / 30.0;
    f.trajectory.entries.push_back({static_cast<std::int64_t>(k),
                                    pose_of(0.2 * static_cast<double>(k), 0.1 * std::sin(phi), 0.0,
                                            0.0, 0.0, 0.05 * std::sin(phi))});
  }
  return f;
}

}  // namespace

const char* to_string(Material m) {
  switch (m) {
    case Material::Diffuse: return "diffuse";
    case Material::Ground: return "ground";
    case Material::Mirror: return "mirror";
    case Material::Glass: return "glass";
  }
  return "diffuse";
}

Plane Surface::plane() const {
  const PlaneKind kind = is_reflective()           ? PlaneKind::Reflective
                         : material == Material::Ground ? PlaneKind::Ground
                                                        : PlaneKind::Ordinary;
  return Plane::through_point(normal(), center, kind);
}

void Surface::validate() const {
  const double lu = u.norm(), lv = v.norm();
  if (!(lu > 0.0) || !(lv > 0.0)) throw Error(ErrorCode::DegenerateInput, "surface extent is zero");
  if (std::abs(u.dot(v)) > 1e-9 * lu * lv) {
    throw Error(ErrorCode::DegenerateInput, "surface extent vectors are not orthogonal");
  }
  auto unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!unit(albedo) || !unit(reflectance) || !unit(transmittance)) {
    throw Error(ErrorCode::DegenerateInput, "material parameters must lie in [0, 1]");
  }
  if (cone_deg && !(*cone_deg >= 0.0 && *cone_deg <= 90.0)) {
    throw Error(ErrorCode::DegenerateInput, "cone must lie in [0, 90] degrees");
  }
}

Vec3 SensorModel::direction(int ring, int bin) const {
  const double e = elevations_deg[static_cast<std::size_t>(ring)] * kDeg;
  const double a = 2.0 * std::numbers::pi * static_cast<double>(bin) / static_cast<double>(n_bins);
  return {std::cos(e) * std::cos(a), std::cos(e) * std::sin(a), std::sin(e)};
}

void SensorModel::validate() const {
  if (elevations_deg.empty()) throw Error(ErrorCode::ConfigError, "sensor has no rings");
  for (std::size_t i = 1; i < elevations_deg.size(); ++i) {
    if (!(elevations_deg[i] > elevations_deg[i - 1])) {
      throw Error(ErrorCode::ConfigError, "ring elevations must be strictly increasing");
    }
  }
  if (n_bins < 8) throw Error(ErrorCode::ConfigError, "sensor needs at least 8 azimuth bins");
  if (!(max_range > 0.0)) throw Error(ErrorCode::ConfigError, "max_range must be positive");
}

SensorModel SensorModel::hesai_qt64() {
  SensorModel s;
  constexpr int rings = 64;
  for (int i = 0; i < rings; ++i) s.elevations_deg.push_back(-52.1 + 104.2 * i / (rings - 1));
  return s;
}

std::vector<Candidate> trace_beam(const Point3& origin, const Vec3& direction, const Scene& scene,
                                  double max_range, const SimConfig& cfg) {
  std::vector<Candidate> out;
  const auto hit = nearest_hit(scene, origin, direction, false);
  if (!hit || hit->t > max_range) return out;
  const Surface& s = scene.surfaces[hit->surface];
  if (s.is_diffuse()) {
    out.push_back({hit->t, diffuse_intensity(s, hit->t, hit->cos_incidence, cfg), TruthLabel::Normal,
                   hit->surface, std::nullopt});
    return out;
  }

  const double theta = std::acos(std::clamp(hit->cos_incidence, 0.0, 1.0));
  if (theta <= s.cone_deg.value_or(cfg.cone_deg) * kDeg) {
    const double q = theta / (cfg.surface_falloff_deg * kDeg);
    out.push_back({hit->t, std::exp(-q * q),
                   s.material == Material::Glass ? TruthLabel::Glass : TruthLabel::Mirror, hit->surface,
                   std::nullopt});
  }
  const Vec3 n = s.normal();
  const Vec3 reflected = direction - 2.0 * direction.dot(n) * n;
  if (const auto h2 = nearest_hit(scene, hit->point, reflected, true)) {
    const double range = hit->t + h2->t;
    if (range <= max_range) {
      const double i = s.reflectance *
                       diffuse_intensity(scene.surfaces[h2->surface], range, h2->cos_incidence, cfg);
      out.push_back({range, i, TruthLabel::Reflection, h2->surface, hit->surface});
    }
  }
  if (s.material == Material::Glass && s.transmittance > 0.0) {
    if (const auto h3 = nearest_hit(scene, hit->point, direction, true)) {
      const double range = hit->t + h3->t;
      if (range <= max_range) {
        const double i = s.transmittance * s.transmittance *
                         diffuse_intensity(scene.surfaces[h3->surface], range, h3->cos_incidence, cfg);
        out.push_back({range, i, TruthLabel::Obstacle, h3->surface, hit->surface});
      }
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Candidate& a, const Candidate& b) { return a.range < b.range; });
  return out;
}

DualSelection select_dual_returns(std::vector<Candidate> candidates, ReturnMode mode, double i_min) {
  std::erase_if(candidates, [&](const Candidate& c) { return c.intensity < i_min; });
  DualSelection sel;
  if (candidates.empty()) return sel;
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.range < b.range; });
  sel.last = candidates.back();
  if (mode == ReturnMode::FirstLast) {
    sel.strongest = candidates.front();
  } else {
    // Sorted by range, so the first maximum is the nearer one on ties.
    sel.strongest = *std::max_element(candidates.begin(), candidates.end(),
                                      [](const Candidate& a, const Candidate& b) {
                                        return a.intensity < b.intensity;
                                      });
  }
  return sel;
}

RenderedScan render_scan(const Scene& scene, const SensorModel& sensor, const Pose& pose,
                         std::uint64_t rng_seed, const SimConfig& cfg) {
  sensor.validate();
  const int rings = sensor.n_rings();
  RenderedScan out;
  out.cloud = OrganizedCloud(rings, sensor.n_bins);
  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  struct Meta {
    TruthLabel label;
    std::size_t surface;
    std::optional<std::size_t> via;
  };
  const std::size_t cells = static_cast<std::size_t>(rings) * static_cast<std::size_t>(sensor.n_bins);
  std::vector<std::optional<Meta>> meta_s(cells), meta_l(cells);

  for (int r = 0; r < rings; ++r) {
    for (int b = 0; b < sensor.n_bins; ++b) {
      const Vec3 d_sensor = sensor.direction(r, b);
      auto cands = trace_beam(pose.translation(), pose.rotate(d_sensor), scene, sensor.max_range, cfg);
      if (cands.empty()) continue;
      if (cfg.noise_sigma > 0.0) {
        for (auto& c : cands) c.range = std::max(kMinT, c.range + cfg.noise_sigma * noise(rng));
      }
      const auto sel = select_dual_returns(std::move(cands), sensor.mode, cfg.i_min);
      const std::size_t idx = static_cast<std::size_t>(r) * static_cast<std::size_t>(sensor.n_bins) +
                              static_cast<std::size_t>(b);
      auto place = [&](Layer layer, const Candidate& c, std::optional<Meta>& meta) {
        out.cloud.set(layer, Return::make(c.range * d_sensor, c.intensity, r, b));
        meta = Meta{c.label, c.surface, c.via};
      };
      if (sel.strongest) place(Layer::Strongest, *sel.strongest, meta_s[idx]);
      if (sel.last) place(Layer::Last, *sel.last, meta_l[idx]);
    }
  }

  for (const auto& ref : out.cloud.flatten()) {
    const std::size_t idx = static_cast<std::size_t>(ref.ring) * static_cast<std::size_t>(sensor.n_bins) +
                            static_cast<std::size_t>(ref.bin);
    const auto& m = ref.layer == Layer::Strongest ? meta_s[idx] : meta_l[idx];
    out.labels.labels.push_back(static_cast<int>(m->label));
    out.surface.push_back(m->surface);
    out.via.push_back(m->via);
  }
  return out;
}

GlobalPlaneMap ground_truth_map(const Scene& scene) {
  GlobalPlaneMap map;
  for (const auto& s : scene.surfaces) {
    MapPlane mp;
    mp.plane = s.plane();
    const std::array<Point3, 4> corners{s.center + s.u + s.v, s.center - s.u + s.v,
                                        s.center - s.u - s.v, s.center + s.u - s.v};
    mp.hull = BoundaryHull::from_points(mp.plane, corners);
    mp.observations = 1;
    map.planes.push_back(std::move(mp));
  }
  return map;
}

std::vector<std::string> fixture_names() { return {"box-room", "mirror-room", "glass-corridor"}; }

Fixture make_fixture(const std::string& name) {
  if (name == "box-room") return box_room();
  if (name == "mirror-room") return mirror_room();
  if (name == "glass-corridor") return glass_corridor();
  throw Error(ErrorCode::ConfigError, "unknown fixture '" + name + "'");
}

std::string frame_file_stem(std::int64_t frame_id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06lld", static_cast<long long>(frame_id));
  return buf;
}

void render_sequence(const Scene& scene, const SensorModel& sensor, const Trajectory& trajectory,
                     const SimConfig& cfg, std::uint64_t rng_seed,
                     const std::filesystem::path& out_dir) {
  for (const auto& s : scene.surfaces) s.validate();
  for (const auto& e : trajectory.entries) {
    auto scan = render_scan(scene, sensor, e.pose, rng_seed + static_cast<std::uint64_t>(e.frame_id), cfg);
    scan.labels.frame_id = e.frame_id;
    const std::string stem = frame_file_stem(e.frame_id);
    save_dual_scan(out_dir / "scans" / (stem + ".drs"), scan.cloud);
    save_labels(out_dir / "labels" / (stem + ".lbl"), scan.labels);
  }
  save_trajectory(out_dir / "trajectory.tum", trajectory);
  save_gpm(out_dir / "ground_truth.gpm", ground_truth_map(scene));
  save_scene(out_dir / "scene.scn", scene);
}

Scene parse_scene(const std::string& content) {
  Scene scene;
  const auto lines = text::split_lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t ln = i + 1;
    std::string_view line = lines[i];
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto f = text::split_ws(line);
    if (f.empty()) continue;
    if (f.size() < 10) throw Error(ErrorCode::ParseError, "line " + std::to_string(ln) + ": too few fields");
    Surface s;
    s.material = material_from_string(f[0], ln);
    auto num = [&](std::size_t k) { return text::parse_double(f[k], ln); };
    s.center = {num(1), num(2), num(3)};
    s.u = {num(4), num(5), num(6)};
    s.v = {num(7), num(8), num(9)};
    const std::size_t extra = f.size() - 10;
    auto bad_params = [&]() {
      return Error(ErrorCode::ParseError, "line " + std::to_string(ln) + ": wrong parameter count for " +
                                              std::string(f[0]));
    };
    switch (s.material) {
      case Material::Diffuse:
      case Material::Ground:
        if (extra != 1) throw bad_params();
        s.albedo = num(10);
        break;
      case Material::Mirror:
        if (extra < 1 || extra > 2) throw bad_params();
        s.reflectance = num(10);
        if (extra == 2) s.cone_deg = num(11);
        break;
      case Material::Glass:
        if (extra < 2 || extra > 3) throw bad_params();
        s.reflectance = num(10);
        s.transmittance = num(11);
        if (extra == 3) s.cone_deg = num(12);
        break;
    }
    try {
      s.validate();
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(ln) + ": " + e.what());
    }
    scene.surfaces.push_back(s);
  }
  return scene;
}

std::string format_scene(const Scene& scene) {
  using text::format_double;
  std::string out;
  for (const auto& s : scene.surfaces) {
    out += to_string(s.material);
    for (const Vec3* v : {&s.center, &s.u, &s.v}) {
      for (int k = 0; k < 3; ++k) out += " " + format_double((*v)[k]);
    }
    switch (s.material) {
      case Material::Diffuse:
      case Material::Ground: out += " " + format_double(s.albedo); break;
      case Material::Mirror: out += " " + format_double(s.reflectance); break;
      case Material::Glass:
        out += " " + format_double(s.reflectance) + " " + format_double(s.transmittance);
        break;
    }
    if (s.cone_deg && s.is_reflective()) out += " " + format_double(*s.cone_deg);
    out += "\n";
  }
  return out;
}

Scene load_scene(const std::filesystem::path& path) { return parse_scene(text::read_file(path)); }

void save_scene(const std::filesystem::path& path, const Scene& scene) {
  text::write_file(path, format_scene(scene));
}

}  // namespace refmap::sim
