#include "refmap/plane_map.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "refmap/errors.hpp"
#include "refmap/text_io.hpp"

namespace refmap {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

MapPlane to_map_plane(const DetectedPlane& p, std::size_t frame) {
  MapPlane m;
  m.plane = p.plane;
  m.hull = p.hull;
  m.observations = 1;
  m.first_seen = frame;
  m.last_seen = frame;
  return m;
}

bool same_plane(const Plane& a, const Plane& b, const MapConfig& cfg) {
  return a.kind() == b.kind() && a.normal().dot(b.normal()) >= std::cos(cfg.merge_angle_deg * kDeg) &&
         std::abs(a.d() - b.d()) <= cfg.merge_d_gap;
}

// Merges duplicate coplanar overlapping planes until none remain.
void consolidate(GlobalPlaneMap& map, const MapConfig& cfg) {
  bool merged = true;
  while (merged) {
    merged = false;
    for (std::size_t i = 0; i < map.planes.size() && !merged; ++i) {
      for (std::size_t j = i + 1; j < map.planes.size() && !merged; ++j) {
        const auto& a = map.planes[i];
        const auto& b = map.planes[j];
        if (!same_plane(a.plane, b.plane, cfg)) continue;
        if (hull_overlap_ratio(a.hull, b.hull) < cfg.min_overlap) continue;
        map.planes[i] = a.observations >= b.observations ? fuse_planes(a, b) : fuse_planes(b, a);
        map.planes.erase(map.planes.begin() + static_cast<std::ptrdiff_t>(j));
        merged = true;
      }
    }
  }
}

}  // namespace

std::size_t GlobalPlaneMap::count(PlaneKind kind) const {
  return static_cast<std::size_t>(std::count_if(planes.begin(), planes.end(),
                                                [&](const MapPlane& p) { return p.kind() == kind; }));
}

std::vector<PlaneMatch> match_to_map(std::span<const DetectedPlane> local, const GlobalPlaneMap& map,
                                     const MapConfig& cfg) {
  std::vector<PlaneMatch> candidates;
  for (std::size_t i = 0; i < local.size(); ++i) {
    const auto& l = local[i];
    const Point3 lc = l.hull.centroid();
    for (std::size_t j = 0; j < map.planes.size(); ++j) {
      const auto& m = map.planes[j];
      if (l.plane.kind() != m.kind()) continue;
      PlaneMatch pm;
      pm.source_idx = i;
      pm.target_idx = j;
      pm.cos_angle = l.plane.normal().dot(m.plane.normal());
      pm.d_gap = std::abs(l.plane.d() - m.plane.d());
      pm.centroid_gap = (lc - m.hull.centroid()).norm();
      if (pm.cos_angle < cfg.match.min_cos || pm.d_gap > cfg.match.max_d_gap ||
          pm.centroid_gap > cfg.match.max_centroid_gap) {
        continue;
      }
      const double overlap = hull_overlap_ratio(m.hull, l.hull);
      if (overlap < cfg.min_overlap) continue;
      const double lo = std::min(l.area, m.hull.area());
      pm.area_ratio = lo > 0.0 ? std::max(l.area, m.hull.area()) / lo : 1.0;
      candidates.push_back(pm);
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const PlaneMatch& a, const PlaneMatch& b) {
    if (a.cos_angle != b.cos_angle) return a.cos_angle > b.cos_angle;
    return a.d_gap < b.d_gap;
  });
  std::vector<bool> used_l(local.size(), false), used_m(map.planes.size(), false);
  std::vector<PlaneMatch> out;
  for (const auto& c : candidates) {
    if (used_l[c.source_idx] || used_m[c.target_idx]) continue;
    used_l[c.source_idx] = used_m[c.target_idx] = true;
    out.push_back(c);
  }
  std::sort(out.begin(), out.end(),
            [](const PlaneMatch& a, const PlaneMatch& b) { return a.source_idx < b.source_idx; });
  return out;
}

ScanToMapResult scan_to_map_optimize(std::span<const DetectedPlane> local, const GlobalPlaneMap& map,
                                     const Pose& initial_pose, const MapConfig& cfg,
                                     std::uint64_t rng_seed) {
  ScanToMapResult result;
  result.registration.pose = initial_pose;
  std::vector<DetectedPlane> world;
  world.reserve(local.size());
  for (const auto& p : local) world.push_back(transform_detected_plane(p, initial_pose));
  const auto matches = match_to_map(world, map, cfg);
  if (matches.size() < 3) {
    result.failure = "fewer than three map matches";
    return result;
  }
  std::vector<Vec3> normals;
  for (const auto& m : matches) normals.push_back(map.planes[m.target_idx].plane.normal());
  if (normal_span_ratio(normals) < cfg.registration.rank_tolerance) {
    result.failure = to_string(ErrorCode::RankDeficient);
    return result;
  }
  std::vector<Plane> sp, tp;
  for (const auto& p : world) sp.push_back(p.plane);
  for (const auto& p : map.planes) tp.push_back(p.plane);
  try {
    const auto filtered = ransac_match_filter(matches, sp, tp, cfg.registration, rng_seed);
    auto reg = gauss_newton_refine(filtered.inliers, sp, tp, filtered.pose, cfg.registration);
    reg.pose = reg.pose * initial_pose;
    result.registration = std::move(reg);
    result.refined = true;
  } catch (const Error& e) {
    result.failure = e.what();
  }
  return result;
}

MapPlane fuse_planes(const MapPlane& a, const MapPlane& b) {
  const double ka = static_cast<double>(a.observations);
  const double kb = static_cast<double>(b.observations);
  Vec3 nb = b.plane.normal();
  double db = b.plane.d();
  if (a.plane.normal().dot(nb) < 0.0) {
    nb = -nb;
    db = -db;
  }
  const Vec3 n = (ka * a.plane.normal() + kb * nb).normalized();
  const double d = (ka * a.plane.d() + kb * db) / (ka + kb);
  MapPlane out;
  out.plane = Plane::from_normal_offset(n, d, a.kind());
  out.hull = merge_hulls(a.hull, b.hull, out.plane);
  out.observations = a.observations + b.observations;
  out.first_seen = std::min(a.first_seen, b.first_seen);
  out.last_seen = std::max(a.last_seen, b.last_seen);
  return out;
}

GlobalPlaneMap update_map(GlobalPlaneMap map, std::span<const DetectedPlane> local,
                          std::span<const PlaneMatch> matches, const MapConfig& cfg) {
  const std::size_t frame = map.frame_count;
  std::vector<bool> matched(local.size(), false);
  for (const auto& m : matches) {
    if (m.source_idx >= local.size() || m.target_idx >= map.planes.size()) {
      throw Error(ErrorCode::ShapeError, "match index out of range");
    }
    if (matched[m.source_idx]) continue;
    matched[m.source_idx] = true;
    auto& target = map.planes[m.target_idx];
    target = fuse_planes(target, to_map_plane(local[m.source_idx], frame));
  }
  for (std::size_t i = 0; i < local.size(); ++i) {
    if (!matched[i]) map.planes.push_back(to_map_plane(local[i], frame));
  }
  consolidate(map, cfg);
  ++map.frame_count;
  return map;
}

GlobalPlaneMap prune_map(GlobalPlaneMap map, const MapConfig& cfg) {
  std::erase_if(map.planes, [&](const MapPlane& p) {
    return map.frame_count - p.first_seen >= cfg.probation_frames &&
           p.observations < cfg.min_observations;
  });
  return map;
}

// ---------------------------------------------------------------------------
// .gpm

std::string format_gpm(const GlobalPlaneMap& map) {
  using text::format_double;
  std::string out = "GPM1 " + std::to_string(map.planes.size()) + "\n";
  auto vec3 = [&](const Vec3& v) {
    return format_double(v.x()) + " " + format_double(v.y()) + " " + format_double(v.z());
  };
  for (const auto& p : map.planes) {
    out += std::string(to_string(p.kind())) + " " + vec3(p.plane.normal()) + " " +
           format_double(p.plane.d()) + " " + std::to_string(p.observations) + " " +
           std::to_string(p.hull.vertices().size()) + "\n";
    for (const auto& v : p.hull.vertices()) out += format_double(v.x()) + " " + format_double(v.y()) + "\n";
    out += vec3(p.hull.basis_u()) + "\n";
    out += vec3(p.hull.basis_v()) + "\n";
  }
  return out;
}

GlobalPlaneMap parse_gpm(const std::string& content) {
  const auto lines = text::split_lines(content);
  std::size_t li = 0;
  auto next = [&](std::size_t expect) {
    while (li < lines.size() && text::split_ws(lines[li]).empty()) ++li;
    if (li >= lines.size()) throw Error(ErrorCode::ParseError, "unexpected end of map file");
    auto f = text::split_ws(lines[li]);
    ++li;
    if (f.size() != expect) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(li) + ": expected " +
                                             std::to_string(expect) + " fields");
    }
    return f;
  };
  const auto header = next(2);
  if (header[0] != "GPM1") throw Error(ErrorCode::ParseError, "line 1: expected 'GPM1 n_planes'");
  const auto n = text::parse_int(header[1], 1);
  if (n < 0) throw Error(ErrorCode::ParseError, "line 1: negative plane count");
  GlobalPlaneMap map;
  for (long long k = 0; k < n; ++k) {
    const auto f = next(7);
    const std::size_t ln = li;
    PlaneKind kind;
    try {
      kind = plane_kind_from_string(std::string(f[0]));
    } catch (const Error&) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(ln) + ": unknown plane kind");
    }
    const Vec3 normal(text::parse_double(f[1], ln), text::parse_double(f[2], ln),
                      text::parse_double(f[3], ln));
    const double d = text::parse_double(f[4], ln);
    const auto obs = text::parse_int(f[5], ln);
    const auto nv = text::parse_int(f[6], ln);
    if (obs < 1 || nv < 0) throw Error(ErrorCode::ParseError, "line " + std::to_string(ln) + ": bad counts");
    std::vector<Vec2> verts;
    for (long long v = 0; v < nv; ++v) {
      const auto vf = next(2);
      verts.emplace_back(text::parse_double(vf[0], li), text::parse_double(vf[1], li));
    }
    auto read_vec = [&]() {
      const auto bf = next(3);
      return Vec3(text::parse_double(bf[0], li), text::parse_double(bf[1], li),
                  text::parse_double(bf[2], li));
    };
    const Vec3 u = read_vec();
    const Vec3 v = read_vec();
    MapPlane mp;
    mp.plane = Plane::from_normal_offset(normal, d, kind);
    mp.hull = BoundaryHull(mp.plane, u, v, std::move(verts));
    mp.observations = static_cast<std::size_t>(obs);
    map.planes.push_back(std::move(mp));
  }
  return map;
}

void save_gpm(const std::filesystem::path& path, const GlobalPlaneMap& map) {
  text::write_file(path, format_gpm(map));
}

GlobalPlaneMap load_gpm(const std::filesystem::path& path) { return parse_gpm(text::read_file(path)); }

}  // namespace refmap
