#include "refmap/classify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "refmap/errors.hpp"
#include "refmap/kdtree.hpp"
#include "refmap/text_io.hpp"

namespace refmap {

namespace {

struct SensorPlane {
  std::size_t map_index;
  Plane plane;
  BoundaryHull hull;
};

std::vector<SensorPlane> reflective_in_sensor_frame(const GlobalPlaneMap& map, const Pose& pose) {
  const Pose inv = pose.inverse();
  std::vector<SensorPlane> out;
  for (std::size_t i = 0; i < map.planes.size(); ++i) {
    const auto& mp = map.planes[i];
    if (mp.kind() != PlaneKind::Reflective) continue;
    const auto hull = transform_hull(mp.hull, inv);
    out.push_back({i, hull.plane(), hull});
  }
  return out;
}

const SensorPlane* find_plane(const std::vector<SensorPlane>& planes, std::size_t map_index) {
  for (const auto& p : planes)
    if (p.map_index == map_index) return &p;
  return nullptr;
}

// Maps sensor-frame directions to (ring, bin) cells using the scan's own
// ring elevations; bin b covers azimuth 2 pi b / n_bins.
class CellIndexer {
 public:
  explicit CellIndexer(const OrganizedCloud& cloud) : n_bins_(cloud.n_bins()) {
    const auto elev = ring_elevations(cloud);
    for (std::size_t r = 0; r < elev.size(); ++r) {
      if (std::isfinite(elev[r])) rings_.push_back({elev[r], static_cast<int>(r)});
    }
    std::sort(rings_.begin(), rings_.end());
    std::vector<double> gaps;
    for (std::size_t i = 1; i < rings_.size(); ++i) gaps.push_back(rings_[i].first - rings_[i - 1].first);
    if (!gaps.empty()) {
      std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2), gaps.end());
      tolerance_ = 0.6 * gaps[gaps.size() / 2];
    }
  }

  static constexpr unsigned kBelow = 1, kAbove = 2, kLeft = 4, kRight = 8;

  struct Cell {
    int ring;
    int bin;
    unsigned side = 0;
  };

  /// Rings whose elevations bracket the direction of `p` (one ring at the
  /// edges of the field of view, within tolerance), plus the azimuth bin.
  /// `side` records where `p` lies relative to each cell center.
  std::vector<Cell> bracketing(const Point3& p) const {
    std::vector<Cell> out;
    if (rings_.empty()) return out;
    const double e = std::atan2(p.z(), std::hypot(p.x(), p.y()));
    double az = std::atan2(p.y(), p.x());
    if (az < 0.0) az += 2.0 * std::numbers::pi;
    const double step = 2.0 * std::numbers::pi / static_cast<double>(n_bins_);
    const double fbin = az / step;
    const int bin = static_cast<int>(std::lround(fbin)) % n_bins_;
    const double off = fbin - std::round(fbin);
    const unsigned az_side = off < 0.0 ? kLeft : off > 0.0 ? kRight : (kLeft | kRight);
    auto add = [&](const std::pair<double, int>& ring) {
      const unsigned el_side = e < ring.first ? kBelow : e > ring.first ? kAbove : (kBelow | kAbove);
      out.push_back({ring.second, bin, az_side | el_side});
    };
    auto it = std::lower_bound(rings_.begin(), rings_.end(), std::make_pair(e, -1));
    if (it == rings_.begin()) {
      if (rings_.front().first - e <= tolerance_) add(rings_.front());
    } else if (it == rings_.end()) {
      if (e - rings_.back().first <= tolerance_) add(rings_.back());
    } else {
      add(*(it - 1));
      add(*it);
    }
    return out;
  }

 private:
  int n_bins_;
  std::vector<std::pair<double, int>> rings_;
  double tolerance_ = std::numeric_limits<double>::infinity();
};

std::size_t cell_index(const OrganizedCloud& cloud, int ring, int bin) {
  return static_cast<std::size_t>(ring) * static_cast<std::size_t>(cloud.n_bins()) +
         static_cast<std::size_t>(bin);
}

int wrap_bin(int bin, int n) { return ((bin % n) + n) % n; }

}  // namespace

const char* to_string(PointLabel label) {
  switch (label) {
    case PointLabel::Normal: return "Normal";
    case PointLabel::Surface: return "Surface";
    case PointLabel::Reflection: return "Reflection";
    case PointLabel::Obstacle: return "Obstacle";
    case PointLabel::Unclassified: return "Unclassified";
  }
  return "Unclassified";
}

std::vector<PartitionEntry> partition_by_planes(const OrganizedCloud& cloud, const Pose& pose,
                                                const GlobalPlaneMap& map, const ClassifyConfig& cfg) {
  const auto planes = reflective_in_sensor_frame(map, pose);
  const auto refs = cloud.flatten();
  std::vector<PartitionEntry> out(refs.size());
  const Point3 origin = Point3::Zero();
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const Return& r = *cloud.at(refs[i]);
    if (!(r.range > 0.0) || planes.empty()) continue;
    const Vec3 dir = r.point / r.range;
    std::optional<RayHit> best;
    std::size_t best_plane = 0;
    for (const auto& sp : planes) {
      const auto hit = ray_plane_intersection(origin, dir, sp.plane);
      if (!hit || !point_in_hull(sp.hull, project_to_hull_frame(sp.hull, hit->point))) continue;
      if (!best || hit->t < best->t) {
        best = hit;
        best_plane = sp.map_index;
      }
    }
    if (!best) continue;
    auto& e = out[i];
    e.plane = best_plane;
    e.hit_range = best->t;
    const double diff = r.range - best->t;
    e.side = diff < -cfg.surface_band ? Side::Front : diff <= cfg.surface_band ? Side::OnPlane : Side::Behind;
  }
  return out;
}

std::vector<PointLabel> initial_labels(std::span<const PartitionEntry> partition) {
  std::vector<PointLabel> labels;
  labels.reserve(partition.size());
  for (const auto& e : partition) {
    switch (e.side) {
      case Side::Front:
      case Side::NoIntersect: labels.push_back(PointLabel::Normal); break;
      case Side::OnPlane: labels.push_back(PointLabel::Surface); break;
      case Side::Behind: labels.push_back(PointLabel::Unclassified); break;
    }
  }
  return labels;
}

void resolve_behind(const OrganizedCloud& cloud, const Pose& pose, const GlobalPlaneMap& map,
                    std::span<const PartitionEntry> partition, std::vector<PointLabel>& labels,
                    const ClassifyConfig& cfg, std::vector<std::uint8_t>* decided_by) {
  const auto refs = cloud.flatten();
  if (decided_by) decided_by->assign(refs.size(), 0);
  auto decide = [&](std::size_t i, PointLabel label, std::uint8_t step) {
    labels[i] = label;
    if (decided_by) (*decided_by)[i] = step;
  };
  if (partition.size() != refs.size() || labels.size() != refs.size()) {
    throw Error(ErrorCode::ShapeError, "partition and labels must follow the cloud's flatten order");
  }
  std::vector<std::size_t> behind;
  for (std::size_t i = 0; i < refs.size(); ++i)
    if (partition[i].side == Side::Behind && labels[i] == PointLabel::Unclassified) behind.push_back(i);
  if (behind.empty()) return;

  const auto planes = reflective_in_sensor_frame(map, pose);
  const CellIndexer indexer(cloud);
  const int n_bins = cloud.n_bins();
  const std::size_t cells = static_cast<std::size_t>(cloud.n_rings()) * static_cast<std::size_t>(n_bins);
  const double band = cfg.surface_band;
  auto ret = [&](std::size_t i) -> const Return& { return *cloud.at(refs[i]); };

  std::vector<std::size_t> normal_idx;
  std::vector<Point3> normal_pts;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (labels[i] == PointLabel::Normal) {
      normal_idx.push_back(i);
      normal_pts.push_back(ret(i).point);
    }
  }

  // Step 1: Behind points farther than every mirrored Normal point in their
  // angular cell come from beyond the surface.
  std::vector<std::size_t> plane_ids;
  for (auto i : behind) plane_ids.push_back(*partition[i].plane);
  std::sort(plane_ids.begin(), plane_ids.end());
  plane_ids.erase(std::unique(plane_ids.begin(), plane_ids.end()), plane_ids.end());
  for (auto pid : plane_ids) {
    const SensorPlane* sp = find_plane(planes, pid);
    if (!sp) continue;
    std::vector<double> max_mirrored(cells, -1.0);
    std::vector<unsigned> sides(cells, 0);
    for (const auto& p : normal_pts) {
      if (sp->plane.signed_distance(p) <= 0.0) continue;
      const Point3 m = mirror_point(p, sp->plane);
      for (const auto& c : indexer.bracketing(m)) {
        const auto ci = cell_index(cloud, c.ring, c.bin);
        max_mirrored[ci] = std::max(max_mirrored[ci], m.norm());
        sides[ci] |= c.side;
      }
    }
    // The mirrored samples must surround the beam, otherwise a sparse
    // one-sided window understates the mirrored range.
    constexpr unsigned kAll = CellIndexer::kBelow | CellIndexer::kAbove | CellIndexer::kLeft | CellIndexer::kRight;
    for (auto i : behind) {
      if (*partition[i].plane != pid) continue;
      double mx = -1.0;
      unsigned covered = 0;
      for (int db = -cfg.bin_window; db <= cfg.bin_window; ++db) {
        const auto ci = cell_index(cloud, refs[i].ring, wrap_bin(refs[i].bin + db, n_bins));
        if (max_mirrored[ci] < 0.0) continue;
        mx = std::max(mx, max_mirrored[ci]);
        unsigned s = sides[ci];
        if (db < 0) s = (s & ~CellIndexer::kRight) | CellIndexer::kLeft;
        if (db > 0) s = (s & ~CellIndexer::kLeft) | CellIndexer::kRight;
        covered |= s;
      }
      if (covered == kAll && ret(i).range > mx + band) decide(i, PointLabel::Obstacle, 1);
    }
  }

  // Step 2: a mirrored position the sensor demonstrably saw past is invalid.
  for (auto i : behind) {
    if (labels[i] != PointLabel::Unclassified) continue;
    const SensorPlane* sp = find_plane(planes, *partition[i].plane);
    if (!sp) continue;
    const Point3 m = mirror_point(ret(i).point, sp->plane);
    double nearest = std::numeric_limits<double>::infinity();
    bool any = false;
    for (const auto& c : indexer.bracketing(m)) {
      for (int db = -cfg.bin_window; db <= cfg.bin_window; ++db) {
        for (Layer layer : {Layer::Strongest, Layer::Last}) {
          const auto& r = cloud.at(layer, c.ring, wrap_bin(c.bin + db, n_bins));
          if (!r) continue;
          any = true;
          nearest = std::min(nearest, r->range);
        }
      }
    }
    if (any && nearest > m.norm() + band) decide(i, PointLabel::Obstacle, 2);
  }

  // Step 3: anything beyond a known obstacle along the same beam direction
  // cannot be a direct return.
  std::vector<double> nearest_obstacle(cells, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (labels[i] != PointLabel::Obstacle) continue;
    auto& slot = nearest_obstacle[cell_index(cloud, refs[i].ring, refs[i].bin)];
    slot = std::min(slot, ret(i).range);
  }
  for (auto i : behind) {
    if (labels[i] != PointLabel::Unclassified) continue;
    double ob = std::numeric_limits<double>::infinity();
    for (int db = -cfg.bin_window; db <= cfg.bin_window; ++db) {
      ob = std::min(ob, nearest_obstacle[cell_index(cloud, refs[i].ring, wrap_bin(refs[i].bin + db, n_bins))]);
    }
    if (ret(i).range > ob + band) decide(i, PointLabel::Reflection, 3);
  }

  // Step 4: a mirrored position next to real interior points is a reflection.
  if (normal_pts.empty()) return;
  const KdTree tree(normal_pts);
  for (auto i : behind) {
    if (labels[i] != PointLabel::Unclassified) continue;
    const SensorPlane* sp = find_plane(planes, *partition[i].plane);
    if (!sp) continue;
    const Point3 m = mirror_point(ret(i).point, sp->plane);
    if (tree.any_within(m, cfg.neighbor_radius)) {
      decide(i, PointLabel::Reflection, 4);
    } else if (decided_by) {
      (*decided_by)[i] = 4;
    }
  }
}

LabeledCloud classify_cloud(const OrganizedCloud& cloud, const Pose& pose, const GlobalPlaneMap& map,
                            const ClassifyConfig& cfg) {
  LabeledCloud out;
  out.cloud = cloud;
  out.pose = pose;
  out.refs = cloud.flatten();
  const auto partition = partition_by_planes(cloud, pose, map, cfg);
  out.labels = initial_labels(partition);
  resolve_behind(cloud, pose, map, partition, out.labels, cfg);
  out.plane.reserve(partition.size());
  for (const auto& e : partition) out.plane.push_back(e.plane);
  return out;
}

std::vector<Point3> mirror_back(const LabeledCloud& labeled, const GlobalPlaneMap& map) {
  std::vector<Point3> out;
  for (std::size_t i = 0; i < labeled.refs.size(); ++i) {
    if (labeled.labels[i] != PointLabel::Reflection || !labeled.plane[i]) continue;
    const Point3 world = labeled.pose.apply(labeled.cloud.at(labeled.refs[i])->point);
    out.push_back(mirror_point(world, map.planes.at(*labeled.plane[i]).plane));
  }
  return out;
}

OrganizedCloud filtered_cloud(const LabeledCloud& labeled, OutputMode mode) {
  OrganizedCloud out = labeled.cloud;
  for (std::size_t i = 0; i < labeled.refs.size(); ++i) {
    const auto l = labeled.labels[i];
    const bool drop = l == PointLabel::Reflection || l == PointLabel::Unclassified ||
                      (mode == OutputMode::Indoor && l == PointLabel::Obstacle);
    if (drop) out.clear(labeled.refs[i].layer, labeled.refs[i].ring, labeled.refs[i].bin);
  }
  return out;
}

std::string format_labeled(const LabeledCloud& labeled) {
  using text::format_double;
  std::string out = "LBC1 " + std::to_string(labeled.frame_id) + " " + std::to_string(labeled.refs.size()) + "\n";
  for (std::size_t i = 0; i < labeled.refs.size(); ++i) {
    const auto& ref = labeled.refs[i];
    const Point3 w = labeled.pose.apply(labeled.cloud.at(ref)->point);
    out += std::to_string(ref.ring) + " " + std::to_string(ref.bin) + " " + layer_code(ref.layer) + " " +
           format_double(w.x()) + " " + format_double(w.y()) + " " + format_double(w.z()) + " " +
           std::to_string(static_cast<int>(labeled.labels[i])) + "\n";
  }
  return out;
}

void save_labeled(const std::filesystem::path& path, const LabeledCloud& labeled) {
  text::write_file(path, format_labeled(labeled));
}

LabeledFile parse_labeled(const std::string& content) {
  const auto lines = text::split_lines(content);
  if (lines.empty()) throw Error(ErrorCode::ParseError, "empty labeled cloud file");
  const auto header = text::split_ws(lines[0]);
  if (header.size() != 3 || header[0] != "LBC1") {
    throw Error(ErrorCode::ParseError, "line 1: expected 'LBC1 frame_id n'");
  }
  LabeledFile file;
  file.frame_id = text::parse_int(header[1], 1);
  const auto n = text::parse_int(header[2], 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t ln = i + 1;
    const auto f = text::split_ws(lines[i]);
    if (f.empty()) continue;
    if (f.size() != 7) throw Error(ErrorCode::ParseError, "line " + std::to_string(ln) + ": expected 7 fields");
    LabeledRecord rec;
    rec.ring = static_cast<int>(text::parse_int(f[0], ln));
    rec.bin = static_cast<int>(text::parse_int(f[1], ln));
    if (f[2] == "S") {
      rec.layer = Layer::Strongest;
    } else if (f[2] == "L") {
      rec.layer = Layer::Last;
    } else {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(ln) + ": layer must be S or L");
    }
    rec.point = {text::parse_double(f[3], ln), text::parse_double(f[4], ln), text::parse_double(f[5], ln)};
    const auto label = text::parse_int(f[6], ln);
    if (label < 0 || label > 4) throw Error(ErrorCode::ParseError, "line " + std::to_string(ln) + ": label out of range");
    rec.label = static_cast<PointLabel>(label);
    file.records.push_back(rec);
  }
  if (static_cast<long long>(file.records.size()) != n) {
    throw Error(ErrorCode::ParseError, "record count does not match header");
  }
  return file;
}

LabeledFile load_labeled(const std::filesystem::path& path) { return parse_labeled(text::read_file(path)); }

}  // namespace refmap
