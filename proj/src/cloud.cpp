#include "refmap/cloud.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "refmap/errors.hpp"
#include "refmap/text_io.hpp"

namespace refmap {

char layer_code(Layer layer) { return layer == Layer::Strongest ? 'S' : 'L'; }

Return Return::make(const Point3& point, double intensity, int ring, int bin) {
  return Return{point, point.norm(), intensity, ring, bin};
}

bool operator==(const Return& a, const Return& b) {
  return a.point == b.point && a.range == b.range && a.intensity == b.intensity &&
         a.ring == b.ring && a.bin == b.bin;
}

OrganizedCloud::OrganizedCloud(int n_rings, int n_bins) : n_rings_(n_rings), n_bins_(n_bins) {
  if (n_rings <= 0 || n_bins <= 0) {
    throw Error(ErrorCode::ShapeError, "cloud dimensions must be positive");
  }
  strongest_.resize(static_cast<std::size_t>(n_rings) * static_cast<std::size_t>(n_bins));
  last_.resize(strongest_.size());
}

void OrganizedCloud::check(int ring, int bin) const {
  if (ring < 0 || ring >= n_rings_ || bin < 0 || bin >= n_bins_) {
    throw Error(ErrorCode::ShapeError, "cell (" + std::to_string(ring) + ", " +
                                           std::to_string(bin) + ") outside " +
                                           std::to_string(n_rings_) + "x" + std::to_string(n_bins_));
  }
}

const std::optional<Return>& OrganizedCloud::at(Layer layer, int ring, int bin) const {
  check(ring, bin);
  return grid(layer)[index(ring, bin)];
}

void OrganizedCloud::set(Layer layer, const Return& r) {
  check(r.ring, r.bin);
  grid(layer)[index(r.ring, r.bin)] = r;
}

void OrganizedCloud::clear(Layer layer, int ring, int bin) {
  check(ring, bin);
  grid(layer)[index(ring, bin)].reset();
}

void OrganizedCloud::merge(Layer layer, const Return& r) {
  check(r.ring, r.bin);
  auto& cell = grid(layer)[index(r.ring, r.bin)];
  if (!cell) {
    cell = r;
    return;
  }
  if (layer == Layer::Strongest) {
    if (r.intensity > cell->intensity || (r.intensity == cell->intensity && r.range < cell->range)) {
      cell = r;
    }
  } else if (r.range > cell->range) {
    cell = r;
  }
}

std::size_t OrganizedCloud::populated_count() const {
  auto count = [](const auto& g) {
    return static_cast<std::size_t>(std::count_if(g.begin(), g.end(), [](const auto& c) { return c.has_value(); }));
  };
  return count(strongest_) + count(last_);
}

std::vector<CellRef> OrganizedCloud::flatten() const {
  std::vector<CellRef> out;
  for (Layer layer : {Layer::Strongest, Layer::Last}) {
    const auto& g = grid(layer);
    for (int r = 0; r < n_rings_; ++r) {
      for (int b = 0; b < n_bins_; ++b) {
        if (g[index(r, b)]) out.push_back({layer, r, b});
      }
    }
  }
  return out;
}

std::vector<Point3> OrganizedCloud::points(Layer layer) const {
  std::vector<Point3> out;
  for (const auto& c : grid(layer))
    if (c) out.push_back(c->point);
  return out;
}

bool operator==(const OrganizedCloud& a, const OrganizedCloud& b) {
  return a.n_rings_ == b.n_rings_ && a.n_bins_ == b.n_bins_ && a.strongest_ == b.strongest_ &&
         a.last_ == b.last_;
}

OrganizedCloud organize_points(std::span<const Return> returns, int n_rings, int n_bins) {
  OrganizedCloud cloud(n_rings, n_bins);
  for (const auto& r : returns) {
    cloud.merge(Layer::Strongest, r);
    cloud.merge(Layer::Last, r);
  }
  return cloud;
}

std::vector<double> ring_elevations(const OrganizedCloud& cloud) {
  std::vector<double> out(static_cast<std::size_t>(cloud.n_rings()),
                          std::numeric_limits<double>::quiet_NaN());
  for (int r = 0; r < cloud.n_rings(); ++r) {
    std::vector<double> el;
    for (int b = 0; b < cloud.n_bins(); ++b) {
      for (Layer layer : {Layer::Strongest, Layer::Last}) {
        const auto& c = cloud.at(layer, r, b);
        if (c && c->range > 0.0) {
          el.push_back(std::atan2(c->point.z(), c->point.head<2>().norm()));
          break;
        }
      }
    }
    if (!el.empty()) {
      std::nth_element(el.begin(), el.begin() + static_cast<std::ptrdiff_t>(el.size() / 2), el.end());
      out[static_cast<std::size_t>(r)] = el[el.size() / 2];
    }
  }
  return out;
}

const Pose* Trajectory::find(std::int64_t frame_id) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), frame_id,
                             [](const TrajectoryEntry& e, std::int64_t id) { return e.frame_id < id; });
  if (it == entries.end() || it->frame_id != frame_id) return nullptr;
  return &it->pose;
}

// ---------------------------------------------------------------------------
// .drs

std::string format_dual_scan(const OrganizedCloud& cloud) {
  using text::format_double;
  std::string out = "DRS1 " + std::to_string(cloud.n_rings()) + " " + std::to_string(cloud.n_bins()) + "\n";
  for (const auto& ref : cloud.flatten()) {
    const Return& r = *cloud.at(ref);
    out += std::to_string(ref.ring);
    out += ' ';
    out += std::to_string(ref.bin);
    out += ' ';
    out += layer_code(ref.layer);
    out += ' ' + format_double(r.point.x()) + ' ' + format_double(r.point.y()) + ' ' +
           format_double(r.point.z()) + ' ' + format_double(r.intensity) + '\n';
  }
  return out;
}

OrganizedCloud parse_dual_scan(const std::string& content) {
  const auto lines = text::split_lines(content);
  if (lines.empty()) throw Error(ErrorCode::ParseError, "empty scan file");
  const auto header = text::split_ws(lines[0]);
  if (header.size() != 3 || header[0] != "DRS1") {
    throw Error(ErrorCode::ParseError, "line 1: expected 'DRS1 n_rings n_bins'");
  }
  const auto n_rings = text::parse_int(header[1], 1);
  const auto n_bins = text::parse_int(header[2], 1);
  if (n_rings <= 0 || n_bins <= 0 || n_rings > 100000 || n_bins > 1000000) {
    throw Error(ErrorCode::ShapeError, "line 1: invalid cloud dimensions");
  }
  OrganizedCloud cloud(static_cast<int>(n_rings), static_cast<int>(n_bins));
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto f = text::split_ws(lines[i]);
    if (f.empty()) continue;
    if (f.size() != 7) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected 7 fields");
    }
    const auto ring = text::parse_int(f[0], line_no);
    const auto bin = text::parse_int(f[1], line_no);
    Layer layer;
    if (f[2] == "S") {
      layer = Layer::Strongest;
    } else if (f[2] == "L") {
      layer = Layer::Last;
    } else {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": layer must be S or L");
    }
    if (ring < 0 || ring >= n_rings || bin < 0 || bin >= n_bins) {
      throw Error(ErrorCode::ShapeError, "line " + std::to_string(line_no) + ": ring/bin out of range");
    }
    const Point3 p(text::parse_double(f[3], line_no), text::parse_double(f[4], line_no),
                   text::parse_double(f[5], line_no));
    const double intensity = text::parse_double(f[6], line_no);
    cloud.merge(layer, Return::make(p, intensity, static_cast<int>(ring), static_cast<int>(bin)));
  }
  return cloud;
}

OrganizedCloud load_dual_scan(const std::filesystem::path& path) {
  return parse_dual_scan(text::read_file(path));
}

void save_dual_scan(const std::filesystem::path& path, const OrganizedCloud& cloud) {
  text::write_file(path, format_dual_scan(cloud));
}

// ---------------------------------------------------------------------------
// .tum

std::string format_trajectory(const Trajectory& traj) {
  using text::format_double;
  std::string out;
  for (const auto& e : traj.entries) {
    Eigen::Quaterniond q(e.pose.rotation());
    q.normalize();
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();
    const Vec3& t = e.pose.translation();
    out += std::to_string(e.frame_id) + ' ' + format_double(t.x()) + ' ' + format_double(t.y()) +
           ' ' + format_double(t.z()) + ' ' + format_double(q.x()) + ' ' + format_double(q.y()) +
           ' ' + format_double(q.z()) + ' ' + format_double(q.w()) + '\n';
  }
  return out;
}

Trajectory parse_trajectory(const std::string& content) {
  Trajectory traj;
  const auto lines = text::split_lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto f = text::split_ws(lines[i]);
    if (f.empty() || f[0].front() == '#') continue;
    if (f.size() != 8) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected 8 fields");
    }
    const auto id = text::parse_int(f[0], line_no);
    double v[7];
    for (int k = 0; k < 7; ++k) v[k] = text::parse_double(f[static_cast<std::size_t>(k + 1)], line_no);
    Eigen::Quaterniond q(v[6], v[3], v[4], v[5]);
    if (q.norm() < 1e-12) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": zero quaternion");
    }
    q.normalize();
    if (!traj.entries.empty() && id <= traj.entries.back().frame_id) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": frame ids must increase");
    }
    traj.entries.push_back({id, Pose(q.toRotationMatrix(), Vec3(v[0], v[1], v[2]))});
  }
  return traj;
}

Trajectory load_trajectory(const std::filesystem::path& path) {
  return parse_trajectory(text::read_file(path));
}

void save_trajectory(const std::filesystem::path& path, const Trajectory& traj) {
  text::write_file(path, format_trajectory(traj));
}

// ---------------------------------------------------------------------------
// .lbl

std::string format_labels(const GroundTruthLabels& labels) {
  std::string out = "LBL1 " + std::to_string(labels.frame_id) + " " + std::to_string(labels.labels.size()) + "\n";
  for (int l : labels.labels) out += std::to_string(l) + '\n';
  return out;
}

GroundTruthLabels parse_labels(const std::string& content) {
  const auto lines = text::split_lines(content);
  if (lines.empty()) throw Error(ErrorCode::ParseError, "empty label file");
  const auto header = text::split_ws(lines[0]);
  if (header.size() != 3 || header[0] != "LBL1") {
    throw Error(ErrorCode::ParseError, "line 1: expected 'LBL1 frame_id n_points'");
  }
  GroundTruthLabels out;
  out.frame_id = text::parse_int(header[1], 1);
  const auto n = text::parse_int(header[2], 1);
  if (n < 0) throw Error(ErrorCode::ParseError, "line 1: negative point count");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = text::split_ws(lines[i]);
    if (f.empty()) continue;
    if (f.size() != 1) throw Error(ErrorCode::ParseError, "line " + std::to_string(i + 1) + ": expected one label");
    const auto l = text::parse_int(f[0], i + 1);
    if (l < 0 || l > 5) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(i + 1) + ": label outside 0..5");
    }
    out.labels.push_back(static_cast<int>(l));
  }
  if (static_cast<long long>(out.labels.size()) != n) {
    throw Error(ErrorCode::ParseError, "label count " + std::to_string(out.labels.size()) +
                                           " does not match header " + std::to_string(n));
  }
  return out;
}

GroundTruthLabels load_labels(const std::filesystem::path& path) {
  return parse_labels(text::read_file(path));
}

void save_labels(const std::filesystem::path& path, const GroundTruthLabels& labels) {
  text::write_file(path, format_labels(labels));
}

}  // namespace refmap
