#include "refmap/detect.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <numeric>

#include "refmap/errors.hpp"
#include "refmap/kdtree.hpp"

namespace refmap {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::vector<Point3> to_points(std::span<const Return> returns) {
  std::vector<Point3> pts;
  pts.reserve(returns.size());
  for (const auto& r : returns) pts.push_back(r.point);
  return pts;
}

RansacParams ransac_params(const DetectConfig& cfg, std::size_t min_inliers) {
  RansacParams p;
  p.dist_threshold = cfg.ransac_dist;
  p.min_inliers = min_inliers;
  p.max_iters = cfg.ransac_max_iters;
  p.confidence = cfg.ransac_confidence;
  return p;
}

bool same_plane(const Plane& a, const Plane& b, double max_angle_rad, double max_dd) {
  return a.normal().dot(b.normal()) >= std::cos(max_angle_rad) && std::abs(a.d() - b.d()) <= max_dd;
}

// Unimodal: non-decreasing up to the max, non-increasing after it.
bool unimodal(std::span<const double> v, std::size_t& argmax) {
  argmax = static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
  for (std::size_t i = 1; i <= argmax; ++i)
    if (v[i] < v[i - 1]) return false;
  for (std::size_t i = argmax + 1; i < v.size(); ++i)
    if (v[i] > v[i - 1]) return false;
  return true;
}

}  // namespace

const char* to_string(PlaneSource source) {
  switch (source) {
    case PlaneSource::IntensityPeak: return "IntensityPeak";
    case PlaneSource::DualReturn: return "DualReturn";
    case PlaneSource::RegionGrowing: return "RegionGrowing";
    case PlaneSource::Ground: return "Ground";
  }
  return "RegionGrowing";
}

std::optional<DetectedPlane> make_detected_plane(const Plane& plane, std::span<const Point3> points,
                                                 std::vector<std::size_t> inliers,
                                                 PlaneSource source) {
  if (inliers.size() < 3) return std::nullopt;
  std::vector<Point3> sel;
  sel.reserve(inliers.size());
  Point3 centroid = Point3::Zero();
  for (auto i : inliers) {
    sel.push_back(points[i]);
    centroid += points[i];
  }
  centroid /= static_cast<double>(inliers.size());
  DetectedPlane out;
  try {
    out.hull = BoundaryHull::from_points(plane, sel);
  } catch (const Error&) {
    return std::nullopt;
  }
  out.plane = plane;
  out.inlier_count = inliers.size();
  out.area = out.hull.area();
  out.centroid = centroid;
  out.source = source;
  out.inliers = std::move(inliers);
  return out;
}

DetectedPlane transform_detected_plane(const DetectedPlane& plane, const Pose& pose) {
  DetectedPlane out = plane;
  out.hull = transform_hull(plane.hull, pose);
  out.plane = out.hull.plane();
  out.area = out.hull.area();
  out.centroid = pose.apply(plane.centroid);
  return out;
}

// ---------------------------------------------------------------------------
// Intensity peaks

std::vector<std::vector<CellRef>> find_intensity_peaks(const OrganizedCloud& cloud,
                                                       const DetectConfig& cfg) {
  std::vector<std::vector<CellRef>> result;
  const int n_bins = cloud.n_bins();
  const auto elevations = ring_elevations(cloud);
  const double max_elev = cfg.horizontal_elevation_deg * kDeg;

  auto intensity_at = [&](int ring, int bin) -> std::optional<double> {
    const auto& c = cloud.at(Layer::Strongest, ring, bin);
    if (!c) return std::nullopt;
    return c->intensity;
  };

  for (int ring = 0; ring < cloud.n_rings(); ++ring) {
    const double el = elevations[static_cast<std::size_t>(ring)];
    if (!std::isfinite(el) || std::abs(el) > max_elev) continue;

    // Start the circular traversal right after a break so no run wraps.
    auto breaks_before = [&](int b) {
      const auto& cur = cloud.at(Layer::Strongest, ring, b);
      const auto& prev = cloud.at(Layer::Strongest, ring, (b + n_bins - 1) % n_bins);
      return !cur || !prev || (cur->point - prev->point).norm() > cfg.max_gap;
    };
    int start = 0;
    for (int b = 0; b < n_bins; ++b) {
      if (breaks_before(b)) {
        start = b;
        break;
      }
    }

    // Split into gap-free segments of consecutive populated cells.
    std::vector<std::vector<int>> segments;
    std::vector<int> current;
    for (int k = 0; k < n_bins; ++k) {
      const int b = (start + k) % n_bins;
      if (!cloud.at(Layer::Strongest, ring, b)) {
        if (!current.empty()) segments.push_back(std::move(current));
        current.clear();
        continue;
      }
      if (!current.empty() && breaks_before(b)) {
        segments.push_back(std::move(current));
        current.clear();
      }
      current.push_back(b);
    }
    if (!current.empty()) segments.push_back(std::move(current));

    for (const auto& seg : segments) {
      std::vector<double> iv;
      iv.reserve(seg.size());
      for (int b : seg) iv.push_back(*intensity_at(ring, b));
      for (std::size_t m = 0; m < seg.size(); ++m) {
        if (iv[m] < cfg.intensity_high) continue;
        if (m > 0 && iv[m - 1] >= iv[m]) continue;
        if (m + 1 < seg.size() && iv[m + 1] > iv[m]) continue;
        std::size_t lo = m, hi = m;
        while (lo > 0 && iv[lo - 1] < iv[lo]) --lo;
        while (hi + 1 < seg.size() && iv[hi + 1] < iv[hi]) ++hi;
        if (iv[lo] >= cfg.intensity_low || iv[hi] >= cfg.intensity_low) continue;
        if (hi - lo + 1 < cfg.min_peak_run) continue;

        // Vertical confirmation on the adjacent rings.
        std::vector<CellRef> cells;
        for (std::size_t i = lo; i <= hi; ++i) cells.push_back({Layer::Strongest, ring, seg[i]});
        int confirmed = 0;
        bool rejected = false;
        for (int nb : {ring - 1, ring + 1}) {
          if (nb < 0 || nb >= cloud.n_rings()) continue;
          std::vector<double> nv;
          for (std::size_t i = lo; i <= hi && !rejected; ++i) {
            const auto v = intensity_at(nb, seg[i]);
            if (!v) {
              rejected = true;
              break;
            }
            nv.push_back(*v);
          }
          if (rejected) break;
          std::size_t nmax = 0;
          const std::size_t peak_offset = m - lo;
          if (!unimodal(nv, nmax) || nmax + 1 < peak_offset || nmax > peak_offset + 1 ||
              nv[peak_offset] > iv[m]) {
            rejected = true;
            break;
          }
          ++confirmed;
          for (std::size_t i = lo; i <= hi; ++i) cells.push_back({Layer::Strongest, nb, seg[i]});
        }
        if (!rejected && confirmed > 0) result.push_back(std::move(cells));
        m = hi;
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Dual return

std::vector<Return> DualReturnMask::candidates() const {
  std::vector<Return> out;
  for (const auto& c : candidate)
    if (c) out.push_back(*c);
  return out;
}

DualReturnMask detect_dual_return(const OrganizedCloud& cloud, const DetectConfig& cfg) {
  DualReturnMask mask;
  mask.n_rings = cloud.n_rings();
  mask.n_bins = cloud.n_bins();
  const std::size_t cells = static_cast<std::size_t>(mask.n_rings) * static_cast<std::size_t>(mask.n_bins);
  mask.diverged.assign(cells, 0);
  mask.candidate.assign(cells, std::nullopt);
  for (int r = 0; r < mask.n_rings; ++r) {
    for (int b = 0; b < mask.n_bins; ++b) {
      const auto& s = cloud.at(Layer::Strongest, r, b);
      const auto& l = cloud.at(Layer::Last, r, b);
      if (!s || !l) continue;
      if (std::abs(s->range - l->range) <= cfg.divergence_threshold) continue;
      const std::size_t idx = static_cast<std::size_t>(r) * static_cast<std::size_t>(mask.n_bins) +
                              static_cast<std::size_t>(b);
      mask.diverged[idx] = 1;
      mask.candidate[idx] = s->range <= l->range ? *s : *l;
    }
  }
  return mask;
}

// ---------------------------------------------------------------------------
// Reflective plane fitting

std::vector<DetectedPlane> fit_reflective_planes(std::span<const Return> candidates,
                                                 const DetectConfig& cfg, std::uint64_t rng_seed,
                                                 std::size_t min_inliers, PlaneSource source) {
  std::vector<DetectedPlane> planes;
  const std::vector<Point3> all = to_points(candidates);
  std::vector<std::size_t> remaining(all.size());
  std::iota(remaining.begin(), remaining.end(), std::size_t{0});
  const auto params = ransac_params(cfg, min_inliers);

  for (std::uint64_t round = 0; remaining.size() >= std::max<std::size_t>(min_inliers, 3); ++round) {
    std::vector<Point3> pts;
    pts.reserve(remaining.size());
    for (auto i : remaining) pts.push_back(all[i]);
    const auto fit = fit_plane_ransac(pts, params, rng_seed + round, PlaneKind::Reflective);
    if (!fit) break;
    std::vector<std::size_t> inliers;
    inliers.reserve(fit->inliers.size());
    for (auto i : fit->inliers) inliers.push_back(remaining[i]);
    if (auto dp = make_detected_plane(fit->plane, all, inliers, source)) {
      planes.push_back(std::move(*dp));
    }
    std::vector<bool> used(all.size(), false);
    for (auto i : inliers) used[i] = true;
    std::erase_if(remaining, [&](std::size_t i) { return used[i]; });
  }
  return planes;
}

std::vector<DetectedPlane> fit_reflective_planes(std::span<const Return> candidates,
                                                 const DetectConfig& cfg, std::uint64_t rng_seed) {
  return fit_reflective_planes(candidates, cfg, rng_seed, cfg.min_reflective_inliers,
                               PlaneSource::DualReturn);
}

// ---------------------------------------------------------------------------
// Ground and ordinary planes

std::optional<DetectedPlane> extract_ground_plane(std::span<const Point3> points,
                                                  const DetectConfig& cfg, std::uint64_t rng_seed) {
  std::vector<std::size_t> below;
  std::vector<Point3> sub;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].z() < 0.0) {
      below.push_back(i);
      sub.push_back(points[i]);
    }
  }
  if (sub.size() < std::max<std::size_t>(cfg.ground_min_inliers, 3)) return std::nullopt;
  const auto fit = fit_plane_ransac(sub, ransac_params(cfg, cfg.ground_min_inliers), rng_seed,
                                    PlaneKind::Ground);
  if (!fit) return std::nullopt;
  std::vector<std::size_t> inliers;
  inliers.reserve(fit->inliers.size());
  for (auto i : fit->inliers) inliers.push_back(below[i]);
  return make_detected_plane(fit->plane, points, std::move(inliers), PlaneSource::Ground);
}

std::vector<DetectedPlane> extract_ordinary_planes(std::span<const Point3> points,
                                                   const DetectConfig& cfg, std::uint64_t rng_seed) {
  std::vector<DetectedPlane> planes;
  const std::size_t n = points.size();
  if (n < std::max<std::size_t>(cfg.min_plane_inliers, 3)) return planes;

  // 1. kNN normals and curvature.
  const KdTree tree(points);
  const std::size_t k = std::max<std::size_t>(cfg.normal_k, 3);
  std::vector<std::vector<std::size_t>> neighbors(n);
  std::vector<Vec3> normals(n, Vec3::Zero());
  std::vector<double> curvature(n, 1.0);
  std::vector<bool> has_normal(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    neighbors[i] = tree.knn(points[i], k);
    if (neighbors[i].size() < 3) continue;
    Vec3 c = Vec3::Zero();
    for (auto j : neighbors[i]) c += points[j];
    c /= static_cast<double>(neighbors[i].size());
    Mat3 cov = Mat3::Zero();
    for (auto j : neighbors[i]) {
      const Vec3 q = points[j] - c;
      cov += q * q.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    const double sum = eig.eigenvalues().sum();
    if (!(sum > 0.0)) continue;
    normals[i] = eig.eigenvectors().col(0);
    curvature[i] = eig.eigenvalues()[0] / sum;
    has_normal[i] = true;
  }

  // 2. Region growing, seeding from the flattest points.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return curvature[a] < curvature[b]; });
  const double cos_thr = std::cos(cfg.normal_angle_deg * kDeg);
  const double r2 = cfg.grow_radius * cfg.grow_radius;
  std::vector<int> region_of(n, -1);
  std::vector<std::vector<std::size_t>> regions;
  for (std::size_t seed : order) {
    if (region_of[seed] >= 0 || !has_normal[seed]) continue;
    const int id = static_cast<int>(regions.size());
    std::vector<std::size_t> members{seed};
    region_of[seed] = id;
    std::deque<std::size_t> queue{seed};
    while (!queue.empty()) {
      const std::size_t q = queue.front();
      queue.pop_front();
      for (std::size_t j : neighbors[q]) {
        if (region_of[j] >= 0 || !has_normal[j]) continue;
        if ((points[j] - points[q]).squaredNorm() > r2) continue;
        if (std::abs(normals[j].dot(normals[q])) < cos_thr) continue;
        region_of[j] = id;
        members.push_back(j);
        queue.push_back(j);
      }
    }
    regions.push_back(std::move(members));
  }
  std::stable_sort(regions.begin(), regions.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });

  // 3. Per-region RANSAC with the acceptance rule.
  auto acceptable = [&](const DetectedPlane& p) {
    if (p.inlier_count < cfg.min_plane_inliers || p.area < cfg.min_plane_area) return false;
    const double density = static_cast<double>(p.inlier_count) / p.area;
    if (density < cfg.min_plane_density && p.inlier_count < cfg.low_density_min_inliers) return false;
    return true;
  };
  const auto params = ransac_params(cfg, cfg.min_plane_inliers);
  std::uint64_t round = 0;
  for (auto& region : regions) {
    if (planes.size() >= cfg.max_planes) break;
    if (region.size() < cfg.min_plane_inliers) break;  // sorted by size
    std::vector<std::size_t> remaining = region;
    std::sort(remaining.begin(), remaining.end());
    while (planes.size() < cfg.max_planes && remaining.size() >= cfg.min_plane_inliers) {
      std::vector<Point3> pts;
      pts.reserve(remaining.size());
      for (auto i : remaining) pts.push_back(points[i]);
      const auto fit = fit_plane_ransac(pts, params, rng_seed + round++, PlaneKind::Ordinary);
      if (!fit) break;
      std::vector<std::size_t> inliers;
      inliers.reserve(fit->inliers.size());
      for (auto i : fit->inliers) inliers.push_back(remaining[i]);
      auto dp = make_detected_plane(fit->plane, points, inliers, PlaneSource::RegionGrowing);
      if (!dp || !acceptable(*dp)) break;
      planes.push_back(std::move(*dp));
      std::vector<bool> used(n, false);
      for (auto i : inliers) used[i] = true;
      std::erase_if(remaining, [&](std::size_t i) { return used[i]; });
    }
  }
  return planes;
}

std::vector<DetectedPlane> dedup_planes(std::vector<DetectedPlane> planes, const DetectConfig& cfg) {
  std::stable_sort(planes.begin(), planes.end(), [](const DetectedPlane& a, const DetectedPlane& b) {
    return a.inlier_count > b.inlier_count;
  });
  std::vector<DetectedPlane> kept;
  for (auto& p : planes) {
    bool dup = false;
    for (const auto& q : kept) {
      if (p.plane.kind() == q.plane.kind() && same_plane(p.plane, q.plane, 5.0 * kDeg, 2 * cfg.ransac_dist) &&
          hull_overlap_ratio(q.hull, p.hull) >= cfg.dedup_overlap) {
        dup = true;
        break;
      }
    }
    if (!dup) kept.push_back(std::move(p));
  }
  return kept;
}

ReflectiveDetection detect_reflective_planes(const OrganizedCloud& cloud, const DetectConfig& cfg,
                                             std::uint64_t rng_seed) {
  ReflectiveDetection out;
  std::vector<DetectedPlane> all;

  const auto mask = detect_dual_return(cloud, cfg);
  const auto candidates = mask.candidates();
  auto dual = fit_reflective_planes(candidates, cfg, rng_seed, cfg.min_reflective_inliers,
                                    PlaneSource::DualReturn);
  all.insert(all.end(), std::make_move_iterator(dual.begin()), std::make_move_iterator(dual.end()));
  for (int r = 0; r < mask.n_rings; ++r) {
    for (int b = 0; b < mask.n_bins; ++b) {
      if (!mask.is_diverged(r, b)) continue;
      out.affected_cells.push_back({Layer::Strongest, r, b});
      out.affected_cells.push_back({Layer::Last, r, b});
    }
  }

  const auto peaks = find_intensity_peaks(cloud, cfg);
  std::vector<Return> peak_points;
  for (const auto& set : peaks) {
    for (const auto& ref : set) {
      peak_points.push_back(*cloud.at(ref));
      out.affected_cells.push_back(ref);
    }
  }
  if (!peak_points.empty()) {
    auto from_peaks = fit_reflective_planes(peak_points, cfg, rng_seed ^ 0x9e3779b97f4a7c15ULL,
                                            cfg.min_peak_inliers, PlaneSource::IntensityPeak);
    all.insert(all.end(), std::make_move_iterator(from_peaks.begin()),
               std::make_move_iterator(from_peaks.end()));
  }
  for (auto& p : all) p.inliers.clear();  // indices refer to different candidate lists
  out.planes = dedup_planes(std::move(all), cfg);
  return out;
}

}  // namespace refmap
