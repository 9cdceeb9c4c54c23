// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "refmap/classify.hpp"
#include "refmap/config.hpp"
#include "refmap/errors.hpp"
#include "refmap/eval.hpp"
#include "refmap/pipeline.hpp"
#include "refmap/register.hpp"
#include "refmap/sim.hpp"
#include "test_util.hpp"

namespace {

using namespace refmap;
using testing::kDeg;
using Clock = std::chrono::steady_clock;

// Tolerances and budgets.
constexpr double kMirrorInvolutionTol = 1e-12;
constexpr double kRansacNormalTolDeg = 1.0;
constexpr double kHullContainTol = 1e-9;
constexpr double kAc1BudgetS = 5.0;

constexpr double kRegRotTolDeg = 0.5;
constexpr double kRegTransTol = 0.02;
constexpr double kPlaneNoise = 0.01;
constexpr double kGnVsClosedTol = 1e-6;
constexpr double kJacobianTol = 1e-5;
constexpr double kAc2BudgetS = 10.0;
// Scenes whose normals barely span 3D leave translation unobservable; they
// are redrawn.
constexpr double kMinSceneSpanRatio = 0.3;

constexpr double kMapAngleTolDeg = 0.5;
constexpr double kMapOffsetTol = 0.01;
constexpr double kAc4BudgetS = 30.0;

constexpr double kRangeNoise = 0.01;
constexpr double kMinRemoval = 0.99;
constexpr double kMinIndoor = 0.995;
constexpr double kMinAccuracy = 0.99;
constexpr double kAc5BudgetS = 60.0;

constexpr double kMaxAte = 0.02;
constexpr double kAc6BudgetS = 120.0;

constexpr double kBackMirrorTol = 0.05;
constexpr double kMinBackMirrorFraction = 0.95;

constexpr int kMetricPairs = 10000;

int failures = 0;

void report(const char* id, bool pass, double seconds, const std::string& detail) {
  std::printf("%s %s (%.2f s) %s\n", pass ? "PASS" : "FAIL", id, seconds, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---------------------------------------------------------------------------

void ac1_geometry() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  constexpr int kCases = 1000;
  double worst_involution = 0.0, worst_normal_deg = 0.0;
  int ransac_misses = 0, containment_violations = 0;
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  for (int k = 0; k < kCases; ++k) {
    const Plane plane = testing::random_plane(rng, 5.0);
    const Point3 p = testing::random_point(rng, 10.0);
    worst_involution = std::max(worst_involution, (mirror_point(mirror_point(p, plane), plane) - p).norm());
  }

  for (int k = 0; k < kCases; ++k) {
    const Plane plane = testing::random_plane(rng, 3.0);
    const auto [bu, bv] = plane_basis(plane.normal());
    const Point3 origin = -plane.d() * plane.normal();
    std::vector<Point3> pts;
    for (int i = 0; i < 80; ++i) {
      pts.push_back(origin + 2.0 * u(rng) * bu + 2.0 * u(rng) * bv + 0.005 * g(rng) * plane.normal());
    }
    for (int i = 0; i < 20; ++i) pts.push_back(origin + testing::random_point(rng, 2.0));
    std::shuffle(pts.begin(), pts.end(), rng);
    RansacParams params;
    params.dist_threshold = 0.03;
    params.max_iters = 200;
    const auto fit = fit_plane_ransac(pts, params, static_cast<std::uint64_t>(k));
    if (!fit) {
      ++ransac_misses;
      continue;
    }
    const double ang = std::acos(std::min(1.0, std::abs(fit->plane.normal().dot(plane.normal())))) / kDeg;
    worst_normal_deg = std::max(worst_normal_deg, ang);
  }

  for (int k = 0; k < kCases; ++k) {
    const Plane plane = testing::random_plane(rng, 3.0);
    const auto [bu, bv] = plane_basis(plane.normal());
    const Point3 origin = -plane.d() * plane.normal();
    auto hull_of = [&](const Vec3& shift) {
      std::vector<Point3> pts;
      for (int i = 0; i < 12; ++i) pts.push_back(origin + shift + u(rng) * bu + u(rng) * bv);
      return BoundaryHull::from_points(plane, pts);
    };
    const BoundaryHull a = hull_of(Vec3::Zero());
    const BoundaryHull b = hull_of(u(rng) * bu + u(rng) * bv);
    const BoundaryHull m = merge_hulls(a, b, plane);
    for (const auto* h : {&a, &b}) {
      for (const auto& v : h->lifted_vertices()) {
        if (!point_in_polygon(m.vertices(), m.project(v), kHullContainTol)) ++containment_violations;
      }
    }
  }

  const double s = since(t0);
  const bool pass = worst_involution <= kMirrorInvolutionTol && ransac_misses == 0 &&
                    worst_normal_deg <= kRansacNormalTolDeg && containment_violations == 0 && s < kAc1BudgetS;
  report("AC1 geometry properties", pass, s,
         "involution_max=" + fmt("%.3g", worst_involution) + " ransac_max_deg=" + fmt("%.3g", worst_normal_deg) +
             " ransac_misses=" + std::to_string(ransac_misses) +
             " hull_violations=" + std::to_string(containment_violations) + " cases=3x1000");
}

// ---------------------------------------------------------------------------

struct RegScene {
  std::vector<Plane> source, target;
  Pose truth;
};

RegScene draw_scene(std::mt19937_64& rng, bool noisy) {
  std::uniform_int_distribution<int> count(4, 8);
  std::uniform_real_distribution<double> d(1.0, 5.0);
  std::normal_distribution<double> g(0.0, 1.0);
  RegScene s;
  const int n = count(rng);
  std::vector<Vec3> normals;
  do {
    normals.clear();
    for (int i = 0; i < n; ++i) normals.push_back(testing::random_unit(rng));
  } while (normal_span_ratio(normals) < kMinSceneSpanRatio);
  const Pose rot_only = testing::random_pose(rng, 10.0 * kDeg, 0.0);
  Vec3 t = testing::random_point(rng, 1.0);
  t *= std::uniform_real_distribution<double>(0.0, 0.3)(rng) / std::max(t.norm(), 1e-12);
  s.truth = Pose(rot_only.rotation(), t);
  for (const auto& nrm : normals) {
    const Plane target = Plane::from_normal_offset(nrm, d(rng));
    Plane source = transform_plane(target, s.truth.inverse());
    if (noisy) {
      const Vec3 nn = source.normal() + kPlaneNoise * Vec3(g(rng), g(rng), g(rng));
      source = Plane::from_normal_offset(nn, source.d() + kPlaneNoise * g(rng));
    }
    s.source.push_back(source);
    s.target.push_back(target);
  }
  return s;
}

std::vector<PlaneMatch> identity_matches(std::size_t n) {
  std::vector<PlaneMatch> m(n);
  for (std::size_t i = 0; i < n; ++i) m[i].source_idx = m[i].target_idx = i;
  return m;
}

void ac2_registration() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(202);
  const RegisterConfig cfg;
  constexpr int kScenes = 100;
  double worst_rot = 0.0, worst_trans = 0.0, worst_gn = 0.0, worst_jac = 0.0;
  int failed = 0;
  for (int k = 0; k < kScenes; ++k) {
    // Noisy recovery through the full filter + refinement chain.
    const RegScene s = draw_scene(rng, true);
    const auto matches = identity_matches(s.source.size());
    try {
      const auto filtered = ransac_match_filter(matches, s.source, s.target, cfg, static_cast<std::uint64_t>(k));
      const auto refined = gauss_newton_refine(filtered.inliers, s.source, s.target, filtered.pose, cfg);
      worst_rot = std::max(worst_rot, rotation_angle_between(refined.pose.rotation(), s.truth.rotation()) / kDeg);
      worst_trans = std::max(worst_trans, (refined.pose.translation() - s.truth.translation()).norm());
    } catch (const Error&) {
      ++failed;
    }

    // Noiseless: Gauss-Newton from identity against the closed form.
    const RegScene c = draw_scene(rng, false);
    const auto cm = identity_matches(c.source.size());
    const Pose closed = closed_form_pose(cm, c.source, c.target, cfg.rank_tolerance);
    const auto gn = gauss_newton_refine(cm, c.source, c.target, Pose::identity(), cfg);
    worst_gn = std::max({worst_gn, rotation_angle_between(gn.pose.rotation(), closed.rotation()),
                         (gn.pose.translation() - closed.translation()).norm()});

    // Analytic Jacobian against central differences at a random state.
    const auto state = PoseVec6::from_pose(testing::random_pose(rng, 10.0 * kDeg, 0.3)).to_vector();
    Eigen::VectorXd e;
    Eigen::MatrixXd jac;
    plane_residuals(cm, c.source, c.target, PoseVec6::from_vector(state), e, &jac);
    constexpr double h = 1e-6;
    for (int j = 0; j < 6; ++j) {
      auto plus = state, minus = state;
      plus[j] += h;
      minus[j] -= h;
      Eigen::VectorXd ep, em;
      plane_residuals(cm, c.source, c.target, PoseVec6::from_vector(plus), ep, nullptr);
      plane_residuals(cm, c.source, c.target, PoseVec6::from_vector(minus), em, nullptr);
      const Eigen::VectorXd fd = (ep - em) / (2.0 * h);
      worst_jac = std::max(worst_jac, (fd - jac.col(j)).cwiseAbs().maxCoeff());
    }
  }
  const double s = since(t0);
  const bool pass = failed == 0 && worst_rot <= kRegRotTolDeg && worst_trans <= kRegTransTol &&
                    worst_gn <= kGnVsClosedTol && worst_jac <= kJacobianTol && s < kAc2BudgetS;
  report("AC2 registration recovery", pass, s,
         "rot_max_deg=" + fmt("%.3g", worst_rot) + " trans_max_m=" + fmt("%.3g", worst_trans) +
             " gn_vs_closed=" + fmt("%.3g", worst_gn) + " jacobian_max=" + fmt("%.3g", worst_jac) +
             " failed=" + std::to_string(failed) + " scenes=100");
}

// ---------------------------------------------------------------------------

struct RenderedFixture {
  sim::Fixture fixture;
  std::vector<sim::RenderedScan> scans;
};

RenderedFixture render_fixture(const std::string& name, double noise, std::uint64_t seed) {
  RenderedFixture r;
  r.fixture = sim::make_fixture(name);
  sim::SimConfig cfg;
  cfg.noise_sigma = noise;
  const auto sensor = sim::SensorModel::hesai_qt64();
  for (const auto& e : r.fixture.trajectory.entries) {
    r.scans.push_back(sim::render_scan(r.fixture.scene, sensor, e.pose, seed + static_cast<std::uint64_t>(e.frame_id), cfg));
  }
  return r;
}

std::vector<Frame> frames_of(const RenderedFixture& r) {
  std::vector<Frame> frames;
  for (std::size_t i = 0; i < r.scans.size(); ++i) {
    frames.push_back({r.fixture.trajectory.entries[i].frame_id, r.scans[i].cloud});
  }
  return frames;
}

void ac3_sensor_rules(const std::vector<const RenderedFixture*>& fixtures) {
  const auto t0 = Clock::now();
  std::size_t beams = 0, order_violations = 0, glass_last = 0, shape_violations = 0;
  for (const auto* r : fixtures) {
    for (const auto& scan : r->scans) {
      const auto refs = scan.cloud.flatten();
      const int bins = scan.cloud.n_bins();
      std::vector<int> last_label(static_cast<std::size_t>(scan.cloud.n_rings() * bins), -1);
      for (std::size_t i = 0; i < refs.size(); ++i) {
        if (refs[i].layer == Layer::Last) {
          last_label[static_cast<std::size_t>(refs[i].ring * bins + refs[i].bin)] = scan.labels.labels[i];
        }
      }
      for (int ring = 0; ring < scan.cloud.n_rings(); ++ring) {
        for (int bin = 0; bin < bins; ++bin) {
          const auto& s = scan.cloud.at(Layer::Strongest, ring, bin);
          const auto& l = scan.cloud.at(Layer::Last, ring, bin);
          ++beams;
          if (s.has_value() != l.has_value()) {
            ++shape_violations;
            continue;
          }
          if (!s) continue;
          if (s->range > l->range) ++order_violations;
          if (s->range != l->range &&
              last_label[static_cast<std::size_t>(ring * bins + bin)] == static_cast<int>(TruthLabel::Glass)) {
            ++glass_last;
          }
        }
      }
    }
  }
  const double s = since(t0);
  report("AC3 sensor-model rules", order_violations == 0 && glass_last == 0 && shape_violations == 0, s,
         "beams=" + std::to_string(beams) + " order_violations=" + std::to_string(order_violations) +
             " glass_last=" + std::to_string(glass_last) + " half_empty=" + std::to_string(shape_violations));
}

// ---------------------------------------------------------------------------

void ac4_map_convergence() {
  const auto t0 = Clock::now();
  const auto r = render_fixture("mirror-room", 0.0, 1);
  const auto map = build_map(frames_of(r), r.fixture.trajectory, PipelineConfig{});
  std::size_t true_reflective = 0, matched_ok = 0;
  double worst_angle = 0.0, worst_offset = 0.0;
  std::vector<int> claims(map.planes.size(), 0);
  for (const auto& surf : r.fixture.scene.surfaces) {
    if (!surf.is_reflective()) continue;
    ++true_reflective;
    const Plane truth = surf.plane();
    int hits = 0;
    for (std::size_t i = 0; i < map.planes.size(); ++i) {
      const auto& mp = map.planes[i];
      const double ang = normal_angle(mp.plane, truth) / kDeg;
      const double off = std::abs(mp.plane.d() - truth.d());
      if (ang <= 5.0 && off <= 0.2) {
        worst_angle = std::max(worst_angle, ang);
        worst_offset = std::max(worst_offset, off);
        ++claims[i];
        ++hits;
      }
    }
    if (hits == 1) ++matched_ok;
  }
  const bool unclaimed = std::any_of(claims.begin(), claims.end(), [](int c) { return c != 1; });
  const double s = since(t0);
  const bool pass = matched_ok == true_reflective && !unclaimed && worst_angle <= kMapAngleTolDeg &&
                    worst_offset <= kMapOffsetTol && s < kAc4BudgetS;
  report("AC4 map convergence", pass, s,
         "map_planes=" + std::to_string(map.planes.size()) + " true_reflective=" + std::to_string(true_reflective) +
             " angle_deg=" + fmt("%.3g", worst_angle) + " offset_m=" + fmt("%.3g", worst_offset) + " frames=" +
             std::to_string(r.scans.size()));
}

// ---------------------------------------------------------------------------

struct ClassifiedFixture {
  std::vector<LabeledCloud> labeled;
  GlobalPlaneMap map;
};

// Returns within 2x the band of a reflective hull crossing along the beam.
bool near_reflective_surface(const Point3& sensor_point, const Pose& pose, const GlobalPlaneMap& map, double band) {
  const double range = sensor_point.norm();
  if (range <= 0.0) return false;
  const Vec3 dir = pose.rotate(sensor_point / range);
  for (const auto& mp : map.planes) {
    if (mp.kind() != PlaneKind::Reflective) continue;
    const auto hit = ray_plane_intersection(pose.translation(), dir, mp.plane);
    if (hit && mp.hull.contains(hit->point) && std::abs(range - hit->t) <= 2.0 * band) return true;
  }
  return false;
}

ClassifiedFixture ac5_one(const RenderedFixture& r, eval::ConfusionMatrix& all, eval::ConfusionMatrix& away) {
  ClassifiedFixture out;
  out.map = sim::ground_truth_map(r.fixture.scene);
  const ClassifyConfig cfg;
  for (std::size_t f = 0; f < r.scans.size(); ++f) {
    const Pose& pose = r.fixture.trajectory.entries[f].pose;
    auto labeled = classify_cloud(r.scans[f].cloud, pose, out.map, cfg);
    for (std::size_t i = 0; i < labeled.labels.size(); ++i) {
      const auto truth = static_cast<TruthLabel>(r.scans[f].labels.labels[i]);
      all.add(truth, labeled.labels[i]);
      const Point3& p = labeled.cloud.at(labeled.refs[i])->point;
      if (!near_reflective_surface(p, pose, out.map, cfg.surface_band)) away.add(truth, labeled.labels[i]);
    }
    out.labeled.push_back(std::move(labeled));
  }
  return out;
}

std::vector<ClassifiedFixture> ac5_classification(const RenderedFixture& mirror, const RenderedFixture& corridor,
                                                  double render_seconds) {
  const auto t0 = Clock::now();
  std::vector<ClassifiedFixture> out;
  bool pass = true;
  std::string detail;
  for (const auto* r : {&mirror, &corridor}) {
    eval::ConfusionMatrix all, away;
    out.push_back(ac5_one(*r, all, away));
    const auto rm = eval::removal_metrics(all);
    const double removal = rm.reflection_removal_rate.value_or(0.0);
    const double indoor = rm.indoor_precision.value_or(0.0);
    const double acc = eval::accuracy(away).value_or(0.0);
    pass = pass && removal >= kMinRemoval && indoor >= kMinIndoor && acc >= kMinAccuracy;
    detail += r->fixture.name + ": removal=" + fmt("%.4f", removal) + " indoor=" + fmt("%.4f", indoor) +
              " accuracy=" + fmt("%.4f", acc) + " (" + std::to_string(away.total()) + "/" +
              std::to_string(all.total()) + " pts) ";
  }
  const double s = since(t0) + render_seconds;
  report("AC5 classification oracle", pass && s < kAc5BudgetS, s, detail);
  return out;
}

// ---------------------------------------------------------------------------

void ac6_slam(const RenderedFixture& box, const RenderedFixture& corridor, double render_seconds) {
  const auto t0 = Clock::now();
  const PipelineConfig cfg;
  const auto result = run_slam(frames_of(box), cfg);
  const Pose gt0_inv = box.fixture.trajectory.entries.front().pose.inverse();
  double sq = 0.0;
  std::size_t n = 0, box_flagged = 0;
  for (const auto& e : result.trajectory.entries) {
    const Pose* gt = box.fixture.trajectory.find(e.frame_id);
    if (!gt) continue;
    sq += (e.pose.translation() - (gt0_inv * *gt).translation()).squaredNorm();
    ++n;
  }
  for (const auto& rep : result.reports) box_flagged += rep.status != FrameStatus::Ok;
  const double ate = n ? std::sqrt(sq / static_cast<double>(n)) : 1e9;
  const bool box_ok = n == box.scans.size() && ate <= kMaxAte;

  // A corridor frame is rank-deficient when the normals of the surfaces it
  // sees directly do not span 3D.
  const auto corr = run_slam(frames_of(corridor), cfg);
  std::size_t deficient = 0, reported = 0, silent = 0;
  for (std::size_t f = 1; f < corridor.scans.size(); ++f) {
    const auto& scan = corridor.scans[f];
    std::vector<std::size_t> hits(corridor.fixture.scene.surfaces.size(), 0);
    for (std::size_t i = 0; i < scan.surface.size(); ++i) {
      if (scan.labels.labels[i] != static_cast<int>(TruthLabel::Reflection)) ++hits[scan.surface[i]];
    }
    std::vector<Vec3> normals;
    for (std::size_t k = 0; k < hits.size(); ++k) {
      if (hits[k] >= cfg.detect.min_plane_inliers) normals.push_back(corridor.fixture.scene.surfaces[k].normal());
    }
    if (normal_span_ratio(normals) >= cfg.map.registration.rank_tolerance) continue;
    ++deficient;
    if (corr.reports[f].status == FrameStatus::Degenerate) {
      ++reported;
    } else {
      ++silent;
    }
  }
  const double s = since(t0) + render_seconds;
  const bool pass = box_ok && box_flagged == 0 && deficient > 0 && silent == 0 && s < kAc6BudgetS;
  report("AC6 reflection SLAM", pass, s,
         "box_ate_m=" + fmt("%.4f", ate) + " box_flagged=" + std::to_string(box_flagged) +
             " corridor_deficient=" + std::to_string(deficient) + " reported=" + std::to_string(reported) +
             " silent=" + std::to_string(silent));
}

// ---------------------------------------------------------------------------

double distance_to_rectangle(const Point3& p, const sim::Surface& s) {
  const Vec3 q = p - s.center;
  const double lu = s.u.norm(), lv = s.v.norm();
  const Vec3 eu = s.u / lu, ev = s.v / lv;
  const Point3 closest =
      s.center + std::clamp(q.dot(eu), -lu, lu) * eu + std::clamp(q.dot(ev), -lv, lv) * ev;
  return (p - closest).norm();
}

void ac7_mirror_back(const RenderedFixture& mirror, const ClassifiedFixture& classified) {
  const auto t0 = Clock::now();
  std::size_t total = 0, close = 0;
  for (const auto& labeled : classified.labeled) {
    for (const auto& m : mirror_back(labeled, classified.map)) {
      double best = 1e9;
      for (const auto& s : mirror.fixture.scene.surfaces) {
        if (s.is_diffuse()) best = std::min(best, distance_to_rectangle(m, s));
      }
      ++total;
      close += best <= kBackMirrorTol;
    }
  }
  const double frac = total ? static_cast<double>(close) / static_cast<double>(total) : 0.0;
  report("AC7 mirror-back", total > 0 && frac >= kMinBackMirrorFraction, since(t0),
         "within_5cm=" + fmt("%.4f", frac) + " points=" + std::to_string(total));
}

// ---------------------------------------------------------------------------

eval::Metric brute_ratio(const std::vector<std::pair<int, int>>& pairs, const std::function<bool(int, int)>& in_den,
                         const std::function<bool(int, int)>& in_num) {
  std::uint64_t num = 0, den = 0;
  for (const auto& [t, p] : pairs) {
    if (!in_den(t, p)) continue;
    ++den;
    num += in_num(t, p);
  }
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

void ac8_metrics() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(808);
  std::uniform_int_distribution<int> truth_d(0, 5), pred_d(0, 4);
  std::vector<std::pair<int, int>> pairs;  // (collapsed truth class, predicted)
  eval::ConfusionMatrix cm;
  for (int i = 0; i < kMetricPairs; ++i) {
    const auto t = static_cast<TruthLabel>(truth_d(rng));
    const auto p = static_cast<PointLabel>(pred_d(rng));
    cm.add(t, p);
    const int tc = t == TruthLabel::Normal       ? 0
                   : t == TruthLabel::Reflection ? 2
                   : t == TruthLabel::Obstacle   ? 3
                                                 : 1;
    pairs.emplace_back(tc, static_cast<int>(p));
  }
  std::size_t mismatches = 0;
  for (int t = 0; t < 4; ++t) {
    for (int p = 0; p < 5; ++p) {
      const auto n = static_cast<std::uint64_t>(
          std::count(pairs.begin(), pairs.end(), std::make_pair(t, p)));
      mismatches += cm.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)] != n;
    }
  }
  auto check = [&](const eval::Metric& got, const eval::Metric& want) { mismatches += got != want; };
  const auto pr = eval::precision_recall(cm);
  const auto j = eval::iou(cm);
  for (int c = 0; c < 4; ++c) {
    check(pr[static_cast<std::size_t>(c)].precision,
          brute_ratio(pairs, [c](int, int p) { return p == c; }, [c](int t, int) { return t == c; }));
    check(pr[static_cast<std::size_t>(c)].recall,
          brute_ratio(pairs, [c](int t, int) { return t == c; }, [c](int, int p) { return p == c; }));
    check(j[static_cast<std::size_t>(c)],
          brute_ratio(pairs, [c](int t, int p) { return t == c || p == c; },
                      [c](int t, int p) { return t == c && p == c; }));
  }
  const auto rm = eval::removal_metrics(cm);
  check(rm.non_reflection_precision,
        brute_ratio(pairs, [](int, int p) { return p == 0 || p == 1 || p == 3; }, [](int t, int) { return t != 2; }));
  check(rm.indoor_precision,
        brute_ratio(pairs, [](int, int p) { return p == 0 || p == 1; }, [](int t, int) { return t == 0 || t == 1; }));
  check(rm.reflection_removal_rate,
        brute_ratio(pairs, [](int t, int) { return t == 2; }, [](int, int p) { return p == 2 || p == 4; }));
  check(eval::accuracy(cm), brute_ratio(pairs, [](int, int) { return true; }, [](int t, int p) { return t == p; }));
  report("AC8 metrics oracle", mismatches == 0, since(t0),
         "mismatches=" + std::to_string(mismatches) + " pairs=" + std::to_string(kMetricPairs));
}

}  // namespace

int main() {
  ac1_geometry();
  ac2_registration();

  auto t = Clock::now();
  const auto mirror = render_fixture("mirror-room", kRangeNoise, 42);
  const auto corridor = render_fixture("glass-corridor", kRangeNoise, 42);
  const double classify_render_s = since(t);
  t = Clock::now();
  const auto box = render_fixture("box-room", kRangeNoise, 42);
  const double box_render_s = since(t);

  ac3_sensor_rules({&box, &mirror, &corridor});
  ac4_map_convergence();
  const auto classified = ac5_classification(mirror, corridor, classify_render_s);
  // Corridor renders are shared with AC5; only the box-room render is charged here.
  ac6_slam(box, corridor, box_render_s);
  ac7_mirror_back(mirror, classified.front());
  ac8_metrics();
  std::printf("SKIP AC9 dataset-scale check: manual, needs a converted external Hesai sequence\n");
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
