#include "refmap/register.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "refmap/errors.hpp"

namespace refmap {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

using Triple = std::array<std::size_t, 3>;

double cost_of(const Eigen::VectorXd& e) { return e.squaredNorm(); }

}  // namespace

PlaneFeature feature_of(const DetectedPlane& plane) {
  return {plane.plane, plane.centroid, plane.area};
}

std::vector<PlaneMatch> match_planes(std::span<const PlaneFeature> source,
                                     std::span<const PlaneFeature> target,
                                     const MatchThresholds& thresholds) {
  std::vector<PlaneMatch> candidates;
  for (std::size_t i = 0; i < source.size(); ++i) {
    for (std::size_t j = 0; j < target.size(); ++j) {
      const auto& s = source[i];
      const auto& t = target[j];
      if (s.plane.kind() != t.plane.kind()) continue;
      PlaneMatch m;
      m.source_idx = i;
      m.target_idx = j;
      m.cos_angle = s.plane.normal().dot(t.plane.normal());
      m.d_gap = std::abs(s.plane.d() - t.plane.d());
      m.centroid_gap = (s.centroid - t.centroid).norm();
      const double lo = std::min(s.area, t.area);
      const double hi = std::max(s.area, t.area);
      m.area_ratio = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
      if (m.cos_angle >= thresholds.min_cos && m.d_gap <= thresholds.max_d_gap &&
          m.centroid_gap <= thresholds.max_centroid_gap && m.area_ratio <= thresholds.max_area_ratio) {
        candidates.push_back(m);
      }
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const PlaneMatch& a, const PlaneMatch& b) {
    if (a.cos_angle != b.cos_angle) return a.cos_angle > b.cos_angle;
    if (a.d_gap != b.d_gap) return a.d_gap < b.d_gap;
    return a.centroid_gap < b.centroid_gap;
  });
  std::vector<bool> used_s(source.size(), false), used_t(target.size(), false);
  std::vector<PlaneMatch> out;
  for (const auto& m : candidates) {
    if (used_s[m.source_idx] || used_t[m.target_idx]) continue;
    used_s[m.source_idx] = used_t[m.target_idx] = true;
    out.push_back(m);
  }
  std::sort(out.begin(), out.end(),
            [](const PlaneMatch& a, const PlaneMatch& b) { return a.source_idx < b.source_idx; });
  return out;
}

std::vector<PlaneMatch> match_planes(std::span<const DetectedPlane> source,
                                     std::span<const DetectedPlane> target,
                                     const MatchThresholds& thresholds) {
  std::vector<PlaneFeature> fs, ft;
  for (const auto& p : source) fs.push_back(feature_of(p));
  for (const auto& p : target) ft.push_back(feature_of(p));
  return match_planes(fs, ft, thresholds);
}

Mat3 rotation_svd(std::span<const std::pair<Vec3, Vec3>> correspondences) {
  Mat3 h = Mat3::Zero();
  for (const auto& [ns, nt] : correspondences) h += ns * nt.transpose();
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  if (!(s[0] > 0.0) || s[1] < 1e-6 * s[0]) {
    throw Error(ErrorCode::DegenerateNormals, "normals span fewer than two directions");
  }
  Mat3 v = svd.matrixV();
  Mat3 r = v * svd.matrixU().transpose();
  if (r.determinant() < 0.0) {
    v.col(2) *= -1.0;
    r = v * svd.matrixU().transpose();
  }
  return r;
}

double normal_span_ratio(std::span<const Vec3> normals) {
  if (normals.size() < 3) return 0.0;
  Eigen::MatrixXd a(normals.size(), 3);
  for (std::size_t i = 0; i < normals.size(); ++i) a.row(static_cast<Eigen::Index>(i)) = normals[i].transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& s = svd.singularValues();
  return s[0] > 0.0 ? s[2] / s[0] : 0.0;
}

Vec3 translation_lsq(std::span<const TranslationCorrespondence> correspondences,
                     double rank_tolerance) {
  const auto n = static_cast<Eigen::Index>(correspondences.size());
  if (n < 3) throw Error(ErrorCode::RankDeficient, "fewer than three correspondences");
  Eigen::MatrixXd a(n, 3);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& c = correspondences[static_cast<std::size_t>(i)];
    a.row(i) = c.target_normal.transpose();
    b[i] = c.source_d - c.target_d;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  if (!(s[0] > 0.0) || s[2] / s[0] < rank_tolerance) {
    throw Error(ErrorCode::RankDeficient, "plane normals do not span three dimensions");
  }
  return svd.solve(b);
}

Pose closed_form_pose(std::span<const PlaneMatch> matches, std::span<const Plane> source,
                      std::span<const Plane> target, double rank_tolerance) {
  std::vector<std::pair<Vec3, Vec3>> rot;
  std::vector<TranslationCorrespondence> trans;
  rot.reserve(matches.size());
  trans.reserve(matches.size());
  for (const auto& m : matches) {
    const Plane& s = source[m.source_idx];
    const Plane& t = target[m.target_idx];
    rot.emplace_back(s.normal(), t.normal());
    trans.push_back({t.normal(), s.d(), t.d()});
  }
  const Mat3 r = rotation_svd(rot);
  const Vec3 t = translation_lsq(trans, rank_tolerance);
  return {r, t};
}

bool match_agrees(const Plane& source, const Plane& target, const Pose& pose,
                  const RegisterConfig& cfg) {
  const Vec3 n = pose.rotate(source.normal());
  const double d = source.d() - n.dot(pose.translation());
  const double c = std::clamp(n.dot(target.normal()), -1.0, 1.0);
  return std::acos(c) <= cfg.inlier_angle_deg * kDeg && std::abs(d - target.d()) <= cfg.inlier_d_gap;
}

MatchFilterResult ransac_match_filter(std::span<const PlaneMatch> matches,
                                      std::span<const Plane> source, std::span<const Plane> target,
                                      const RegisterConfig& cfg, std::uint64_t rng_seed) {
  const std::size_t n = matches.size();
  if (n < 3) throw Error(ErrorCode::NoValidModel, "fewer than three matches");

  std::optional<std::size_t> ground;
  for (std::size_t i = 0; i < n; ++i) {
    if (target[matches[i].target_idx].kind() == PlaneKind::Ground &&
        source[matches[i].source_idx].kind() == PlaneKind::Ground) {
      ground = i;
      break;
    }
  }

  auto spans_3d = [&](const Triple& tr) {
    std::array<Vec3, 3> normals;
    for (int k = 0; k < 3; ++k) normals[static_cast<std::size_t>(k)] = target[matches[tr[static_cast<std::size_t>(k)]].target_idx].normal();
    for (int a = 0; a < 3; ++a)
      for (int b = a + 1; b < 3; ++b)
        if (std::abs(normals[static_cast<std::size_t>(a)].dot(normals[static_cast<std::size_t>(b)])) > std::cos(cfg.inlier_angle_deg * kDeg))
          return false;
    return normal_span_ratio(normals) >= cfg.rank_tolerance;
  };

  std::optional<Triple> best_triple;
  std::vector<std::size_t> best_inliers;
  Pose best_pose;

  auto evaluate = [&](Triple tr) {
    std::sort(tr.begin(), tr.end());
    if (!spans_3d(tr)) return;
    const std::array<PlaneMatch, 3> sample{matches[tr[0]], matches[tr[1]], matches[tr[2]]};
    Pose pose;
    try {
      pose = closed_form_pose(sample, source, target, cfg.rank_tolerance);
    } catch (const Error&) {
      return;
    }
    std::vector<std::size_t> inliers;
    for (std::size_t i = 0; i < n; ++i) {
      if (match_agrees(source[matches[i].source_idx], target[matches[i].target_idx], pose, cfg))
        inliers.push_back(i);
    }
    const bool better = !best_triple || inliers.size() > best_inliers.size() ||
                        (inliers.size() == best_inliers.size() && tr < *best_triple);
    if (better) {
      best_triple = tr;
      best_inliers = std::move(inliers);
      best_pose = pose;
    }
  };

  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < n; ++i)
    if (!ground || i != *ground) others.push_back(i);
  const std::size_t m = others.size();
  const double combos = ground ? 0.5 * static_cast<double>(m) * static_cast<double>(m - 1)
                               : static_cast<double>(m) * static_cast<double>(m - 1) *
                                     static_cast<double>(m - 2) / 6.0;
  if (combos <= static_cast<double>(cfg.max_triples)) {
    if (ground) {
      for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = a + 1; b < m; ++b) evaluate({*ground, others[a], others[b]});
    } else {
      for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = a + 1; b < m; ++b)
          for (std::size_t c = b + 1; c < m; ++c) evaluate({others[a], others[b], others[c]});
    }
  } else {
    std::mt19937_64 rng(rng_seed);
    std::uniform_int_distribution<std::size_t> pick(0, m - 1);
    for (std::size_t it = 0; it < cfg.max_triples; ++it) {
      const std::size_t a = pick(rng);
      std::size_t b = pick(rng), c = pick(rng);
      if (ground) {
        if (a == b) continue;
        evaluate({*ground, others[a], others[b]});
      } else {
        if (a == b || b == c || a == c) continue;
        evaluate({others[a], others[b], others[c]});
      }
    }
  }

  if (!best_triple) throw Error(ErrorCode::NoValidModel, "no match combination spans three dimensions");

  // Refit on the consensus set and recount; a three-plane model under noise
  // can reject matches that the refit accepts.
  for (int round = 0; round < 5; ++round) {
    std::vector<PlaneMatch> set;
    for (auto i : best_inliers) set.push_back(matches[i]);
    Pose refit;
    try {
      refit = closed_form_pose(set, source, target, cfg.rank_tolerance);
    } catch (const Error&) {
      break;
    }
    std::vector<std::size_t> inliers;
    for (std::size_t i = 0; i < n; ++i) {
      if (match_agrees(source[matches[i].source_idx], target[matches[i].target_idx], refit, cfg))
        inliers.push_back(i);
    }
    if (inliers.size() < best_inliers.size()) break;
    best_pose = refit;
    if (inliers == best_inliers) break;
    best_inliers = std::move(inliers);
  }

  MatchFilterResult out;
  for (auto i : best_inliers) out.inliers.push_back(matches[i]);
  out.pose = best_pose;
  try {
    out.pose = closed_form_pose(out.inliers, source, target, cfg.rank_tolerance);
  } catch (const Error&) {
    // keep the last consistent pose
  }
  return out;
}

void plane_residuals(std::span<const PlaneMatch> matches, std::span<const Plane> source,
                     std::span<const Plane> target, const PoseVec6& state, Eigen::VectorXd& e,
                     Eigen::MatrixXd* jacobian) {
  const auto rows = static_cast<Eigen::Index>(4 * matches.size());
  e.resize(rows);
  if (jacobian) jacobian->setZero(rows, 6);
  const Mat3 r = rotation_from_angles(state.rx, state.ry, state.rz);
  const Vec3 t(state.x, state.y, state.z);
  std::array<Mat3, 3> dr{};
  if (jacobian) dr = rotation_angle_derivatives(state.rx, state.ry, state.rz);
  for (std::size_t i = 0; i < matches.size(); ++i) {
    const Plane& s = source[matches[i].source_idx];
    const Plane& g = target[matches[i].target_idx];
    const Vec3 rn = r * s.normal();
    const auto row = static_cast<Eigen::Index>(4 * i);
    e.segment<3>(row) = rn - g.normal();
    e[row + 3] = rn.dot(t) + g.d() - s.d();
    if (!jacobian) continue;
    auto& j = *jacobian;
    j.block<1, 3>(row + 3, 0) = rn.transpose();
    for (int k = 0; k < 3; ++k) {
      const Vec3 dn = dr[static_cast<std::size_t>(k)] * s.normal();
      j.block<3, 1>(row, 3 + k) = dn;
      j(row + 3, 3 + k) = dn.dot(t);
    }
  }
}

RegistrationResult gauss_newton_refine(std::span<const PlaneMatch> inliers,
                                       std::span<const Plane> source, std::span<const Plane> target,
                                       const Pose& initial, const RegisterConfig& cfg) {
  if (inliers.size() < 3) throw Error(ErrorCode::NoValidModel, "fewer than three inliers");
  using Vec6 = Eigen::Matrix<double, 6, 1>;
  using Mat6 = Eigen::Matrix<double, 6, 6>;

  Vec6 x = PoseVec6::from_pose(initial).to_vector();
  Eigen::VectorXd e;
  Eigen::MatrixXd j;
  plane_residuals(inliers, source, target, PoseVec6::from_vector(x), e, &j);
  double cost = cost_of(e);

  RegistrationResult result;
  result.converged = false;
  for (std::size_t it = 0; it < cfg.gn_max_iters; ++it) {
    result.iterations = it + 1;
    const Mat6 h = j.transpose() * j;
    const Vec6 g = j.transpose() * e;
    Vec6 delta;
    Eigen::LDLT<Mat6> ldlt(h);
    const Eigen::SelfAdjointEigenSolver<Mat6> eig(h);
    const double emax = eig.eigenvalues().maxCoeff();
    const bool singular = ldlt.info() != Eigen::Success || !(emax > 0.0) ||
                          eig.eigenvalues().minCoeff() <= 1e-12 * emax;
    if (!singular) {
      delta = ldlt.solve(-g);
    } else {
      Eigen::LDLT<Mat6> damped(h + cfg.gn_damping * Mat6::Identity());
      if (damped.info() != Eigen::Success) {
        throw Error(ErrorCode::SingularNormalEquations, "normal equations singular after damping");
      }
      delta = damped.solve(-g);
    }
    if (!delta.allFinite()) {
      throw Error(ErrorCode::SingularNormalEquations, "non-finite Gauss-Newton step");
    }
    if (delta.norm() <= cfg.gn_eps) {
      result.converged = true;
      break;
    }
    double alpha = 1.0;
    bool accepted = false;
    for (std::size_t h_i = 0; h_i <= cfg.gn_max_halvings; ++h_i, alpha *= 0.5) {
      const Vec6 cand = x + alpha * delta;
      Eigen::VectorXd ec;
      plane_residuals(inliers, source, target, PoseVec6::from_vector(cand), ec, nullptr);
      const double cc = cost_of(ec);
      if (cc <= cost) {
        x = cand;
        cost = cc;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // No descent along the step: already at the minimum to numerical precision.
      result.converged = true;
      break;
    }
    plane_residuals(inliers, source, target, PoseVec6::from_vector(x), e, &j);
    if (alpha * delta.norm() <= cfg.gn_eps) {
      result.converged = true;
      break;
    }
  }
  result.pose = PoseVec6::from_vector(x).to_pose();
  result.inlier_matches.assign(inliers.begin(), inliers.end());
  result.final_residual = cost;
  return result;
}

RegistrationResult register_frames(std::span<const DetectedPlane> source,
                                   std::span<const DetectedPlane> target,
                                   const RegisterConfig& cfg, std::uint64_t rng_seed) {
  const auto matches = match_planes(source, target, cfg.match);
  if (matches.size() < 3) throw Error(ErrorCode::NoValidModel, "fewer than three plane matches");
  std::vector<Vec3> normals;
  for (const auto& m : matches) normals.push_back(target[m.target_idx].plane.normal());
  if (normal_span_ratio(normals) < cfg.rank_tolerance) {
    throw Error(ErrorCode::RankDeficient, "matched plane normals do not constrain translation");
  }
  std::vector<Plane> sp, tp;
  for (const auto& p : source) sp.push_back(p.plane);
  for (const auto& p : target) tp.push_back(p.plane);
  const auto filtered = ransac_match_filter(matches, sp, tp, cfg, rng_seed);
  return gauss_newton_refine(filtered.inliers, sp, tp, filtered.pose, cfg);
}

}  // namespace refmap
