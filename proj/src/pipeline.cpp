#include "refmap/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <map>

#include "refmap/errors.hpp"
#include "refmap/register.hpp"
#include "refmap/sim.hpp"
#include "refmap/text_io.hpp"

namespace refmap {

namespace fs = std::filesystem;

namespace {

std::int64_t frame_id_from_stem(const fs::path& path) {
  const std::string stem = path.stem().string();
  std::int64_t id = 0;
  const auto res = std::from_chars(stem.data(), stem.data() + stem.size(), id);
  if (res.ec != std::errc() || res.ptr != stem.data() + stem.size()) {
    throw Error(ErrorCode::ParseError, "file name '" + path.filename().string() + "' is not a frame id");
  }
  return id;
}

std::vector<fs::path> files_with_extension(const fs::path& dir, const std::string& ext) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::IoError, "not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end(), [](const fs::path& a, const fs::path& b) {
    return frame_id_from_stem(a) < frame_id_from_stem(b);
  });
  return out;
}

const Pose& require_pose(const Trajectory& poses, std::int64_t id) {
  const Pose* p = poses.find(id);
  if (!p) throw Error(ErrorCode::MissingPose, "no pose for frame " + std::to_string(id));
  return *p;
}

std::vector<DetectedPlane> to_world(std::span<const DetectedPlane> planes, const Pose& pose) {
  std::vector<DetectedPlane> out;
  out.reserve(planes.size());
  for (const auto& p : planes) out.push_back(transform_detected_plane(p, pose));
  return out;
}

void write_resolved(const fs::path& path, const PipelineConfig& cfg) { text::write_file(path, cfg.dump()); }

}  // namespace

std::vector<Frame> load_frames(const fs::path& scan_dir) {
  std::vector<Frame> frames;
  for (const auto& path : files_with_extension(scan_dir, ".drs")) {
    frames.push_back({frame_id_from_stem(path), load_dual_scan(path)});
  }
  return frames;
}

std::vector<DetectedPlane> FramePlanes::all() const {
  std::vector<DetectedPlane> out = reflective;
  out.insert(out.end(), structural.begin(), structural.end());
  return out;
}

FramePlanes extract_frame_planes(const OrganizedCloud& cloud, const DetectConfig& cfg, std::uint64_t seed) {
  FramePlanes out;
  auto det = detect_reflective_planes(cloud, cfg, seed);
  out.reflective = std::move(det.planes);

  std::vector<std::uint8_t> affected(static_cast<std::size_t>(cloud.n_rings()) *
                                         static_cast<std::size_t>(cloud.n_bins()),
                                     0);
  for (const auto& c : det.affected_cells) {
    affected[static_cast<std::size_t>(c.ring) * static_cast<std::size_t>(cloud.n_bins()) +
             static_cast<std::size_t>(c.bin)] = 1;
  }
  std::vector<Point3> points;
  for (int r = 0; r < cloud.n_rings(); ++r) {
    for (int b = 0; b < cloud.n_bins(); ++b) {
      const auto& ret = cloud.at(Layer::Strongest, r, b);
      if (!ret || affected[static_cast<std::size_t>(r) * static_cast<std::size_t>(cloud.n_bins()) +
                           static_cast<std::size_t>(b)]) {
        continue;
      }
      // Returns at or beyond a detected reflective surface are not trusted.
      bool through = false;
      for (const auto& rp : out.reflective) {
        const auto hit = ray_plane_intersection(Point3::Zero(), ret->point / ret->range, rp.plane);
        if (hit && ret->range >= hit->t - cfg.ransac_dist &&
            point_in_hull(rp.hull, project_to_hull_frame(rp.hull, hit->point))) {
          through = true;
          break;
        }
      }
      if (!through) points.push_back(ret->point);
    }
  }

  if (auto ground = extract_ground_plane(points, cfg, seed + 1)) {
    std::vector<bool> used(points.size(), false);
    for (auto i : ground->inliers) used[i] = true;
    std::vector<Point3> rest;
    rest.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i)
      if (!used[i]) rest.push_back(points[i]);
    points = std::move(rest);
    ground->inliers.clear();
    out.structural.push_back(std::move(*ground));
  }
  auto ordinary = extract_ordinary_planes(points, cfg, seed + 2);
  for (auto& p : ordinary) {
    p.inliers.clear();
    out.structural.push_back(std::move(p));
  }
  return out;
}

GlobalPlaneMap build_map(const std::vector<Frame>& frames, const Trajectory& poses, const PipelineConfig& cfg) {
  GlobalPlaneMap map;
  for (const auto& f : frames) {
    const Pose& pose = require_pose(poses, f.id);
    const auto det = detect_reflective_planes(f.cloud, cfg.detect, cfg.seed + static_cast<std::uint64_t>(f.id));
    const auto world = to_world(det.planes, pose);
    const auto matches = match_to_map(world, map, cfg.map);
    map = prune_map(update_map(std::move(map), world, matches, cfg.map), cfg.map);
  }
  return map;
}

const char* to_string(FrameStatus status) {
  switch (status) {
    case FrameStatus::Ok: return "ok";
    case FrameStatus::Degenerate: return "degenerate";
    case FrameStatus::Fallback: return "fallback";
  }
  return "fallback";
}

SlamResult run_slam(const std::vector<Frame>& frames, const PipelineConfig& cfg) {
  SlamResult result;
  std::vector<DetectedPlane> prev_local;
  Pose prev_pose;
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const auto& f = frames[k];
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(f.id) * 7919u;
    const auto local = extract_frame_planes(f.cloud, cfg.detect, seed).all();
    FrameReport report;
    report.frame_id = f.id;
    report.planes = local.size();
    Pose pose;
    if (k == 0) {
      pose = Pose::identity();
    } else {
      Pose initial = prev_pose;
      bool f2f_ok = false;
      try {
        const auto reg = register_frames(local, prev_local, cfg.map.registration, seed + 3);
        initial = prev_pose * reg.pose;
        f2f_ok = true;
      } catch (const Error& e) {
        report.status = e.code() == ErrorCode::RankDeficient ? FrameStatus::Degenerate : FrameStatus::Fallback;
        report.detail = std::string("frame-to-frame: ") + e.what();
      }
      const auto s2m = scan_to_map_optimize(local, result.map, initial, cfg.map, seed + 4);
      pose = s2m.registration.pose;
      if (!s2m.refined) {
        const bool rank = s2m.failure == to_string(ErrorCode::RankDeficient);
        if (report.status == FrameStatus::Ok) {
          report.status = rank ? FrameStatus::Degenerate : FrameStatus::Fallback;
        }
        if (!report.detail.empty()) report.detail += "; ";
        report.detail += "scan-to-map: " + s2m.failure;
        if (!f2f_ok) pose = prev_pose;
      } else if (report.status != FrameStatus::Ok) {
        // Frame-to-frame failed but the map anchored the frame; a
        // degenerate frame stays flagged since translation is unobservable.
        if (report.status == FrameStatus::Fallback) report.status = FrameStatus::Ok;
      }
    }
    if (report.status == FrameStatus::Ok) {
      const auto world = to_world(local, pose);
      const auto matches = match_to_map(world, result.map, cfg.map);
      report.map_matches = matches.size();
      result.map = prune_map(update_map(std::move(result.map), world, matches, cfg.map), cfg.map);
    }
    result.trajectory.entries.push_back({f.id, pose});
    result.reports.push_back(std::move(report));
    prev_local = local;
    prev_pose = pose;
  }
  return result;
}

std::string format_status(const std::vector<FrameReport>& reports) {
  std::string out = "# frame_id status planes map_matches detail\n";
  for (const auto& r : reports) {
    out += std::to_string(r.frame_id) + " " + to_string(r.status) + " " + std::to_string(r.planes) + " " +
           std::to_string(r.map_matches) + (r.detail.empty() ? "" : " " + r.detail) + "\n";
  }
  return out;
}

std::vector<LabeledCloud> classify_frames(const std::vector<Frame>& frames, const Trajectory& poses,
                                          const GlobalPlaneMap& map, const PipelineConfig& cfg) {
  std::vector<LabeledCloud> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    auto labeled = classify_cloud(f.cloud, require_pose(poses, f.id), map, cfg.classify);
    labeled.frame_id = f.id;
    out.push_back(std::move(labeled));
  }
  return out;
}

eval::ConfusionMatrix evaluate_dirs(const fs::path& labeled_dir, const fs::path& label_dir) {
  eval::ConfusionMatrix cm;
  const auto files = files_with_extension(labeled_dir, ".lbc");
  for (const auto& path : files) {
    const auto predicted = load_labeled(path);
    const auto truth_path = label_dir / (path.stem().string() + ".lbl");
    if (!fs::exists(truth_path)) throw Error(ErrorCode::IoError, "missing ground truth " + truth_path.string());
    const auto truth = load_labels(truth_path);
    if (truth.labels.size() != predicted.records.size()) {
      throw Error(ErrorCode::ShapeError, "label count mismatch for frame " + path.stem().string());
    }
    for (std::size_t i = 0; i < truth.labels.size(); ++i) {
      cm.add(eval::truth_class(truth.labels[i]), static_cast<std::size_t>(predicted.records[i].label));
    }
  }
  return cm;
}

std::string cmd_simulate(const std::string& fixture, const fs::path& scene_file, const fs::path& trajectory_file,
                         const fs::path& out_dir, const PipelineConfig& cfg) {
  sim::Scene scene;
  Trajectory traj;
  if (!fixture.empty()) {
    auto f = sim::make_fixture(fixture);
    scene = std::move(f.scene);
    traj = std::move(f.trajectory);
  } else {
    if (scene_file.empty() || trajectory_file.empty()) {
      throw Error(ErrorCode::ConfigError, "simulate needs --fixture or both --scene and --trajectory");
    }
    scene = sim::load_scene(scene_file);
    traj = load_trajectory(trajectory_file);
  }
  sim::render_sequence(scene, sim::SensorModel::hesai_qt64(), traj, cfg.sim, cfg.seed, out_dir);
  write_resolved(out_dir / "resolved.cfg", cfg);
  return "rendered " + std::to_string(traj.entries.size()) + " frames of " +
         std::to_string(scene.surfaces.size()) + " surfaces into " + out_dir.string();
}

std::string cmd_build_map(const fs::path& scan_dir, const fs::path& pose_file, const fs::path& map_file,
                          const PipelineConfig& cfg) {
  const auto frames = load_frames(scan_dir);
  const auto poses = load_trajectory(pose_file);
  const auto map = build_map(frames, poses, cfg);
  save_gpm(map_file, map);
  write_resolved(fs::path(map_file.string() + ".cfg"), cfg);
  return "map of " + std::to_string(map.planes.size()) + " planes from " + std::to_string(frames.size()) +
         " frames";
}

std::string cmd_slam(const fs::path& scan_dir, const fs::path& map_file, const fs::path& pose_file,
                     const fs::path& status_file, const PipelineConfig& cfg) {
  const auto frames = load_frames(scan_dir);
  const auto result = run_slam(frames, cfg);
  save_gpm(map_file, result.map);
  save_trajectory(pose_file, result.trajectory);
  text::write_file(status_file, format_status(result.reports));
  write_resolved(fs::path(map_file.string() + ".cfg"), cfg);
  std::size_t flagged = 0;
  for (const auto& r : result.reports) flagged += r.status != FrameStatus::Ok ? 1 : 0;
  return "slam over " + std::to_string(frames.size()) + " frames, " + std::to_string(flagged) +
         " flagged, map of " + std::to_string(result.map.planes.size()) + " planes";
}

std::string cmd_classify(const fs::path& scan_dir, const fs::path& pose_file, const fs::path& map_file,
                         const fs::path& out_dir, OutputMode mode, const PipelineConfig& cfg) {
  const auto frames = load_frames(scan_dir);
  const auto poses = load_trajectory(pose_file);
  const auto map = load_gpm(map_file);
  const auto labeled = classify_frames(frames, poses, map, cfg);
  std::size_t reflections = 0;
  for (const auto& l : labeled) {
    const std::string stem = sim::frame_file_stem(l.frame_id);
    save_labeled(out_dir / "labeled" / (stem + ".lbc"), l);
    save_dual_scan(out_dir / "filtered" / (stem + ".drs"), filtered_cloud(l, mode));
    std::string xyz;
    for (const auto& p : mirror_back(l, map)) {
      xyz += text::format_double(p.x()) + " " + text::format_double(p.y()) + " " + text::format_double(p.z()) + "\n";
      ++reflections;
    }
    text::write_file(out_dir / "mirrored" / (stem + ".xyz"), xyz);
  }
  write_resolved(out_dir / "resolved.cfg", cfg);
  return "classified " + std::to_string(labeled.size()) + " frames, " + std::to_string(reflections) +
         " reflection points mirrored back";
}

std::string cmd_evaluate(const fs::path& labeled_dir, const fs::path& label_dir, const fs::path& report_prefix) {
  const auto cm = evaluate_dirs(labeled_dir, label_dir);
  const std::string table = eval::format_report_table(cm);
  if (!report_prefix.empty()) {
    text::write_file(fs::path(report_prefix.string() + ".txt"), table);
    text::write_file(fs::path(report_prefix.string() + ".kv"), eval::format_report_kv(cm));
  }
  return table;
}

}  // namespace refmap
