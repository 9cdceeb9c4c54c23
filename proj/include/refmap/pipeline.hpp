#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "refmap/classify.hpp"
#include "refmap/cloud.hpp"
#include "refmap/config.hpp"
#include "refmap/detect.hpp"
#include "refmap/eval.hpp"
#include "refmap/plane_map.hpp"

namespace refmap {

struct Frame {
  std::int64_t id = 0;
  OrganizedCloud cloud;
};

/// All `*.drs` files of a directory, ordered by the integer frame id in
/// their file name.
std::vector<Frame> load_frames(const std::filesystem::path& scan_dir);

/// Planes of one scan in the sensor frame: reflective planes first, then
/// ground and ordinary planes extracted from the cloud with reflection-
/// affected returns removed.
struct FramePlanes {
  std::vector<DetectedPlane> reflective;
  std::vector<DetectedPlane> structural;  // ground + ordinary

  std::vector<DetectedPlane> all() const;
};

FramePlanes extract_frame_planes(const OrganizedCloud& cloud, const DetectConfig& cfg,
                                 std::uint64_t seed);

/// Reflective-plane map from trusted poses. Throws MissingPose when a frame
/// has no trajectory entry.
GlobalPlaneMap build_map(const std::vector<Frame>& frames, const Trajectory& poses,
                         const PipelineConfig& cfg);

enum class FrameStatus { Ok, Degenerate, Fallback };
const char* to_string(FrameStatus status);

struct FrameReport {
  std::int64_t frame_id = 0;
  FrameStatus status = FrameStatus::Ok;
  std::size_t planes = 0;
  std::size_t map_matches = 0;
  std::string detail;
};

struct SlamResult {
  GlobalPlaneMap map;
  Trajectory trajectory;
  std::vector<FrameReport> reports;
};

/// Plane-based SLAM; the first frame defines the world frame. Degenerate
/// or failed frames keep the previous pose and do not update the map.
SlamResult run_slam(const std::vector<Frame>& frames, const PipelineConfig& cfg);

std::string format_status(const std::vector<FrameReport>& reports);

/// Classifies every frame; throws MissingPose for frames without a pose.
std::vector<LabeledCloud> classify_frames(const std::vector<Frame>& frames, const Trajectory& poses,
                                          const GlobalPlaneMap& map, const PipelineConfig& cfg);

/// Joins `labeled/<id>.lbc` with `labels/<id>.lbl` by file stem.
eval::ConfusionMatrix evaluate_dirs(const std::filesystem::path& labeled_dir,
                                    const std::filesystem::path& label_dir);

// Command entry points used by the CLI. Each writes its outputs and the
// resolved config, and returns a short summary for the log.
std::string cmd_simulate(const std::string& fixture, const std::filesystem::path& scene_file,
                         const std::filesystem::path& trajectory_file,
                         const std::filesystem::path& out_dir, const PipelineConfig& cfg);
std::string cmd_build_map(const std::filesystem::path& scan_dir, const std::filesystem::path& pose_file,
                          const std::filesystem::path& map_file, const PipelineConfig& cfg);
std::string cmd_slam(const std::filesystem::path& scan_dir, const std::filesystem::path& map_file,
                     const std::filesystem::path& pose_file, const std::filesystem::path& status_file,
                     const PipelineConfig& cfg);
std::string cmd_classify(const std::filesystem::path& scan_dir, const std::filesystem::path& pose_file,
                         const std::filesystem::path& map_file, const std::filesystem::path& out_dir,
                         OutputMode mode, const PipelineConfig& cfg);
std::string cmd_evaluate(const std::filesystem::path& labeled_dir, const std::filesystem::path& label_dir,
                         const std::filesystem::path& report_prefix);

}  // namespace refmap
