#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "refmap/classify.hpp"
#include "refmap/detect.hpp"
#include "refmap/plane_map.hpp"
#include "refmap/register.hpp"
#include "refmap/sim.hpp"

namespace refmap {

/// Every tunable threshold of the library, settable from a `key = value`
/// file. Keys are `<section>.<field>`, e.g. `detect.ransac_dist`.
struct PipelineConfig {
  DetectConfig detect;
  MapConfig map;  // includes map.registration
  ClassifyConfig classify;
  sim::SimConfig sim;
  std::uint64_t seed = 42;

  /// Applies one assignment; throws ConfigError for unknown keys or values
  /// that do not parse.
  void set(const std::string& key, const std::string& value);
  /// Parses `key = value` lines; '#' starts a comment.
  void apply_text(const std::string& text);
  void apply_file(const std::filesystem::path& path);
  /// All keys with their current values, one `key = value` per line.
  std::string dump() const;
};

}  // namespace refmap
