#include "refmap/config.hpp"

#include <charconv>
#include <type_traits>

#include "refmap/errors.hpp"
#include "refmap/text_io.hpp"

namespace refmap {

namespace {

template <typename Cfg, typename F>
void visit_fields(Cfg& c, F&& f) {
  auto& d = c.detect;
  f("detect.divergence_threshold", d.divergence_threshold);
  f("detect.intensity_low", d.intensity_low);
  f("detect.intensity_high", d.intensity_high);
  f("detect.max_gap", d.max_gap);
  f("detect.horizontal_elevation_deg", d.horizontal_elevation_deg);
  f("detect.min_peak_run", d.min_peak_run);
  f("detect.min_peak_inliers", d.min_peak_inliers);
  f("detect.min_reflective_inliers", d.min_reflective_inliers);
  f("detect.ransac_dist", d.ransac_dist);
  f("detect.ransac_max_iters", d.ransac_max_iters);
  f("detect.ransac_confidence", d.ransac_confidence);
  f("detect.dedup_overlap", d.dedup_overlap);
  f("detect.normal_k", d.normal_k);
  f("detect.grow_radius", d.grow_radius);
  f("detect.normal_angle_deg", d.normal_angle_deg);
  f("detect.min_plane_inliers", d.min_plane_inliers);
  f("detect.min_plane_area", d.min_plane_area);
  f("detect.min_plane_density", d.min_plane_density);
  f("detect.low_density_min_inliers", d.low_density_min_inliers);
  f("detect.max_planes", d.max_planes);
  f("detect.ground_min_inliers", d.ground_min_inliers);

  auto& r = c.map.registration;
  f("register.match_min_cos", r.match.min_cos);
  f("register.match_max_d_gap", r.match.max_d_gap);
  f("register.match_max_centroid_gap", r.match.max_centroid_gap);
  f("register.match_max_area_ratio", r.match.max_area_ratio);
  f("register.inlier_angle_deg", r.inlier_angle_deg);
  f("register.inlier_d_gap", r.inlier_d_gap);
  f("register.rank_tolerance", r.rank_tolerance);
  f("register.max_triples", r.max_triples);
  f("register.gn_eps", r.gn_eps);
  f("register.gn_max_iters", r.gn_max_iters);
  f("register.gn_max_halvings", r.gn_max_halvings);
  f("register.gn_damping", r.gn_damping);

  auto& m = c.map;
  f("map.match_min_cos", m.match.min_cos);
  f("map.match_max_d_gap", m.match.max_d_gap);
  f("map.match_max_centroid_gap", m.match.max_centroid_gap);
  f("map.min_overlap", m.min_overlap);
  f("map.probation_frames", m.probation_frames);
  f("map.min_observations", m.min_observations);
  f("map.merge_angle_deg", m.merge_angle_deg);
  f("map.merge_d_gap", m.merge_d_gap);

  auto& k = c.classify;
  f("classify.surface_band", k.surface_band);
  f("classify.bin_window", k.bin_window);
  f("classify.neighbor_radius", k.neighbor_radius);

  auto& s = c.sim;
  f("sim.cone_deg", s.cone_deg);
  f("sim.surface_falloff_deg", s.surface_falloff_deg);
  f("sim.range_scale", s.range_scale);
  f("sim.i_min", s.i_min);
  f("sim.noise_sigma", s.noise_sigma);

  f("seed", c.seed);
}

template <typename T>
void assign(T& field, const std::string& key, const std::string& value) {
  auto fail = [&]() { return Error(ErrorCode::ConfigError, "invalid value '" + value + "' for " + key); };
  if constexpr (std::is_floating_point_v<T>) {
    try {
      field = text::parse_double(value, 0);
    } catch (const Error&) {
      throw fail();
    }
  } else {
    T parsed{};
    const auto* end = value.data() + value.size();
    const auto res = std::from_chars(value.data(), end, parsed);
    if (res.ec != std::errc() || res.ptr != end) throw fail();
    field = parsed;
  }
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& value) {
  bool found = false;
  visit_fields(*this, [&](const char* name, auto& field) {
    if (key != name) return;
    assign(field, key, value);
    found = true;
  });
  if (!found) throw Error(ErrorCode::ConfigError, "unknown config key '" + key + "'");
}

void PipelineConfig::apply_text(const std::string& content) {
  const auto lines = text::split_lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::ConfigError, "line " + std::to_string(i + 1) + ": expected 'key = value'");
    }
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void PipelineConfig::apply_file(const std::filesystem::path& path) { apply_text(text::read_file(path)); }

std::string PipelineConfig::dump() const {
  std::string out;
  visit_fields(*this, [&](const char* name, const auto& field) {
    using T = std::decay_t<decltype(field)>;
    out += name;
    out += " = ";
    if constexpr (std::is_floating_point_v<T>) {
      out += text::format_double(field);
    } else {
      out += std::to_string(field);
    }
    out += "\n";
  });
  return out;
}

}  // namespace refmap
