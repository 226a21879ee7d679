#pragma once

// Batch processing of multiview projects: calibrate-warp, fuse the front-lit
// and back-lit stacks of every view, mask, and write RGBA results.

#include "fixedlens/fusion.hpp"
#include "fixedlens/masking.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fixedlens {

struct ViewConfig {
  std::string view_id;
  int pan_index = 0;
  int tilt_index = 0;
  std::filesystem::path slice_dir;
  std::optional<std::filesystem::path> backlit_dir;
  std::optional<std::filesystem::path> calibration;  // overrides the project one
  int line = 0;                                      // line of the [view] header
};

struct ProjectConfig {
  std::filesystem::path source;
  std::filesystem::path output_dir;
  std::optional<std::filesystem::path> calibration;  // identity when absent
  FusionParams fusion;
  MaskParams mask;
  int bit_depth = 16;
  std::vector<ViewConfig> views;
};

struct ConfigIssue {
  int line = 0;  // 0 when the issue is not tied to a line
  std::string message;
};

struct ConfigCheck {
  std::optional<ProjectConfig> config;  // set only when there are no issues
  std::vector<ConfigIssue> issues;

  bool ok() const { return issues.empty(); }
  /// One "<file>:<line>: message" per issue.
  std::string describe(const std::filesystem::path& path) const;
};

/// Parses and checks a project file without stopping at the first problem:
/// syntax, value ranges, duplicate view ids, and existence of every
/// referenced directory and calibration file. Relative paths resolve
/// against the config file's directory.
ConfigCheck validate_config(const std::filesystem::path& path);

/// validate_config, throwing ValidationError listing every issue.
ProjectConfig load_config(const std::filesystem::path& path);

/// Sorted .png/.tif/.tiff files directly inside `dir`.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

struct PipelineOptions {
  int threads = 1;
  bool keep_going = false;
  std::ostream* log = nullptr;  // per-view timings and progress
};

enum class ViewStatus { Ok, Failed, Skipped };

struct ViewOutcome {
  std::string view_id;
  ViewStatus status = ViewStatus::Skipped;
  std::filesystem::path output;
  bool masked = false;
  int slices = 0;
  int backlit_slices = 0;
  std::string message;
  double seconds = 0.0;  // not part of the report text
};

struct PipelineReport {
  std::vector<ViewOutcome> views;  // config order

  int failures() const;
  /// Line-oriented report, one `view=` line per view and a summary line.
  /// Timings are left out so identical runs give identical reports.
  std::string to_text() const;
};

/// Processes every view and writes `<output_dir>/<view_id>.png` plus
/// `<output_dir>/report.txt`. Views run on up to `threads` workers; the
/// report is in config order. Without keep_going, views after the first
/// failing one are reported as skipped and leave no output.
PipelineReport run_pipeline(const ProjectConfig& config, const PipelineOptions& options = {});

}  // namespace fixedlens
