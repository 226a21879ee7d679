#include "fixedlens/pipeline.hpp"

#include "fixedlens/calibration.hpp"
#include "fixedlens/image_io.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace fixedlens {

namespace fs = std::filesystem;

std::string ConfigCheck::describe(const fs::path& path) const {
  std::ostringstream os;
  for (const auto& issue : issues) {
    os << path.string();
    if (issue.line > 0) os << ':' << issue.line;
    os << ": " << issue.message << '\n';
  }
  return os.str();
}

std::vector<fs::path> list_images(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".tif" || ext == ".tiff") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

namespace {

bool valid_view_id(const std::string& id) {
  if (id.empty() || id == "report") return false;
  return std::all_of(id.begin(), id.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '-' || c == '.';
  }) && id.front() != '.';
}

void set_mask_param(MaskParams& mask, const std::string& key, std::string_view value) {
  if (key == "method") {
    if (value == "otsu") {
      mask.method = ThresholdMethod::Otsu;
    } else if (value == "fixed") {
      mask.method = ThresholdMethod::Fixed;
    } else {
      throw ValidationError("mask method must be 'otsu' or 'fixed'");
    }
  } else if (key == "threshold") {
    mask.threshold = text::to_double(value, key);
    if (!(mask.threshold >= 0.0 && mask.threshold <= 1.0)) throw ValidationError("threshold must lie in [0,1]");
  } else if (key == "invert") {
    mask.invert = text::to_bool(value, key);
  } else if (key == "open_radius") {
    mask.morph_open_radius = text::to_int(value, key);
    if (mask.morph_open_radius < 0) throw ValidationError("open_radius must be >= 0");
  } else {
    throw ValidationError("unknown mask key '" + key + "'");
  }
}

}  // namespace

ConfigCheck validate_config(const fs::path& path) {
  ConfigCheck check;
  std::ifstream in(path);
  if (!in) {
    check.issues.push_back({0, "cannot read config file"});
    return check;
  }
  const fs::path base = path.parent_path();
  const auto resolve = [&](std::string_view p) {
    fs::path q{std::string(p)};
    return q.is_absolute() ? q : base / q;
  };
  const auto issue = [&](int line, std::string msg) { check.issues.push_back({line, std::move(msg)}); };

  ProjectConfig cfg;
  cfg.source = path;
  cfg.output_dir = resolve("output");
  int calibration_line = 0;
  std::vector<int> calibration_lines;
  std::map<std::string, int> seen_ids;
  std::vector<int> view_id_lines;
  std::string section;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = text::strip_comment(line);
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') {
        issue(line_no, "malformed section header");
        continue;
      }
      section = std::string(text::trim(body.substr(1, body.size() - 2)));
      if (section == "view") {
        cfg.views.emplace_back();
        cfg.views.back().line = line_no;
        view_id_lines.push_back(0);
        calibration_lines.push_back(0);
      } else if (section != "project" && section != "fusion" && section != "mask") {
        issue(line_no, "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      issue(line_no, "expected key = value");
      continue;
    }
    const std::string key(text::trim(body.substr(0, eq)));
    const std::string_view value = text::trim(body.substr(eq + 1));
    try {
      if (section == "project") {
        if (key == "output_dir") {
          cfg.output_dir = resolve(value);
        } else if (key == "calibration") {
          cfg.calibration = resolve(value);
          calibration_line = line_no;
        } else if (key == "bit_depth") {
          cfg.bit_depth = text::to_int(value, key);
          if (cfg.bit_depth != 8 && cfg.bit_depth != 16) throw ValidationError("bit_depth must be 8 or 16");
        } else {
          throw ValidationError("unknown project key '" + key + "'");
        }
      } else if (section == "fusion") {
        set_fusion_param(cfg.fusion, key, std::string(value));
      } else if (section == "mask") {
        set_mask_param(cfg.mask, key, value);
      } else if (section == "view") {
        ViewConfig& v = cfg.views.back();
        if (key == "view_id") {
          v.view_id = std::string(value);
          view_id_lines.back() = line_no;
          if (!valid_view_id(v.view_id)) throw ValidationError("view_id '" + v.view_id + "' is not a usable file name");
          const auto [it, inserted] = seen_ids.emplace(v.view_id, line_no);
          if (!inserted) {
            throw ValidationError("view_id '" + v.view_id + "' on line " + std::to_string(line_no) +
                                  " duplicates line " + std::to_string(it->second));
          }
        } else if (key == "pan_index") {
          v.pan_index = text::to_int(value, key);
        } else if (key == "tilt_index") {
          v.tilt_index = text::to_int(value, key);
        } else if (key == "slice_dir") {
          v.slice_dir = resolve(value);
        } else if (key == "backlit_dir") {
          v.backlit_dir = resolve(value);
        } else if (key == "calibration") {
          v.calibration = resolve(value);
          calibration_lines.back() = line_no;
        } else {
          throw ValidationError("unknown view key '" + key + "'");
        }
      } else {
        throw ValidationError("key '" + key + "' outside a known section");
      }
    } catch (const ValidationError& e) {
      issue(line_no, e.what());
    }
  }

  if (cfg.views.empty()) issue(0, "project defines no [view] sections");

  const auto check_calibration = [&](const fs::path& p, int line) {
    if (!fs::is_regular_file(p)) {
      issue(line, "calibration file " + p.string() + " does not exist");
      return;
    }
    try {
      read_calibration(p);
    } catch (const Error& e) {
      issue(line, e.what());
    }
  };
  const auto check_dir = [&](const fs::path& p, int line, const std::string& what) {
    if (!fs::is_directory(p)) {
      issue(line, what + " " + p.string() + " is not a directory");
    } else if (list_images(p).empty()) {
      issue(line, what + " " + p.string() + " contains no .png/.tif images");
    }
  };
  if (cfg.calibration) check_calibration(*cfg.calibration, calibration_line);
  for (std::size_t i = 0; i < cfg.views.size(); ++i) {
    const ViewConfig& v = cfg.views[i];
    if (v.view_id.empty() && view_id_lines[i] == 0) issue(v.line, "view is missing view_id");
    if (v.slice_dir.empty()) {
      issue(v.line, "view is missing slice_dir");
    } else {
      check_dir(v.slice_dir, v.line, "slice_dir");
    }
    if (v.backlit_dir) check_dir(*v.backlit_dir, v.line, "backlit_dir");
    if (v.calibration) check_calibration(*v.calibration, calibration_lines[i]);
  }

  std::stable_sort(check.issues.begin(), check.issues.end(),
                   [](const ConfigIssue& a, const ConfigIssue& b) { return a.line < b.line; });
  if (check.issues.empty()) check.config = std::move(cfg);
  return check;
}

ProjectConfig load_config(const fs::path& path) {
  ConfigCheck check = validate_config(path);
  if (!check.ok()) throw ValidationError("invalid project config:\n" + check.describe(path));
  return std::move(*check.config);
}

int PipelineReport::failures() const {
  return static_cast<int>(
      std::count_if(views.begin(), views.end(), [](const ViewOutcome& v) { return v.status == ViewStatus::Failed; }));
}

namespace {

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

}  // namespace

std::string PipelineReport::to_text() const {
  std::ostringstream os;
  int ok = 0, failed = 0, skipped = 0;
  for (const auto& v : views) {
    os << "view=" << v.view_id;
    switch (v.status) {
      case ViewStatus::Ok:
        ++ok;
        os << " status=ok output=" << v.output.filename().string() << " slices=" << v.slices
           << " backlit=" << v.backlit_slices << " mask=" << (v.masked ? "yes" : "none");
        if (!v.masked) os << " note=" << quoted("no mask");
        break;
      case ViewStatus::Failed:
        ++failed;
        os << " status=failed error=" << quoted(v.message);
        break;
      case ViewStatus::Skipped:
        ++skipped;
        os << " status=skipped";
        break;
    }
    os << '\n';
  }
  os << "summary views=" << views.size() << " ok=" << ok << " failed=" << failed << " skipped=" << skipped << '\n';
  return os.str();
}

namespace {

std::vector<Homography> homographies_for(const std::optional<CalibrationTable>& table, std::size_t count,
                                         const std::string& what) {
  std::vector<Homography> hs;
  for (std::size_t i = 0; i < count; ++i) {
    if (!table) {
      hs.push_back(Homography::identity());
      continue;
    }
    const auto it = table->find(static_cast<int>(i));
    if (it == table->end()) throw ValidationError("calibration has no record for " + what + " slice " + std::to_string(i));
    hs.push_back(it->second);
  }
  return hs;
}

ImageBuffer fuse_dir(const fs::path& dir, const std::optional<CalibrationTable>& table, const FusionParams& params,
                     const std::string& what, int& count) {
  std::vector<ImageBuffer> slices;
  for (const auto& f : list_images(dir)) slices.push_back(load_image(f));
  if (slices.empty()) throw EmptyStackError(what + " directory " + dir.string() + " has no images");
  count = static_cast<int>(slices.size());
  return fuse_calibrated(slices, homographies_for(table, slices.size(), what), params).fused;
}

void process_view(const ProjectConfig& cfg, const ViewConfig& view, const std::optional<CalibrationTable>& shared,
                  ViewOutcome& out) {
  std::optional<CalibrationTable> table = shared;
  if (view.calibration) table = read_calibration(*view.calibration);

  ImageBuffer fused = fuse_dir(view.slice_dir, table, cfg.fusion, "front-lit", out.slices);
  if (view.backlit_dir) {
    const ImageBuffer back = fuse_dir(*view.backlit_dir, table, cfg.fusion, "back-lit", out.backlit_slices);
    if (back.width() != fused.width() || back.height() != fused.height()) {
      throw DimensionError("back-lit and front-lit stacks differ in size");
    }
    Mask valid = luma(backlight_mask(back, cfg.mask)) > 0.5;
    if (fused.has_validity()) valid = valid && fused.validity();
    fused.set_validity(std::move(valid));
    out.masked = true;
  } else {
    fused.set_validity(Mask::Constant(fused.height(), fused.width(), true));
  }
  out.output = cfg.output_dir / (view.view_id + ".png");
  save_image(fused, out.output, cfg.bit_depth);
}

}  // namespace

PipelineReport run_pipeline(const ProjectConfig& config, const PipelineOptions& options) {
  fs::create_directories(config.output_dir);
  std::optional<CalibrationTable> shared;
  if (config.calibration) shared = read_calibration(*config.calibration);

  PipelineReport report;
  report.views.resize(config.views.size());
  for (std::size_t i = 0; i < config.views.size(); ++i) report.views[i].view_id = config.views[i].view_id;

  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::mutex log_mutex;
  const auto worker = [&]() {
    for (;;) {
      if (stop.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= config.views.size()) return;
      ViewOutcome& out = report.views[i];
      const auto t0 = std::chrono::steady_clock::now();
      try {
        process_view(config, config.views[i], shared, out);
        out.status = ViewStatus::Ok;
      } catch (const std::exception& e) {
        out.status = ViewStatus::Failed;
        out.message = e.what();
        if (!options.keep_going) stop.store(true);
      }
      out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (options.log) {
        std::lock_guard<std::mutex> lock(log_mutex);
        *options.log << "view " << out.view_id << ": " << (out.status == ViewStatus::Ok ? "ok" : "failed") << " in "
                     << out.seconds << " s\n";
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(options.threads, static_cast<int>(config.views.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  if (!options.keep_going) {
    // Everything after the first failure in config order counts as skipped,
    // whatever the workers happened to finish.
    bool failed = false;
    for (auto& v : report.views) {
      if (failed) {
        if (v.status == ViewStatus::Ok) fs::remove(v.output);
        v = ViewOutcome{v.view_id, ViewStatus::Skipped, {}, false, 0, 0, {}, v.seconds};
      } else if (v.status == ViewStatus::Failed) {
        failed = true;
      }
    }
  }

  std::ofstream rep(config.output_dir / "report.txt", std::ios::binary);
  if (!rep) throw IoError("cannot write " + (config.output_dir / "report.txt").string());
  rep << report.to_text();
  return report;
}

}  // namespace fixedlens
