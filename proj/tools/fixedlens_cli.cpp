#include "fixedlens/calibration.hpp"
#include "fixedlens/fusion.hpp"
#include "fixedlens/image_io.hpp"
#include "fixedlens/masking.hpp"
#include "fixedlens/optics.hpp"
#include "fixedlens/pipeline.hpp"
#include "fixedlens/poseeval.hpp"
#include "fixedlens/synth.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace fixedlens;

namespace {

struct Globals {
  int threads = 1;
  bool verbose = false;
  std::uint64_t seed = 1;
};

std::pair<double, double> parse_wxh(const std::string& text) {
  const auto x = text.find_first_of("xX");
  if (x == std::string::npos) throw ValidationError("expected WxH, got '" + text + "'");
  try {
    std::size_t a = 0, b = 0;
    const double w = std::stod(text.substr(0, x), &a);
    const double h = std::stod(text.substr(x + 1), &b);
    if (a != x || b != text.size() - x - 1) throw std::invalid_argument(text);
    return {w, h};
  } catch (const std::exception&) {
    throw ValidationError("expected WxH, got '" + text + "'");
  }
}

// ------------------------------------------------------------------ dof

struct DofArgs {
  double focal_length = 0.0;
  double f_number = 0.0;
  std::optional<double> coc;
  double object_distance = 0.0;
  std::string sensor = "36x24";
  std::optional<double> near_mm, far_mm;
  double overlap = 0.5;
};

int run_dof(const DofArgs& a) {
  LensConfig lens;
  lens.focal_length_mm = a.focal_length;
  lens.f_number = a.f_number;
  std::tie(lens.sensor_width_mm, lens.sensor_height_mm) = parse_wxh(a.sensor);
  lens.coc_diameter_mm = a.coc;
  lens.validate();
  const ConjugatePair pair = conjugate(a.object_distance, lens);
  const double dof = depth_of_field(pair, lens);
  std::cout << std::setprecision(10);
  std::cout << "object_distance_mm = " << pair.object_distance_mm << '\n'
            << "image_distance_mm = " << pair.image_distance_mm << '\n'
            << "magnification = " << pair.magnification << '\n'
            << "coc_mm = " << lens.coc_mm() << '\n'
            << "depth_of_focus_mm = " << depth_of_focus(pair, lens) << '\n'
            << "depth_of_field_mm = " << dof << '\n'
            << "recommended_step_mm = " << 0.5 * dof << "  # 50% overlap\n";
  if (a.near_mm || a.far_mm) {
    if (!a.near_mm || !a.far_mm) throw ValidationError("--near and --far go together");
    const CapturePlan plan = plan_capture_steps(*a.near_mm, *a.far_mm, lens, a.overlap);
    std::cout << "steps = " << plan.steps.size() << '\n';
    for (std::size_t i = 0; i < plan.steps.size(); ++i) {
      std::cout << "step_" << i << "_focus_mm = " << plan.steps[i].object_distance_mm << '\n';
    }
  }
  return 0;
}

// ------------------------------------------------------------------ calibrate

struct CalibrateArgs {
  std::string target_dir;
  std::string grid;
  std::optional<int> reference;
  std::string out;
  double min_contrast = 0.05;
};

int run_calibrate(const CalibrateArgs& a, const Globals& g) {
  const GridSize grid = parse_grid(a.grid);
  std::vector<ImageBuffer> slices;
  for (const auto& f : list_images(a.target_dir)) slices.push_back(load_image(f));
  if (slices.empty()) throw EmptyStackError("no target images in " + a.target_dir);
  DotDetectionParams params;
  params.min_contrast = a.min_contrast;
  const auto hs = calibrate_stack(slices, grid, a.reference, params);
  write_calibration(a.out, hs);
  if (g.verbose) {
    for (std::size_t i = 0; i < hs.size(); ++i) std::cerr << "slice " << i << ": rms " << hs[i].rms_px << " px\n";
  }
  std::cout << "wrote " << hs.size() << " homographies to " << a.out << '\n';
  return 0;
}

// ------------------------------------------------------------------ stack

struct StackArgs {
  std::string manifest;
  std::string out;
  std::optional<std::string> debug_dir;
  int bit_depth = 16;
};

int run_stack(const StackArgs& a) {
  std::optional<fs::path> debug;
  if (a.debug_dir) debug = *a.debug_dir;
  const FusionResult r = fuse_stack_files(a.manifest, a.out, debug, a.bit_depth);
  std::cout << "fused " << r.saliency.size() << " slices into " << a.out << '\n';
  return 0;
}

// ------------------------------------------------------------------ mask

struct MaskArgs {
  std::string backlit;
  std::string fused;
  std::string out;
  std::optional<double> threshold;
  int open_radius = 0;
  bool invert = false;
  std::optional<std::string> mask_out;
};

int run_mask(const MaskArgs& a) {
  MaskParams params;
  if (a.threshold) {
    params.method = ThresholdMethod::Fixed;
    params.threshold = *a.threshold;
  }
  params.morph_open_radius = a.open_radius;
  params.invert = a.invert;
  const ImageBuffer mask = backlight_mask(load_image(a.backlit), params);
  if (a.mask_out) save_image(mask, *a.mask_out, 8);
  save_image(apply_mask(load_image(a.fused), mask), a.out, 16);
  std::cout << "wrote " << a.out << '\n';
  return 0;
}

// ------------------------------------------------------------------ evaluate

struct EvaluateArgs {
  std::string poses;
  double expected_pan = 0.0;
  double expected_tilt = 0.0;
  std::optional<std::string> report;
  std::optional<std::string> compare;
  bool reference_table = false;
};

int run_evaluate(const EvaluateArgs& a) {
  const auto poses = read_pose_csv(a.poses);
  const SphereFit fit = fit_sphere(poses);
  const StepStats stats = step_statistics(poses, fit);

  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  os << "poses: " << a.poses << '\n';
  os << "sphere centre (mm): " << fit.center.x() << ' ' << fit.center.y() << ' ' << fit.center.z() << '\n';
  os << "sphere radius (mm): " << fit.radius << "  residual rms: " << fit.residual_rms << "\n\n";
  std::vector<std::pair<std::string, StepStats>> rows{{"estimated", stats}};
  StepStats other;
  if (a.compare) {
    const auto other_poses = read_pose_csv(*a.compare);
    other = step_statistics(other_poses, fit_sphere(other_poses));
    rows.emplace_back("compared", other);
  }
  os << format_stats_table(rows) << '\n';
  os << "expected pan step (deg): " << a.expected_pan << "  error: " << stats.pan_step_mean_deg - a.expected_pan << '\n';
  os << "expected tilt step (deg): " << a.expected_tilt << "  error: " << stats.tilt_step_mean_deg - a.expected_tilt
     << '\n';
  if (a.compare) os << '\n' << format_comparison(compare_runs(other, stats), "compared", "estimated");
  if (a.reference_table) {
    const StepStats mv = reference_moving_lens_stats();
    const StepStats fx = reference_fixed_lens_stats();
    os << "\nreference rig\n" << format_stats_table({{"moving lens", mv}, {"fixed lens", fx}}) << '\n';
    os << format_comparison(compare_runs(mv, fx), "moving lens", "fixed lens");
  }
  std::cout << os.str();
  if (a.report) {
    std::ofstream out(*a.report);
    if (!out) throw IoError("cannot write " + *a.report);
    out << os.str();
  }
  return 0;
}

// ------------------------------------------------------------------ simulate

struct SimulateArgs {
  std::optional<std::string> scene;
  std::string mode = "fixed";
  std::optional<int> steps;
  std::string out_dir;
  bool no_backlit = false;
  int bit_depth = 16;
  std::optional<std::string> poses;
  double pose_radius = 141.042;
  double pose_noise = 0.112;
  double drop_fraction = 0.0;
  std::optional<std::string> targets;
};

// Dot-grid target seen through each slice's geometry, for `calibrate`.
void write_targets(const RenderedStack& stack, GridSize grid, const fs::path& dir, int bit_depth) {
  const ImageBuffer& ref = stack.ground_truth_allfocus;
  const double spacing = std::min(ref.width() / (grid.cols + 1.0), ref.height() / (grid.rows + 1.0));
  fs::create_directories(dir);
  for (std::size_t i = 0; i < stack.true_homographies.size(); ++i) {
    const DotTarget t = render_dot_target(grid, spacing, 0.2 * spacing, stack.true_homographies[i].inverse(), 1.0,
                                          ref.width(), ref.height());
    char name[32];
    std::snprintf(name, sizeof(name), "slice_%03zu.png", i);
    save_image(t.image, dir / name, bit_depth);
  }
}

int run_simulate(const SimulateArgs& a, const Globals& g) {
  const SceneFile scene = a.scene ? read_scene(*a.scene) : default_scene(g.seed);
  const CaptureMode mode = parse_capture_mode(a.mode);
  const int steps = a.steps.value_or(static_cast<int>(scene.scene.planes.size()));
  const CapturePlan plan = linear_plan(scene.scene, steps, mode);
  const SimulationFiles files = write_simulation(scene, plan, a.out_dir, !a.no_backlit, a.bit_depth);
  std::cout << "rendered " << plan.steps.size() << " " << to_string(mode) << "-lens slices into " << a.out_dir << '\n';
  if (a.targets) {
    write_targets(files.stack, parse_grid(*a.targets), fs::path(a.out_dir) / "targets", a.bit_depth);
    std::cout << "wrote " << *a.targets << " dot targets to " << (fs::path(a.out_dir) / "targets").string() << '\n';
  }
  if (!files.stack.homographies_exact) {
    std::cout << "note: moving-lens calibration is exact for the reference focus plane only\n";
  }
  if (g.verbose) {
    const std::size_t n_planes = scene.scene.planes.size();
    for (std::size_t i = 0; i < plan.steps.size(); ++i) {
      std::cerr << "step " << i << " focus " << plan.steps[i].object_distance_mm << " mm, blur sigma px:";
      for (std::size_t k = 0; k < n_planes; ++k) std::cerr << ' ' << files.stack.blur_sigma_px[i * n_planes + k];
      std::cerr << '\n';
    }
  }
  if (a.poses) {
    const auto poses = synth_poses(a.pose_radius, 20.0, {0.0, 6.0, 12.0, 18.0, 24.0}, a.pose_noise, a.drop_fraction,
                                   g.seed);
    write_pose_csv(*a.poses, poses);
    std::cout << "wrote " << poses.size() << " poses to " << *a.poses << '\n';
  }
  return 0;
}

// ------------------------------------------------------------------ pipeline / validate

int run_pipeline_cmd(const std::string& config_path, bool keep_going, const Globals& g) {
  const ProjectConfig cfg = load_config(config_path);
  PipelineOptions opts;
  opts.threads = g.threads;
  opts.keep_going = keep_going;
  if (g.verbose) opts.log = &std::cerr;
  const PipelineReport report = run_pipeline(cfg, opts);
  std::cout << report.to_text();
  return report.failures() == 0 ? 0 : 1;
}

int run_validate(const std::string& config_path) {
  const ConfigCheck check = validate_config(config_path);
  if (check.ok()) {
    std::cout << config_path << ": ok (" << check.config->views.size() << " views)\n";
    return 0;
  }
  std::cerr << check.describe(config_path);
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fixed-lens multifocus capture toolkit: optics, calibration, focus stacking, masking, pose evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--threads", g.threads, "Worker threads for batch processing")->check(CLI::PositiveNumber);
  app.add_flag("-v,--verbose", g.verbose, "Progress and timing on stderr");
  app.add_option("--seed", g.seed, "Random seed (simulate only)");

  DofArgs dof;
  auto* c_dof = app.add_subcommand("dof", "Conjugate distances, depth of focus and depth of field");
  c_dof->add_option("--focal-length", dof.focal_length, "Focal length in mm")->required();
  c_dof->add_option("--f-number", dof.f_number, "Aperture f-number")->required();
  c_dof->add_option("--coc", dof.coc, "Circle of confusion in mm (default: 0.1% of mean sensor side)");
  c_dof->add_option("--object-distance", dof.object_distance, "Object distance in mm")->required();
  c_dof->add_option("--sensor", dof.sensor, "Sensor size WxH in mm")->capture_default_str();
  c_dof->add_option("--near", dof.near_mm, "Near limit of a focus-step plan, mm");
  c_dof->add_option("--far", dof.far_mm, "Far limit of a focus-step plan, mm");
  c_dof->add_option("--overlap", dof.overlap, "Depth-of-field overlap between steps")->capture_default_str();

  CalibrateArgs cal;
  auto* c_cal = app.add_subcommand("calibrate", "Slice-to-reference homographies from a dot-grid target stack");
  c_cal->add_option("--target-dir", cal.target_dir, "Directory of target slices")->required();
  c_cal->add_option("--grid", cal.grid, "Dot grid RxC")->required();
  c_cal->add_option("--reference", cal.reference, "Reference slice index (default: middle)");
  c_cal->add_option("--out", cal.out, "Calibration file to write")->required();
  c_cal->add_option("--min-contrast", cal.min_contrast, "Minimum local dot contrast")->capture_default_str();

  StackArgs st;
  auto* c_stack = app.add_subcommand("stack", "Fuse a focus stack listed in a manifest");
  c_stack->add_option("--manifest", st.manifest, "Stack manifest")->required();
  c_stack->add_option("--out", st.out, "Fused image (.png/.tif)")->required();
  c_stack->add_option("--debug-dir", st.debug_dir, "Write saliency and weight maps here");
  c_stack->add_option("--bit-depth", st.bit_depth, "Output bit depth")->check(CLI::IsMember({8, 16}))->capture_default_str();

  MaskArgs mk;
  auto* c_mask = app.add_subcommand("mask", "Backlight silhouette as the alpha channel of a fused image");
  c_mask->add_option("--backlit", mk.backlit, "Fused back-lit image")->required();
  c_mask->add_option("--fused", mk.fused, "Fused front-lit image")->required();
  c_mask->add_option("--out", mk.out, "RGBA output")->required();
  c_mask->add_option("--threshold", mk.threshold, "Fixed luma threshold in [0,1] (default: Otsu)");
  c_mask->add_option("--open-radius", mk.open_radius, "Morphological opening radius")->capture_default_str();
  c_mask->add_flag("--invert", mk.invert, "Foreground is bright instead of dark");
  c_mask->add_option("--mask-out", mk.mask_out, "Also write the binary mask");

  EvaluateArgs ev;
  auto* c_eval = app.add_subcommand("evaluate", "Sphere fit and pan/tilt step statistics of camera centres");
  c_eval->add_option("--poses", ev.poses, "Pose CSV")->required();
  c_eval->add_option("--expected-pan-step", ev.expected_pan, "Commanded pan step in degrees")->required();
  c_eval->add_option("--expected-tilt-step", ev.expected_tilt, "Commanded tilt step in degrees")->required();
  c_eval->add_option("--report", ev.report, "Write the report text here");
  c_eval->add_option("--compare", ev.compare, "Second pose CSV to compare noise against");
  c_eval->add_flag("--reference-table", ev.reference_table, "Append the reference rig's moving/fixed-lens rows");

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Render a synthetic focus stack with ground truth");
  c_sim->add_option("--scene", sim.scene, "Scene file (default: built-in two-plane scene)");
  c_sim->add_option("--mode", sim.mode, "Capture mode")->check(CLI::IsMember({"fixed", "moving"}))->capture_default_str();
  c_sim->add_option("--steps", sim.steps, "Focus steps (default: one per plane)")->check(CLI::PositiveNumber);
  c_sim->add_option("--out-dir", sim.out_dir, "Output directory")->required();
  c_sim->add_flag("--no-backlit", sim.no_backlit, "Skip the back-lit stack");
  c_sim->add_option("--bit-depth", sim.bit_depth, "Image bit depth")->check(CLI::IsMember({8, 16}))->capture_default_str();
  c_sim->add_option("--poses", sim.poses, "Also write a synthetic pose CSV");
  c_sim->add_option("--pose-radius", sim.pose_radius, "Pose sphere radius, mm")->capture_default_str();
  c_sim->add_option("--pose-noise", sim.pose_noise, "Pose centre noise sigma, mm")->capture_default_str();
  c_sim->add_option("--drop-fraction", sim.drop_fraction, "Fraction of undetected poses")->capture_default_str();
  c_sim->add_option("--targets", sim.targets, "Also render an RxC dot-grid target per step into targets/");

  std::string pipeline_config;
  bool keep_going = false;
  auto* c_pipe = app.add_subcommand("pipeline", "Process every view of a project");
  c_pipe->add_option("--config", pipeline_config, "Project config")->required();
  c_pipe->add_flag("--keep-going", keep_going, "Continue past failing views");

  std::string validate_path;
  auto* c_val = app.add_subcommand("validate", "Check a project config and report every problem");
  c_val->add_option("--config", validate_path, "Project config")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c_dof) return run_dof(dof);
    if (*c_cal) return run_calibrate(cal, g);
    if (*c_stack) return run_stack(st);
    if (*c_mask) return run_mask(mk);
    if (*c_eval) return run_evaluate(ev);
    if (*c_sim) return run_simulate(sim, g);
    if (*c_pipe) return run_pipeline_cmd(pipeline_config, keep_going, g);
    if (*c_val) return run_validate(validate_path);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
