#pragma once

// Synthetic ground truth: calibration targets, defocused multi-depth
// captures and pose sets on a sphere.

#include "fixedlens/calibration.hpp"
#include "fixedlens/fusion.hpp"
#include "fixedlens/optics.hpp"
#include "fixedlens/poseeval.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fixedlens {

struct DotTarget {
  ImageBuffer image;
  std::vector<Eigen::Vector2d> centroids;  // row-major grid order, image pixels
};

/// Dark discs (0) on white (1) laid out on a grid centred in the frame, mapped
/// through `h` (grid pixels -> image pixels), then Gaussian blurred. Edge
/// pixels are supersampled 16x16. The returned centroids are the h-mapped
/// disc centres. A width/height of 0 picks (cols+1) x (rows+1) spacings.
/// DomainError if any warped disc leaves the frame.
DotTarget render_dot_target(GridSize grid, double spacing_px, double dot_radius_px, const Homography& h,
                            double blur_sigma_px, int width = 0, int height = 0);

/// A fronto-parallel textured rectangle. Texture ids:
///   constant:v | constant:r,g,b
///   sines:<seed>[:<max cycles per mm>]   band-limited sum of sinusoids
///   image:<path>                         stretched over the rectangle
struct ScenePlane {
  double depth_mm = 0.0;
  std::string texture = "sines:1";
  std::optional<ImageBuffer> image;  // set when texture is image:<path>
  double center_x_mm = 0.0;
  double center_y_mm = 0.0;
  double width_mm = 10.0;
  double height_mm = 10.0;
  bool backdrop = false;  // scenery behind the specimen; absent when back-lit
};

struct SceneSpec {
  std::vector<ScenePlane> planes;  // near to far; may be empty
  LensConfig lens;
  double background_level = 0.0;

  /// DomainError unless depths exceed the focal length, increase strictly and
  /// every texture id parses.
  void validate() const;
};

struct RenderedStack {
  FocusStack slices;
  ImageBuffer ground_truth_allfocus;
  std::vector<Homography> true_homographies;  // slice -> reference pixels
  bool homographies_exact = true;
  CaptureMode mode = CaptureMode::FixedLens;
  int reference_index = 0;
  std::vector<double> blur_sigma_px;  // [step][plane], row-major
};

/// Pinhole sensor of `width` x `height` pixels spanning the lens sensor size,
/// principal point at the frame centre. FixedLens keeps the lens at the
/// origin and moves the sensor to each step's image distance. MovingLens
/// keeps the reference step's image distance and translates the whole camera
/// so each step's focus plane stays conjugate. Defocus is a Gaussian with
/// sigma = half the blur-circle diameter in pixels. The reference is the
/// middle step (index N/2); the ground truth is that geometry without blur.
/// In MovingLens mode no single homography is exact; the returned maps are
/// exact for the reference focus plane only.
RenderedStack render_capture(const SceneSpec& scene, const CapturePlan& plan, int width, int height);

/// What the back-lit capture sees: backdrop planes removed and every other
/// plane a dark silhouette in front of a bright light box.
SceneSpec backlit_scene(const SceneSpec& scene, double object_level = 0.05, double light_level = 1.0);

/// Key-value scene file; see README for the grammar. Image textures are
/// loaded relative to the file's directory.
struct SceneFile {
  SceneSpec scene;
  int width_px = 256;
  int height_px = 192;
};
SceneFile read_scene(const std::filesystem::path& path);

/// Two textured planes at 125 and 135 mm seen by a 25 mm f/2.8 lens on a
/// 3.2 x 2.4 mm sensor at 320 x 240 pixels: a small near card in front of a
/// background plane filling the frame. `seed` varies the textures.
SceneFile default_scene(std::uint64_t seed = 1);

/// `steps` focus distances evenly spaced from the nearest to the farthest
/// plane (one step focuses midway).
CapturePlan linear_plan(const SceneSpec& scene, int steps, CaptureMode mode);

struct SimulationFiles {
  RenderedStack stack;
  std::filesystem::path manifest;     // for `stack`
  std::filesystem::path project;      // single-view pipeline config
  std::filesystem::path calibration;  // true slice -> reference homographies
  std::filesystem::path ground_truth;
};

/// Renders the capture and writes slices/slice_NNN.png, optional
/// backlit/slice_NNN.png, ground_truth.png, calibration.txt, manifest.txt and
/// project.ini into `dir`.
SimulationFiles write_simulation(const SceneFile& scene, const CapturePlan& plan, const std::filesystem::path& dir,
                                 bool with_backlit = true, int bit_depth = 16);

/// Per-pose Gaussian perturbation (degrees) of the commanded pan and tilt.
struct PoseJitter {
  double pan_deg = 0.0;
  double tilt_deg = 0.0;
};

/// Poses on a sphere about the origin with the pan axis along +z. Ring k sits
/// at elevation tilt_elevations_deg[k] above the equator; each ring has
/// floor(360 / pan_step) poses at azimuth j * pan_step. Isotropic Gaussian
/// noise of `noise_sigma_mm` per coordinate is added, then exactly
/// round(drop_fraction * n) poses chosen at random are marked undetected
/// (their centres are NaN). Deterministic for a given seed.
std::vector<PoseRecord> synth_poses(double radius_mm, double pan_step_deg, const std::vector<double>& tilt_elevations_deg,
                                    double noise_sigma_mm, double drop_fraction, std::uint64_t seed,
                                    const PoseJitter& jitter = {});

}  // namespace fixedlens
