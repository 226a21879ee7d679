#include "fixedlens/synth.hpp"

#include "fixedlens/image_io.hpp"
#include "fixedlens/calibration.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace fixedlens {

namespace {

// ---------------------------------------------------------------- dot target

constexpr int kSuper = 16;

double interval_overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

}  // namespace

DotTarget render_dot_target(GridSize grid, double spacing_px, double dot_radius_px, const Homography& h,
                            double blur_sigma_px, int width, int height) {
  if (grid.rows < 1 || grid.cols < 1) throw DomainError("dot grid must have at least one row and column");
  if (!(spacing_px > 0.0) || !(dot_radius_px > 0.0) || !(blur_sigma_px >= 0.0)) {
    throw DomainError("spacing and dot radius must be positive, blur sigma non-negative");
  }
  if (2.0 * dot_radius_px >= spacing_px) throw DomainError("dots overlap: diameter must be below spacing");
  if (!h.invertible()) throw DomainError("dot target homography is singular");
  if (width <= 0) width = static_cast<int>(std::lround((grid.cols + 1) * spacing_px));
  if (height <= 0) height = static_cast<int>(std::lround((grid.rows + 1) * spacing_px));

  const double cx = 0.5 * (width - 1);
  const double cy = 0.5 * (height - 1);
  std::vector<Eigen::Vector2d> grid_centres;
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      grid_centres.emplace_back(cx + (c - 0.5 * (grid.cols - 1)) * spacing_px,
                                cy + (r - 0.5 * (grid.rows - 1)) * spacing_px);
    }
  }

  const Homography inv = h.inverse();
  Plane coverage = Plane::Zero(height, width);
  DotTarget out;
  for (const auto& g : grid_centres) {
    out.centroids.push_back(h.apply(g));
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (int k = 0; k < 64; ++k) {
      const double a = 2.0 * M_PI * k / 64.0;
      const Eigen::Vector2d p = h.apply(g + dot_radius_px * Eigen::Vector2d(std::cos(a), std::sin(a)));
      if (!p.allFinite() || p.x() < 0.0 || p.y() < 0.0 || p.x() > width - 1 || p.y() > height - 1) {
        throw DomainError("warped dot leaves the frame");
      }
      x0 = std::min(x0, p.x());
      x1 = std::max(x1, p.x());
      y0 = std::min(y0, p.y());
      y1 = std::max(y1, p.y());
    }
    // The polygon bound can undercut the true curve slightly; pad generously.
    const int px0 = std::max(0, static_cast<int>(std::floor(x0)) - 2);
    const int px1 = std::min(width - 1, static_cast<int>(std::ceil(x1)) + 2);
    const int py0 = std::max(0, static_cast<int>(std::floor(y0)) - 2);
    const int py1 = std::min(height - 1, static_cast<int>(std::ceil(y1)) + 2);
    const double r2 = dot_radius_px * dot_radius_px;
    for (int y = py0; y <= py1; ++y) {
      for (int x = px0; x <= px1; ++x) {
        int inside = 0;
        for (int sy = 0; sy < kSuper; ++sy) {
          for (int sx = 0; sx < kSuper; ++sx) {
            const Eigen::Vector2d p(x - 0.5 + (sx + 0.5) / kSuper, y - 0.5 + (sy + 0.5) / kSuper);
            if ((inv.apply(p) - g).squaredNorm() <= r2) ++inside;
          }
        }
        coverage(y, x) = std::max(coverage(y, x), static_cast<double>(inside) / (kSuper * kSuper));
      }
    }
  }
  Plane img = 1.0 - coverage;
  out.image = ImageBuffer::from_plane(gaussian_blur(img, blur_sigma_px));
  return out;
}

// ---------------------------------------------------------------- textures

namespace {

struct Wave {
  double kx, ky, phase, amplitude;
};

struct Texture {
  enum class Kind { Constant, Sines, Image } kind = Kind::Constant;
  std::array<double, 3> constant{0.5, 0.5, 0.5};
  std::array<std::vector<Wave>, 3> waves;
  const ImageBuffer* image = nullptr;

  // (s, t) are plane-local millimetres from the top-left corner.
  std::array<double, 3> at(double s, double t, double w_mm, double h_mm) const {
    switch (kind) {
      case Kind::Constant:
        return constant;
      case Kind::Sines: {
        std::array<double, 3> v{};
        for (int c = 0; c < 3; ++c) {
          double acc = 0.5;
          for (const Wave& wv : waves[static_cast<std::size_t>(c)]) {
            acc += wv.amplitude * std::sin(2.0 * M_PI * (wv.kx * s + wv.ky * t) + wv.phase);
          }
          v[static_cast<std::size_t>(c)] = acc;
        }
        return v;
      }
      case Kind::Image: {
        const double x = std::clamp(s / w_mm, 0.0, 1.0) * (image->width() - 1);
        const double y = std::clamp(t / h_mm, 0.0, 1.0) * (image->height() - 1);
        const Sample smp = sample_bilinear(*image, x, y);
        if (smp.values.size() == 1) return {smp.values[0], smp.values[0], smp.values[0]};
        return {smp.values[0], smp.values[1], smp.values[2]};
      }
    }
    return constant;
  }
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) parts.emplace_back(text::trim(item));
  return parts;
}

Texture compile_texture(const ScenePlane& plane) {
  Texture tex;
  const std::string& id = plane.texture;
  const auto colon = id.find(':');
  const std::string kind = id.substr(0, colon);
  const std::string args = colon == std::string::npos ? "" : id.substr(colon + 1);
  try {
    if (kind == "constant") {
      const auto parts = split(args, ',');
      if (parts.size() == 1) {
        const double v = text::to_double(parts[0], "constant texture");
        tex.constant = {v, v, v};
      } else if (parts.size() == 3) {
        for (std::size_t c = 0; c < 3; ++c) tex.constant[c] = text::to_double(parts[c], "constant texture");
      } else {
        throw DomainError("constant texture needs 1 or 3 values: '" + id + "'");
      }
      for (double v : tex.constant) {
        if (!(v >= 0.0 && v <= 1.0)) throw DomainError("constant texture values must lie in [0,1]: '" + id + "'");
      }
    } else if (kind == "sines") {
      const auto parts = split(args, ':');
      if (parts.empty() || parts.size() > 2 || parts[0].empty()) throw DomainError("sines texture: 'sines:<seed>[:<cycles/mm>]'");
      const auto seed = static_cast<std::uint64_t>(text::to_int(parts[0], "sines seed"));
      const double fmax = parts.size() == 2 ? text::to_double(parts[1], "sines frequency") : 1.0;
      if (!(fmax > 0.0)) throw DomainError("sines frequency must be positive");
      tex.kind = Texture::Kind::Sines;
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (auto& ch : tex.waves) {
        for (int k = 0; k < 4; ++k) {
          const double f = fmax * (0.5 + 0.5 * unit(rng));
          const double theta = M_PI * unit(rng);
          const double phase = 2.0 * M_PI * unit(rng);
          ch.push_back({f * std::cos(theta), f * std::sin(theta), phase, 0.11});
        }
      }
    } else if (kind == "image") {
      if (!plane.image) throw DomainError("image texture '" + id + "' has no loaded image");
      if (plane.image->channels() != 1 && plane.image->channels() != 3) {
        throw DomainError("image texture must have 1 or 3 channels");
      }
      tex.kind = Texture::Kind::Image;
      tex.image = &*plane.image;
    } else {
      throw DomainError("unknown texture '" + id + "'");
    }
  } catch (const ValidationError& e) {
    throw DomainError(e.what());
  }
  return tex;
}

}  // namespace

void SceneSpec::validate() const {
  lens.validate();
  if (!(background_level >= 0.0 && background_level <= 1.0)) throw DomainError("background level must lie in [0,1]");
  for (std::size_t i = 0; i < planes.size(); ++i) {
    const ScenePlane& p = planes[i];
    if (!(p.depth_mm > lens.focal_length_mm) || !std::isfinite(p.depth_mm)) {
      throw DomainError("plane " + std::to_string(i) + " must lie beyond the focal length");
    }
    if (i > 0 && !(p.depth_mm > planes[i - 1].depth_mm)) throw DomainError("planes must be ordered near to far");
    if (!(p.width_mm > 0.0) || !(p.height_mm > 0.0) || !std::isfinite(p.center_x_mm) || !std::isfinite(p.center_y_mm)) {
      throw DomainError("plane " + std::to_string(i) + " has an invalid extent");
    }
    compile_texture(p);
  }
}

// ---------------------------------------------------------------- capture

namespace {

struct Layer {
  std::array<Plane, 3> colour;  // premultiplied
  Plane alpha;
};

struct StepGeometry {
  double image_distance_mm;
  double lens_z_mm;
};

Layer render_layer(const ScenePlane& plane, const Texture& tex, const StepGeometry& geo, CaptureMode mode,
                   double pitch, int width, int height) {
  const double cx = 0.5 * (width - 1);
  const double cy = 0.5 * (height - 1);
  const ConjugatePair sensor{0.0, geo.image_distance_mm, 0.0};
  const double left = plane.center_x_mm - 0.5 * plane.width_mm;
  const double top = plane.center_y_mm - 0.5 * plane.height_mm;
  const Eigen::Vector2d a = project({left, top, plane.depth_mm}, mode, sensor, geo.lens_z_mm) / pitch;
  const Eigen::Vector2d b =
      project({left + plane.width_mm, top + plane.height_mm, plane.depth_mm}, mode, sensor, geo.lens_z_mm) / pitch;
  const double x0 = cx + a.x(), x1 = cx + b.x();
  const double y0 = cy + a.y(), y1 = cy + b.y();
  // Pixel -> plane millimetres.
  const double mm_per_px = plane.width_mm / (x1 - x0);

  Layer layer;
  for (auto& c : layer.colour) c = Plane::Zero(height, width);
  layer.alpha = Plane::Zero(height, width);
  const int ix0 = std::max(0, static_cast<int>(std::floor(x0 + 0.5)));
  const int ix1 = std::min(width - 1, static_cast<int>(std::ceil(x1 - 0.5)));
  const int iy0 = std::max(0, static_cast<int>(std::floor(y0 + 0.5)));
  const int iy1 = std::min(height - 1, static_cast<int>(std::ceil(y1 - 0.5)));
  for (int y = iy0; y <= iy1; ++y) {
    const double cov_y = interval_overlap(y - 0.5, y + 0.5, y0, y1);
    if (cov_y <= 0.0) continue;
    const double t = std::clamp((y - y0) * mm_per_px, 0.0, plane.height_mm);
    for (int x = ix0; x <= ix1; ++x) {
      const double cov = cov_y * interval_overlap(x - 0.5, x + 0.5, x0, x1);
      if (cov <= 0.0) continue;
      const double s = std::clamp((x - x0) * mm_per_px, 0.0, plane.width_mm);
      const auto v = tex.at(s, t, plane.width_mm, plane.height_mm);
      for (std::size_t c = 0; c < 3; ++c) layer.colour[c](y, x) = cov * v[c];
      layer.alpha(y, x) = cov;
    }
  }
  return layer;
}

ImageBuffer composite(const std::vector<Layer>& near_to_far, double background, int width, int height) {
  std::vector<Plane> out(3, Plane::Constant(height, width, background));
  for (auto it = near_to_far.rbegin(); it != near_to_far.rend(); ++it) {
    for (std::size_t c = 0; c < 3; ++c) out[c] = it->colour[c] + (1.0 - it->alpha) * out[c];
  }
  for (auto& p : out) p = p.cwiseMax(0.0).cwiseMin(1.0);
  return ImageBuffer::from_planes(std::move(out));
}

Layer blur_layer(Layer layer, double sigma) {
  if (sigma <= 0.0) return layer;
  for (auto& c : layer.colour) c = gaussian_blur(c, sigma);
  layer.alpha = gaussian_blur(layer.alpha, sigma);
  return layer;
}

Homography scale_about(double s, double cx, double cy) {
  Eigen::Matrix3d m;
  m << s, 0.0, cx * (1.0 - s), 0.0, s, cy * (1.0 - s), 0.0, 0.0, 1.0;
  return Homography::from_matrix(m);
}

}  // namespace

RenderedStack render_capture(const SceneSpec& scene, const CapturePlan& plan, int width, int height) {
  scene.validate();
  if (plan.steps.empty()) throw DomainError("capture plan has no steps");
  if (width < 2 || height < 2) throw DomainError("image must be at least 2x2 pixels");
  const LensConfig& lens = scene.lens;
  const double pitch = lens.sensor_width_mm / width;
  const double cx = 0.5 * (width - 1);
  const double cy = 0.5 * (height - 1);

  std::vector<Texture> textures;
  for (const auto& p : scene.planes) textures.push_back(compile_texture(p));

  const std::size_t n = plan.steps.size();
  const int ref = static_cast<int>(n / 2);
  const double ref_focus = plan.steps[static_cast<std::size_t>(ref)].object_distance_mm;
  const ConjugatePair ref_pair = conjugate(ref_focus, lens);

  std::vector<StepGeometry> geometry;
  for (const auto& step : plan.steps) {
    const double focus = step.object_distance_mm;
    if (plan.mode == CaptureMode::FixedLens) {
      geometry.push_back({conjugate(focus, lens).image_distance_mm, 0.0});
    } else {
      geometry.push_back({ref_pair.image_distance_mm, focus - ref_focus});
    }
  }

  RenderedStack out;
  out.mode = plan.mode;
  out.reference_index = ref;
  out.homographies_exact = plan.mode == CaptureMode::FixedLens;
  for (std::size_t i = 0; i < n; ++i) {
    const StepGeometry& geo = geometry[i];
    // The camera focuses at a fixed distance from the lens in MovingLens mode.
    const ConjugatePair focus = plan.mode == CaptureMode::FixedLens ? conjugate(plan.steps[i].object_distance_mm, lens)
                                                                     : ref_pair;
    std::vector<Layer> layers;
    for (std::size_t k = 0; k < scene.planes.size(); ++k) {
      const ScenePlane& plane = scene.planes[k];
      const double distance = plane.depth_mm - geo.lens_z_mm;
      if (!(distance > lens.focal_length_mm)) throw DomainError("plane lies behind the lens or inside the focal length");
      const double sigma = 0.5 * coc_blur_diameter(distance, focus, lens) / pitch;
      out.blur_sigma_px.push_back(sigma);
      layers.push_back(blur_layer(render_layer(plane, textures[k], geo, plan.mode, pitch, width, height), sigma));
    }
    out.slices.slices.push_back(composite(layers, scene.background_level, width, height));
    out.slices.source_ids.push_back(static_cast<int>(i));

    const double s = plan.mode == CaptureMode::FixedLens
                         ? geometry[static_cast<std::size_t>(ref)].image_distance_mm / geo.image_distance_mm
                         : (ref_focus - geo.lens_z_mm) / ref_focus;
    out.true_homographies.push_back(static_cast<int>(i) == ref ? Homography::identity() : scale_about(s, cx, cy));
  }

  std::vector<Layer> sharp;
  for (std::size_t k = 0; k < scene.planes.size(); ++k) {
    sharp.push_back(render_layer(scene.planes[k], textures[k], geometry[static_cast<std::size_t>(ref)], plan.mode, pitch,
                                 width, height));
  }
  out.ground_truth_allfocus = composite(sharp, scene.background_level, width, height);
  return out;
}

SceneSpec backlit_scene(const SceneSpec& scene, double object_level, double light_level) {
  SceneSpec lit = scene;
  std::ostringstream id;
  id << std::setprecision(17) << "constant:" << object_level;
  lit.planes.clear();
  for (const auto& p : scene.planes) {
    if (p.backdrop) continue;
    lit.planes.push_back(p);
    lit.planes.back().texture = id.str();
    lit.planes.back().image.reset();
  }
  lit.background_level = light_level;
  return lit;
}

// ---------------------------------------------------------------- scene file

namespace {

std::pair<double, double> parse_pair(std::string_view v, const std::string& what) {
  const auto parts = split(std::string(v), ',');
  if (parts.size() != 2) throw ValidationError(what + ": expected two comma-separated numbers");
  return {text::to_double(parts[0], what), text::to_double(parts[1], what)};
}

}  // namespace

SceneFile read_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read scene file " + path.string());
  SceneFile file;
  SceneSpec& scene = file.scene;
  ScenePlane* plane = nullptr;
  std::string line;
  int line_no = 0;
  const auto base = path.parent_path();
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const std::string_view body = text::strip_comment(line);
    if (body.empty()) continue;
    if (body == "[plane]") {
      scene.planes.emplace_back();
      plane = &scene.planes.back();
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw FormatError(where + ": expected key = value");
    const std::string key(text::trim(body.substr(0, eq)));
    const std::string_view value = text::trim(body.substr(eq + 1));
    try {
      if (plane) {
        if (key == "depth_mm") {
          plane->depth_mm = text::to_double(value, key);
        } else if (key == "texture") {
          plane->texture = std::string(value);
          if (plane->texture.rfind("image:", 0) == 0) {
            std::filesystem::path img = plane->texture.substr(6);
            if (img.is_relative()) img = base / img;
            plane->image = load_image(img);
          }
        } else if (key == "center_mm") {
          std::tie(plane->center_x_mm, plane->center_y_mm) = parse_pair(value, key);
        } else if (key == "size_mm") {
          std::tie(plane->width_mm, plane->height_mm) = parse_pair(value, key);
        } else if (key == "backdrop") {
          plane->backdrop = text::to_bool(value, key);
        } else {
          throw ValidationError("unknown plane key '" + key + "'");
        }
        continue;
      }
      if (key == "focal_length_mm") {
        scene.lens.focal_length_mm = text::to_double(value, key);
      } else if (key == "f_number") {
        scene.lens.f_number = text::to_double(value, key);
      } else if (key == "sensor_mm") {
        std::tie(scene.lens.sensor_width_mm, scene.lens.sensor_height_mm) = parse_pair(value, key);
      } else if (key == "coc_mm") {
        scene.lens.coc_diameter_mm = text::to_double(value, key);
      } else if (key == "background") {
        scene.background_level = text::to_double(value, key);
      } else if (key == "image_px") {
        const auto [w, h] = parse_pair(value, key);
        file.width_px = static_cast<int>(w);
        file.height_px = static_cast<int>(h);
        if (file.width_px != w || file.height_px != h || file.width_px < 2 || file.height_px < 2) {
          throw ValidationError("image_px must be two integers >= 2");
        }
      } else {
        throw ValidationError("unknown scene key '" + key + "'");
      }
    } catch (const ValidationError& e) {
      throw FormatError(where + ": " + e.what());
    }
  }
  try {
    if (scene.planes.empty()) throw DomainError("scene has no [plane] sections");
    scene.validate();
  } catch (const DomainError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return file;
}

SceneFile default_scene(std::uint64_t seed) {
  SceneFile file;
  SceneSpec& scene = file.scene;
  scene.lens.focal_length_mm = 25.0;
  scene.lens.f_number = 2.8;
  scene.lens.sensor_width_mm = 3.2;
  scene.lens.sensor_height_mm = 2.4;
  scene.background_level = 0.0;
  file.width_px = 320;
  file.height_px = 240;

  ScenePlane near_card;
  near_card.depth_mm = 125.0;
  near_card.texture = "sines:" + std::to_string(2 * seed) + ":1";
  near_card.width_mm = 5.4;
  near_card.height_mm = 4.2;
  ScenePlane backdrop;
  backdrop.depth_mm = 135.0;
  backdrop.texture = "sines:" + std::to_string(2 * seed + 1) + ":1.08";
  backdrop.width_mm = 26.0;
  backdrop.height_mm = 26.0;
  backdrop.backdrop = true;
  scene.planes = {near_card, backdrop};
  return file;
}

CapturePlan linear_plan(const SceneSpec& scene, int steps, CaptureMode mode) {
  scene.validate();
  if (scene.planes.empty()) throw DomainError("scene has no planes");
  if (steps < 1) throw DomainError("a capture needs at least one step");
  const double near = scene.planes.front().depth_mm;
  const double far = scene.planes.back().depth_mm;
  CapturePlan plan;
  plan.mode = mode;
  for (int i = 0; i < steps; ++i) {
    const double d = steps == 1 ? 0.5 * (near + far) : near + (far - near) * i / (steps - 1);
    plan.steps.push_back(conjugate(d, scene.lens));
  }
  return plan;
}

SimulationFiles write_simulation(const SceneFile& file, const CapturePlan& plan, const std::filesystem::path& dir,
                                 bool with_backlit, int bit_depth) {
  namespace fs = std::filesystem;
  SimulationFiles out;
  out.stack = render_capture(file.scene, plan, file.width_px, file.height_px);
  fs::create_directories(dir / "slices");
  const auto slice_name = [](std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "slice_%03zu.png", i);
    return std::string(buf);
  };
  for (std::size_t i = 0; i < out.stack.slices.slices.size(); ++i) {
    save_image(out.stack.slices.slices[i], dir / "slices" / slice_name(i), bit_depth);
  }
  if (with_backlit) {
    fs::create_directories(dir / "backlit");
    const RenderedStack back = render_capture(backlit_scene(file.scene), plan, file.width_px, file.height_px);
    for (std::size_t i = 0; i < back.slices.slices.size(); ++i) {
      save_image(back.slices.slices[i], dir / "backlit" / slice_name(i), bit_depth);
    }
  }
  out.ground_truth = dir / "ground_truth.png";
  save_image(out.stack.ground_truth_allfocus, out.ground_truth, bit_depth);
  out.calibration = dir / "calibration.txt";
  write_calibration(out.calibration, out.stack.true_homographies);

  out.manifest = dir / "manifest.txt";
  {
    std::ofstream m(out.manifest);
    if (!m) throw IoError("cannot write " + out.manifest.string());
    m << "# capture mode: " << to_string(plan.mode)
      << (out.stack.homographies_exact ? "" : " (calibration exact for the reference focus plane only)") << '\n';
    m << "calibration=calibration.txt\n";
    for (std::size_t i = 0; i < out.stack.slices.slices.size(); ++i) m << "slices/" << slice_name(i) << '\n';
  }
  out.project = dir / "project.ini";
  {
    std::ofstream p(out.project);
    if (!p) throw IoError("cannot write " + out.project.string());
    p << "[project]\noutput_dir = output\ncalibration = calibration.txt\n\n";
    p << "[view]\nview_id = view_000\npan_index = 0\ntilt_index = 0\nslice_dir = slices\n";
    if (with_backlit) p << "backlit_dir = backlit\n";
  }
  return out;
}

// ---------------------------------------------------------------- poses

std::vector<PoseRecord> synth_poses(double radius_mm, double pan_step_deg, const std::vector<double>& tilt_elevations_deg,
                                    double noise_sigma_mm, double drop_fraction, std::uint64_t seed,
                                    const PoseJitter& jitter) {
  if (!(radius_mm > 0.0)) throw DomainError("pose sphere radius must be positive");
  if (!(pan_step_deg > 0.0 && pan_step_deg <= 180.0)) throw DomainError("pan step must lie in (0, 180] degrees");
  if (!(noise_sigma_mm >= 0.0) || !(jitter.pan_deg >= 0.0) || !(jitter.tilt_deg >= 0.0)) {
    throw DomainError("noise levels must be non-negative");
  }
  if (!(drop_fraction >= 0.0 && drop_fraction <= 1.0)) throw DomainError("drop fraction must lie in [0,1]");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int n_pan = static_cast<int>(std::floor(360.0 / pan_step_deg + 1e-9));
  constexpr double kDeg = M_PI / 180.0;

  std::vector<PoseRecord> poses;
  int view = 0;
  for (std::size_t t = 0; t < tilt_elevations_deg.size(); ++t) {
    for (int j = 0; j < n_pan; ++j) {
      const double az = (j * pan_step_deg + jitter.pan_deg * gauss(rng)) * kDeg;
      const double el = (tilt_elevations_deg[t] + jitter.tilt_deg * gauss(rng)) * kDeg;
      PoseRecord p;
      p.view_id = view++;
      p.pan_index = j;
      p.tilt_index = static_cast<int>(t);
      p.center = radius_mm * Eigen::Vector3d(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
      for (int k = 0; k < 3; ++k) p.center(k) += noise_sigma_mm * gauss(rng);
      poses.push_back(p);
    }
  }

  const auto n_drop = static_cast<std::size_t>(std::lround(drop_fraction * static_cast<double>(poses.size())));
  std::vector<std::size_t> order(poses.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t k = 0; k < n_drop; ++k) {
    PoseRecord& p = poses[order[k]];
    p.detected = false;
    p.center.setConstant(std::numeric_limits<double>::quiet_NaN());
  }
  return poses;
}

}  // namespace fixedlens
