#include "fixedlens/fusion.hpp"

#include "fixedlens/calibration.hpp"
#include "fixedlens/errors.hpp"
#include "fixedlens/image_io.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <fstream>

namespace fixedlens {

Plane saliency(const ImageBuffer& img, const SaliencyParams& params) {
  const Eigen::ArrayXXd log_kernel =
      make_kernel({KernelKind::LaplacianOfGaussian, params.log_radius, params.log_sigma});
  const Plane response = filter_2d(luma(img), log_kernel).abs();
  return separable_filter(response, gaussian_taps(params.smooth_sigma, params.smooth_radius));
}

WeightMaps binary_weights(const std::vector<Plane>& saliencies) {
  if (saliencies.empty()) throw EmptyStackError("binary_weights: no saliency maps");
  const auto rows = saliencies.front().rows();
  const auto cols = saliencies.front().cols();
  for (const auto& s : saliencies) {
    if (s.rows() != rows || s.cols() != cols) throw DimensionError("binary_weights: saliency maps differ in size");
  }
  WeightMaps out;
  out.stage = WeightStage::Binary;
  out.maps.assign(saliencies.size(), Plane::Zero(rows, cols));
  for (Eigen::Index y = 0; y < rows; ++y) {
    for (Eigen::Index x = 0; x < cols; ++x) {
      std::size_t best = 0;
      for (std::size_t n = 1; n < saliencies.size(); ++n) {
        if (saliencies[n](y, x) > saliencies[best](y, x)) best = n;
      }
      out.maps[best](y, x) = 1.0;
    }
  }
  return out;
}

ImageBuffer guided_filter(const ImageBuffer& input, const ImageBuffer& guidance, const GuidedFilterParams& params) {
  if (input.channels() != 1 || guidance.channels() != 1) {
    throw DimensionError("guided_filter: input and guidance must be single-channel");
  }
  if (input.width() != guidance.width() || input.height() != guidance.height()) {
    throw DimensionError("guided_filter: input and guidance dimensions differ");
  }
  return ImageBuffer::from_plane(guided_filter(input.plane(0), guidance.plane(0), params));
}

TwoScalePair two_scale_decompose(const ImageBuffer& img, int average_radius) {
  ImageBuffer base = box_mean(img, average_radius);
  std::vector<Plane> detail;
  for (int c = 0; c < img.channels(); ++c) detail.push_back(img.plane(c) - base.plane(c));
  return {std::move(base), ImageBuffer::from_planes(std::move(detail))};
}

namespace {

// Clamp to [0,1], drop invalid pixels, normalize to a partition of unity.
void normalize_weights(std::vector<Plane>& maps, const std::vector<Mask>& valid) {
  const auto rows = maps.front().rows();
  const auto cols = maps.front().cols();
  const std::size_t n = maps.size();
  for (std::size_t k = 0; k < n; ++k) {
    maps[k] = maps[k].max(0.0).min(1.0);
    maps[k] = valid[k].select(maps[k], 0.0);
  }
  for (Eigen::Index y = 0; y < rows; ++y) {
    for (Eigen::Index x = 0; x < cols; ++x) {
      double sum = 0.0;
      for (std::size_t k = 0; k < n; ++k) sum += maps[k](y, x);
      if (sum >= 1e-9) {
        for (std::size_t k = 0; k < n; ++k) maps[k](y, x) /= sum;
        continue;
      }
      std::size_t n_valid = 0;
      for (std::size_t k = 0; k < n; ++k) n_valid += valid[k](y, x) ? 1 : 0;
      for (std::size_t k = 0; k < n; ++k) {
        if (n_valid == 0) {
          maps[k](y, x) = 1.0 / static_cast<double>(n);
        } else {
          maps[k](y, x) = valid[k](y, x) ? 1.0 / static_cast<double>(n_valid) : 0.0;
        }
      }
    }
  }
}

}  // namespace

FusionResult fuse_detailed(const FocusStack& stack, const FusionParams& params) {
  const auto& slices = stack.slices;
  if (slices.empty()) throw EmptyStackError("fuse: empty focus stack");
  const ImageBuffer& first = slices.front();
  for (const auto& s : slices) {
    if (!s.same_shape(first)) throw DimensionError("fuse: slices differ in size or channel count");
  }
  const auto rows = static_cast<Eigen::Index>(first.height());
  const auto cols = static_cast<Eigen::Index>(first.width());
  const std::size_t n = slices.size();

  FusionResult result;
  std::vector<Plane> guides;
  std::vector<Mask> valid;
  std::vector<Plane> ranked;  // saliency with invalid pixels pushed below any valid value
  bool any_invalid = false;
  for (const auto& s : slices) {
    guides.push_back(luma(s));
    result.saliency.push_back(saliency(s, params.saliency));
    valid.push_back(s.has_validity() ? s.validity() : Mask::Constant(rows, cols, true));
    any_invalid = any_invalid || !valid.back().all();
    // Pixels whose saliency support touches invalid samples rank below clean
    // ones: the zero fill of warped borders would otherwise read as an edge.
    const int support = params.saliency.log_radius + params.saliency.smooth_radius;
    const Mask clean = box_mean(valid.back().cast<double>(), support) >= 1.0 - 1e-12;
    ranked.push_back(clean.select(result.saliency.back(), valid.back().select(Plane::Constant(rows, cols, -0.5), -1.0)));
  }

  result.binary = binary_weights(ranked);
  result.base_weights.stage = WeightStage::Normalized;
  result.detail_weights.stage = WeightStage::Normalized;
  for (std::size_t k = 0; k < n; ++k) {
    result.base_weights.maps.push_back(guided_filter(result.binary.maps[k], guides[k], params.base));
    result.detail_weights.maps.push_back(guided_filter(result.binary.maps[k], guides[k], params.detail));
  }
  normalize_weights(result.base_weights.maps, valid);
  normalize_weights(result.detail_weights.maps, valid);

  std::vector<Plane> fused(static_cast<std::size_t>(first.channels()), Plane::Zero(rows, cols));
  for (std::size_t k = 0; k < n; ++k) {
    const TwoScalePair layers = two_scale_decompose(slices[k], params.average_radius);
    for (int c = 0; c < first.channels(); ++c) {
      fused[static_cast<std::size_t>(c)] += result.base_weights.maps[k] * layers.base.plane(c) +
                                            result.detail_weights.maps[k] * layers.detail.plane(c);
    }
  }
  for (auto& p : fused) p = p.max(0.0).min(1.0);
  result.fused = ImageBuffer::from_planes(std::move(fused));
  if (any_invalid) {
    Mask any = Mask::Constant(rows, cols, false);
    for (const auto& v : valid) any = any || v;
    result.fused.set_validity(std::move(any));
  }
  return result;
}

ImageBuffer fuse(const FocusStack& stack, const GuidedFilterParams& base_params,
                 const GuidedFilterParams& detail_params) {
  FusionParams params;
  params.base = base_params;
  params.detail = detail_params;
  return fuse_detailed(stack, params).fused;
}

void set_fusion_param(FusionParams& params, const std::string& name, const std::string& value) {
  const std::string what = "params." + name;
  if (name == "base_radius") {
    params.base.radius = text::to_int(value, what);
  } else if (name == "base_eps") {
    params.base.eps = text::to_double(value, what);
  } else if (name == "detail_radius") {
    params.detail.radius = text::to_int(value, what);
  } else if (name == "detail_eps") {
    params.detail.eps = text::to_double(value, what);
  } else if (name == "average_radius") {
    params.average_radius = text::to_int(value, what);
  } else if (name == "log_radius") {
    params.saliency.log_radius = text::to_int(value, what);
  } else if (name == "log_sigma") {
    params.saliency.log_sigma = text::to_double(value, what);
  } else if (name == "smooth_radius") {
    params.saliency.smooth_radius = text::to_int(value, what);
  } else if (name == "smooth_sigma") {
    params.saliency.smooth_sigma = text::to_double(value, what);
  } else {
    throw ValidationError("unknown fusion parameter '" + name + "'");
  }
  const bool ok = params.base.radius >= 1 && params.base.eps > 0 && params.detail.radius >= 1 &&
                  params.detail.eps > 0 && params.average_radius >= 1 && params.saliency.log_radius >= 1 &&
                  params.saliency.log_sigma > 0 && params.saliency.smooth_radius >= 1 &&
                  params.saliency.smooth_sigma > 0;
  if (!ok) throw ValidationError(what + " = " + value + " is out of range");
}

StackManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read manifest " + path.string());
  const auto base_dir = path.parent_path();
  const auto resolve = [&](std::string_view p) {
    std::filesystem::path q{std::string(p)};
    return q.is_absolute() ? q : base_dir / q;
  };
  StackManifest m;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = text::strip_comment(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      m.slices.push_back(resolve(body));
      continue;
    }
    const std::string key(text::trim(body.substr(0, eq)));
    const std::string value(text::trim(body.substr(eq + 1)));
    try {
      if (key == "calibration") {
        m.calibration = resolve(value);
      } else if (key.rfind("params.", 0) == 0) {
        set_fusion_param(m.params, key.substr(7), value);
      } else {
        throw ValidationError("unknown manifest key '" + key + "'");
      }
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (m.slices.empty()) throw EmptyStackError(path.string() + ": manifest lists no slices");
  return m;
}

FusionResult fuse_calibrated(const std::vector<ImageBuffer>& slices, const std::vector<Homography>& homographies,
                             const FusionParams& params) {
  if (slices.size() != homographies.size()) {
    throw DimensionError("fuse_calibrated: one homography per slice required");
  }
  FocusStack stack;
  for (std::size_t i = 0; i < slices.size(); ++i) {
    stack.slices.push_back(warp_to_reference(slices[i], homographies[i]));
    stack.source_ids.push_back(static_cast<int>(i));
  }
  return fuse_detailed(stack, params);
}

FusionResult fuse_stack_files(const std::filesystem::path& manifest_path, const std::filesystem::path& output,
                              const std::optional<std::filesystem::path>& debug_dir, int bit_depth) {
  const StackManifest manifest = read_manifest(manifest_path);
  CalibrationTable table;
  if (manifest.calibration) table = read_calibration(*manifest.calibration);

  std::vector<ImageBuffer> slices;
  std::vector<Homography> homographies;
  for (std::size_t i = 0; i < manifest.slices.size(); ++i) {
    slices.push_back(load_image(manifest.slices[i]));
    if (!manifest.calibration) {
      homographies.push_back(Homography::identity());
      continue;
    }
    const auto it = table.find(static_cast<int>(i));
    if (it == table.end()) {
      throw ValidationError("calibration " + manifest.calibration->string() + " has no homography for slice " +
                            std::to_string(i));
    }
    homographies.push_back(it->second);
  }

  FusionResult result = fuse_calibrated(slices, homographies, manifest.params);
  save_image(result.fused, output, bit_depth);

  if (debug_dir) {
    std::filesystem::create_directories(*debug_dir);
    double peak = 0.0;
    for (const auto& s : result.saliency) peak = std::max(peak, s.maxCoeff());
    const auto dump = [&](const Plane& p, const std::string& name, double scale) {
      save_image(ImageBuffer::from_plane(p * scale), *debug_dir / name, 16);
    };
    for (std::size_t k = 0; k < result.saliency.size(); ++k) {
      char idx[16];
      std::snprintf(idx, sizeof(idx), "%03zu", k);
      dump(result.saliency[k], "saliency_" + std::string(idx) + ".png", peak > 0.0 ? 1.0 / peak : 1.0);
      dump(result.binary.maps[k], "binary_" + std::string(idx) + ".png", 1.0);
      dump(result.base_weights.maps[k], "base_weight_" + std::string(idx) + ".png", 1.0);
      dump(result.detail_weights.maps[k], "detail_weight_" + std::string(idx) + ".png", 1.0);
    }
  }
  return result;
}

}  // namespace fixedlens
