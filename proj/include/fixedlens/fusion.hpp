#pragma once

#include "fixedlens/guided_filter.hpp"
#include "fixedlens/homography.hpp"
#include "fixedlens/image.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fixedlens {

/// Co-registered slices of one view, in capture order.
struct FocusStack {
  std::vector<ImageBuffer> slices;
  std::vector<int> source_ids;
};

struct SaliencyParams {
  int log_radius = 3;
  double log_sigma = 1.0;
  int smooth_radius = 5;
  double smooth_sigma = 5.0 / 3.0;
};

struct FusionParams {
  GuidedFilterParams base{45, 0.3};
  GuidedFilterParams detail{7, 1e-6};
  int average_radius = 15;  // base layer = box mean over (2r+1)^2
  SaliencyParams saliency;
};

enum class WeightStage { Binary, GuidedBase, GuidedDetail, Normalized };

struct WeightMaps {
  std::vector<Plane> maps;
  WeightStage stage = WeightStage::Binary;
};

struct TwoScalePair {
  ImageBuffer base;
  ImageBuffer detail;  // signed offsets
};

/// Gaussian-smoothed magnitude of the Laplacian of Gaussian of the luma.
Plane saliency(const ImageBuffer& img, const SaliencyParams& params = {});

/// Per pixel, weight 1 for the slice with the largest saliency (lowest index
/// on ties), 0 elsewhere.
WeightMaps binary_weights(const std::vector<Plane>& saliencies);

/// Image-level guided filter: both inputs single-channel and the same size.
ImageBuffer guided_filter(const ImageBuffer& input, const ImageBuffer& guidance, const GuidedFilterParams& params);

/// base = box mean with the given radius, detail = img - base.
TwoScalePair two_scale_decompose(const ImageBuffer& img, int average_radius = 15);

/// Fused image with the intermediate maps kept for inspection.
struct FusionResult {
  ImageBuffer fused;
  std::vector<Plane> saliency;
  WeightMaps binary;
  WeightMaps base_weights;    // normalized
  WeightMaps detail_weights;  // normalized
};

/// Guided-filter two-scale fusion. Binary argmax weights are refined by
/// guided filtering against each slice's luma, clamped to [0,1], zeroed where
/// the slice is invalid, and normalized to sum to one per pixel (uniform over
/// valid slices where every weight vanishes). Base and detail layers are
/// blended separately and summed; the result is clamped to [0,1]. The result
/// is valid wherever at least one slice is valid.
FusionResult fuse_detailed(const FocusStack& stack, const FusionParams& params = {});

ImageBuffer fuse(const FocusStack& stack, const GuidedFilterParams& base_params = {45, 0.3},
                 const GuidedFilterParams& detail_params = {7, 1e-6});

/// Slice list plus calibration reference read from a stack manifest.
struct StackManifest {
  std::vector<std::filesystem::path> slices;
  std::optional<std::filesystem::path> calibration;
  FusionParams params;
};

/// Manifest text: one slice path per line, `calibration=<path>` and
/// `params.<name>=<value>` header lines, `#` comments. Relative paths resolve
/// against the manifest's directory.
StackManifest read_manifest(const std::filesystem::path& path);

/// Applies one `params.<name>` override (name without the prefix).
void set_fusion_param(FusionParams& params, const std::string& name, const std::string& value);

/// Loads the manifest's slices, warps slice i by calibration record i
/// (identity without a calibration file), fuses, and writes `output`. With
/// `debug_dir`, saliency, binary and guided weight maps are written per slice.
FusionResult fuse_stack_files(const std::filesystem::path& manifest, const std::filesystem::path& output,
                              const std::optional<std::filesystem::path>& debug_dir = std::nullopt,
                              int bit_depth = 16);

/// Warps each slice by its calibration record and fuses (no file output).
FusionResult fuse_calibrated(const std::vector<ImageBuffer>& slices, const std::vector<Homography>& homographies,
                             const FusionParams& params);

}  // namespace fixedlens
