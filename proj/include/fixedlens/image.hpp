#pragma once

#include "fixedlens/plane_ops.hpp"

#include <optional>
#include <vector>

namespace fixedlens {

/// Raster of real samples in [0,1] with 1 (gray) or 3 (RGB) channels and an
/// optional per-pixel validity mask. Channels are stored as separate
/// row-major planes indexed (y, x); interleaved() gives the packed layout.
class ImageBuffer {
 public:
  ImageBuffer() = default;
  ImageBuffer(int width, int height, int channels, double fill = 0.0);

  static ImageBuffer from_plane(Plane plane);
  static ImageBuffer from_planes(std::vector<Plane> planes);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return static_cast<int>(planes_.size()); }
  bool empty() const { return planes_.empty(); }

  const Plane& plane(int c) const { return planes_.at(static_cast<std::size_t>(c)); }
  Plane& plane(int c) { return planes_.at(static_cast<std::size_t>(c)); }
  const std::vector<Plane>& planes() const { return planes_; }

  double operator()(int x, int y, int c = 0) const { return planes_[static_cast<std::size_t>(c)](y, x); }
  double& operator()(int x, int y, int c = 0) { return planes_[static_cast<std::size_t>(c)](y, x); }

  bool has_validity() const { return validity_.has_value(); }
  const Mask& validity() const { return *validity_; }
  void set_validity(Mask mask);
  void clear_validity() { validity_.reset(); }
  bool valid(int x, int y) const { return !validity_ || (*validity_)(y, x); }

  /// Samples packed row-major, channel-interleaved.
  std::vector<double> interleaved() const;

  bool same_shape(const ImageBuffer& other) const {
    return width_ == other.width_ && height_ == other.height_ && channels() == other.channels();
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<Plane> planes_;
  std::optional<Mask> validity_;
};

enum class KernelKind { Box, Gaussian, LaplacianOfGaussian };

struct KernelSpec {
  KernelKind kind = KernelKind::Box;
  int radius = 1;
  double sigma = 1.0;
};

/// Dense (2r+1)x(2r+1) weights. Box and Gaussian sum to 1, LoG sums to 0.
Eigen::ArrayXXd make_kernel(const KernelSpec& spec);

/// Per-channel replicate-padded convolution; validity is carried over unchanged.
ImageBuffer convolve(const ImageBuffer& img, const KernelSpec& kernel);

ImageBuffer box_mean(const ImageBuffer& img, int radius);

ImageBuffer gaussian_blur(const ImageBuffer& img, double sigma);

struct Sample {
  std::vector<double> values;
  bool valid = false;
};

/// Bilinear interpolation at pixel coordinates (pixel centres at integers).
/// Outside [0, w-1] x [0, h-1] the result is 0 and invalid; a sample is also
/// invalid when any contributing neighbour is masked out.
Sample sample_bilinear(const ImageBuffer& img, double x, double y);

/// 0.299 R + 0.587 G + 0.114 B, or the single channel of a gray image.
Plane luma(const ImageBuffer& img);

/// Peak signal-to-noise ratio (peak 1.0) over all channels; when `region` is
/// given only pixels where it is true are counted.
double psnr(const ImageBuffer& a, const ImageBuffer& b, const Mask* region = nullptr);

}  // namespace fixedlens
