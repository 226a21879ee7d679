#include "fixedlens/masking.hpp"

#include "fixedlens/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace fixedlens {

double otsu_threshold(const Plane& values) {
  constexpr int kBins = 256;
  std::array<double, kBins> hist{};
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const double v = std::clamp(values(i), 0.0, 1.0);
    hist[static_cast<std::size_t>(std::min(kBins - 1, static_cast<int>(v * kBins)))] += 1.0;
  }
  const double total = static_cast<double>(values.size());
  double sum_all = 0.0;
  for (int b = 0; b < kBins; ++b) sum_all += b * hist[static_cast<std::size_t>(b)];

  // Between-class variance for the split "bins <= k | bins > k".
  std::array<double, kBins> between{};
  double w0 = 0.0, sum0 = 0.0, best = -1.0;
  for (int k = 0; k < kBins - 1; ++k) {
    w0 += hist[static_cast<std::size_t>(k)];
    sum0 += k * hist[static_cast<std::size_t>(k)];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) {
      between[static_cast<std::size_t>(k)] = -1.0;
      continue;
    }
    const double m0 = sum0 / w0;
    const double m1 = (sum_all - sum0) / w1;
    between[static_cast<std::size_t>(k)] = w0 * w1 * (m0 - m1) * (m0 - m1);
    best = std::max(best, between[static_cast<std::size_t>(k)]);
  }
  if (best < 0.0) return 0.5;  // single-valued histogram
  int first = -1, last = -1;
  for (int k = 0; k < kBins - 1; ++k) {
    if (between[static_cast<std::size_t>(k)] >= best * (1.0 - 1e-12)) {
      if (first < 0) first = k;
      last = k;
    }
  }
  const int split = (first + last) / 2;
  return static_cast<double>(split + 1) / kBins;
}

namespace {

Mask morph(const Mask& in, int radius, bool erode) {
  const auto rows = in.rows();
  const auto cols = in.cols();
  Mask out(rows, cols);
  for (Eigen::Index y = 0; y < rows; ++y) {
    for (Eigen::Index x = 0; x < cols; ++x) {
      bool acc = erode;
      for (int dy = -radius; dy <= radius && acc == erode; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          if (dx * dx + dy * dy > radius * radius) continue;
          const auto sy = std::clamp<Eigen::Index>(y + dy, 0, rows - 1);
          const auto sx = std::clamp<Eigen::Index>(x + dx, 0, cols - 1);
          if (in(sy, sx) != erode) {
            acc = !erode;
            break;
          }
        }
      }
      out(y, x) = acc;
    }
  }
  return out;
}

}  // namespace

ImageBuffer backlight_mask(const ImageBuffer& backlit, const MaskParams& params) {
  if (params.method == ThresholdMethod::Fixed && !(params.threshold >= 0.0 && params.threshold <= 1.0)) {
    throw DomainError("fixed mask threshold must lie in [0,1]");
  }
  if (params.morph_open_radius < 0) throw DomainError("opening radius must be >= 0");
  const Plane lum = luma(backlit);
  const double t = params.method == ThresholdMethod::Otsu ? otsu_threshold(lum) : params.threshold;
  Mask fg = lum < t;
  if (params.invert) fg = !fg;
  if (params.morph_open_radius > 0) {
    fg = morph(morph(fg, params.morph_open_radius, true), params.morph_open_radius, false);
  }
  const auto count = fg.count();
  if (count == 0) throw DegenerateError("backlight mask has no foreground");
  if (count == fg.size()) throw DegenerateError("backlight mask covers the whole frame");
  return ImageBuffer::from_plane(fg.cast<double>());
}

ImageBuffer apply_mask(const ImageBuffer& fused, const ImageBuffer& mask) {
  if (mask.width() != fused.width() || mask.height() != fused.height()) {
    throw DimensionError("apply_mask: mask and image dimensions differ");
  }
  ImageBuffer out = fused;
  out.set_validity(luma(mask) > 0.5);
  return out;
}

}  // namespace fixedlens
