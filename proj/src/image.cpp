#include "fixedlens/image.hpp"

#include "fixedlens/errors.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace fixedlens {

ImageBuffer::ImageBuffer(int width, int height, int channels, double fill) : width_(width), height_(height) {
  if (width <= 0 || height <= 0) throw DimensionError("image dimensions must be positive");
  if (channels != 1 && channels != 3) throw DimensionError("image must have 1 or 3 channels");
  planes_.assign(static_cast<std::size_t>(channels), Plane::Constant(height, width, fill));
}

ImageBuffer ImageBuffer::from_plane(Plane plane) {
  std::vector<Plane> planes;
  planes.push_back(std::move(plane));
  return from_planes(std::move(planes));
}

ImageBuffer ImageBuffer::from_planes(std::vector<Plane> planes) {
  if (planes.size() != 1 && planes.size() != 3) throw DimensionError("image must have 1 or 3 channels");
  const auto rows = planes.front().rows();
  const auto cols = planes.front().cols();
  if (rows <= 0 || cols <= 0) throw DimensionError("image dimensions must be positive");
  for (const auto& p : planes) {
    if (p.rows() != rows || p.cols() != cols) throw DimensionError("channel planes differ in size");
    if (!p.allFinite()) throw DomainError("image samples must be finite");
  }
  ImageBuffer img;
  img.width_ = static_cast<int>(cols);
  img.height_ = static_cast<int>(rows);
  img.planes_ = std::move(planes);
  return img;
}

void ImageBuffer::set_validity(Mask mask) {
  if (mask.rows() != height_ || mask.cols() != width_) {
    throw DimensionError("validity mask must have width x height entries");
  }
  validity_ = std::move(mask);
}

std::vector<double> ImageBuffer::interleaved() const {
  const int nc = channels();
  std::vector<double> out(static_cast<std::size_t>(width_) * height_ * nc);
  std::size_t i = 0;
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      for (int c = 0; c < nc; ++c) out[i++] = planes_[static_cast<std::size_t>(c)](y, x);
    }
  }
  return out;
}

Eigen::ArrayXXd make_kernel(const KernelSpec& spec) {
  if (spec.radius < 1) throw DomainError("kernel radius must be >= 1");
  const int r = spec.radius;
  const int n = 2 * r + 1;
  Eigen::ArrayXXd k(n, n);
  switch (spec.kind) {
    case KernelKind::Box:
      k.setConstant(1.0 / (n * n));
      return k;
    case KernelKind::Gaussian: {
      if (!(spec.sigma > 0.0)) throw DomainError("Gaussian sigma must be positive");
      const auto taps = gaussian_taps(spec.sigma, r);
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) k(y, x) = taps[static_cast<std::size_t>(y)] * taps[static_cast<std::size_t>(x)];
      return k;
    }
    case KernelKind::LaplacianOfGaussian: {
      if (!(spec.sigma > 0.0)) throw DomainError("LoG sigma must be positive");
      const double s2 = spec.sigma * spec.sigma;
      for (int y = -r; y <= r; ++y) {
        for (int x = -r; x <= r; ++x) {
          const double q = (x * x + y * y) / (2.0 * s2);
          k(y + r, x + r) = -1.0 / (M_PI * s2 * s2) * (1.0 - q) * std::exp(-q);
        }
      }
      // Truncation leaves a residual DC response; remove it.
      k -= k.mean();
      return k;
    }
  }
  throw DomainError("unknown kernel kind");
}

namespace {

template <typename Fn>
ImageBuffer map_planes(const ImageBuffer& img, Fn&& fn) {
  std::vector<Plane> planes;
  planes.reserve(static_cast<std::size_t>(img.channels()));
  for (const auto& p : img.planes()) planes.push_back(fn(p));
  ImageBuffer out = ImageBuffer::from_planes(std::move(planes));
  if (img.has_validity()) out.set_validity(img.validity());
  return out;
}

}  // namespace

ImageBuffer convolve(const ImageBuffer& img, const KernelSpec& kernel) {
  switch (kernel.kind) {
    case KernelKind::Box:
      return box_mean(img, kernel.radius);
    case KernelKind::Gaussian: {
      const auto taps = gaussian_taps(kernel.sigma, kernel.radius);
      return map_planes(img, [&](const Plane& p) { return separable_filter(p, taps); });
    }
    case KernelKind::LaplacianOfGaussian: {
      const Eigen::ArrayXXd k = make_kernel(kernel);
      return map_planes(img, [&](const Plane& p) { return filter_2d(p, k); });
    }
  }
  throw DomainError("unknown kernel kind");
}

ImageBuffer box_mean(const ImageBuffer& img, int radius) {
  if (radius < 1) throw DomainError("box_mean radius must be >= 1");
  return map_planes(img, [&](const Plane& p) { return fixedlens::box_mean(p, radius); });
}

ImageBuffer gaussian_blur(const ImageBuffer& img, double sigma) {
  return map_planes(img, [&](const Plane& p) { return fixedlens::gaussian_blur(p, sigma); });
}

Sample sample_bilinear(const ImageBuffer& img, double x, double y) {
  Sample s;
  s.values.assign(static_cast<std::size_t>(img.channels()), 0.0);
  const int w = img.width();
  const int h = img.height();
  if (!(x >= 0.0 && y >= 0.0 && x <= w - 1 && y <= h - 1)) return s;

  const int x0 = std::min(static_cast<int>(std::floor(x)), w - 1);
  const int y0 = std::min(static_cast<int>(std::floor(y)), h - 1);
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double w00 = (1 - fx) * (1 - fy);
  const double w10 = fx * (1 - fy);
  const double w01 = (1 - fx) * fy;
  const double w11 = fx * fy;

  if (img.has_validity()) {
    const auto bad = [&](int px, int py, double wt) { return wt > 0.0 && !img.valid(px, py); };
    if (bad(x0, y0, w00) || bad(x1, y0, w10) || bad(x0, y1, w01) || bad(x1, y1, w11)) return s;
  }
  for (int c = 0; c < img.channels(); ++c) {
    const Plane& p = img.plane(c);
    // Exact pixel hits skip the blend so integer coordinates are bit-exact.
    if (fx == 0.0 && fy == 0.0) {
      s.values[static_cast<std::size_t>(c)] = p(y0, x0);
    } else {
      s.values[static_cast<std::size_t>(c)] =
          w00 * p(y0, x0) + w10 * p(y0, x1) + w01 * p(y1, x0) + w11 * p(y1, x1);
    }
  }
  s.valid = true;
  return s;
}

Plane luma(const ImageBuffer& img) {
  if (img.channels() == 1) return img.plane(0);
  return 0.299 * img.plane(0) + 0.587 * img.plane(1) + 0.114 * img.plane(2);
}

double psnr(const ImageBuffer& a, const ImageBuffer& b, const Mask* region) {
  if (!a.same_shape(b)) throw DimensionError("psnr: image shapes differ");
  double sse = 0.0;
  std::size_t n = 0;
  for (int c = 0; c < a.channels(); ++c) {
    const Plane diff = a.plane(c) - b.plane(c);
    if (region) {
      if (region->rows() != a.height() || region->cols() != a.width()) throw DimensionError("psnr: region mask size");
      sse += (diff.square() * region->cast<double>()).sum();
      n += static_cast<std::size_t>(region->count());
    } else {
      sse += diff.square().sum();
      n += static_cast<std::size_t>(diff.size());
    }
  }
  if (n == 0) throw DomainError("psnr: empty region");
  const double mse = sse / static_cast<double>(n);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace fixedlens
