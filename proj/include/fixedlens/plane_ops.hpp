#pragma once

// Window kernels over single-channel planes. Every kernel uses replicate
// (clamp-to-edge) padding and keeps the input dimensions.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <vector>

namespace fixedlens {

template <typename Scalar>
using PlaneT = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Plane = PlaneT<double>;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {

inline Eigen::Index clamp_index(Eigen::Index i, Eigen::Index n) {
  return std::clamp<Eigen::Index>(i, 0, n - 1);
}

// Windowed sum along rows (axis 1) or columns (axis 0) of half-width radius.
template <typename Scalar>
PlaneT<Scalar> window_sum(const PlaneT<Scalar>& src, int radius, int axis) {
  const Eigen::Index rows = src.rows();
  const Eigen::Index cols = src.cols();
  const Eigen::Index len = axis == 1 ? cols : rows;
  const Eigen::Index lines = axis == 1 ? rows : cols;
  PlaneT<Scalar> out(rows, cols);
  std::vector<Scalar> prefix(static_cast<std::size_t>(len + 2 * radius + 1));
  for (Eigen::Index line = 0; line < lines; ++line) {
    prefix[0] = Scalar(0);
    for (Eigen::Index j = 0; j < len + 2 * radius; ++j) {
      const Eigen::Index s = clamp_index(j - radius, len);
      const Scalar v = axis == 1 ? src(line, s) : src(s, line);
      prefix[j + 1] = prefix[j] + v;
    }
    for (Eigen::Index j = 0; j < len; ++j) {
      const Scalar sum = prefix[j + 2 * radius + 1] - prefix[j];
      if (axis == 1) {
        out(line, j) = sum;
      } else {
        out(j, line) = sum;
      }
    }
  }
  return out;
}

template <typename Scalar>
PlaneT<Scalar> correlate_1d(const PlaneT<Scalar>& src, const std::vector<double>& taps, int axis) {
  const int radius = static_cast<int>(taps.size() / 2);
  const Eigen::Index rows = src.rows();
  const Eigen::Index cols = src.cols();
  PlaneT<Scalar> out(rows, cols);
  for (Eigen::Index y = 0; y < rows; ++y) {
    for (Eigen::Index x = 0; x < cols; ++x) {
      Scalar acc(0);
      for (int d = -radius; d <= radius; ++d) {
        const Scalar v = axis == 1 ? src(y, clamp_index(x + d, cols)) : src(clamp_index(y + d, rows), x);
        acc += Scalar(taps[static_cast<std::size_t>(d + radius)]) * v;
      }
      out(y, x) = acc;
    }
  }
  return out;
}

}  // namespace detail

/// Mean over the (2r+1)x(2r+1) window centred on each pixel, computed with
/// running sums (cost independent of r).
template <typename Derived>
PlaneT<typename Derived::Scalar> box_mean(const Eigen::ArrayBase<Derived>& src, int radius) {
  using Scalar = typename Derived::Scalar;
  const PlaneT<Scalar> plane = src;
  if (radius <= 0) return plane;
  const Scalar area = Scalar((2 * radius + 1) * (2 * radius + 1));
  return detail::window_sum<Scalar>(detail::window_sum<Scalar>(plane, radius, 1), radius, 0) / area;
}

/// Separable correlation with a symmetric odd-length 1D kernel applied along both axes.
template <typename Derived>
PlaneT<typename Derived::Scalar> separable_filter(const Eigen::ArrayBase<Derived>& src,
                                                  const std::vector<double>& taps) {
  using Scalar = typename Derived::Scalar;
  const PlaneT<Scalar> plane = src;
  return detail::correlate_1d<Scalar>(detail::correlate_1d<Scalar>(plane, taps, 1), taps, 0);
}

/// Direct 2D correlation with a (2r+1)x(2r+1) kernel. Kernels used here are
/// point-symmetric, so this equals convolution.
template <typename Derived, typename KernelDerived>
PlaneT<typename Derived::Scalar> filter_2d(const Eigen::ArrayBase<Derived>& src,
                                           const Eigen::ArrayBase<KernelDerived>& kernel) {
  using Scalar = typename Derived::Scalar;
  const PlaneT<Scalar> plane = src;
  const Eigen::Index kr = kernel.rows() / 2;
  const Eigen::Index kc = kernel.cols() / 2;
  PlaneT<Scalar> out(plane.rows(), plane.cols());
  for (Eigen::Index y = 0; y < plane.rows(); ++y) {
    for (Eigen::Index x = 0; x < plane.cols(); ++x) {
      Scalar acc(0);
      for (Eigen::Index dy = -kr; dy <= kr; ++dy) {
        const Eigen::Index sy = detail::clamp_index(y + dy, plane.rows());
        for (Eigen::Index dx = -kc; dx <= kc; ++dx) {
          acc += Scalar(kernel(dy + kr, dx + kc)) * plane(sy, detail::clamp_index(x + dx, plane.cols()));
        }
      }
      out(y, x) = acc;
    }
  }
  return out;
}

/// Normalised 1D Gaussian taps; radius defaults to ceil(3 sigma).
inline std::vector<double> gaussian_taps(double sigma, int radius = -1) {
  if (radius < 0) radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int d = -radius; d <= radius; ++d) {
    const double w = std::exp(-0.5 * d * d / (sigma * sigma));
    taps[static_cast<std::size_t>(d + radius)] = w;
    sum += w;
  }
  for (double& w : taps) w /= sum;
  return taps;
}

template <typename Derived>
PlaneT<typename Derived::Scalar> gaussian_blur(const Eigen::ArrayBase<Derived>& src, double sigma) {
  if (sigma <= 0.0) return src;
  return separable_filter(src, gaussian_taps(sigma));
}

}  // namespace fixedlens
