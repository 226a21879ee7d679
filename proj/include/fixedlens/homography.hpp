#pragma once

#include <Eigen/Core>

#include <vector>

namespace fixedlens {

/// 3x3 projective map from slice pixel coordinates to reference pixel
/// coordinates. Estimated homographies are kept in canonical form:
/// Frobenius norm 1 and h33 > 0.
struct Homography {
  Eigen::Matrix3d matrix = Eigen::Matrix3d::Identity();
  /// RMS reprojection residual of the estimate, in pixels (0 when exact or unknown).
  double rms_px = 0.0;

  static Homography identity() { return Homography{}.canonical(); }
  static Homography from_matrix(const Eigen::Matrix3d& m) { return Homography{m, 0.0}.canonical(); }

  Homography canonical() const;
  Eigen::Vector2d apply(const Eigen::Vector2d& p) const;
  /// SingularError when |det| <= 1e-12 in canonical scale.
  Homography inverse() const;
  /// Map applying `this` first, then `next`.
  Homography then(const Homography& next) const;
  bool invertible() const;
};

struct PointPair {
  Eigen::Vector2d slice_point;
  Eigen::Vector2d reference_point;
};

struct Correspondence {
  std::vector<PointPair> pairs;
};

/// Normalised DLT: every pair contributes the two independent rows of
///   [X_r]_x H X_i = 0,
/// the stacked system is solved for the right singular vector with the
/// smallest singular value, with Hartley conditioning on both point sets.
/// The returned homography maps slice points onto reference points and
/// carries the RMS reprojection error.
///
/// Throws DegenerateError for fewer than 4 pairs, duplicate reference
/// points, max(3, n-2) or more collinear points, or a system of rank < 8.
Homography estimate_homography(const Correspondence& correspondence);

/// RMS of |H(slice) - reference| over the pairs.
double reprojection_rms(const Homography& h, const Correspondence& correspondence);

}  // namespace fixedlens
