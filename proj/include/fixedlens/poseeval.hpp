#pragma once

#include "fixedlens/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

namespace fixedlens {

struct PoseRecord {
  int view_id = 0;
  int pan_index = 0;
  int tilt_index = 0;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();  // mm
  bool detected = true;
};

template <typename Scalar>
struct SphereFitT {
  Eigen::Matrix<Scalar, 3, 1> center;
  Scalar radius;
  Scalar residual_rms;
};

using SphereFit = SphereFitT<double>;

/// Algebraic least-squares sphere: solves 2 c.p + k = |p|^2 for (c, k) with
/// k = r^2 - |c|^2 by QR on mean-centred coordinates. The residual is the
/// geometric RMS of |p - c| - r. DegenerateError for fewer than 4 points or
/// points coplanar to 1e-9 relative.
template <typename Scalar>
SphereFitT<Scalar> fit_sphere(const Eigen::Matrix<Scalar, 3, Eigen::Dynamic>& points) {
  using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
  const Eigen::Index n = points.cols();
  if (n < 4) throw DegenerateError("sphere fit needs at least 4 points");
  if (!points.allFinite()) throw DegenerateError("sphere fit points must be finite");

  const Vec3 mean = points.rowwise().mean();
  const Eigen::Matrix<Scalar, 3, Eigen::Dynamic> centred = points.colwise() - mean;
  const Eigen::JacobiSVD<Eigen::Matrix<Scalar, 3, Eigen::Dynamic>> spread(centred);
  const auto sv = spread.singularValues();
  if (!(sv(0) > Scalar(0)) || sv(2) <= Scalar(1e-9) * sv(0)) {
    throw DegenerateError("sphere fit points are coplanar");
  }

  Eigen::Matrix<Scalar, Eigen::Dynamic, 4> a(n, 4);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3 p = centred.col(i);
    a.row(i) << Scalar(2) * p.transpose(), Scalar(1);
    b(i) = p.squaredNorm();
  }
  const Eigen::ColPivHouseholderQR<Eigen::Matrix<Scalar, Eigen::Dynamic, 4>> qr(a);
  if (qr.rank() < 4) throw DegenerateError("sphere fit system is singular");
  const Eigen::Matrix<Scalar, 4, 1> sol = qr.solve(b);

  const Vec3 c_local = sol.template head<3>();
  const Scalar r2 = sol(3) + c_local.squaredNorm();
  if (!(r2 > Scalar(0))) throw DegenerateError("sphere fit produced a non-positive radius");

  SphereFitT<Scalar> fit;
  fit.center = c_local + mean;
  fit.radius = std::sqrt(r2);
  Scalar sse(0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar d = (centred.col(i) - c_local).norm() - fit.radius;
    sse += d * d;
  }
  fit.residual_rms = std::sqrt(sse / Scalar(n));
  return fit;
}

/// Sphere fit to the detected poses' centres.
SphereFit fit_sphere(const std::vector<PoseRecord>& poses);

struct StepStats {
  double radial_mean_mm = 0.0;
  double radial_std_mm = 0.0;
  double pan_step_mean_deg = 0.0;
  double pan_step_std_deg = 0.0;
  double tilt_step_mean_deg = 0.0;
  double tilt_step_std_deg = 0.0;
  int n_detected = 0;
  int n_expected = 0;
};

/// Radial and pan/tilt step statistics of the detected poses about a fitted
/// sphere. The pan axis is the mean normal of the best-fit planes through each
/// constant-tilt ring, oriented so pan steps are positive in schedule order.
/// Pan steps come from consecutive pan indices within a ring (wrapped to
/// (-180, 180]); tilt is the polar angle from the axis and tilt steps are
/// differences of consecutive ring means, signed positive in schedule order.
/// Standard deviations are sample (n - 1) deviations. DegenerateError when a
/// ring has fewer than 3 detected poses.
StepStats step_statistics(const std::vector<PoseRecord>& poses, const SphereFit& fit);

struct RunComparison {
  double radial_std_ratio = 1.0;
  double pan_std_ratio = 1.0;
  double tilt_std_ratio = 1.0;
  double detected_fraction_a = 0.0;
  double detected_fraction_b = 0.0;
};

/// Ratios a/b of the standard deviations, plus each run's detected fraction.
/// x/0 is +infinity; 0/0 is 1.
RunComparison compare_runs(const StepStats& a, const StepStats& b);

std::string format_comparison(const RunComparison& cmp, const std::string& label_a, const std::string& label_b);

/// Table row "label | r mean +- std | pan mean +- std | tilt mean +- std".
std::string format_stats_table(const std::vector<std::pair<std::string, StepStats>>& rows);

/// Reported values for the moving-lens and fixed-lens rigs of the reference
/// experiment (pose counts 82/100 and 92/92).
StepStats reference_moving_lens_stats();
StepStats reference_fixed_lens_stats();

/// CSV with header `view_id,pan_index,tilt_index,x_mm,y_mm,z_mm,detected`.
std::vector<PoseRecord> read_pose_csv(const std::filesystem::path& path);
void write_pose_csv(const std::filesystem::path& path, const std::vector<PoseRecord>& poses);

}  // namespace fixedlens
