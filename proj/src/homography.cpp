#include "fixedlens/homography.hpp"

#include "fixedlens/errors.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>

namespace fixedlens {

Homography Homography::canonical() const {
  const double norm = matrix.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw SingularError("homography has zero or non-finite norm");
  Eigen::Matrix3d m = matrix / norm;
  double sign_ref = m(2, 2);
  if (sign_ref == 0.0) {
    for (int i = 0; i < 9 && sign_ref == 0.0; ++i) sign_ref = m(i / 3, i % 3);
  }
  if (sign_ref < 0.0) m = -m;
  return {m, rms_px};
}

Eigen::Vector2d Homography::apply(const Eigen::Vector2d& p) const {
  const Eigen::Vector3d q = matrix * p.homogeneous();
  return q.hnormalized();
}

bool Homography::invertible() const { return std::abs((matrix / matrix.norm()).determinant()) > 1e-12; }

Homography Homography::inverse() const {
  if (!invertible()) throw SingularError("homography is not invertible");
  return Homography{matrix.inverse(), 0.0}.canonical();
}

Homography Homography::then(const Homography& next) const {
  return Homography{next.matrix * matrix, 0.0}.canonical();
}

namespace {

// Similarity taking the points' centroid to the origin and their mean
// distance from it to sqrt(2).
Eigen::Matrix3d conditioning_transform(const std::vector<Eigen::Vector2d>& pts) {
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += (p - centroid).norm();
  mean_dist /= static_cast<double>(pts.size());
  if (!(mean_dist > 0.0)) throw DegenerateError("all points coincide");
  const double s = std::sqrt(2.0) / mean_dist;
  Eigen::Matrix3d t;
  t << s, 0, -s * centroid.x(), 0, s, -s * centroid.y(), 0, 0, 1;
  return t;
}

// Largest number of points on one line (points are pre-conditioned to unit scale).
int max_collinear(const std::vector<Eigen::Vector2d>& pts) {
  const std::size_t n = pts.size();
  if (n < 3) return static_cast<int>(n);
  constexpr double kAngleTol = 1e-9;
  int best = 2;
  std::vector<double> angles;
  for (std::size_t i = 0; i < n; ++i) {
    angles.clear();
    int coincident = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const Eigen::Vector2d d = pts[j] - pts[i];
      if (d.norm() < 1e-12) {
        ++coincident;
        continue;
      }
      double a = std::atan2(d.y(), d.x());
      if (a < 0.0) a += M_PI;
      if (a >= M_PI - kAngleTol) a = 0.0;
      angles.push_back(a);
    }
    std::sort(angles.begin(), angles.end());
    std::size_t run_start = 0;
    for (std::size_t k = 0; k <= angles.size(); ++k) {
      if (k == angles.size() || angles[k] - angles[run_start] > kAngleTol) {
        best = std::max(best, static_cast<int>(k - run_start) + 1 + coincident);
        run_start = k;
      }
    }
  }
  return best;
}

std::vector<Eigen::Vector2d> transform_points(const Eigen::Matrix3d& t, const std::vector<Eigen::Vector2d>& pts) {
  std::vector<Eigen::Vector2d> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back((t * p.homogeneous()).hnormalized());
  return out;
}

}  // namespace

double reprojection_rms(const Homography& h, const Correspondence& correspondence) {
  if (correspondence.pairs.empty()) return 0.0;
  double sse = 0.0;
  for (const auto& pr : correspondence.pairs) sse += (h.apply(pr.slice_point) - pr.reference_point).squaredNorm();
  return std::sqrt(sse / static_cast<double>(correspondence.pairs.size()));
}

Homography estimate_homography(const Correspondence& correspondence) {
  const auto& pairs = correspondence.pairs;
  const std::size_t n = pairs.size();
  if (n < 4) throw DegenerateError("homography needs at least 4 correspondences, got " + std::to_string(n));

  std::vector<Eigen::Vector2d> src, dst;
  src.reserve(n);
  dst.reserve(n);
  for (const auto& pr : pairs) {
    if (!pr.slice_point.allFinite() || !pr.reference_point.allFinite()) {
      throw DegenerateError("non-finite correspondence");
    }
    src.push_back(pr.slice_point);
    dst.push_back(pr.reference_point);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (dst[i] == dst[j]) throw DegenerateError("duplicate reference point");
    }
  }

  const Eigen::Matrix3d t_src = conditioning_transform(src);
  const Eigen::Matrix3d t_dst = conditioning_transform(dst);
  const auto nsrc = transform_points(t_src, src);
  const auto ndst = transform_points(t_dst, dst);

  const int collinear_limit = std::max(3, static_cast<int>(n) - 2);
  if (max_collinear(nsrc) >= collinear_limit || max_collinear(ndst) >= collinear_limit) {
    throw DegenerateError("too many collinear points for a homography");
  }

  // Rows 1 and 2 of the cross-product factorisation with w_r = 1:
  //   [ 0      -X_i^T   y_r X_i^T ]
  //   [ X_i^T   0      -x_r X_i^T ]
  Eigen::MatrixXd a(2 * n, 9);
  for (std::size_t k = 0; k < n; ++k) {
    const Eigen::RowVector3d xi = nsrc[k].homogeneous().transpose();
    const double xr = ndst[k].x();
    const double yr = ndst[k].y();
    const auto r = static_cast<Eigen::Index>(2 * k);
    a.row(r) << Eigen::RowVector3d::Zero(), -xi, yr * xi;
    a.row(r + 1) << xi, Eigen::RowVector3d::Zero(), -xr * xi;
  }

  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  if (sv.size() < 8 || sv(7) <= 1e-10 * sv(0)) throw DegenerateError("correspondence system has rank < 8");
  const Eigen::VectorXd h = svd.matrixV().col(8);

  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  Homography result = Homography::from_matrix(t_dst.inverse() * hn * t_src);
  if (!result.invertible()) throw DegenerateError("estimated homography is singular");
  result.rms_px = reprojection_rms(result, correspondence);
  return result;
}

}  // namespace fixedlens
