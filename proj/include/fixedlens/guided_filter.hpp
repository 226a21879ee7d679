#pragma once

#include "fixedlens/errors.hpp"
#include "fixedlens/plane_ops.hpp"

namespace fixedlens {

struct GuidedFilterParams {
  int radius = 1;
  double eps = 1e-2;
};

/// Edge-preserving guided filter. Within each window w_k the output is the
/// linear model a_k * I + b_k fitted to p by ridge regression; overlapping
/// models are averaged:
///
///   a_k = (mean(I p) - mu_k mean(p)) / (sigma_k^2 + eps),  b_k = mean(p) - a_k mu_k
///   q_i = mean_k(a) I_i + mean_k(b)
///
/// All window means are box means with replicate padding.
template <typename DerivedP, typename DerivedI>
PlaneT<typename DerivedP::Scalar> guided_filter(const Eigen::ArrayBase<DerivedP>& input,
                                                const Eigen::ArrayBase<DerivedI>& guidance,
                                                const GuidedFilterParams& params) {
  using Scalar = typename DerivedP::Scalar;
  if (input.rows() != guidance.rows() || input.cols() != guidance.cols()) {
    throw DimensionError("guided_filter: input and guidance dimensions differ");
  }
  if (params.radius < 1 || !(params.eps > 0.0)) {
    throw DomainError("guided_filter: requires radius >= 1 and eps > 0");
  }
  const PlaneT<Scalar> p = input;
  const PlaneT<Scalar> guide = guidance.template cast<Scalar>();
  const int r = params.radius;

  const PlaneT<Scalar> mean_i = box_mean(guide, r);
  const PlaneT<Scalar> mean_p = box_mean(p, r);
  const PlaneT<Scalar> corr_ip = box_mean(guide * p, r);
  const PlaneT<Scalar> corr_ii = box_mean(guide * guide, r);

  const PlaneT<Scalar> var_i = corr_ii - mean_i * mean_i;
  const PlaneT<Scalar> cov_ip = corr_ip - mean_i * mean_p;
  const PlaneT<Scalar> a = cov_ip / (var_i + Scalar(params.eps));
  const PlaneT<Scalar> b = mean_p - a * mean_i;

  return box_mean(a, r) * guide + box_mean(b, r);
}

}  // namespace fixedlens
