#include "fixedlens/optics.hpp"

#include "fixedlens/errors.hpp"

#include <cmath>
#include <string>

namespace fixedlens {

namespace {

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

void LensConfig::validate() const {
  if (!positive_finite(focal_length_mm)) throw DomainError("focal length must be positive");
  if (!positive_finite(f_number)) throw DomainError("f-number must be positive");
  if (!positive_finite(sensor_width_mm) || !positive_finite(sensor_height_mm)) {
    throw DomainError("sensor dimensions must be positive");
  }
  if (coc_diameter_mm && !positive_finite(*coc_diameter_mm)) throw DomainError("CoC diameter must be positive");
}

std::string_view to_string(CaptureMode mode) { return mode == CaptureMode::FixedLens ? "fixed" : "moving"; }

CaptureMode parse_capture_mode(std::string_view text) {
  if (text == "fixed") return CaptureMode::FixedLens;
  if (text == "moving") return CaptureMode::MovingLens;
  throw DomainError("capture mode must be 'fixed' or 'moving', got '" + std::string(text) + "'");
}

ConjugatePair conjugate(double object_distance_mm, const LensConfig& lens) {
  lens.validate();
  const double f = lens.focal_length_mm;
  const double d1 = object_distance_mm;
  if (!(d1 > f) || !std::isfinite(d1)) {
    throw DomainError("object distance " + std::to_string(d1) + " mm must exceed the focal length " +
                      std::to_string(f) + " mm");
  }
  const double d2 = d1 * f / (d1 - f);
  return {d1, d2, d2 / d1};
}

double depth_of_focus(const ConjugatePair& pair, const LensConfig& lens) {
  return 2.0 * lens.f_number * lens.coc_mm() * pair.image_distance_mm / lens.focal_length_mm;
}

double depth_of_field(const ConjugatePair& pair, const LensConfig& lens) {
  const double d1 = pair.object_distance_mm;
  return 2.0 * lens.coc_mm() * d1 * d1 / (pair.image_distance_mm * lens.aperture_diameter_mm());
}

double coc_blur_diameter(double point_depth_mm, const ConjugatePair& focus, const LensConfig& lens) {
  const ConjugatePair point = conjugate(point_depth_mm, lens);
  return lens.aperture_diameter_mm() * std::abs(focus.image_distance_mm - point.image_distance_mm) /
         point.image_distance_mm;
}

CapturePlan plan_capture_steps(double near_mm, double far_mm, const LensConfig& lens, double overlap,
                               CaptureMode mode) {
  lens.validate();
  const double f = lens.focal_length_mm;
  if (!(near_mm > f) || !(far_mm > near_mm) || !std::isfinite(far_mm)) {
    throw DomainError("capture range must satisfy f < near < far");
  }
  if (!(overlap >= 0.0 && overlap < 1.0)) throw DomainError("overlap must lie in [0, 1)");

  // DOField(d) = k d (d - f) with k = 2 N coc / f^2. The first focus c puts the
  // near limit of its in-focus interval on `near`: c - k c (c - f) / 2 = near.
  const double k = 2.0 * lens.f_number * lens.coc_mm() / (f * f);
  const double lin = 1.0 + 0.5 * k * f;
  const double disc = lin * lin - 2.0 * k * near_mm;
  double focus = disc >= 0.0 ? (lin - std::sqrt(disc)) / k : lin / k;
  focus = std::max(focus, std::nextafter(f, far_mm));

  CapturePlan plan;
  plan.mode = mode;
  plan.overlap_fraction = overlap;
  const double tol = 1e-12 * far_mm;
  while (true) {
    const ConjugatePair pair = conjugate(focus, lens);
    plan.steps.push_back(pair);
    const double dof = depth_of_field(pair, lens);
    if (focus + 0.5 * dof >= far_mm - tol) break;
    focus += (1.0 - overlap) * dof;
  }
  return plan;
}

Eigen::Vector2d project(const Eigen::Vector3d& point_mm, CaptureMode mode, const ConjugatePair& step,
                        double lens_axial_offset_mm) {
  const double centre_z = mode == CaptureMode::MovingLens ? lens_axial_offset_mm : 0.0;
  const double z = point_mm.z() - centre_z;
  if (!(z > 0.0)) throw DomainError("point lies behind the projection centre");
  const double d2 = step.image_distance_mm;
  return {d2 * point_mm.x() / z, d2 * point_mm.y() / z};
}

}  // namespace fixedlens
