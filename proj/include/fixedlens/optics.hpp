#pragma once

// Thin-lens and pinhole geometry. All lengths are millimetres.

#include <Eigen/Core>

#include <optional>
#include <string_view>
#include <vector>

namespace fixedlens {

struct LensConfig {
  double focal_length_mm = 0.0;
  double f_number = 0.0;
  double sensor_width_mm = 36.0;
  double sensor_height_mm = 24.0;
  /// Circle-of-confusion diameter; when unset, 0.1% of the mean sensor side.
  std::optional<double> coc_diameter_mm;

  double coc_mm() const { return coc_diameter_mm.value_or(0.001 * 0.5 * (sensor_width_mm + sensor_height_mm)); }
  double aperture_diameter_mm() const { return focal_length_mm / f_number; }

  /// Throws DomainError unless every field is finite and positive.
  void validate() const;
};

/// Object distance d1, image distance d2 and magnification M = d2/d1.
struct ConjugatePair {
  double object_distance_mm = 0.0;
  double image_distance_mm = 0.0;
  double magnification = 0.0;
};

enum class CaptureMode { MovingLens, FixedLens };

std::string_view to_string(CaptureMode mode);
CaptureMode parse_capture_mode(std::string_view text);

struct CapturePlan {
  CaptureMode mode = CaptureMode::FixedLens;
  std::vector<ConjugatePair> steps;  // strictly increasing object distance
  double overlap_fraction = 0.0;
};

/// Thin-lens conjugate: d2 = d1 f / (d1 - f). DomainError when d1 <= f.
ConjugatePair conjugate(double object_distance_mm, const LensConfig& lens);

/// Sensor-side tolerance: 2 N coc d2 / f.
double depth_of_focus(const ConjugatePair& pair, const LensConfig& lens);

/// Object-side in-focus range: 2 coc d1^2 / (d2 * aperture) = depth_of_focus / M^2.
double depth_of_field(const ConjugatePair& pair, const LensConfig& lens);

/// Sensor-side blur diameter of a point at `point_depth_mm` while the lens is
/// focused at `focus`, by similar triangles: aperture * |d2 - d2'| / d2'.
double coc_blur_diameter(double point_depth_mm, const ConjugatePair& focus, const LensConfig& lens);

/// Focus distances from near to far such that every depth in [near, far] lies
/// within some step's depth of field. Consecutive steps advance by
/// (1 - overlap) times the local depth of field.
CapturePlan plan_capture_steps(double near_mm, double far_mm, const LensConfig& lens, double overlap,
                               CaptureMode mode = CaptureMode::FixedLens);

/// Pinhole projection onto the sensor plane at distance step.image_distance_mm.
/// In MovingLens mode the projection centre sits `lens_axial_offset_mm`
/// closer to the scene; FixedLens ignores the offset. DomainError if the
/// point is not in front of the active centre.
Eigen::Vector2d project(const Eigen::Vector3d& point_mm, CaptureMode mode, const ConjugatePair& step,
                        double lens_axial_offset_mm);

}  // namespace fixedlens
