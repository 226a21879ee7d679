#pragma once

// Shared synthetic scenes for the synth unit tests and the acceptance run.

#include "fixedlens/optics.hpp"
#include "fixedlens/synth.hpp"

#include <cmath>
#include <vector>

namespace scenes {

// Two flat-coloured squares 20 mm apart in depth, side by side so that their
// blurred images never overlap: red near plane on the left, green far plane
// on the right. The red and green sums measure each plane's projected area.
inline fixedlens::SceneSpec perspective_scene(double near_mm = 120.0, double far_mm = 140.0) {
  fixedlens::SceneSpec s;
  s.lens.focal_length_mm = 25.0;
  s.lens.f_number = 16.0;
  s.lens.sensor_width_mm = 3.2;
  s.lens.sensor_height_mm = 2.4;
  fixedlens::ScenePlane near_plane;
  near_plane.depth_mm = near_mm;
  near_plane.texture = "constant:1,0,0";
  near_plane.center_x_mm = -3.0;
  near_plane.width_mm = near_plane.height_mm = 3.0;
  fixedlens::ScenePlane far_plane;
  far_plane.depth_mm = far_mm;
  far_plane.texture = "constant:0,1,0";
  far_plane.center_x_mm = 3.5;
  far_plane.width_mm = far_plane.height_mm = 3.0;
  s.planes = {near_plane, far_plane};
  return s;
}

// `steps` focus distances spanning `travel_mm` centred on `centre_mm`.
inline fixedlens::CapturePlan travel_plan(const fixedlens::SceneSpec& s, fixedlens::CaptureMode mode, int steps = 9,
                                          double centre_mm = 130.0, double travel_mm = 5.0) {
  fixedlens::CapturePlan plan;
  plan.mode = mode;
  for (int i = 0; i < steps; ++i) {
    plan.steps.push_back(fixedlens::conjugate(centre_mm - 0.5 * travel_mm + travel_mm * i / (steps - 1), s.lens));
  }
  return plan;
}

// Near/far projected width ratio per slice.
inline std::vector<double> width_ratios(const fixedlens::RenderedStack& r) {
  std::vector<double> out;
  for (const auto& slice : r.slices.slices) out.push_back(std::sqrt(slice.plane(0).sum() / slice.plane(1).sum()));
  return out;
}

// Predicted near/far width ratio change relative to the reference slice when
// the camera moves by t along the axis: ((z2 - t) / (z1 - t)) * (z1 / z2).
inline double moving_factor(double z1, double z2, double t) { return ((z2 - t) / (z1 - t)) * (z1 / z2); }

}  // namespace scenes
