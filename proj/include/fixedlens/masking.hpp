#pragma once

#include "fixedlens/image.hpp"

#include <optional>

namespace fixedlens {

enum class ThresholdMethod { Otsu, Fixed };

struct MaskParams {
  ThresholdMethod method = ThresholdMethod::Otsu;
  double threshold = 0.5;  // used when method == Fixed, in [0,1]
  bool invert = false;
  int morph_open_radius = 0;
};

/// Otsu's threshold over a 256-bin luma histogram on [0,1]. Pixels strictly
/// below the returned value form the dark class. On a plateau of equally
/// good splits the middle one is taken.
double otsu_threshold(const Plane& values);

/// Binary single-channel mask (1 = foreground) from a fused back-lit image:
/// the object is dark against the light box, so foreground is luma below the
/// threshold. Optional inversion and morphological opening (disc element).
/// DegenerateError if the foreground is empty or covers the whole frame.
ImageBuffer backlight_mask(const ImageBuffer& backlit, const MaskParams& params = {});

/// Copy of `fused` carrying `mask` (> 0.5 is foreground) as its validity,
/// i.e. the alpha channel on save. Samples are not modified.
ImageBuffer apply_mask(const ImageBuffer& fused, const ImageBuffer& mask);

}  // namespace fixedlens
