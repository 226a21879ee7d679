#include "fixedlens/errors.hpp"
#include "fixedlens/synth.hpp"
#include "scenes.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

using namespace fixedlens;

namespace {

// Centroid of the darkness (1 - I) inside a window.
Eigen::Vector2d dark_centroid(const ImageBuffer& img, Eigen::Vector2d around, int half) {
  Eigen::Vector2d acc = Eigen::Vector2d::Zero();
  double mass = 0.0;
  for (int y = static_cast<int>(around.y()) - half; y <= static_cast<int>(around.y()) + half; ++y)
    for (int x = static_cast<int>(around.x()) - half; x <= static_cast<int>(around.x()) + half; ++x) {
      const double w = 1.0 - img(x, y);
      acc += w * Eigen::Vector2d(x, y);
      mass += w;
    }
  return acc / mass;
}

Eigen::Vector2d channel_centroid(const ImageBuffer& img, int c) {
  Eigen::Vector2d acc = Eigen::Vector2d::Zero();
  double mass = 0.0;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      acc += img(x, y, c) * Eigen::Vector2d(x, y);
      mass += img(x, y, c);
    }
  return acc / mass;
}

SceneSpec single_plane_scene() {
  SceneSpec s;
  s.lens.focal_length_mm = 25.0;
  s.lens.f_number = 2.8;
  s.lens.sensor_width_mm = 3.2;
  s.lens.sensor_height_mm = 2.4;
  ScenePlane p;
  p.depth_mm = 130.0;
  p.texture = "sines:5:1";
  p.width_mm = p.height_mm = 30.0;
  s.planes = {p};
  return s;
}

}  // namespace

// -------------------------------------------------------------- targets

TEST(DotTarget, IdentityCentroidsOnExactGrid) {
  const DotTarget t = render_dot_target({3, 4}, 30, 6, Homography::identity(), 0.0);
  EXPECT_EQ(t.image.width(), 150);
  EXPECT_EQ(t.image.height(), 120);
  ASSERT_EQ(t.centroids.size(), 12u);
  const Eigen::Vector2d origin(74.5 - 45, 59.5 - 30);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) EXPECT_LT((t.centroids[static_cast<std::size_t>(r * 4 + c)] - origin - 30 * Eigen::Vector2d(c, r)).norm(), 1e-12);
}

TEST(DotTarget, RenderedDiscCentroidMatchesTruth) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 2) = 0.37;
  m(1, 2) = -0.21;
  const DotTarget t = render_dot_target({3, 3}, 40, 9, Homography::from_matrix(m), 0.0);
  for (const auto& c : t.centroids) EXPECT_LT((dark_centroid(t.image, c, 14) - c).norm(), 0.05);
}

TEST(DotTarget, ScaledAndBlurredDetectedWithinTwoTenths) {
  const double s = 0.96;
  const DotTarget ref = render_dot_target({5, 5}, 40, 8, Homography::identity(), 0.0);
  const Eigen::Vector2d centre((ref.image.width() - 1) / 2.0, (ref.image.height() - 1) / 2.0);
  Eigen::Matrix3d m = Eigen::Vector3d(s, s, 1).asDiagonal();
  m(0, 2) = centre.x() * (1 - s);
  m(1, 2) = centre.y() * (1 - s);
  const DotTarget t = render_dot_target({5, 5}, 40, 8, Homography::from_matrix(m), 3.0);
  const DotSet dots = detect_dots(t.image, GridSize{5, 5});
  for (std::size_t i = 0; i < 25; ++i) {
    EXPECT_LT((t.centroids[i] - (centre + s * (ref.centroids[i] - centre))).norm(), 1e-9);
    EXPECT_LT((dots.centroids[i] - t.centroids[i]).norm(), 0.2);
  }
}

TEST(DotTarget, OffFrameDotRaises) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 2) = 40.0;
  EXPECT_THROW(render_dot_target({3, 3}, 30, 6, Homography::from_matrix(m), 0.0), DomainError);
  EXPECT_THROW(render_dot_target({3, 3}, 10, 6, Homography::identity(), 0.0), DomainError);
}

// -------------------------------------------------------------- capture

TEST(RenderCapture, InFocusSinglePlaneMatchesGroundTruth) {
  const SceneSpec s = single_plane_scene();
  const RenderedStack r = render_capture(s, linear_plan(s, 1, CaptureMode::FixedLens), 160, 120);
  ASSERT_EQ(r.slices.slices.size(), 1u);
  EXPECT_TRUE(r.slices.slices[0].same_shape(r.ground_truth_allfocus));
  EXPECT_GT(psnr(r.slices.slices[0], r.ground_truth_allfocus), 45.0);
}

TEST(RenderCapture, CountsAndShapesConsistent) {
  const SceneSpec s = scenes::perspective_scene();
  const RenderedStack r = render_capture(s, scenes::travel_plan(s, CaptureMode::FixedLens, 5), 160, 120);
  EXPECT_EQ(r.slices.slices.size(), 5u);
  EXPECT_EQ(r.true_homographies.size(), 5u);
  EXPECT_EQ(r.blur_sigma_px.size(), 5u * 2u);
  EXPECT_EQ(r.reference_index, 2);
  for (const auto& sl : r.slices.slices) EXPECT_TRUE(sl.same_shape(r.ground_truth_allfocus));
}

TEST(RenderCapture, FixedLensSizeRatioInvariant) {
  const SceneSpec s = scenes::perspective_scene();
  const RenderedStack r = render_capture(s, scenes::travel_plan(s, CaptureMode::FixedLens), 320, 240);
  EXPECT_TRUE(r.homographies_exact);
  const auto ratios = scenes::width_ratios(r);
  for (double q : ratios) EXPECT_NEAR(q / ratios.front(), 1.0, 1e-9);
  // The scene is out of focus somewhere in every slice, so the ratio is
  // measured on blurred images.
  double max_sigma = 0.0;
  for (double sg : r.blur_sigma_px) max_sigma = std::max(max_sigma, sg);
  EXPECT_GT(max_sigma, 0.5);
}

TEST(RenderCapture, MovingLensSizeRatioFollowsClosedForm) {
  const SceneSpec s = scenes::perspective_scene();
  const CapturePlan plan = scenes::travel_plan(s, CaptureMode::MovingLens);
  const RenderedStack r = render_capture(s, plan, 320, 240);
  EXPECT_FALSE(r.homographies_exact);
  const auto ratios = scenes::width_ratios(r);
  const double ref_focus = plan.steps[static_cast<std::size_t>(r.reference_index)].object_distance_mm;
  double lo = 1e9, hi = 0.0;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    const double t = plan.steps[i].object_distance_mm - ref_focus;
    const double measured = ratios[i] / ratios[static_cast<std::size_t>(r.reference_index)];
    EXPECT_NEAR(measured, scenes::moving_factor(120.0, 140.0, t), 1e-9) << i;
    lo = std::min(lo, measured);
    hi = std::max(hi, measured);
  }
  EXPECT_GT(hi / lo - 1.0, 0.005);
}

TEST(RenderCapture, FixedLensHomographiesAlignFeatures) {
  const SceneSpec s = scenes::perspective_scene();
  const RenderedStack r = render_capture(s, scenes::travel_plan(s, CaptureMode::FixedLens, 5), 320, 240);
  const auto& ref = r.slices.slices[static_cast<std::size_t>(r.reference_index)];
  for (std::size_t i = 0; i < r.slices.slices.size(); ++i) {
    for (int c : {0, 1}) {
      const Eigen::Vector2d mapped = r.true_homographies[i].apply(channel_centroid(r.slices.slices[i], c));
      // Pixel-centre sampling of partly covered edge pixels shifts the
      // discrete centroid by up to a few thousandths of a pixel.
      EXPECT_LT((mapped - channel_centroid(ref, c)).norm(), 0.01) << i << " " << c;
    }
  }
}

TEST(RenderCapture, DefocusGrowsAwayFromFocus) {
  const SceneSpec s = scenes::perspective_scene();
  const CapturePlan plan = linear_plan(s, 2, CaptureMode::FixedLens);
  const RenderedStack r = render_capture(s, plan, 160, 120);
  // Step 0 focuses on the near plane, step 1 on the far one.
  EXPECT_NEAR(r.blur_sigma_px[0], 0.0, 1e-12);
  EXPECT_GT(r.blur_sigma_px[1], 0.0);
  EXPECT_GT(r.blur_sigma_px[2], 0.0);
  EXPECT_NEAR(r.blur_sigma_px[3], 0.0, 1e-12);
}

TEST(RenderCapture, DeterministicBitForBit) {
  const SceneFile f = default_scene(3);
  const CapturePlan plan = linear_plan(f.scene, 3, CaptureMode::MovingLens);
  const RenderedStack a = render_capture(f.scene, plan, 96, 72);
  const RenderedStack b = render_capture(f.scene, plan, 96, 72);
  for (std::size_t i = 0; i < a.slices.slices.size(); ++i)
    for (int c = 0; c < 3; ++c) EXPECT_TRUE((a.slices.slices[i].plane(c) == b.slices.slices[i].plane(c)).all());
  for (int c = 0; c < 3; ++c) EXPECT_TRUE((a.ground_truth_allfocus.plane(c) == b.ground_truth_allfocus.plane(c)).all());
}

TEST(SceneSpec, ValidationErrors) {
  SceneSpec s = scenes::perspective_scene();
  s.planes[0].depth_mm = 20.0;  // inside the focal length
  EXPECT_THROW(s.validate(), DomainError);
  s = scenes::perspective_scene();
  std::swap(s.planes[0], s.planes[1]);
  EXPECT_THROW(s.validate(), DomainError);
  s = scenes::perspective_scene();
  s.planes[0].texture = "plaid";
  EXPECT_THROW(s.validate(), DomainError);
  s = scenes::perspective_scene();
  s.planes.clear();
  EXPECT_THROW(linear_plan(s, 3, CaptureMode::FixedLens), DomainError);
}

TEST(SceneSpec, BacklitDropsBackdropAndDarkensObjects) {
  const SceneFile f = default_scene();
  const SceneSpec lit = backlit_scene(f.scene);
  ASSERT_EQ(lit.planes.size(), 1u);
  EXPECT_EQ(lit.planes[0].depth_mm, 125.0);
  EXPECT_EQ(lit.background_level, 1.0);
  const RenderedStack r = render_capture(lit, linear_plan(lit, 1, CaptureMode::FixedLens), 160, 120);
  EXPECT_EQ(r.ground_truth_allfocus(0, 0), 1.0);
  EXPECT_NEAR(r.ground_truth_allfocus(80, 60), 0.05, 1e-12);
}

TEST(SceneFile, ParsesKeysAndPlanes) {
  const auto dir = testutil::scratch("scene_file");
  std::ofstream(dir / "s.txt") << "# test scene\n"
                                  "focal_length_mm = 25\nf_number = 4\nsensor_mm = 3.2,2.4\ncoc_mm = 0.004\n"
                                  "background = 0.1\nimage_px = 200,150\n\n"
                                  "[plane]\ndepth_mm = 125\ntexture = constant:0.5\ncenter_mm = 0.5,-0.25\nsize_mm = 4,3\n"
                                  "[plane]\ndepth_mm = 140\ntexture = sines:9:1\nsize_mm = 30,30\nbackdrop = true\n";
  const SceneFile f = read_scene(dir / "s.txt");
  EXPECT_EQ(f.width_px, 200);
  EXPECT_EQ(f.height_px, 150);
  EXPECT_EQ(f.scene.lens.f_number, 4.0);
  EXPECT_EQ(f.scene.lens.coc_mm(), 0.004);
  EXPECT_EQ(f.scene.background_level, 0.1);
  ASSERT_EQ(f.scene.planes.size(), 2u);
  EXPECT_EQ(f.scene.planes[0].center_x_mm, 0.5);
  EXPECT_EQ(f.scene.planes[0].center_y_mm, -0.25);
  EXPECT_EQ(f.scene.planes[0].width_mm, 4.0);
  EXPECT_FALSE(f.scene.planes[0].backdrop);
  EXPECT_TRUE(f.scene.planes[1].backdrop);

  std::ofstream(dir / "bad.txt") << "focal_length_mm = 25\nf_number = 4\nsensor_mm = 3.2,2.4\nwhatever = 1\n[plane]\ndepth_mm = 130\n";
  EXPECT_THROW(read_scene(dir / "bad.txt"), FormatError);
  std::ofstream(dir / "noplanes.txt") << "focal_length_mm = 25\nf_number = 4\nsensor_mm = 3.2,2.4\n";
  EXPECT_THROW(read_scene(dir / "noplanes.txt"), FormatError);
}

TEST(WriteSimulation, ProducesStackInputs) {
  const auto dir = testutil::scratch("write_sim");
  SceneFile f = default_scene();
  f.width_px = 96;
  f.height_px = 72;
  const SimulationFiles out = write_simulation(f, linear_plan(f.scene, 3, CaptureMode::FixedLens), dir);
  for (const auto& p : {out.manifest, out.project, out.calibration, out.ground_truth}) EXPECT_TRUE(std::filesystem::exists(p)) << p;
  for (const char* sub : {"slices", "backlit"})
    for (int i = 0; i < 3; ++i) EXPECT_TRUE(std::filesystem::exists(dir / sub / ("slice_00" + std::to_string(i) + ".png")));
  const StackManifest m = read_manifest(out.manifest);
  EXPECT_EQ(m.slices.size(), 3u);
  ASSERT_TRUE(m.calibration);
  EXPECT_EQ(read_calibration(*m.calibration).size(), 3u);
}

// ---------------------------------------------------------------- poses

TEST(SynthPoses, DeterministicPerSeed) {
  const auto a = synth_poses(141.042, 20, {0, 6, 12}, 0.1, 0.1, 5);
  const auto b = synth_poses(141.042, 20, {0, 6, 12}, 0.1, 0.1, 5);
  const auto c = synth_poses(141.042, 20, {0, 6, 12}, 0.1, 0.1, 6);
  ASSERT_EQ(a.size(), b.size());
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].detected, b[i].detected);
    if (a[i].detected) EXPECT_TRUE(a[i].center == b[i].center);
    if (a[i].detected && c[i].detected && a[i].center != c[i].center) differs = true;
  }
  EXPECT_TRUE(differs);
}

TEST(SynthPoses, LayoutAndLabels) {
  const auto poses = synth_poses(100.0, 20, {0, 6}, 0.0, 0.0, 1);
  ASSERT_EQ(poses.size(), 36u);
  for (const auto& p : poses) {
    EXPECT_NEAR(p.center.norm(), 100.0, 1e-12);
    EXPECT_NEAR(std::asin(p.center.z() / 100.0) * 180 / M_PI, 6.0 * p.tilt_index, 1e-9);
    EXPECT_NEAR(std::atan2(p.center.y(), p.center.x()), std::remainder(20.0 * p.pan_index * M_PI / 180, 2 * M_PI), 1e-12);
  }
}

TEST(SynthPoses, DropFractionMatchesDetectionCount) {
  const auto poses = synth_poses(144.270, 18, {0, 6, 12, 18, 24}, 0.266, 0.18, 11);
  ASSERT_EQ(poses.size(), 100u);
  const auto detected = std::count_if(poses.begin(), poses.end(), [](const PoseRecord& p) { return p.detected; });
  EXPECT_EQ(detected, 82);
  for (const auto& p : poses)
    if (!p.detected) EXPECT_TRUE(p.center.array().isNaN().all());
}
