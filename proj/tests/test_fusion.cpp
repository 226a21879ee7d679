#include "fixedlens/calibration.hpp"
#include "fixedlens/errors.hpp"
#include "fixedlens/fusion.hpp"
#include "fixedlens/image_io.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

using namespace fixedlens;

namespace {

// Smooth random texture in [0.1, 0.9]: a few sinusoids per channel.
ImageBuffer texture(std::mt19937_64& rng, int w, int h, int channels, double max_cycles_per_px = 0.12) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Plane> planes;
  for (int c = 0; c < channels; ++c) {
    Plane p = Plane::Constant(h, w, 0.5);
    for (int k = 0; k < 4; ++k) {
      const double f = max_cycles_per_px * (0.5 + 0.5 * u(rng));
      const double th = 2 * M_PI * u(rng), ph = 2 * M_PI * u(rng);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) p(y, x) += 0.1 * std::sin(2 * M_PI * f * (x * std::cos(th) + y * std::sin(th)) + ph);
    }
    planes.push_back(p);
  }
  return ImageBuffer::from_planes(std::move(planes));
}

FocusStack stack_of(std::vector<ImageBuffer> slices) {
  FocusStack s;
  s.source_ids.resize(slices.size());
  std::iota(s.source_ids.begin(), s.source_ids.end(), 0);
  s.slices = std::move(slices);
  return s;
}

ImageBuffer left_right(const ImageBuffer& left, const ImageBuffer& right) {
  ImageBuffer out = right;
  for (int c = 0; c < out.channels(); ++c) {
    const int half = out.width() / 2;
    out.plane(c).leftCols(half) = left.plane(c).leftCols(half);
  }
  return out;
}

FusionParams small_params() {
  FusionParams p;
  p.base = {8, 0.3};
  p.detail = {3, 1e-6};
  p.average_radius = 7;
  return p;
}

}  // namespace

// -------------------------------------------------------------- saliency

TEST(Saliency, ConstantImageIsZero) {
  // Zero up to the rounding left in the LoG taps.
  EXPECT_LT(saliency(ImageBuffer(20, 20, 3, 0.6)).abs().maxCoeff(), 1e-15);
}

TEST(Saliency, StepEdgeRidge) {
  ImageBuffer img(40, 30, 1, 0.2);
  for (int y = 0; y < 30; ++y)
    for (int x = 20; x < 40; ++x) img(x, y) = 0.8;
  const Plane s = saliency(img);
  EXPECT_GE(s.minCoeff(), 0.0);
  for (int y = 0; y < 30; ++y) {
    EXPECT_GT(s(y, 19), 0.01);
    EXPECT_GT(s(y, 20), 0.01);
    EXPECT_NEAR(s(y, 2), 0.0, 1e-12);
    EXPECT_NEAR(s(y, 37), 0.0, 1e-12);
  }
}

TEST(Saliency, SharpBeatsBlurred) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    const ImageBuffer sharp = texture(rng, 64, 48, 3, 0.3);
    const ImageBuffer blurred = gaussian_blur(sharp, 4.0);
    EXPECT_GT(saliency(sharp).mean(), saliency(blurred).mean());
  }
}

// --------------------------------------------------------------- weights

TEST(BinaryWeights, SingleMapIsAllOnes) {
  std::mt19937_64 rng(22);
  const WeightMaps w = binary_weights({oracle::random_plane(rng, 5, 7)});
  EXPECT_EQ(w.stage, WeightStage::Binary);
  EXPECT_TRUE((w.maps[0] == 1.0).all());
}

TEST(BinaryWeights, DominantMapTakesAll) {
  std::mt19937_64 rng(23);
  const Plane s2 = oracle::random_plane(rng, 6, 6);
  const WeightMaps w = binary_weights({s2 + 1.0, s2});
  EXPECT_TRUE((w.maps[0] == 1.0).all());
  EXPECT_TRUE((w.maps[1] == 0.0).all());
}

TEST(BinaryWeights, ExhaustiveArgmaxWithLowestIndexTies) {
  std::mt19937_64 rng(24);
  std::uniform_int_distribution<int> level(0, 3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Plane> s(3, Plane(4, 4));
    for (auto& p : s)
      for (int i = 0; i < 16; ++i) p(i / 4, i % 4) = level(rng);
    const WeightMaps w = binary_weights(s);
    const auto expected = oracle::argmax_weights(s);
    Plane sum = Plane::Zero(4, 4);
    for (int n = 0; n < 3; ++n) {
      EXPECT_TRUE((w.maps[static_cast<std::size_t>(n)] == expected[static_cast<std::size_t>(n)]).all());
      sum += w.maps[static_cast<std::size_t>(n)];
    }
    EXPECT_TRUE((sum == 1.0).all());
  }
}

TEST(BinaryWeights, ErrorsOnEmptyOrMismatched) {
  EXPECT_THROW(binary_weights({}), EmptyStackError);
  EXPECT_THROW(binary_weights({Plane::Zero(2, 2), Plane::Zero(2, 3)}), DimensionError);
}

// ---------------------------------------------------------- guided filter

TEST(GuidedFilter, MatchesPerWindowOracle) {
  std::mt19937_64 rng(25);
  int instances = 0;
  for (int r : {1, 2, 4}) {
    for (double eps : {1e-6, 0.01, 0.3}) {
      for (int k = 0; k < 6; ++k) {
        const Plane p = oracle::random_plane(rng, 12, 12), i = oracle::random_plane(rng, 12, 12);
        const Plane got = guided_filter(ImageBuffer::from_plane(p), ImageBuffer::from_plane(i), {r, eps}).plane(0);
        EXPECT_LT((got - oracle::guided_filter(p, i, r, eps)).abs().maxCoeff(), 1e-10) << r << " " << eps;
        ++instances;
      }
    }
  }
  EXPECT_GE(instances, 50);
}

TEST(GuidedFilter, MandatoryR2Eps01Case) {
  std::mt19937_64 rng(26);
  const Plane p = oracle::random_plane(rng, 12, 12), i = oracle::random_plane(rng, 12, 12);
  const Plane got = guided_filter(ImageBuffer::from_plane(p), ImageBuffer::from_plane(i), {2, 0.1}).plane(0);
  EXPECT_LT((got - oracle::guided_filter(p, i, 2, 0.1)).abs().maxCoeff(), 1e-10);
}

TEST(GuidedFilter, ConstantGuidanceIsDoubleBoxMean) {
  std::mt19937_64 rng(27);
  const Plane p = oracle::random_plane(rng, 15, 11);
  const Plane got = guided_filter(ImageBuffer::from_plane(p), ImageBuffer(11, 15, 1, 0.4), {3, 0.01}).plane(0);
  EXPECT_LT((got - oracle::box_mean(oracle::box_mean(p, 3), 3)).abs().maxCoeff(), 1e-12);
}

TEST(GuidedFilter, SelfGuidedHighVarianceIsIdentity) {
  // Checkerboard-modulated ramp: every 3x3 window has variance well above 0.01.
  Plane p(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) p(y, x) = ((x + y) % 2 ? 0.75 : 0.25) + 0.005 * (x - y);
  Plane var = oracle::box_mean(p * p, 1) - oracle::box_mean(p, 1).square();
  ASSERT_GE(var.minCoeff(), 0.01);
  const ImageBuffer img = ImageBuffer::from_plane(p);
  const Plane got = guided_filter(img, img, {1, 1e-12}).plane(0);
  EXPECT_LT((got - p).abs().maxCoeff(), 1e-6);
}

TEST(GuidedFilter, RejectsBadInputs) {
  EXPECT_THROW(guided_filter(ImageBuffer(4, 4, 1), ImageBuffer(5, 4, 1), {1, 0.1}), DimensionError);
  EXPECT_THROW(guided_filter(ImageBuffer(4, 4, 3), ImageBuffer(4, 4, 1), {1, 0.1}), DimensionError);
  EXPECT_ANY_THROW(guided_filter(ImageBuffer(4, 4, 1), ImageBuffer(4, 4, 1), {0, 0.1}));
  EXPECT_ANY_THROW(guided_filter(ImageBuffer(4, 4, 1), ImageBuffer(4, 4, 1), {1, 0.0}));
}

// ------------------------------------------------------------- two-scale

TEST(TwoScale, ConstantImage) {
  const TwoScalePair t = two_scale_decompose(ImageBuffer(20, 10, 3, 0.3), 4);
  for (int c = 0; c < 3; ++c) {
    EXPECT_LT((t.base.plane(c) - 0.3).abs().maxCoeff(), 1e-15);
    EXPECT_LT(t.detail.plane(c).abs().maxCoeff(), 1e-15);
  }
}

TEST(TwoScale, ReconstructsExactly) {
  std::mt19937_64 rng(28);
  for (int trial = 0; trial < 5; ++trial) {
    const ImageBuffer img = texture(rng, 40, 30, 3, 0.4);
    const TwoScalePair t = two_scale_decompose(img);
    for (int c = 0; c < 3; ++c) EXPECT_LT((t.base.plane(c) + t.detail.plane(c) - img.plane(c)).abs().maxCoeff(), 1e-12);
  }
}

TEST(TwoScale, LinearRampHasNoInteriorDetail) {
  ImageBuffer img(60, 50, 1);
  for (int y = 0; y < 50; ++y)
    for (int x = 0; x < 60; ++x) img(x, y) = 0.1 + 0.01 * x + 0.005 * y;
  const int r = 5;
  const TwoScalePair t = two_scale_decompose(img, r);
  EXPECT_LT(t.detail.plane(0).block(r, r, 50 - 2 * r, 60 - 2 * r).abs().maxCoeff(), 1e-12);
  EXPECT_GT(t.detail.plane(0).abs().maxCoeff(), 1e-3);
}

// ---------------------------------------------------------------- fusion

TEST(Fuse, SingleSliceReturnsInput) {
  std::mt19937_64 rng(29);
  const ImageBuffer img = texture(rng, 50, 40, 3);
  const FusionResult r = fuse_detailed(stack_of({img}), small_params());
  for (int c = 0; c < 3; ++c) EXPECT_LT((r.fused.plane(c) - img.plane(c)).abs().maxCoeff(), 1e-12);
  EXPECT_TRUE((r.base_weights.maps[0] == 1.0).all());
}

TEST(Fuse, IdenticalSlicesReturnThatSlice) {
  std::mt19937_64 rng(30);
  const ImageBuffer img = texture(rng, 50, 40, 3);
  const ImageBuffer out = fuse(stack_of({img, img, img}));
  for (int c = 0; c < 3; ++c) EXPECT_LT((out.plane(c) - img.plane(c)).abs().maxCoeff(), 1e-9);
}

TEST(Fuse, ComplementaryHalvesBeatEitherSlice) {
  std::mt19937_64 rng(31);
  const ImageBuffer truth = texture(rng, 160, 120, 3, 0.15);
  const ImageBuffer blurred = gaussian_blur(truth, 3.0);
  const ImageBuffer a = left_right(truth, blurred);
  const ImageBuffer b = left_right(blurred, truth);
  const ImageBuffer out = fuse(stack_of({a, b}), {20, 0.3}, {5, 1e-6});
  const double fused = psnr(out, truth);
  const double best = std::max(psnr(a, truth), psnr(b, truth));
  EXPECT_GT(fused, 30.0);
  EXPECT_GT(fused, best + 5.0);
}

TEST(Fuse, WeightInvariantsOnRandomStacks) {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<ImageBuffer> slices;
    for (int n = 0; n < 4; ++n) slices.push_back(gaussian_blur(texture(rng, 48, 36, 3, 0.3), 0.5 + n));
    const FusionResult r = fuse_detailed(stack_of(slices), small_params());
    EXPECT_EQ(r.base_weights.stage, WeightStage::Normalized);
    Plane sum_b = Plane::Zero(36, 48), sum_d = Plane::Zero(36, 48);
    for (int n = 0; n < 4; ++n) {
      const auto& wb = r.base_weights.maps[static_cast<std::size_t>(n)];
      const auto& wd = r.detail_weights.maps[static_cast<std::size_t>(n)];
      EXPECT_GE(wb.minCoeff(), 0.0);
      EXPECT_LE(wb.maxCoeff(), 1.0);
      EXPECT_GE(wd.minCoeff(), 0.0);
      EXPECT_LE(wd.maxCoeff(), 1.0);
      EXPECT_GE(r.saliency[static_cast<std::size_t>(n)].minCoeff(), 0.0);
      sum_b += wb;
      sum_d += wd;
    }
    EXPECT_LT((sum_b - 1.0).abs().maxCoeff(), 1e-6);
    EXPECT_LT((sum_d - 1.0).abs().maxCoeff(), 1e-6);

    // Blended base stays in the per-pixel hull of the slice bases.
    for (int c = 0; c < 3; ++c) {
      Plane blended = Plane::Zero(36, 48), lo = Plane::Constant(36, 48, 1e9), hi = Plane::Constant(36, 48, -1e9);
      for (int n = 0; n < 4; ++n) {
        const Plane base = two_scale_decompose(slices[static_cast<std::size_t>(n)], small_params().average_radius).base.plane(c);
        blended += r.base_weights.maps[static_cast<std::size_t>(n)] * base;
        lo = lo.min(base);
        hi = hi.max(base);
      }
      EXPECT_TRUE((blended >= lo - 1e-6).all());
      EXPECT_TRUE((blended <= hi + 1e-6).all());
    }
  }
}

TEST(Fuse, PermutationEquivariant) {
  std::mt19937_64 rng(33);
  std::vector<ImageBuffer> slices;
  for (int n = 0; n < 3; ++n) slices.push_back(gaussian_blur(texture(rng, 48, 36, 3, 0.3), 0.7 + 1.3 * n));
  const FusionResult r = fuse_detailed(stack_of(slices), small_params());
  // No saliency ties on these inputs, so ordering cannot matter.
  for (int y = 0; y < 36; ++y)
    for (int x = 0; x < 48; ++x) {
      ASSERT_NE(r.saliency[0](y, x), r.saliency[1](y, x));
      ASSERT_NE(r.saliency[1](y, x), r.saliency[2](y, x));
      ASSERT_NE(r.saliency[0](y, x), r.saliency[2](y, x));
    }
  const std::vector<int> perm{2, 0, 1};
  std::vector<ImageBuffer> permuted;
  for (int i : perm) permuted.push_back(slices[static_cast<std::size_t>(i)]);
  const FusionResult q = fuse_detailed(stack_of(permuted), small_params());
  for (std::size_t k = 0; k < 3; ++k) {
    const auto src = static_cast<std::size_t>(perm[k]);
    EXPECT_TRUE((q.binary.maps[k] == r.binary.maps[src]).all());
    EXPECT_LT((q.base_weights.maps[k] - r.base_weights.maps[src]).abs().maxCoeff(), 1e-12);
  }
  for (int c = 0; c < 3; ++c) EXPECT_LT((q.fused.plane(c) - r.fused.plane(c)).abs().maxCoeff(), 1e-9);
}

TEST(Fuse, GloballySharpestSliceWins) {
  std::mt19937_64 rng(34);
  const ImageBuffer sharp = texture(rng, 120, 90, 3, 0.2);
  std::vector<ImageBuffer> slices{gaussian_blur(sharp, 5.0), sharp, gaussian_blur(sharp, 6.0), gaussian_blur(sharp, 8.0)};
  const ImageBuffer out = fuse(stack_of(slices));
  const int m = 10;
  double worst = 0.0;
  for (int c = 0; c < 3; ++c) worst = std::max(worst, (out.plane(c) - sharp.plane(c)).block(m, m, 90 - 2 * m, 120 - 2 * m).abs().maxCoeff());
  EXPECT_LT(worst, 2.0 / 255.0);
}

TEST(Fuse, InvalidPixelsCarryNoWeight) {
  std::mt19937_64 rng(35);
  const ImageBuffer truth = texture(rng, 60, 40, 1, 0.2);
  ImageBuffer sharp = truth;
  Mask m = Mask::Constant(40, 60, true);
  m.rightCols(20).setConstant(false);
  sharp.set_validity(m);
  const ImageBuffer blurred = gaussian_blur(truth, 3.0);
  const FusionResult r = fuse_detailed(stack_of({sharp, blurred}), small_params());
  EXPECT_TRUE((r.base_weights.maps[0].rightCols(20) == 0.0).all());
  EXPECT_TRUE((r.detail_weights.maps[1].rightCols(20) == 1.0).all());
  EXPECT_TRUE(r.fused.validity().all());
}

TEST(Fuse, Errors) {
  EXPECT_THROW(fuse(FocusStack{}), EmptyStackError);
  EXPECT_THROW(fuse(stack_of({ImageBuffer(4, 4, 1), ImageBuffer(5, 4, 1)})), DimensionError);
  EXPECT_THROW(fuse(stack_of({ImageBuffer(4, 4, 1), ImageBuffer(4, 4, 3)})), DimensionError);
  EXPECT_ANY_THROW(fuse(stack_of({ImageBuffer(4, 4, 1)}), {-1, 0.3}));
}

// ----------------------------------------------------------------- files

TEST(StackFiles, SingleSliceRoundTripsModuloQuantisation) {
  const auto dir = testutil::scratch("stack_single");
  std::mt19937_64 rng(36);
  const ImageBuffer img = texture(rng, 40, 30, 3);
  save_image(img, dir / "s0.png");
  write_calibration(dir / "calib.txt", std::vector<Homography>{Homography::identity()});
  std::ofstream(dir / "manifest.txt") << "# one slice\ncalibration=calib.txt\ns0.png\n";
  fuse_stack_files(dir / "manifest.txt", dir / "out.png");
  const ImageBuffer back = load_image(dir / "out.png");
  const ImageBuffer src = load_image(dir / "s0.png");
  for (int c = 0; c < 3; ++c) EXPECT_LE((back.plane(c) - src.plane(c)).abs().maxCoeff(), 1.0 / 65535.0);
}

TEST(StackFiles, DebugDumpShowsComplementaryMaps) {
  const auto dir = testutil::scratch("stack_debug");
  std::mt19937_64 rng(37);
  const ImageBuffer truth = texture(rng, 80, 60, 3, 0.2);
  const ImageBuffer blurred = gaussian_blur(truth, 3.0);
  save_image(left_right(truth, blurred), dir / "a.png");
  save_image(left_right(blurred, truth), dir / "b.png");
  std::ofstream(dir / "manifest.txt") << "a.png\nb.png\nparams.base_radius=10\nparams.average_radius=5\n";
  fuse_stack_files(dir / "manifest.txt", dir / "out.png", dir / "debug");
  for (const char* name : {"saliency_000.png", "saliency_001.png", "binary_000.png", "binary_001.png",
                           "base_weight_000.png", "base_weight_001.png", "detail_weight_000.png",
                           "detail_weight_001.png"}) {
    ASSERT_TRUE(std::filesystem::exists(dir / "debug" / name)) << name;
  }
  const ImageBuffer p0 = load_image(dir / "debug" / "binary_000.png");
  const ImageBuffer p1 = load_image(dir / "debug" / "binary_001.png");
  EXPECT_TRUE(((p0.plane(0) + p1.plane(0)) == 1.0).all());
  EXPECT_GT(p0.plane(0).leftCols(30).mean(), 0.9);
  EXPECT_GT(p1.plane(0).rightCols(30).mean(), 0.9);
}

TEST(StackFiles, MissingSliceNamesPath) {
  const auto dir = testutil::scratch("stack_missing");
  save_image(ImageBuffer(8, 8, 1, 0.5), dir / "a.png");
  std::ofstream(dir / "manifest.txt") << "a.png\nnot_there.png\n";
  try {
    fuse_stack_files(dir / "manifest.txt", dir / "out.png");
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("not_there.png"), std::string::npos);
  }
}

TEST(StackFiles, CalibrationMustCoverEverySlice) {
  const auto dir = testutil::scratch("stack_calib_short");
  save_image(ImageBuffer(8, 8, 1, 0.5), dir / "a.png");
  save_image(ImageBuffer(8, 8, 1, 0.5), dir / "b.png");
  write_calibration(dir / "calib.txt", std::vector<Homography>{Homography::identity()});
  std::ofstream(dir / "manifest.txt") << "calibration=calib.txt\na.png\nb.png\n";
  EXPECT_THROW(fuse_stack_files(dir / "manifest.txt", dir / "out.png"), ValidationError);
}

TEST(Manifest, ParsesOverridesAndRejectsUnknownKeys) {
  const auto dir = testutil::scratch("manifest");
  std::ofstream(dir / "m.txt") << "# comment\n\nparams.detail_eps=0.001\nparams.log_sigma=1.5\nx/a.png\n";
  const StackManifest m = read_manifest(dir / "m.txt");
  ASSERT_EQ(m.slices.size(), 1u);
  EXPECT_EQ(m.slices[0], dir / "x" / "a.png");
  EXPECT_EQ(m.params.detail.eps, 0.001);
  EXPECT_EQ(m.params.saliency.log_sigma, 1.5);
  EXPECT_FALSE(m.calibration);

  std::ofstream(dir / "bad.txt") << "params.nonsense=1\na.png\n";
  EXPECT_THROW(read_manifest(dir / "bad.txt"), ValidationError);
  std::ofstream(dir / "neg.txt") << "params.base_radius=-3\na.png\n";
  EXPECT_THROW(read_manifest(dir / "neg.txt"), ValidationError);
  std::ofstream(dir / "empty.txt") << "# nothing\n";
  EXPECT_THROW(read_manifest(dir / "empty.txt"), EmptyStackError);
}
