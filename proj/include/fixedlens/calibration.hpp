#pragma once

#include "fixedlens/homography.hpp"
#include "fixedlens/image.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <vector>

namespace fixedlens {

struct GridSize {
  int rows = 0;
  int cols = 0;
  int count() const { return rows * cols; }
};

/// Parses "RxC" (e.g. "5x7").
GridSize parse_grid(const std::string& text);

struct DotSet {
  std::vector<Eigen::Vector2d> centroids;
  std::vector<double> diameters;
  std::vector<double> scores;

  std::size_t size() const { return centroids.size(); }
};

struct DotDetectionParams {
  int window_radius = 0;  // adaptive-threshold window; 0 picks min(w, h) / 8
  double min_contrast = 0.05;
  double min_area_px = 6.0;
  double min_circularity = 0.6;
  int refine_iterations = 10;
};

/// Dark circular dots on a light background. Pixels darker than the midpoint
/// of the local mean and local minimum form candidate blobs; blobs touching
/// the border, outside the area range, or with 4*pi*A/P^2 below the
/// circularity bound are dropped. Centroids are refined by an
/// intensity-weighted mean over a circular window re-centred until stable.
/// With a grid, the result is in row-major grid order.
DotSet detect_dots(const ImageBuffer& img, std::optional<GridSize> grid = std::nullopt,
                   const DotDetectionParams& params = {});

/// Row-major ordering of exactly grid.count() points: rows are formed from
/// the y-sorted points, then sorted by x. MatchError when the count is wrong
/// or the gap between adjacent rows is less than twice their y-spread.
std::vector<std::size_t> grid_order(const std::vector<Eigen::Vector2d>& points, GridSize grid);

/// Pairs two detected grids positionally after ordering both.
Correspondence match_grid(const DotSet& slice, const DotSet& reference, GridSize grid);

/// Resamples `img` into reference coordinates: each output pixel x takes the
/// bilinear sample at H^{-1} x. Pixels mapping outside the source are invalid.
/// Output size defaults to the input size.
ImageBuffer warp_to_reference(const ImageBuffer& img, const Homography& h, int out_width = 0,
                              int out_height = 0);

/// One homography per calibration slice onto the reference slice (default
/// the middle slice, floor(N/2)); the reference maps by identity.
std::vector<Homography> calibrate_stack(const std::vector<ImageBuffer>& target_slices, GridSize grid,
                                        std::optional<int> reference_index = std::nullopt,
                                        const DotDetectionParams& params = {});

/// slice index -> homography
using CalibrationTable = std::map<int, Homography>;

/// Text records `slice_index h11 ... h33 rms_px`, 17 significant digits.
void write_calibration(const std::filesystem::path& path, const std::vector<Homography>& homographies);
void write_calibration(const std::filesystem::path& path, const CalibrationTable& table);
CalibrationTable read_calibration(const std::filesystem::path& path);

}  // namespace fixedlens
