#include "fixedlens/calibration.hpp"

#include "fixedlens/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace fixedlens {

GridSize parse_grid(const std::string& text) {
  GridSize g;
  char sep = 0;
  std::istringstream in(text);
  if (!(in >> g.rows >> sep >> g.cols) || (sep != 'x' && sep != 'X') || g.rows < 1 || g.cols < 1 ||
      !(in >> std::ws).eof()) {
    throw DomainError("grid must be written RxC with positive R and C, got '" + text + "'");
  }
  return g;
}

namespace {

// Sliding-window minimum along one axis, replicate padding, monotone deque.
Plane window_min(const Plane& src, int radius, int axis) {
  const Eigen::Index rows = src.rows();
  const Eigen::Index cols = src.cols();
  const Eigen::Index len = axis == 1 ? cols : rows;
  const Eigen::Index lines = axis == 1 ? rows : cols;
  Plane out(rows, cols);
  std::vector<double> padded(static_cast<std::size_t>(len + 2 * radius));
  std::deque<Eigen::Index> dq;
  for (Eigen::Index line = 0; line < lines; ++line) {
    for (Eigen::Index j = 0; j < len + 2 * radius; ++j) {
      const Eigen::Index s = std::clamp<Eigen::Index>(j - radius, 0, len - 1);
      padded[static_cast<std::size_t>(j)] = axis == 1 ? src(line, s) : src(s, line);
    }
    dq.clear();
    for (Eigen::Index j = 0; j < len + 2 * radius; ++j) {
      while (!dq.empty() && padded[static_cast<std::size_t>(dq.back())] >= padded[static_cast<std::size_t>(j)]) {
        dq.pop_back();
      }
      dq.push_back(j);
      if (dq.front() <= j - (2 * radius + 1)) dq.pop_front();
      const Eigen::Index centre = j - 2 * radius;
      if (centre >= 0) {
        const double v = padded[static_cast<std::size_t>(dq.front())];
        if (axis == 1) {
          out(line, centre) = v;
        } else {
          out(centre, line) = v;
        }
      }
    }
  }
  return out;
}

struct Blob {
  Eigen::Vector2d centroid;
  double area = 0.0;
  double circularity = 0.0;
  double score = 0.0;
};

std::vector<Blob> find_blobs(const Mask& fg, double min_area, double max_area, double min_circularity) {
  const int h = static_cast<int>(fg.rows());
  const int w = static_cast<int>(fg.cols());
  Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> label =
      Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Constant(h, w, -1);
  std::vector<Blob> blobs;
  std::vector<std::pair<int, int>> stack;
  std::vector<std::pair<int, int>> members;
  int next_label = 0;
  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      if (!fg(y0, x0) || label(y0, x0) >= 0) continue;
      members.clear();
      stack.assign(1, {x0, y0});
      label(y0, x0) = next_label;
      bool touches_border = false;
      while (!stack.empty()) {
        const auto [x, y] = stack.back();
        stack.pop_back();
        members.emplace_back(x, y);
        if (x == 0 || y == 0 || x == w - 1 || y == h - 1) touches_border = true;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = x + dx;
            const int ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            if (fg(ny, nx) && label(ny, nx) < 0) {
              label(ny, nx) = next_label;
              stack.emplace_back(nx, ny);
            }
          }
        }
      }
      ++next_label;
      const double area = static_cast<double>(members.size());
      if (touches_border || area < min_area || area > max_area) continue;

      // Perimeter from the crack-edge count with the pi/4 isotropy correction.
      std::size_t cracks = 0;
      Eigen::Vector2d sum = Eigen::Vector2d::Zero();
      for (const auto& [x, y] : members) {
        sum += Eigen::Vector2d(x, y);
        const int nbr[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
        for (const auto& n : nbr) {
          if (n[0] < 0 || n[1] < 0 || n[0] >= w || n[1] >= h || label(n[1], n[0]) != label(y, x)) ++cracks;
        }
      }
      const double perimeter = 0.25 * M_PI * static_cast<double>(cracks);
      const double circularity = std::min(1.0, 4.0 * M_PI * area / (perimeter * perimeter));
      if (circularity < min_circularity) continue;
      blobs.push_back({sum / area, area, circularity, 0.0});
    }
  }
  return blobs;
}

}  // namespace

DotSet detect_dots(const ImageBuffer& img, std::optional<GridSize> grid, const DotDetectionParams& params) {
  const Plane lum = luma(img);
  const int w = img.width();
  const int h = img.height();
  const int window = params.window_radius > 0 ? params.window_radius : std::max(8, std::min(w, h) / 8);

  const Plane local_mean = box_mean(lum, window);
  const Plane local_min = window_min(window_min(lum, window, 1), window, 0);
  const Mask fg = (local_mean - local_min > params.min_contrast) && (lum < 0.5 * (local_mean + local_min));

  std::vector<Blob> blobs =
      find_blobs(fg, params.min_area_px, static_cast<double>(w) * h / 16.0, params.min_circularity);

  // Window for centroid refinement: covers the blob and its blur tail but
  // stays clear of neighbouring blobs.
  std::vector<double> radius(blobs.size());
  for (std::size_t i = 0; i < blobs.size(); ++i) {
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < blobs.size(); ++j) {
      if (j != i) nearest = std::min(nearest, (blobs[i].centroid - blobs[j].centroid).norm());
    }
    const double r_eq = std::sqrt(blobs[i].area / M_PI);
    radius[i] = std::min(1.5 * r_eq + 2.0, 0.5 * nearest);
  }

  DotSet found;
  for (std::size_t i = 0; i < blobs.size(); ++i) {
    Eigen::Vector2d c = blobs[i].centroid;
    const double r = radius[i];
    double contrast = 0.0;
    bool ok = true;
    for (int it = 0; it < std::max(1, params.refine_iterations); ++it) {
      const int x0 = std::max(0, static_cast<int>(std::floor(c.x() - r)));
      const int x1 = std::min(w - 1, static_cast<int>(std::ceil(c.x() + r)));
      const int y0 = std::max(0, static_cast<int>(std::floor(c.y() - r)));
      const int y1 = std::min(h - 1, static_cast<int>(std::ceil(c.y() + r)));
      double bg = -std::numeric_limits<double>::infinity();
      double dark = std::numeric_limits<double>::infinity();
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          if ((Eigen::Vector2d(x, y) - c).squaredNorm() > r * r) continue;
          bg = std::max(bg, lum(y, x));
          dark = std::min(dark, lum(y, x));
        }
      }
      double mass = 0.0;
      Eigen::Vector2d moment = Eigen::Vector2d::Zero();
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          if ((Eigen::Vector2d(x, y) - c).squaredNorm() > r * r) continue;
          const double wt = bg - lum(y, x);
          mass += wt;
          moment += wt * Eigen::Vector2d(x, y);
        }
      }
      if (!(mass > 0.0)) {
        ok = false;
        break;
      }
      contrast = bg - dark;
      const Eigen::Vector2d next = moment / mass;
      const double step = (next - c).norm();
      c = next;
      if (step < 1e-4) break;
    }
    if (!ok || c.x() < 0 || c.y() < 0 || c.x() > w - 1 || c.y() > h - 1) continue;
    found.centroids.push_back(c);
    found.diameters.push_back(2.0 * std::sqrt(blobs[i].area / M_PI));
    found.scores.push_back(blobs[i].circularity * contrast);
  }

  // Enforce the minimum separation of half the median diameter, keeping the
  // higher-scoring dot of any conflicting pair.
  if (!found.centroids.empty()) {
    std::vector<double> diam = found.diameters;
    std::nth_element(diam.begin(), diam.begin() + static_cast<std::ptrdiff_t>(diam.size() / 2), diam.end());
    const double min_sep = 0.5 * diam[diam.size() / 2];
    std::vector<std::size_t> order(found.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return found.scores[a] > found.scores[b]; });
    std::vector<std::size_t> kept;
    for (std::size_t idx : order) {
      const bool clash = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
        return (found.centroids[k] - found.centroids[idx]).norm() < min_sep;
      });
      if (!clash) kept.push_back(idx);
    }
    std::sort(kept.begin(), kept.end());
    DotSet pruned;
    for (std::size_t k : kept) {
      pruned.centroids.push_back(found.centroids[k]);
      pruned.diameters.push_back(found.diameters[k]);
      pruned.scores.push_back(found.scores[k]);
    }
    found = std::move(pruned);
  }

  if (found.size() < 4) {
    throw DetectionError("found " + std::to_string(found.size()) + " dots, need at least 4");
  }
  if (grid) {
    if (static_cast<int>(found.size()) != grid->count()) {
      throw DetectionError("found " + std::to_string(found.size()) + " dots, expected " +
                           std::to_string(grid->rows) + "x" + std::to_string(grid->cols));
    }
    const auto order = grid_order(found.centroids, *grid);
    DotSet sorted;
    for (std::size_t k : order) {
      sorted.centroids.push_back(found.centroids[k]);
      sorted.diameters.push_back(found.diameters[k]);
      sorted.scores.push_back(found.scores[k]);
    }
    found = std::move(sorted);
  }
  return found;
}

std::vector<std::size_t> grid_order(const std::vector<Eigen::Vector2d>& points, GridSize grid) {
  if (grid.rows < 1 || grid.cols < 1) throw MatchError("grid dimensions must be positive");
  if (static_cast<int>(points.size()) != grid.count()) {
    throw MatchError("expected " + std::to_string(grid.count()) + " points, got " + std::to_string(points.size()));
  }
  std::vector<std::size_t> by_y(points.size());
  std::iota(by_y.begin(), by_y.end(), 0);
  std::stable_sort(by_y.begin(), by_y.end(), [&](std::size_t a, std::size_t b) { return points[a].y() < points[b].y(); });

  const auto cols = static_cast<std::size_t>(grid.cols);
  std::vector<double> row_min(static_cast<std::size_t>(grid.rows)), row_max(static_cast<std::size_t>(grid.rows));
  for (std::size_t r = 0; r < static_cast<std::size_t>(grid.rows); ++r) {
    row_min[r] = points[by_y[r * cols]].y();
    row_max[r] = points[by_y[r * cols + cols - 1]].y();
  }
  for (std::size_t r = 0; r + 1 < static_cast<std::size_t>(grid.rows); ++r) {
    const double spread = std::max(row_max[r] - row_min[r], row_max[r + 1] - row_min[r + 1]);
    const double gap = row_min[r + 1] - row_max[r];
    if (gap < 2.0 * spread || gap <= 0.0) {
      throw MatchError("ambiguous row clustering between rows " + std::to_string(r) + " and " + std::to_string(r + 1));
    }
  }

  std::vector<std::size_t> order;
  order.reserve(points.size());
  for (std::size_t r = 0; r < static_cast<std::size_t>(grid.rows); ++r) {
    std::vector<std::size_t> row(by_y.begin() + static_cast<std::ptrdiff_t>(r * cols),
                                 by_y.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols));
    std::stable_sort(row.begin(), row.end(), [&](std::size_t a, std::size_t b) { return points[a].x() < points[b].x(); });
    order.insert(order.end(), row.begin(), row.end());
  }
  return order;
}

Correspondence match_grid(const DotSet& slice, const DotSet& reference, GridSize grid) {
  if (slice.size() != reference.size()) {
    throw MatchError("dot sets differ in size (" + std::to_string(slice.size()) + " vs " +
                     std::to_string(reference.size()) + ")");
  }
  const auto a = grid_order(slice.centroids, grid);
  const auto b = grid_order(reference.centroids, grid);
  Correspondence c;
  c.pairs.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) c.pairs.push_back({slice.centroids[a[i]], reference.centroids[b[i]]});
  return c;
}

ImageBuffer warp_to_reference(const ImageBuffer& img, const Homography& h, int out_width, int out_height) {
  if (!h.invertible()) throw SingularError("warp_to_reference: homography is not invertible");
  const int w = out_width > 0 ? out_width : img.width();
  const int ht = out_height > 0 ? out_height : img.height();
  const Eigen::Matrix3d inv = h.inverse().matrix;

  const auto snap = [](double v) {
    const double r = std::round(v);
    return std::abs(v - r) < 1e-9 ? r : v;
  };

  std::vector<Plane> planes(static_cast<std::size_t>(img.channels()), Plane::Zero(ht, w));
  Mask valid = Mask::Constant(ht, w, false);
  for (int y = 0; y < ht; ++y) {
    for (int x = 0; x < w; ++x) {
      const Eigen::Vector3d src = inv * Eigen::Vector3d(x, y, 1.0);
      if (!(src.z() > 0.0)) continue;
      const Sample s = sample_bilinear(img, snap(src.x() / src.z()), snap(src.y() / src.z()));
      if (!s.valid) continue;
      valid(y, x) = true;
      for (int c = 0; c < img.channels(); ++c) planes[static_cast<std::size_t>(c)](y, x) = s.values[static_cast<std::size_t>(c)];
    }
  }
  ImageBuffer out = ImageBuffer::from_planes(std::move(planes));
  out.set_validity(std::move(valid));
  return out;
}

std::vector<Homography> calibrate_stack(const std::vector<ImageBuffer>& target_slices, GridSize grid,
                                        std::optional<int> reference_index, const DotDetectionParams& params) {
  const int n = static_cast<int>(target_slices.size());
  if (n == 0) throw DomainError("calibrate_stack: no calibration slices");
  if (n == 1) return {Homography::identity()};
  const int ref = reference_index.value_or(n / 2);
  if (ref < 0 || ref >= n) throw DomainError("reference index " + std::to_string(ref) + " out of range");

  std::vector<DotSet> dots;
  dots.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    try {
      dots.push_back(detect_dots(target_slices[static_cast<std::size_t>(i)], grid, params));
    } catch (const DetectionError& e) {
      throw DetectionError(e.what(), i);
    } catch (const MatchError& e) {
      throw DetectionError(e.what(), i);
    }
  }

  std::vector<Homography> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    if (i == ref) {
      out[static_cast<std::size_t>(i)] = Homography::identity();
      continue;
    }
    out[static_cast<std::size_t>(i)] =
        estimate_homography(match_grid(dots[static_cast<std::size_t>(i)], dots[static_cast<std::size_t>(ref)], grid));
  }
  return out;
}

void write_calibration(const std::filesystem::path& path, const std::vector<Homography>& homographies) {
  CalibrationTable table;
  for (std::size_t i = 0; i < homographies.size(); ++i) table[static_cast<int>(i)] = homographies[i];
  write_calibration(path, table);
}

void write_calibration(const std::filesystem::path& path, const CalibrationTable& table) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write calibration file " + path.string());
  out << std::setprecision(17);
  for (const auto& [index, h] : table) {
    out << index;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) out << ' ' << h.matrix(r, c);
    out << ' ' << h.rms_px << '\n';
  }
  if (!out) throw IoError("failed writing calibration file " + path.string());
}

CalibrationTable read_calibration(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read calibration file " + path.string());
  CalibrationTable table;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    int index = 0;
    Homography h;
    bool ok = static_cast<bool>(fields >> index);
    for (int k = 0; ok && k < 9; ++k) ok = static_cast<bool>(fields >> h.matrix(k / 3, k % 3));
    ok = ok && static_cast<bool>(fields >> h.rms_px);
    if (!ok || !(fields >> std::ws).eof()) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected 'index h11..h33 rms_px'");
    }
    if (table.count(index)) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": duplicate slice index " +
                        std::to_string(index));
    }
    table[index] = h;
  }
  return table;
}

}  // namespace fixedlens
