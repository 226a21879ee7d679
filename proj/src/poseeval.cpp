#include "fixedlens/poseeval.hpp"

#include "text_util.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace fixedlens {

namespace {

constexpr double kRadToDeg = 180.0 / M_PI;

struct MeanStd {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double std = std::numeric_limits<double>::quiet_NaN();
};

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd out;
  if (v.empty()) return out;
  out.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() < 2) {
    out.std = 0.0;
    return out;
  }
  double ss = 0.0;
  for (double x : v) ss += (x - out.mean) * (x - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return out;
}

double wrap_degrees(double d) {
  while (d > 180.0) d -= 360.0;
  while (d <= -180.0) d += 360.0;
  return d;
}

double safe_ratio(double a, double b) {
  if (b == 0.0) return a == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  return a / b;
}

std::string fmt(double v, int precision = 3) {
  if (std::isnan(v)) return "n/a";
  if (std::isinf(v)) return "inf";
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

}  // namespace

SphereFit fit_sphere(const std::vector<PoseRecord>& poses) {
  std::vector<Eigen::Vector3d> pts;
  for (const auto& p : poses) {
    if (p.detected) pts.push_back(p.center);
  }
  Eigen::Matrix<double, 3, Eigen::Dynamic> m(3, static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = pts[i];
  return fit_sphere<double>(m);
}

StepStats step_statistics(const std::vector<PoseRecord>& poses, const SphereFit& fit) {
  StepStats stats;
  stats.n_expected = static_cast<int>(poses.size());

  std::map<int, std::vector<PoseRecord>> rings;
  std::vector<double> radial;
  for (const auto& p : poses) {
    if (!p.detected) continue;
    if (!p.center.allFinite()) throw DegenerateError("detected pose " + std::to_string(p.view_id) + " is not finite");
    rings[p.tilt_index].push_back(p);
    radial.push_back((p.center - fit.center).norm());
  }
  stats.n_detected = static_cast<int>(radial.size());
  if (rings.empty()) throw DegenerateError("no detected poses");
  for (auto& [tilt, ring] : rings) {
    if (ring.size() < 3) {
      throw DegenerateError("tilt ring " + std::to_string(tilt) + " has " + std::to_string(ring.size()) +
                            " detected poses, need at least 3");
    }
    std::sort(ring.begin(), ring.end(), [](const PoseRecord& a, const PoseRecord& b) { return a.pan_index < b.pan_index; });
  }

  // Pan axis: mean of the ring-plane normals, signs aligned to the first ring.
  Eigen::Vector3d axis = Eigen::Vector3d::Zero();
  Eigen::Vector3d first_normal = Eigen::Vector3d::Zero();
  for (const auto& [tilt, ring] : rings) {
    Eigen::Matrix<double, 3, Eigen::Dynamic> pts(3, static_cast<Eigen::Index>(ring.size()));
    for (std::size_t i = 0; i < ring.size(); ++i) pts.col(static_cast<Eigen::Index>(i)) = ring[i].center;
    const Eigen::Vector3d centroid = pts.rowwise().mean();
    const Eigen::JacobiSVD<Eigen::Matrix<double, 3, Eigen::Dynamic>> svd(pts.colwise() - centroid, Eigen::ComputeFullU);
    Eigen::Vector3d normal = svd.matrixU().col(2);
    if (first_normal.isZero()) first_normal = normal;
    if (normal.dot(first_normal) < 0.0) normal = -normal;
    axis += normal;
  }
  axis.normalize();

  const auto pan_steps_about = [&](const Eigen::Vector3d& ax) {
    const Eigen::Vector3d seed = std::abs(ax.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
    const Eigen::Vector3d e1 = (seed - seed.dot(ax) * ax).normalized();
    const Eigen::Vector3d e2 = ax.cross(e1);
    std::vector<double> steps;
    for (const auto& [tilt, ring] : rings) {
      for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
        if (ring[i + 1].pan_index != ring[i].pan_index + 1) continue;
        const Eigen::Vector3d a = ring[i].center - fit.center;
        const Eigen::Vector3d b = ring[i + 1].center - fit.center;
        const double az_a = std::atan2(a.dot(e2), a.dot(e1)) * kRadToDeg;
        const double az_b = std::atan2(b.dot(e2), b.dot(e1)) * kRadToDeg;
        steps.push_back(wrap_degrees(az_b - az_a));
      }
    }
    return steps;
  };

  std::vector<double> pan_steps = pan_steps_about(axis);
  if (pan_steps.empty()) throw DegenerateError("no pair of consecutive detected pan positions");
  if (mean_std(pan_steps).mean < 0.0) {
    axis = -axis;
    pan_steps = pan_steps_about(axis);
  }

  std::vector<std::pair<int, double>> ring_tilt;
  for (const auto& [tilt, ring] : rings) {
    double sum = 0.0;
    for (const auto& p : ring) {
      const Eigen::Vector3d d = p.center - fit.center;
      sum += std::acos(std::clamp(d.dot(axis) / d.norm(), -1.0, 1.0)) * kRadToDeg;
    }
    ring_tilt.emplace_back(tilt, sum / static_cast<double>(ring.size()));
  }
  std::vector<double> tilt_steps;
  for (std::size_t i = 0; i + 1 < ring_tilt.size(); ++i) {
    if (ring_tilt[i + 1].first == ring_tilt[i].first + 1) {
      tilt_steps.push_back(ring_tilt[i + 1].second - ring_tilt[i].second);
    }
  }
  if (!tilt_steps.empty() && mean_std(tilt_steps).mean < 0.0) {
    for (double& s : tilt_steps) s = -s;
  }

  const MeanStd r = mean_std(radial);
  const MeanStd pan = mean_std(pan_steps);
  const MeanStd tilt = mean_std(tilt_steps);
  stats.radial_mean_mm = r.mean;
  stats.radial_std_mm = r.std;
  stats.pan_step_mean_deg = pan.mean;
  stats.pan_step_std_deg = pan.std;
  stats.tilt_step_mean_deg = tilt.mean;
  stats.tilt_step_std_deg = tilt.std;
  return stats;
}

RunComparison compare_runs(const StepStats& a, const StepStats& b) {
  RunComparison c;
  c.radial_std_ratio = safe_ratio(a.radial_std_mm, b.radial_std_mm);
  c.pan_std_ratio = safe_ratio(a.pan_step_std_deg, b.pan_step_std_deg);
  c.tilt_std_ratio = safe_ratio(a.tilt_step_std_deg, b.tilt_step_std_deg);
  c.detected_fraction_a = a.n_expected > 0 ? static_cast<double>(a.n_detected) / a.n_expected : 0.0;
  c.detected_fraction_b = b.n_expected > 0 ? static_cast<double>(b.n_detected) / b.n_expected : 0.0;
  return c;
}

std::string format_comparison(const RunComparison& cmp, const std::string& label_a, const std::string& label_b) {
  std::ostringstream os;
  os << "std ratio (" << label_a << " / " << label_b << ")\n";
  os << "  radial: " << fmt(cmp.radial_std_ratio) << '\n';
  os << "  pan:    " << fmt(cmp.pan_std_ratio) << '\n';
  os << "  tilt:   " << fmt(cmp.tilt_std_ratio) << '\n';
  os << "detected fraction\n";
  os << "  " << label_a << ": " << fmt(cmp.detected_fraction_a) << '\n';
  os << "  " << label_b << ": " << fmt(cmp.detected_fraction_b) << '\n';
  return os.str();
}

std::string format_stats_table(const std::vector<std::pair<std::string, StepStats>>& rows) {
  std::ostringstream os;
  os << "| run | radial distance (mm) | pan step (deg) | tilt step (deg) | detected |\n";
  os << "|---|---|---|---|---|\n";
  for (const auto& [label, s] : rows) {
    os << "| " << label << " | " << fmt(s.radial_mean_mm) << " +- " << fmt(s.radial_std_mm) << " | "
       << fmt(s.pan_step_mean_deg) << " +- " << fmt(s.pan_step_std_deg) << " | " << fmt(s.tilt_step_mean_deg)
       << " +- " << fmt(s.tilt_step_std_deg) << " | " << s.n_detected << "/" << s.n_expected << " |\n";
  }
  return os.str();
}

StepStats reference_moving_lens_stats() {
  return {144.270, 0.266, 18.066, 1.060, 5.708, 0.398, 82, 100};
}

StepStats reference_fixed_lens_stats() {
  return {141.042, 0.112, 20.017, 0.290, 6.273, 0.313, 92, 92};
}

namespace {
constexpr const char* kPoseHeader = "view_id,pan_index,tilt_index,x_mm,y_mm,z_mm,detected";
}

std::vector<PoseRecord> read_pose_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read pose file " + path.string());
  std::string line;
  if (!std::getline(in, line) || text::trim(line) != kPoseHeader) {
    throw FormatError(path.string() + ": expected header '" + std::string(kPoseHeader) + "'");
  }
  std::vector<PoseRecord> poses;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.emplace_back(text::trim(f));
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (fields.size() != 7) throw FormatError(where + ": expected 7 fields");
    try {
      PoseRecord p;
      p.view_id = text::to_int(fields[0], "view_id");
      p.pan_index = text::to_int(fields[1], "pan_index");
      p.tilt_index = text::to_int(fields[2], "tilt_index");
      p.detected = text::to_bool(fields[6], "detected");
      for (int k = 0; k < 3; ++k) {
        const std::string& v = fields[static_cast<std::size_t>(3 + k)];
        p.center(k) = (v.empty() || v == "nan") ? std::numeric_limits<double>::quiet_NaN() : text::to_double(v, "coordinate");
      }
      if (p.detected && !p.center.allFinite()) throw ValidationError("detected pose without finite coordinates");
      poses.push_back(p);
    } catch (const ValidationError& e) {
      throw FormatError(where + ": " + e.what());
    }
  }
  return poses;
}

void write_pose_csv(const std::filesystem::path& path, const std::vector<PoseRecord>& poses) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write pose file " + path.string());
  out << kPoseHeader << '\n' << std::setprecision(17);
  for (const auto& p : poses) {
    out << p.view_id << ',' << p.pan_index << ',' << p.tilt_index << ',';
    if (p.detected) {
      out << p.center.x() << ',' << p.center.y() << ',' << p.center.z();
    } else {
      out << ",,";
    }
    out << ',' << (p.detected ? 1 : 0) << '\n';
  }
}

}  // namespace fixedlens
