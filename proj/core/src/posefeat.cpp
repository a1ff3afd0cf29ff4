#include "musedance/posefeat.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "musedance/common.hpp"

namespace musedance::posefeat {

namespace {

using ingest::Keypoint;
using ingest::PoseTrack;

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) throw DataError("median of empty set");
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Lower-middle order statistic. Centering subtracts an actual data point so
// the recentered median is exactly zero; an averaged median would leave
// rounding residue.
double median_element(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  if (v.empty()) throw DataError("median of empty set");
  return v[(v.size() - 1) / 2];
}

double mean_ankle_y(const ingest::SkeletonFrame& f) {
  return 0.5 * (f[static_cast<std::size_t>(Keypoint::ankle_l)].y +
                f[static_cast<std::size_t>(Keypoint::ankle_r)].y);
}

double mean_ankle_x(const ingest::SkeletonFrame& f) {
  return 0.5 * (f[static_cast<std::size_t>(Keypoint::ankle_l)].x +
                f[static_cast<std::size_t>(Keypoint::ankle_r)].x);
}

double frame_height(const ingest::SkeletonFrame& f) {
  return std::abs(f[static_cast<std::size_t>(Keypoint::head)].y - mean_ankle_y(f));
}

}  // namespace

AnkleStats ankle_statistics(const PoseTrack& track, double alpha, double epsilon) {
  if (track.frames.empty()) throw DataError("ankle statistics of an empty track");
  if (alpha <= 0.0 || epsilon <= 0.0)
    throw ConfigError("alpha and epsilon must be positive");

  std::vector<double> pooled;
  pooled.reserve(track.frames.size() * 2);
  for (const auto& f : track.frames) {
    pooled.push_back(f[static_cast<std::size_t>(Keypoint::ankle_l)].y);
    pooled.push_back(f[static_cast<std::size_t>(Keypoint::ankle_r)].y);
  }

  AnkleStats st;
  st.clo = *std::max_element(pooled.begin(), pooled.end());
  st.med = median(pooled);
  double sum = 0.0;
  for (double y : pooled) sum += y;
  st.avg = sum / static_cast<double>(pooled.size());

  const double ref = alpha * std::abs(st.clo - st.med);
  double best = -std::numeric_limits<double>::infinity();
  bool found = false;
  for (double y : pooled) {
    if (y >= st.med) continue;
    if (std::abs(std::abs(y - st.med) - ref) >= epsilon) continue;
    if (y > best) {
      best = y;
      found = true;
    }
  }
  if (found) st.far = best;
  return st;
}

HeightClusters cluster_heights(const PoseTrack& track, const AnkleStats& stats) {
  if (!stats.far) throw ConfigError("cluster_heights requires a valid far ankle");
  HeightClusters hc;
  for (const auto& f : track.frames) {
    const double a = mean_ankle_y(f);
    const double d_clo = std::abs(a - stats.clo);
    const double d_far = std::abs(a - *stats.far);
    const double h = frame_height(f);
    if (d_clo < d_far) {
      if (!hc.clo || h > *hc.clo) hc.clo = h;
    } else if (d_clo > d_far) {
      if (!hc.far || h > *hc.far) hc.far = h;
    }
    // equidistant frames belong to neither cluster
  }
  return hc;
}

TargetFrameStats target_frame_stats(const PoseTrack& track, double alpha,
                                    double epsilon) {
  TargetFrameStats tfs;
  tfs.ankl = ankle_statistics(track, alpha, epsilon);
  if (tfs.ankl.far) {
    const HeightClusters hc = cluster_heights(track, tfs.ankl);
    tfs.heig_clo = hc.clo;
    tfs.heig_far = hc.far;
  }
  if (!tfs.heig_clo) {
    // single-cluster fallback: tallest frame of the whole track
    double best = 0.0;
    for (const auto& f : track.frames) best = std::max(best, frame_height(f));
    if (best > 0.0) tfs.heig_clo = best;
  }
  return tfs;
}

double compute_scale(const AnkleStats& src, double heig_clo_src, double heig_far_src,
                     double heig_clo_tgt, double heig_far_tgt) {
  if (!src.far) throw DegenerateGeometry("source track has no far ankle");
  const double denom = src.clo - *src.far;
  if (denom == 0.0) throw DegenerateGeometry("ankl_clo equals ankl_far");
  if (heig_clo_src <= 0.0 || heig_far_src <= 0.0)
    throw DegenerateGeometry("source cluster heights must be positive");
  const double far_ratio = heig_far_tgt / heig_far_src;
  const double clo_ratio = heig_clo_tgt / heig_clo_src;
  const double weight = (src.avg - *src.far) / denom;
  return far_ratio + weight * (clo_ratio - far_ratio);
}

ScaleChoice resolve_scale(const PoseTrack& track, const NormalizationParams& params) {
  const AnkleStats src = ankle_statistics(track, params.alpha, params.epsilon);
  const TargetFrameStats& tgt = params.target;

  if (src.far && tgt.ankl.far && tgt.heig_clo && tgt.heig_far) {
    const HeightClusters hc = cluster_heights(track, src);
    if (hc.clo && hc.far && *hc.clo > 0.0 && *hc.far > 0.0 && src.clo != *src.far) {
      return {compute_scale(src, *hc.clo, *hc.far, *tgt.heig_clo, *tgt.heig_far),
              ScaleChoice::Method::interpolated};
    }
  }

  // far side degenerate on either end: fall back to the clo-height ratio
  double src_clo_height = 0.0;
  if (src.far) {
    const HeightClusters hc = cluster_heights(track, src);
    if (hc.clo) src_clo_height = *hc.clo;
  }
  if (src_clo_height <= 0.0) {
    for (const auto& f : track.frames) src_clo_height = std::max(src_clo_height, frame_height(f));
  }
  if (src_clo_height > 0.0 && tgt.heig_clo && *tgt.heig_clo > 0.0) {
    log_warn("degenerate far-ankle geometry, scaling by clo-height ratio");
    return {*tgt.heig_clo / src_clo_height, ScaleChoice::Method::clo_ratio};
  }
  log_warn("degenerate geometry on both clusters, leaving scale at 1");
  return {1.0, ScaleChoice::Method::unit};
}

PoseTrack normalize_track(const PoseTrack& track, const NormalizationParams& params) {
  if (track.frames.empty()) throw DataError("cannot normalize an empty track");
  const ScaleChoice sc = resolve_scale(track, params);

  PoseTrack out = track;
  for (auto& f : out.frames)
    for (auto& p : f) p.y *= sc.s;

  std::vector<double> ax, ay;
  ax.reserve(out.frames.size());
  ay.reserve(out.frames.size());
  for (const auto& f : out.frames) {
    ax.push_back(mean_ankle_x(f));
    ay.push_back(mean_ankle_y(f));
  }
  const double cx = median_element(ax);
  const double cy = median_element(ay);
  for (auto& f : out.frames) {
    for (auto& p : f) {
      p.x -= cx;
      p.y -= cy;
    }
  }
  return out;
}

Eigen::MatrixXd derive_movement_features(const PoseTrack& track) {
  const auto t = static_cast<long>(track.frames.size());
  Eigen::MatrixXd m(t, kMovementFeatures);
  for (long r = 0; r < t; ++r) {
    const auto& f = track.frames[static_cast<std::size_t>(r)];
    for (int k = 0; k < ingest::kNumKeypoints; ++k) {
      m(r, 2 * k) = f[static_cast<std::size_t>(k)].x;
      m(r, 2 * k + 1) = f[static_cast<std::size_t>(k)].y;
    }
    int col = kCoordFeatures;
    for (int i = 0; i < ingest::kNumKeypoints; ++i) {
      for (int j = i + 1; j < ingest::kNumKeypoints; ++j) {
        const double dx = f[static_cast<std::size_t>(i)].x - f[static_cast<std::size_t>(j)].x;
        const double dy = f[static_cast<std::size_t>(i)].y - f[static_cast<std::size_t>(j)].y;
        m(r, col++) = std::hypot(dx, dy);
      }
    }
  }
  return m;
}

}  // namespace musedance::posefeat
