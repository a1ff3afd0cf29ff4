#pragma once

#include <Eigen/Core>
#include <optional>

#include "musedance/ingest.hpp"

namespace musedance::posefeat {

inline constexpr int kCoordFeatures = 2 * ingest::kNumKeypoints;              // 28
inline constexpr int kPairFeatures =
    ingest::kNumKeypoints * (ingest::kNumKeypoints - 1) / 2;                  // 91
inline constexpr int kMovementFeatures = kCoordFeatures + kPairFeatures;      // 119

// Ankle y statistics over the pooled left/right ankle values of a track.
// `far` is the largest y below the median whose distance to the median is
// within epsilon of alpha times the median-to-closest distance; the set can
// be empty (no far ankle), which callers must handle.
struct AnkleStats {
  double clo = 0.0;
  double med = 0.0;
  double avg = 0.0;
  std::optional<double> far;
};

AnkleStats ankle_statistics(const ingest::PoseTrack& track, double alpha,
                            double epsilon);

// Per-cluster maxima of the frame height |head_y - mean ankle y|. A frame
// belongs to the clo (far) cluster iff its mean ankle y is strictly closer
// to ankl_clo (ankl_far); equidistant frames belong to neither.
struct HeightClusters {
  std::optional<double> clo;
  std::optional<double> far;
};

HeightClusters cluster_heights(const ingest::PoseTrack& track, const AnkleStats& stats);

struct TargetFrameStats {
  AnkleStats ankl;
  std::optional<double> heig_clo;
  std::optional<double> heig_far;
};

TargetFrameStats target_frame_stats(const ingest::PoseTrack& track, double alpha,
                                    double epsilon);

struct NormalizationParams {
  double alpha = 1.0;
  double epsilon = 0.7;
  TargetFrameStats target;
};

// Interpolated height-ratio scale. Throws DegenerateGeometry when the
// interpolation denominator or a source height vanishes.
double compute_scale(const AnkleStats& src, double heig_clo_src, double heig_far_src,
                     double heig_clo_tgt, double heig_far_tgt);

struct ScaleChoice {
  enum class Method { interpolated, clo_ratio, unit };
  double s = 1.0;
  Method method = Method::unit;
};

// Full interpolated scale when both sides have valid far-ankle geometry,
// otherwise the clo-height ratio, otherwise 1 (with a warning). Clips are
// never dropped for degenerate geometry.
ScaleChoice resolve_scale(const ingest::PoseTrack& track, const NormalizationParams& params);

// Scales y by the resolved factor, then translates all coordinates so the
// median (over frames) of the mean-ankle position lands exactly at (0,0).
// The centering median is the lower-middle order statistic, which keeps the
// zero exact for even frame counts.
ingest::PoseTrack normalize_track(const ingest::PoseTrack& track,
                                  const NormalizationParams& params);

// Per frame: 28 coordinates (x,y per keypoint in declaration order), then 91
// pairwise joint distances in lexicographic pair order. Shape T x 119.
Eigen::MatrixXd derive_movement_features(const ingest::PoseTrack& track);

}  // namespace musedance::posefeat
