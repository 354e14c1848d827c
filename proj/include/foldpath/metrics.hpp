#pragma once

#include "foldpath/path_model.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace foldpath {

struct AlignmentResult {
  double cost = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> warp;
};

/// Minimum-cost monotone alignment under the (right, down, diagonal) step
/// pattern with Euclidean point cost. Ties in the traceback prefer the
/// diagonal, then the step that advances `a`.
AlignmentResult dtw_align(std::span<const Vec3> a, std::span<const Vec3> b);

struct Thresholds {
  double delta = 0.025;      // Euclidean, normalized object space
  double theta_deg = 10.0;   // angular, degrees
};

struct FScoreResult {
  double precision = 0.0;
  double recall = 0.0;
  double fscore = 0.0;
  bool reversed = false;
};

/// DTW-matched pose F-score: a pose counts when any pose it is warped to
/// lies strictly within both the distance and the angle threshold.
FScoreResult pose_fscore(std::span<const Pose6D> gt, std::span<const Pose6D> pred, const Thresholds& thr = {});

/// Best of scoring `pred` and its reverse against `gt`.
FScoreResult fscore_bidirectional(const Path& gt, const Path& pred, const Thresholds& thr = {});

struct ObjectPaths {
  std::vector<Path> gt;
  std::vector<PredictedPath> predictions;
};

/// Object id -> (ground truth, predictions). Ordered by id, which is also the
/// tie-break order for equal confidences.
using EvalSet = std::map<std::string, ObjectPaths>;

/// Detection-style AP: predictions pooled over objects by descending
/// confidence, greedily matched one-to-one to unmatched ground truth of their
/// own object, integrated under the non-increasing precision envelope.
double average_precision(const EvalSet& data, double tau, const Thresholds& thr = {});

struct ApSuite {
  double ap50 = 0.0;
  double ap = 0.0;       // mean over tau = 0.50, 0.55, ..., 0.95
  double ap_easy = 0.0;  // mean over tau = 0.05, 0.10, ..., 0.50
};

ApSuite ap_suite(const EvalSet& data, const Thresholds& thr = {});

/// Symmetric squared-distance chamfer on positions, scaled by 1e4.
double pcd(std::span<const Pose6D> pred, std::span<const Pose6D> gt);

struct PathScore {
  std::size_t prediction = 0;
  double confidence = 0.0;
  double fscore = 0.0;
  bool reversed = false;
  std::optional<std::size_t> best_gt;
};

struct ObjectReport {
  std::optional<double> pcd;
  std::size_t gt_count = 0;
  std::vector<PathScore> paths;
};

struct EvalReport {
  double pcd = 0.0;  // mean over objects with both ground truth and predictions
  double ap50 = 0.0;
  double ap = 0.0;
  double ap_easy = 0.0;
  std::size_t samples = 0;
  Thresholds thresholds;
  std::map<std::string, ObjectReport> per_object;
};

/// Full evaluation. When `samples` > 0 every ground-truth and predicted path
/// is first resampled at the equispaced test-time parameters. Objects are
/// scored on up to `threads` workers; the result does not depend on it.
EvalReport evaluate(const EvalSet& data, const Thresholds& thr = {}, std::size_t samples = 384,
                    unsigned threads = 1);

}  // namespace foldpath
