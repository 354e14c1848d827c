#pragma once

#include "foldpath/path_model.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace foldpath {

/// permutation[j] is the ground-truth slot assigned to prediction j.
struct MatchResult {
  std::vector<std::size_t> permutation;
  double total_cost = 0.0;
};

/// Ground truth sampled at the training parameters, zero-padded to N slots.
struct PaddedTargets {
  std::vector<std::vector<Pose6D>> paths;
  std::vector<double> conf_targets;  // 1 for real paths, 0 for padding

  std::size_t slots() const { return paths.size(); }
  bool is_real(std::size_t i) const { return conf_targets[i] != 0.0; }
};

struct LossBreakdown {
  double points_loss = 0.0;
  double conf_loss = 0.0;
  double total = 0.0;
};

PaddedTargets pad_targets(std::span<const Path> gt, std::size_t slots, std::span<const double> params);

/// Mean Euclidean distance between positions at equal index; zero for padding.
double match_cost(std::span<const Pose6D> target, std::span<const Pose6D> pred, bool is_real);

/// Minimum-cost assignment of rows to columns. Among optimal assignments the
/// lexicographically smallest permutation is returned.
MatchResult hungarian(const Matrix& cost);

struct MatchedPair {
  std::span<const Pose6D> gt;
  std::span<const Pose6D> pred;
};

/// Mean over all pairs and samples of |p - p'| + (1 - cos(v, v')).
double points_loss(std::span<const MatchedPair> pairs);

inline constexpr double kConfidenceClamp = 1e-7;

/// Two-branch focal loss summed over slots.
double focal_conf_loss(std::span<const double> targets, std::span<const double> predicted, double gamma = 2.0);

/// d(focal loss)/d(predicted) per slot, consistent with focal_conf_loss.
std::vector<double> focal_conf_loss_grad(std::span<const double> targets, std::span<const double> predicted,
                                         double gamma = 2.0);

LossBreakdown total_loss(std::span<const Path> gt, std::span<const PredictedPath> preds, std::size_t slots,
                         std::span<const double> params, double gamma = 2.0);

/// Training-side objective on raw head outputs. Each raw prediction is a
/// T x 6 matrix (position, unnormalized orientation). Gradients are taken
/// with respect to the raw rows and the predicted confidences.
struct ObjectiveResult {
  LossBreakdown loss;
  MatchResult match;
  std::vector<Matrix> d_raw;
  std::vector<double> d_conf;
};

ObjectiveResult objective(const PaddedTargets& targets, std::span<const Matrix> raw_preds,
                          std::span<const double> confidences, double gamma = 2.0);

}  // namespace foldpath
