#include "foldpath/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace foldpath {

PaddedTargets pad_targets(std::span<const Path> gt, std::size_t slots, std::span<const double> params) {
  if (slots < gt.size()) {
    throw std::domain_error("pad_targets: " + std::to_string(gt.size()) + " ground-truth paths exceed " +
                            std::to_string(slots) + " prediction slots");
  }
  if (params.empty()) throw std::domain_error("pad_targets: empty parameter list");

  PaddedTargets out;
  out.paths.reserve(slots);
  out.conf_targets.reserve(slots);
  for (const auto& path : gt) {
    out.paths.push_back(resample(path, params).poses);
    out.conf_targets.push_back(1.0);
  }
  Pose6D zero;
  zero.position = Vec3::Zero();
  zero.orientation = Vec3::Zero();
  while (out.paths.size() < slots) {
    out.paths.emplace_back(params.size(), zero);
    out.conf_targets.push_back(0.0);
  }
  return out;
}

double match_cost(std::span<const Pose6D> target, std::span<const Pose6D> pred, bool is_real) {
  if (target.size() != pred.size()) {
    throw std::domain_error("match_cost: length mismatch (" + std::to_string(target.size()) + " vs " +
                            std::to_string(pred.size()) + ")");
  }
  if (!is_real || target.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t t = 0; t < target.size(); ++t) sum += (target[t].position - pred[t].position).norm();
  return sum / static_cast<double>(target.size());
}

namespace {

// Rebuilds `perm` into the lexicographically smallest perfect matching that
// only uses edges with (near) zero reduced cost.
void lexicographic_refine(const Matrix& cost, const std::vector<double>& u, const std::vector<double>& v,
                          std::vector<std::size_t>& perm) {
  const std::size_t n = perm.size();
  double scale = 1.0;
  for (Eigen::Index k = 0; k < cost.size(); ++k) scale = std::max(scale, std::abs(cost.data()[k]));
  const double tol = 1e-12 * scale * static_cast<double>(n);
  auto tight = [&](std::size_t i, std::size_t j) {
    return cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - u[i] - v[j] <= tol;
  };

  std::vector<std::size_t> owner(n);
  for (std::size_t i = 0; i < n; ++i) owner[perm[i]] = i;
  std::vector<char> col_fixed(n, 0);
  std::vector<char> visited(n);

  // Alternating search from `row` over tight edges that ends at `target_col`.
  auto augment = [&](auto&& self, std::size_t row, std::size_t target_col) -> bool {
    for (std::size_t c = 0; c < n; ++c) {
      if (col_fixed[c] || visited[c] || !tight(row, c)) continue;
      visited[c] = 1;
      if (c == target_col || self(self, owner[c], target_col)) {
        perm[row] = c;
        owner[c] = row;
        return true;
      }
    }
    return false;
  };

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (col_fixed[j] || !tight(i, j)) continue;
      if (perm[i] == j) break;
      const std::size_t displaced = owner[j];
      const std::size_t freed = perm[i];
      const auto saved_perm = perm;
      const auto saved_owner = owner;
      perm[i] = j;
      owner[j] = i;
      col_fixed[j] = 1;
      std::fill(visited.begin(), visited.end(), 0);
      const bool rerouted = augment(augment, displaced, freed);
      col_fixed[j] = 0;
      if (rerouted) break;
      perm = saved_perm;
      owner = saved_owner;
    }
    col_fixed[perm[i]] = 1;
  }
}

double assignment_cost(const Matrix& cost, const std::vector<std::size_t>& perm) {
  double total = 0.0;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    total += cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(perm[i]));
  }
  return total;
}

}  // namespace

MatchResult hungarian(const Matrix& cost) {
  if (cost.rows() != cost.cols()) {
    throw std::domain_error("hungarian: cost matrix is " + std::to_string(cost.rows()) + "x" +
                            std::to_string(cost.cols()) + ", expected square");
  }
  if (!cost.allFinite()) throw std::domain_error("hungarian: cost matrix has non-finite entries");

  const std::size_t n = static_cast<std::size_t>(cost.rows());
  MatchResult result;
  if (n == 0) return result;

  // Shortest augmenting path with row/column potentials, 1-based with a
  // sentinel column 0.
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> row_of(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    row_of[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = row_of[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[row_of[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (row_of[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      row_of[j0] = row_of[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<std::size_t> perm(n);
  for (std::size_t j = 1; j <= n; ++j) perm[row_of[j] - 1] = j - 1;
  const double base_cost = assignment_cost(cost, perm);

  std::vector<double> ru(u.begin() + 1, u.end()), rv(v.begin() + 1, v.end());
  auto refined = perm;
  lexicographic_refine(cost, ru, rv, refined);
  const double refined_cost = assignment_cost(cost, refined);
  if (refined_cost <= base_cost) {
    result.permutation = std::move(refined);
    result.total_cost = refined_cost;
  } else {
    result.permutation = std::move(perm);
    result.total_cost = base_cost;
  }
  return result;
}

namespace {

double cosine(const Vec3& a, const Vec3& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw std::domain_error("points_loss: zero-norm orientation");
  return a.dot(b) / (na * nb);
}

}  // namespace

double points_loss(std::span<const MatchedPair> pairs) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& pair : pairs) {
    if (pair.gt.size() != pair.pred.size()) throw std::domain_error("points_loss: length mismatch");
    for (std::size_t t = 0; t < pair.gt.size(); ++t) {
      sum += (pair.gt[t].position - pair.pred[t].position).norm();
      sum += 1.0 - cosine(pair.gt[t].orientation, pair.pred[t].orientation);
    }
    count += pair.gt.size();
  }
  return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

namespace {

void check_conf_lengths(std::span<const double> targets, std::span<const double> predicted) {
  if (targets.size() != predicted.size()) throw std::domain_error("focal_conf_loss: length mismatch");
}

double clamp_conf(double f) { return std::clamp(f, kConfidenceClamp, 1.0 - kConfidenceClamp); }

}  // namespace

double focal_conf_loss(std::span<const double> targets, std::span<const double> predicted, double gamma) {
  check_conf_lengths(targets, predicted);
  double sum = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double f = clamp_conf(predicted[i]);
    if (targets[i] != 0.0) {
      sum += -std::pow(1.0 - f, gamma) * std::log(f);
    } else {
      sum += -std::pow(f, gamma) * std::log(1.0 - f);
    }
  }
  return sum;
}

std::vector<double> focal_conf_loss_grad(std::span<const double> targets, std::span<const double> predicted,
                                         double gamma) {
  check_conf_lengths(targets, predicted);
  std::vector<double> grad(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double f = clamp_conf(predicted[i]);
    if (targets[i] != 0.0) {
      grad[i] = gamma * std::pow(1.0 - f, gamma - 1.0) * std::log(f) - std::pow(1.0 - f, gamma) / f;
    } else {
      grad[i] = -gamma * std::pow(f, gamma - 1.0) * std::log(1.0 - f) + std::pow(f, gamma) / (1.0 - f);
    }
  }
  return grad;
}

ObjectiveResult objective(const PaddedTargets& targets, std::span<const Matrix> raw_preds,
                          std::span<const double> confidences, double gamma) {
  const std::size_t n = targets.slots();
  if (raw_preds.size() != n || confidences.size() != n) {
    throw std::domain_error("objective: expected " + std::to_string(n) + " predictions");
  }

  const std::size_t samples = n > 0 ? targets.paths.front().size() : 0;
  for (const auto& raw : raw_preds) {
    if (static_cast<std::size_t>(raw.rows()) != samples || raw.cols() != 6) {
      throw std::domain_error("objective: raw prediction must be " + std::to_string(samples) + "x6");
    }
  }

  Matrix cost = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!targets.is_real(i)) continue;
      double sum = 0.0;
      for (std::size_t t = 0; t < samples; ++t) {
        const auto row = raw_preds[j].row(static_cast<Eigen::Index>(t));
        sum += (targets.paths[i][t].position - row.head<3>().transpose()).norm();
      }
      cost(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = sum / static_cast<double>(samples);
    }
  }

  ObjectiveResult out;
  out.match = hungarian(cost);
  out.d_raw.reserve(n);
  for (const auto& raw : raw_preds) out.d_raw.push_back(Matrix::Zero(raw.rows(), raw.cols()));

  std::size_t real = 0;
  for (std::size_t i = 0; i < n; ++i) real += targets.is_real(i) ? 1 : 0;

  if (real > 0) {
    const double norm = 1.0 / static_cast<double>(real * samples);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t i = out.match.permutation[j];
      if (!targets.is_real(i)) continue;
      for (std::size_t t = 0; t < samples; ++t) {
        const auto row = raw_preds[j].row(static_cast<Eigen::Index>(t));
        const Vec3 p_hat = row.head<3>().transpose();
        const Vec3 o_hat = row.tail<3>().transpose();
        const Pose6D& target = targets.paths[i][t];

        const Vec3 diff = p_hat - target.position;
        const double dist = diff.norm();
        const double o_norm = o_hat.norm();
        const double v_norm = target.orientation.norm();
        if (!(o_norm > 0.0) || !(v_norm > 0.0)) throw std::domain_error("objective: zero-norm orientation");
        const Vec3 o_unit = o_hat / o_norm;
        const Vec3 v_unit = target.orientation / v_norm;
        const double cos = o_unit.dot(v_unit);
        sum += dist + 1.0 - cos;

        auto grad = out.d_raw[j].row(static_cast<Eigen::Index>(t));
        if (dist > 0.0) grad.head<3>() = (norm / dist) * diff.transpose();
        grad.tail<3>() = (-norm / o_norm) * (v_unit - cos * o_unit).transpose();
      }
    }
    out.loss.points_loss = sum * norm;
  }

  std::vector<double> assigned(n);
  for (std::size_t j = 0; j < n; ++j) assigned[j] = targets.conf_targets[out.match.permutation[j]];
  out.loss.conf_loss = focal_conf_loss(assigned, confidences, gamma);
  out.d_conf = focal_conf_loss_grad(assigned, confidences, gamma);
  out.loss.total = out.loss.points_loss + out.loss.conf_loss;
  return out;
}

LossBreakdown total_loss(std::span<const Path> gt, std::span<const PredictedPath> preds, std::size_t slots,
                         std::span<const double> params, double gamma) {
  if (preds.size() != slots) {
    throw std::domain_error("total_loss: expected " + std::to_string(slots) + " predictions, got " +
                            std::to_string(preds.size()));
  }
  const PaddedTargets targets = pad_targets(gt, slots, params);
  std::vector<Matrix> raw;
  std::vector<double> conf;
  raw.reserve(slots);
  conf.reserve(slots);
  for (const auto& pred : preds) {
    if (pred.path.size() != params.size()) throw std::domain_error("total_loss: prediction not sampled at params");
    Matrix m(static_cast<Eigen::Index>(pred.path.size()), 6);
    for (std::size_t t = 0; t < pred.path.size(); ++t) {
      m.row(static_cast<Eigen::Index>(t)).head<3>() = pred.path.poses[t].position.transpose();
      m.row(static_cast<Eigen::Index>(t)).tail<3>() = pred.path.poses[t].orientation.transpose();
    }
    raw.push_back(std::move(m));
    conf.push_back(pred.confidence);
  }
  return objective(targets, raw, conf, gamma).loss;
}

}  // namespace foldpath
