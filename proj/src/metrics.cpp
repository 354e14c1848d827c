#include "foldpath/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <thread>

namespace foldpath {

AlignmentResult dtw_align(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) throw std::domain_error("dtw_align: empty input sequence");
  const std::size_t rows = a.size();
  const std::size_t cols = b.size();
  std::vector<double> acc(rows * cols);
  auto at = [&](std::size_t i, std::size_t j) -> double& { return acc[i * cols + j]; };

  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const double d = (a[i] - b[j]).norm();
      if (i == 0 && j == 0) {
        at(i, j) = d;
        continue;
      }
      double best = std::numeric_limits<double>::infinity();
      if (i > 0 && j > 0) best = at(i - 1, j - 1);
      if (i > 0) best = std::min(best, at(i - 1, j));
      if (j > 0) best = std::min(best, at(i, j - 1));
      at(i, j) = best + d;
    }
  }

  AlignmentResult result;
  result.cost = at(rows - 1, cols - 1);
  std::size_t i = rows - 1;
  std::size_t j = cols - 1;
  result.warp.emplace_back(i, j);
  while (i > 0 || j > 0) {
    std::size_t ni = i, nj = j;
    double best = std::numeric_limits<double>::infinity();
    if (i > 0 && j > 0) {
      best = at(i - 1, j - 1);
      ni = i - 1;
      nj = j - 1;
    }
    if (i > 0 && at(i - 1, j) < best) {
      best = at(i - 1, j);
      ni = i - 1;
      nj = j;
    }
    if (j > 0 && at(i, j - 1) < best) {
      ni = i;
      nj = j - 1;
    }
    i = ni;
    j = nj;
    result.warp.emplace_back(i, j);
  }
  std::reverse(result.warp.begin(), result.warp.end());
  return result;
}

namespace {

Vec3 unit_or_throw(const Vec3& v) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw std::domain_error("pose_fscore: zero or non-finite orientation");
  return v / n;
}

double angle_deg(const Vec3& u, const Vec3& v) {
  return std::acos(std::clamp(u.dot(v), -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

}  // namespace

FScoreResult pose_fscore(std::span<const Pose6D> gt, std::span<const Pose6D> pred, const Thresholds& thr) {
  if (gt.empty() || pred.empty()) throw std::domain_error("pose_fscore: empty pose list");
  if (!(thr.delta > 0.0)) throw std::domain_error("pose_fscore: delta must be positive");
  if (!(thr.theta_deg > 0.0 && thr.theta_deg < 180.0)) throw std::domain_error("pose_fscore: theta must lie in (0, 180)");

  std::vector<Vec3> gt_dir, pred_dir;
  gt_dir.reserve(gt.size());
  pred_dir.reserve(pred.size());
  for (const auto& p : gt) gt_dir.push_back(unit_or_throw(p.orientation));
  for (const auto& p : pred) pred_dir.push_back(unit_or_throw(p.orientation));

  const auto alignment = dtw_align(positions(gt), positions(pred));
  std::vector<char> recalled(gt.size(), 0), precise(pred.size(), 0);
  for (const auto& [k, m] : alignment.warp) {
    const bool close = (gt[k].position - pred[m].position).norm() < thr.delta;
    if (close && angle_deg(gt_dir[k], pred_dir[m]) < thr.theta_deg) {
      recalled[k] = 1;
      precise[m] = 1;
    }
  }

  FScoreResult r;
  r.recall = static_cast<double>(std::count(recalled.begin(), recalled.end(), 1)) / static_cast<double>(gt.size());
  r.precision = static_cast<double>(std::count(precise.begin(), precise.end(), 1)) / static_cast<double>(pred.size());
  const double denom = r.precision + r.recall;
  r.fscore = denom > 0.0 ? 2.0 * r.precision * r.recall / denom : 0.0;
  return r;
}

FScoreResult fscore_bidirectional(const Path& gt, const Path& pred, const Thresholds& thr) {
  FScoreResult forward = pose_fscore(gt.poses, pred.poses, thr);
  const Path flipped = reverse(pred);
  FScoreResult backward = pose_fscore(gt.poses, flipped.poses, thr);
  if (backward.fscore > forward.fscore) {
    backward.reversed = true;
    return backward;
  }
  return forward;
}

namespace {

// Per object: scores[pred][gt] holds the bidirectional F-score.
struct ScoredObject {
  const std::string* id = nullptr;
  std::size_t gt_count = 0;
  std::vector<double> confidence;
  std::vector<std::vector<FScoreResult>> scores;
};

ScoredObject score_object(const std::string& id, const ObjectPaths& obj, const Thresholds& thr) {
  ScoredObject out;
  out.id = &id;
  out.gt_count = obj.gt.size();
  out.confidence.reserve(obj.predictions.size());
  out.scores.reserve(obj.predictions.size());
  for (const auto& pred : obj.predictions) {
    out.confidence.push_back(pred.confidence);
    std::vector<FScoreResult> row;
    row.reserve(obj.gt.size());
    for (const auto& gt : obj.gt) row.push_back(fscore_bidirectional(gt, pred.path, thr));
    out.scores.push_back(std::move(row));
  }
  return out;
}

double ap_from_scores(const std::vector<ScoredObject>& objects, double tau, bool warn_if_empty = true) {
  if (!(tau > 0.0 && tau <= 1.0)) throw std::domain_error("average_precision: tau must lie in (0, 1]");

  std::size_t total_gt = 0;
  struct Candidate {
    std::size_t object;
    std::size_t prediction;
    double confidence;
  };
  std::vector<Candidate> candidates;
  for (std::size_t o = 0; o < objects.size(); ++o) {
    total_gt += objects[o].gt_count;
    for (std::size_t p = 0; p < objects[o].confidence.size(); ++p) {
      candidates.push_back({o, p, objects[o].confidence[p]});
    }
  }
  if (total_gt == 0) throw std::domain_error("average_precision: dataset has no ground-truth paths");
  if (candidates.empty()) {
    if (warn_if_empty) std::clog << "warning: average_precision called with no predictions; AP is 0\n";
    return 0.0;
  }

  // Objects are already in id order, so (object, prediction) is the tie-break.
  std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& l, const Candidate& r) {
    if (l.confidence != r.confidence) return l.confidence > r.confidence;
    if (l.object != r.object) return l.object < r.object;
    return l.prediction < r.prediction;
  });

  std::vector<std::vector<char>> consumed(objects.size());
  for (std::size_t o = 0; o < objects.size(); ++o) consumed[o].assign(objects[o].gt_count, 0);

  std::vector<double> precision;
  std::vector<char> is_tp;
  precision.reserve(candidates.size());
  is_tp.reserve(candidates.size());
  std::size_t tp = 0;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const auto& c = candidates[k];
    const auto& row = objects[c.object].scores[c.prediction];
    auto& used = consumed[c.object];
    double best = -1.0;
    std::size_t best_gt = 0;
    for (std::size_t g = 0; g < row.size(); ++g) {
      if (!used[g] && row[g].fscore > best) {
        best = row[g].fscore;
        best_gt = g;
      }
    }
    const bool hit = best >= tau;
    if (hit) {
      used[best_gt] = 1;
      ++tp;
    }
    is_tp.push_back(hit ? 1 : 0);
    precision.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
  }

  // Recall only grows at true positives, each by 1 / total_gt.
  double envelope = 0.0;
  double area = 0.0;
  for (std::size_t k = candidates.size(); k-- > 0;) {
    envelope = std::max(envelope, precision[k]);
    if (is_tp[k]) area += envelope;
  }
  return area / static_cast<double>(total_gt);
}

std::vector<ScoredObject> score_all(const EvalSet& data, const Thresholds& thr, unsigned threads) {
  std::vector<std::pair<const std::string*, const ObjectPaths*>> items;
  items.reserve(data.size());
  for (const auto& [id, obj] : data) items.emplace_back(&id, &obj);

  std::vector<ScoredObject> scored(items.size());
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(items.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < items.size(); ++i) scored[i] = score_object(*items[i].first, *items[i].second, thr);
    return scored;
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < items.size(); i = next++) {
            scored[i] = score_object(*items[i].first, *items[i].second, thr);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return scored;
}

ApSuite suite_from_scores(const std::vector<ScoredObject>& scored) {
  ApSuite suite;
  suite.ap50 = ap_from_scores(scored, 0.5);
  double hard = 0.0, easy = 0.0;
  for (int i = 0; i < 10; ++i) {
    hard += ap_from_scores(scored, static_cast<double>(50 + 5 * i) / 100.0, false);
    easy += ap_from_scores(scored, static_cast<double>(5 + 5 * i) / 100.0, false);
  }
  suite.ap = hard / 10.0;
  suite.ap_easy = easy / 10.0;
  return suite;
}

}  // namespace

double average_precision(const EvalSet& data, double tau, const Thresholds& thr) {
  return ap_from_scores(score_all(data, thr, 1), tau);
}

ApSuite ap_suite(const EvalSet& data, const Thresholds& thr) {
  return suite_from_scores(score_all(data, thr, 1));
}

double pcd(std::span<const Pose6D> pred, std::span<const Pose6D> gt) {
  if (pred.empty() || gt.empty()) throw std::domain_error("pcd: empty pose set");
  auto one_way = [](std::span<const Pose6D> from, std::span<const Pose6D> to) {
    double sum = 0.0;
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) best = std::min(best, (p.position - q.position).squaredNorm());
      sum += best;
    }
    return sum / static_cast<double>(from.size());
  };
  return (one_way(pred, gt) + one_way(gt, pred)) * 1e4;
}

EvalReport evaluate(const EvalSet& data, const Thresholds& thr, std::size_t samples, unsigned threads) {
  EvalSet prepared;
  if (samples > 0) {
    const auto params = sample_params({SamplingStrategy::equispaced, samples, std::nullopt, 0});
    for (const auto& [id, obj] : data) {
      auto& dst = prepared[id];
      for (const auto& g : obj.gt) dst.gt.push_back(resample(g, params));
      for (const auto& p : obj.predictions) dst.predictions.push_back({resample(p.path, params), p.confidence});
    }
  }
  const EvalSet& source = samples > 0 ? prepared : data;

  const auto scored = score_all(source, thr, threads);

  EvalReport report;
  report.samples = samples;
  report.thresholds = thr;
  const ApSuite suite = suite_from_scores(scored);
  report.ap50 = suite.ap50;
  report.ap = suite.ap;
  report.ap_easy = suite.ap_easy;

  double pcd_sum = 0.0;
  std::size_t pcd_count = 0;
  std::size_t index = 0;
  for (const auto& [id, obj] : source) {
    const auto& s = scored[index++];
    ObjectReport entry;
    entry.gt_count = obj.gt.size();
    if (!obj.gt.empty() && !obj.predictions.empty()) {
      std::vector<Pose6D> gt_poses, pred_poses;
      for (const auto& g : obj.gt) gt_poses.insert(gt_poses.end(), g.poses.begin(), g.poses.end());
      for (const auto& p : obj.predictions) pred_poses.insert(pred_poses.end(), p.path.poses.begin(), p.path.poses.end());
      entry.pcd = pcd(pred_poses, gt_poses);
      pcd_sum += *entry.pcd;
      ++pcd_count;
    }
    for (std::size_t p = 0; p < obj.predictions.size(); ++p) {
      PathScore ps;
      ps.prediction = p;
      ps.confidence = obj.predictions[p].confidence;
      for (std::size_t g = 0; g < s.scores[p].size(); ++g) {
        if (!ps.best_gt || s.scores[p][g].fscore > ps.fscore) {
          ps.best_gt = g;
          ps.fscore = s.scores[p][g].fscore;
          ps.reversed = s.scores[p][g].reversed;
        }
      }
      entry.paths.push_back(ps);
    }
    report.per_object.emplace(id, std::move(entry));
  }
  report.pcd = pcd_count > 0 ? pcd_sum / static_cast<double>(pcd_count) : 0.0;
  return report;
}

}  // namespace foldpath
