#include "foldpath/path_model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace foldpath {

std::string_view to_string(SamplingStrategy s) {
  switch (s) {
    case SamplingStrategy::equispaced:
      return "equispaced";
    case SamplingStrategy::noisy_equispaced:
      return "noisy-equispaced";
    case SamplingStrategy::uniform:
      return "uniform";
  }
  return "unknown";
}

SamplingStrategy sampling_strategy_from_string(std::string_view name) {
  if (name == "equispaced") return SamplingStrategy::equispaced;
  if (name == "noisy-equispaced" || name == "noisy_equispaced") return SamplingStrategy::noisy_equispaced;
  if (name == "uniform") return SamplingStrategy::uniform;
  throw std::domain_error("unknown sampling strategy '" + std::string(name) + "'");
}

namespace {

Pose6D blend(const Pose6D& a, const Pose6D& b, double frac) {
  if (frac == 0.0) return a;
  if (frac == 1.0) return b;
  Pose6D out;
  out.position = (1.0 - frac) * a.position + frac * b.position;
  Vec3 dir = (1.0 - frac) * a.orientation + frac * b.orientation;
  const double norm = dir.norm();
  if (!(norm > 0.0)) {
    throw std::domain_error("interp_at: antiparallel orientations cancel at the interpolation point");
  }
  out.orientation = dir / norm;
  return out;
}

Pose6D interp_index(const Path& path, double s) {
  const std::size_t last = path.size() - 1;
  const double u = (s + 1.0) / 2.0 * static_cast<double>(last);
  const auto lo = std::min(static_cast<std::size_t>(std::floor(u)), last);
  const std::size_t hi = std::min(lo + 1, last);
  return blend(path.poses[lo], path.poses[hi], u - static_cast<double>(lo));
}

Pose6D interp_arc(const Path& path, double s) {
  std::vector<double> cumulative(path.size(), 0.0);
  for (std::size_t i = 1; i < path.size(); ++i) {
    cumulative[i] = cumulative[i - 1] + (path.poses[i].position - path.poses[i - 1].position).norm();
  }
  const double total = cumulative.back();
  if (total <= 0.0) return interp_index(path, s);
  if (s == -1.0) return path.poses.front();
  if (s == 1.0) return path.poses.back();

  const double target = (s + 1.0) / 2.0 * total;
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
  std::size_t hi = std::min(static_cast<std::size_t>(it - cumulative.begin()), path.size() - 1);
  std::size_t lo = hi - 1;
  const double seg = cumulative[hi] - cumulative[lo];
  const double frac = seg > 0.0 ? (target - cumulative[lo]) / seg : 0.0;
  return blend(path.poses[lo], path.poses[hi], std::clamp(frac, 0.0, 1.0));
}

}  // namespace

Pose6D interp_at(const Path& path, double s, InterpolationMode mode) {
  if (path.size() < 2) {
    throw std::domain_error("interp_at: path needs at least 2 poses, got " + std::to_string(path.size()));
  }
  if (!(s >= -1.0 && s <= 1.0)) {
    throw std::domain_error("interp_at: parameter " + std::to_string(s) + " outside [-1, 1]");
  }
  return mode == InterpolationMode::index ? interp_index(path, s) : interp_arc(path, s);
}

Path resample(const Path& path, std::span<const double> params, InterpolationMode mode) {
  if (params.empty()) throw std::domain_error("resample: empty parameter list");
  Path out;
  out.poses.reserve(params.size());
  for (double s : params) out.poses.push_back(interp_at(path, s, mode));
  return out;
}

std::vector<double> sample_params(const ParamSamplingConfig& config) {
  const std::size_t count = config.count;
  if (count == 0) throw std::domain_error("sample_params: count must be positive");

  std::vector<double> out(count);
  const double step = 2.0 / static_cast<double>(count);
  for (std::size_t t = 1; t <= count; ++t) out[t - 1] = -1.0 + static_cast<double>(t) * step;
  if (config.strategy == SamplingStrategy::equispaced) return out;

  std::mt19937_64 rng(config.seed);
  if (config.strategy == SamplingStrategy::noisy_equispaced) {
    const double sigma = config.noise_sigma.value_or(0.5 / static_cast<double>(count));
    if (sigma < 0.0) throw std::domain_error("sample_params: negative noise sigma");
    if (sigma > 0.0) {
      std::normal_distribution<double> noise(0.0, sigma);
      for (double& s : out) s = std::clamp(s + noise(rng), -1.0, 1.0);
    }
  } else {
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    for (double& s : out) s = uniform(rng);
  }
  std::sort(out.begin(), out.end());
  return out;
}

Path reverse(const Path& path) {
  Path out = path;
  std::reverse(out.poses.begin(), out.poses.end());
  return out;
}

Path SceneTransform::apply(const Path& path) const {
  Path out = path;
  for (auto& pose : out.poses) pose.position = apply(pose.position);
  return out;
}

Path SceneTransform::invert(const Path& path) const {
  Path out = path;
  for (auto& pose : out.poses) pose.position = invert(pose.position);
  return out;
}

NormalizedScene normalize_scene(std::span<const Vec3> cloud, std::span<const Path> paths) {
  if (cloud.empty()) throw std::domain_error("normalize_scene: empty point cloud");

  Vec3 centroid = Vec3::Zero();
  for (const auto& p : cloud) centroid += p;
  centroid /= static_cast<double>(cloud.size());

  double max_norm = 0.0;
  for (const auto& p : cloud) max_norm = std::max(max_norm, (p - centroid).norm());
  if (!(max_norm > 0.0) || !std::isfinite(max_norm)) {
    throw std::domain_error("normalize_scene: degenerate point cloud (all points identical)");
  }

  NormalizedScene scene;
  scene.transform = SceneTransform{centroid, max_norm};
  scene.cloud.reserve(cloud.size());
  for (const auto& p : cloud) scene.cloud.push_back(scene.transform.apply(p));
  scene.paths.reserve(paths.size());
  for (const auto& path : paths) scene.paths.push_back(scene.transform.apply(path));
  return scene;
}

void check_pose(const Pose6D& pose) {
  if (!pose.position.allFinite()) throw std::domain_error("pose position is not finite");
  const double norm = pose.orientation.norm();
  if (!std::isfinite(norm) || std::abs(norm - 1.0) > 1e-6) {
    throw std::domain_error("pose orientation is not unit length (norm " + std::to_string(norm) + ")");
  }
}

std::vector<Vec3> positions(std::span<const Pose6D> poses) {
  std::vector<Vec3> out;
  out.reserve(poses.size());
  for (const auto& pose : poses) out.push_back(pose.position);
  return out;
}

}  // namespace foldpath
