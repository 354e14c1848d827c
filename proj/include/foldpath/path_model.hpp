#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace foldpath {

using Vec3 = Eigen::Vector3d;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// End-effector pose: a position in normalized object space and a unit
/// orientation vector (the nozzle direction, two rotational DoF).
struct Pose6D {
  Vec3 position = Vec3::Zero();
  Vec3 orientation = Vec3::UnitZ();

  bool operator==(const Pose6D&) const = default;
};

/// Ordered pose sequence; index order is execution order.
struct Path {
  std::vector<Pose6D> poses;

  std::size_t size() const { return poses.size(); }
  bool operator==(const Path&) const = default;
};

struct PredictedPath {
  Path path;
  double confidence = 0.0;

  bool operator==(const PredictedPath&) const = default;
};

enum class SamplingStrategy { equispaced, noisy_equispaced, uniform };

std::string_view to_string(SamplingStrategy s);
SamplingStrategy sampling_strategy_from_string(std::string_view name);

struct ParamSamplingConfig {
  SamplingStrategy strategy = SamplingStrategy::equispaced;
  std::size_t count = 64;
  // Gaussian sigma for noisy-equispaced; defaults to half the sample gap (0.5 / count).
  std::optional<double> noise_sigma;
  std::uint64_t seed = 0;
};

/// How the scalar s in [-1, 1] maps onto a polyline.
enum class InterpolationMode {
  index,       // fractional waypoint index
  arc_length,  // fraction of cumulative length
};

Pose6D interp_at(const Path& path, double s, InterpolationMode mode = InterpolationMode::index);

Path resample(const Path& path, std::span<const double> params,
              InterpolationMode mode = InterpolationMode::index);

/// Sorted path parameters in [-1, 1]. Equispaced follows s_t = -1 + t * 2 / T
/// for t = 1..T, so the first waypoint itself is never drawn.
std::vector<double> sample_params(const ParamSamplingConfig& config);

Path reverse(const Path& path);

/// Centroid shift followed by a uniform scale, applied to positions only.
struct SceneTransform {
  Vec3 centroid = Vec3::Zero();
  double scale = 1.0;

  Vec3 apply(const Vec3& p) const { return (p - centroid) / scale; }
  Vec3 invert(const Vec3& p) const { return p * scale + centroid; }
  Path apply(const Path& path) const;
  Path invert(const Path& path) const;
};

struct NormalizedScene {
  std::vector<Vec3> cloud;
  std::vector<Path> paths;
  SceneTransform transform;
};

/// Centers the cloud on its centroid and scales so the farthest point has
/// unit norm. Paths receive the same transform.
NormalizedScene normalize_scene(std::span<const Vec3> cloud, std::span<const Path> paths);

/// Throws std::domain_error if a pose has a non-finite position or a
/// non-unit orientation (tolerance 1e-6).
void check_pose(const Pose6D& pose);

std::vector<Vec3> positions(std::span<const Pose6D> poses);

}  // namespace foldpath
