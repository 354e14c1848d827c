#pragma once

#include "foldpath/dataset.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <string>

namespace foldpath {

/// Serpentine raster strokes over one planar face.
struct SyntheticConfig {
  std::size_t strokes = 4;
  std::size_t waypoints_per_stroke = 20;
  Eigen::Vector2d extent{1.0, 0.6};  // face size along the stroke and across strokes
  double spacing = 0.0;              // distance between strokes; 0 spreads them over the face
  Vec3 normal = Vec3::UnitZ();
  double jitter_sigma = 0.0;  // Gaussian positional noise on waypoints
  double bend = 0.0;          // in-plane arc amplitude of each stroke (0: straight)
  std::size_t cloud_points = 1024;
  std::uint64_t seed = 0;
  std::string id = "object_0";
};

/// Generates one object, normalized to the unit ball of its point cloud.
ObjectRecord gen_raster_object(const SyntheticConfig& config);

/// `objects` records derived from `base`: each gets its own seed, a tilted
/// face normal and a perturbed extent. Ids are "object_<k>".
Dataset gen_raster_dataset(const SyntheticConfig& base, std::size_t objects);

}  // namespace foldpath
