#include "foldpath/synthetic.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace foldpath {

ObjectRecord gen_raster_object(const SyntheticConfig& c) {
  if (c.strokes < 1) throw std::domain_error("synthetic: strokes must be >= 1");
  if (c.waypoints_per_stroke < 2) throw std::domain_error("synthetic: waypoints_per_stroke must be >= 2");
  if (!(c.extent.x() > 0.0) || !(c.extent.y() > 0.0)) throw std::domain_error("synthetic: extent must be positive");
  const double normal_len = c.normal.norm();
  if (!(normal_len > 0.0)) throw std::domain_error("synthetic: zero face normal");

  const Vec3 n = c.normal / normal_len;
  const Vec3 helper = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 u = (helper - helper.dot(n) * n).normalized();
  const Vec3 w = n.cross(u);

  std::mt19937_64 rng(c.seed);
  std::normal_distribution<double> jitter(0.0, c.jitter_sigma > 0.0 ? c.jitter_sigma : 1.0);

  const double spacing = c.spacing > 0.0 ? c.spacing : c.extent.y() / static_cast<double>(c.strokes);
  const double centre = 0.5 * static_cast<double>(c.strokes - 1);
  const std::size_t last = c.waypoints_per_stroke - 1;

  std::vector<Path> paths;
  for (std::size_t k = 0; k < c.strokes; ++k) {
    const double across = (static_cast<double>(k) - centre) * spacing;
    Path stroke;
    for (std::size_t i = 0; i <= last; ++i) {
      const double frac = static_cast<double>(i) / static_cast<double>(last);
      const double along = (k % 2 == 0 ? frac - 0.5 : 0.5 - frac) * c.extent.x();
      const double arc = c.bend * std::sin(std::numbers::pi * frac);
      Pose6D pose;
      pose.position = along * u + (across + arc) * w;
      if (c.jitter_sigma > 0.0) pose.position += Vec3(jitter(rng), jitter(rng), jitter(rng));
      pose.orientation = n;
      stroke.poses.push_back(pose);
    }
    paths.push_back(std::move(stroke));
  }

  std::uniform_real_distribution<double> unit(-0.5, 0.5);
  std::vector<Vec3> cloud;
  cloud.reserve(c.cloud_points);
  for (std::size_t k = 0; k < c.cloud_points; ++k) {
    cloud.push_back(unit(rng) * c.extent.x() * u + unit(rng) * c.extent.y() * w);
  }
  if (cloud.empty()) {
    // The scene transform still needs a reference frame.
    for (double su : {-0.5, 0.5}) {
      for (double sw : {-0.5, 0.5}) cloud.push_back(su * c.extent.x() * u + sw * c.extent.y() * w);
    }
  }

  NormalizedScene scene = normalize_scene(cloud, paths);
  ObjectRecord rec;
  rec.id = c.id;
  if (c.cloud_points > 0) rec.point_cloud = std::move(scene.cloud);
  rec.gt_paths = std::move(scene.paths);
  return rec;
}

Dataset gen_raster_dataset(const SyntheticConfig& base, std::size_t objects) {
  Dataset out;
  std::mt19937_64 rng(base.seed);
  std::uniform_real_distribution<double> scale(0.8, 1.2);
  std::uniform_real_distribution<double> tilt(0.0, std::numbers::pi / 6.0);
  std::uniform_real_distribution<double> heading(0.0, 2.0 * std::numbers::pi);
  for (std::size_t k = 0; k < objects; ++k) {
    SyntheticConfig c = base;
    c.id = "object_" + std::to_string(k);
    c.seed = rng();
    c.extent = Eigen::Vector2d(base.extent.x() * scale(rng), base.extent.y() * scale(rng));
    const double a = tilt(rng);
    const double h = heading(rng);
    const Vec3 axis(std::cos(h), std::sin(h), 0.0);
    c.normal = Eigen::AngleAxisd(a, axis) * base.normal.normalized();
    out.push_back(gen_raster_object(c));
  }
  return out;
}

}  // namespace foldpath
