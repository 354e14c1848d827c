#pragma once

#include "foldpath/path_model.hpp"

#include <string>
#include <vector>

namespace foldpath {

/// One object: optional point cloud, ground-truth paths and, for prediction
/// files, scored predicted paths.
struct ObjectRecord {
  std::string id;
  std::vector<Vec3> point_cloud;
  std::vector<Path> gt_paths;
  std::vector<PredictedPath> predictions;

  bool operator==(const ObjectRecord&) const = default;
};

using Dataset = std::vector<ObjectRecord>;

}  // namespace foldpath
