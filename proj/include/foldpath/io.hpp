#pragma once

#include "foldpath/dataset.hpp"
#include "foldpath/metrics.hpp"
#include "foldpath/neural_field.hpp"
#include "foldpath/trainer.hpp"

#include "json.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace foldpath {

using Json = nlohmann::json;

/// Malformed document (not valid JSON, or the wrong document kind).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Well-formed document whose content breaks a type invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Datasets and prediction files share one layout:
//
//   {"format": "foldpath-dataset", "version": 1,
//    "objects": [{"id": "...",
//                 "point_cloud": [[x, y, z], ...],
//                 "paths": [[[x, y, z, vx, vy, vz], ...], ...],
//                 "predictions": [{"confidence": c, "poses": [[...], ...]}]}]}
//
// point_cloud, paths and predictions are optional on load.
Json dataset_to_json(const Dataset& dataset);
Dataset dataset_from_json(const Json& doc);
Dataset load_dataset(const std::filesystem::path& file);
void save_dataset(const std::filesystem::path& file, const Dataset& dataset);

/// Pairs ground truth with predictions by object id. Objects that appear only
/// in the prediction file are rejected.
EvalSet make_eval_set(const Dataset& gt, const Dataset& pred);

Json report_to_json(const EvalReport& report);
void save_report(const std::filesystem::path& file, const EvalReport& report);

Json head_config_to_json(const HeadConfig& config);
HeadConfig head_config_from_json(const Json& doc);
Json train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const Json& doc);

/// Parameter document: {"config": {...}, "blocks": [...], "out": {...},
/// "modulator": [...], "conf_hidden": {...}, "conf_out": {...}} where every
/// dense layer is {"weight": [[...]], "bias": [...]} in row-major order.
Json head_to_json(const HeadParams& params);
HeadParams head_from_json(const Json& doc);

struct FitConfig {
  HeadConfig head;
  TrainConfig train;
};

/// {"head": {...}, "train": {...}}; omitted fields keep their defaults.
FitConfig fit_config_from_json(const Json& doc);
FitConfig load_fit_config(const std::filesystem::path& file);

struct Checkpoint {
  TrainConfig train;
  TrainState state;

  bool operator==(const Checkpoint&) const = default;
};

Json checkpoint_to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const Json& doc);
Checkpoint load_checkpoint(const std::filesystem::path& file);
void save_checkpoint(const std::filesystem::path& file, const Checkpoint& checkpoint);

/// A standalone pose list: a JSON array of rows with 3 (position only) or 6
/// numbers, or an object {"poses": [...]}.
std::vector<Pose6D> load_pose_list(const std::filesystem::path& file);

Json read_json(const std::filesystem::path& file);
/// Compact, deterministic output followed by a newline.
void write_json(const std::filesystem::path& file, const Json& doc, int indent = -1);

}  // namespace foldpath
