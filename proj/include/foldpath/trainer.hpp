#pragma once

#include "foldpath/dataset.hpp"
#include "foldpath/matching.hpp"
#include "foldpath/neural_field.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace foldpath {

/// Raised when optimization produces non-finite values.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  std::size_t slots = 40;    // N prediction slots per object
  std::size_t samples = 64;  // T parameters drawn per step
  std::size_t epochs = 200;
  std::size_t max_steps = 0;  // 0: no cap beyond epochs * objects
  double step_size = 3e-4;
  bool cosine_decay = false;
  double final_step_size = 1e-8;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  SamplingStrategy sampling = SamplingStrategy::uniform;
  std::optional<double> noise_sigma;
  std::uint64_t seed = 0;
  double gamma = 2.0;
  double codeword_sigma = 0.01;

  bool operator==(const TrainConfig&) const = default;
};

struct LossRecord {
  double total = 0.0;
  double points = 0.0;
  double conf = 0.0;

  bool operator==(const LossRecord&) const = default;
};

/// Free codewords for one object (one row per slot) and their Adam moments.
struct ObjectCodes {
  std::string id;
  Matrix codewords;
  Matrix m;
  Matrix v;
  std::uint64_t steps = 0;

  bool operator==(const ObjectCodes&) const = default;
};

struct TrainState {
  HeadParams head;
  HeadParams head_m;
  HeadParams head_v;
  std::vector<ObjectCodes> objects;
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  std::uint64_t total_steps = 0;  // horizon of the step-size schedule
  std::vector<LossRecord> history;

  bool operator==(const TrainState&) const = default;
  const ObjectCodes& codes(const std::string& id) const;
};

struct AdamSettings {
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam update of one tensor; `step` counts from 1.
void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 std::uint64_t step, const AdamSettings& settings);

double scheduled_step_size(const TrainConfig& config, std::uint64_t step, std::uint64_t total_steps);

TrainState init_state(const HeadConfig& head, const TrainConfig& config, std::span<const ObjectRecord> dataset);

/// Applies one update to the shared head and to one object's codewords.
/// `codeword_grads` has one row per slot.
void adam_step(TrainState& state, const Gradients& head_grads, const Matrix& codeword_grads,
               std::size_t object_index, const TrainConfig& config);

struct StepResult {
  LossBreakdown loss;
  Gradients head_grads;
  Matrix codeword_grads;
};

/// Loss and gradients for one object at the given parameters, without
/// updating anything.
StepResult object_gradients(const TrainState& state, std::size_t object_index, const ObjectRecord& object,
                            std::span<const double> params, const TrainConfig& config);

/// One pass over the dataset in a seed-determined order; returns the mean
/// object loss. Stops early once `config.max_steps` is reached.
double train_epoch(TrainState& state, std::span<const ObjectRecord> dataset, const TrainConfig& config);

using EpochCallback = std::function<void(const TrainState&, double epoch_loss)>;

TrainState fit(std::span<const ObjectRecord> dataset, const HeadConfig& head, const TrainConfig& config,
               const EpochCallback& on_epoch = {});

/// Continues training an existing state up to the configured epochs/steps.
void resume(TrainState& state, std::span<const ObjectRecord> dataset, const TrainConfig& config,
            const EpochCallback& on_epoch = {});

/// All slots evaluated at the equispaced parameters, filtered by confidence
/// and sorted by descending confidence.
std::vector<PredictedPath> predict(const TrainState& state, const std::string& object_id, std::size_t samples,
                                   double conf_threshold = 0.5);

}  // namespace foldpath
