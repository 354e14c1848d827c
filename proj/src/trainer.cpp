#include "foldpath/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace foldpath {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1) + 0xbf58476d1ce4e5b9ULL * counter;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

enum Stream : std::uint64_t { kCodewords = 1, kShuffle = 2, kParams = 3 };

std::size_t find_object(const TrainState& state, const std::string& id) {
  for (std::size_t i = 0; i < state.objects.size(); ++i) {
    if (state.objects[i].id == id) return i;
  }
  throw std::domain_error("unknown object '" + id + "'");
}

void check_dataset(std::span<const ObjectRecord> dataset, const TrainConfig& config) {
  if (dataset.empty()) throw std::domain_error("training dataset is empty");
  std::set<std::string> ids;
  for (const auto& obj : dataset) {
    if (!ids.insert(obj.id).second) throw std::domain_error("duplicate object id '" + obj.id + "'");
    if (obj.gt_paths.size() > config.slots) {
      throw std::domain_error("object '" + obj.id + "' has " + std::to_string(obj.gt_paths.size()) +
                              " paths but only " + std::to_string(config.slots) + " slots");
    }
  }
  if (config.samples == 0) throw std::domain_error("train config: samples must be positive");
  if (!(config.step_size > 0.0)) throw std::domain_error("train config: step_size must be positive");
}

std::uint64_t planned_steps(std::span<const ObjectRecord> dataset, const TrainConfig& config) {
  const std::uint64_t by_epochs = static_cast<std::uint64_t>(config.epochs) * dataset.size();
  return config.max_steps > 0 ? std::min<std::uint64_t>(by_epochs, config.max_steps) : by_epochs;
}

void require_finite(std::span<const double> values, const char* what) {
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!std::isfinite(values[k])) {
      std::ostringstream msg;
      msg << "non-finite gradient in " << what << " at element " << k;
      throw TrainingError(msg.str());
    }
  }
}

}  // namespace

const ObjectCodes& TrainState::codes(const std::string& id) const { return objects[find_object(*this, id)]; }

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 std::uint64_t step, const AdamSettings& s) {
  if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size()) {
    throw std::domain_error("adam_update: shape mismatch");
  }
  const double t = static_cast<double>(step);
  const double c1 = 1.0 - std::pow(s.beta1, t);
  const double c2 = 1.0 - std::pow(s.beta2, t);
  for (std::size_t k = 0; k < param.size(); ++k) {
    m[k] = s.beta1 * m[k] + (1.0 - s.beta1) * grad[k];
    v[k] = s.beta2 * v[k] + (1.0 - s.beta2) * grad[k] * grad[k];
    param[k] -= s.step_size * (m[k] / c1) / (std::sqrt(v[k] / c2) + s.eps);
  }
}

double scheduled_step_size(const TrainConfig& config, std::uint64_t step, std::uint64_t total_steps) {
  if (!config.cosine_decay || total_steps <= 1) return config.step_size;
  const double progress = std::min(1.0, static_cast<double>(step) / static_cast<double>(total_steps - 1));
  return config.final_step_size +
         0.5 * (config.step_size - config.final_step_size) * (1.0 + std::cos(std::numbers::pi * progress));
}

TrainState init_state(const HeadConfig& head, const TrainConfig& config, std::span<const ObjectRecord> dataset) {
  check_dataset(dataset, config);
  TrainState state;
  state.head = init_head(head);
  state.head_m = zeros_like(state.head);
  state.head_v = zeros_like(state.head);
  state.total_steps = planned_steps(dataset, config);

  const auto width = static_cast<Eigen::Index>(head.codeword);
  const auto slots = static_cast<Eigen::Index>(config.slots);
  for (std::size_t o = 0; o < dataset.size(); ++o) {
    ObjectCodes codes;
    codes.id = dataset[o].id;
    codes.codewords.resize(slots, width);
    std::mt19937_64 rng(mix_seed(config.seed, kCodewords, o));
    std::normal_distribution<double> normal(0.0, config.codeword_sigma);
    for (Eigen::Index k = 0; k < codes.codewords.size(); ++k) codes.codewords.data()[k] = normal(rng);
    codes.m = Matrix::Zero(slots, width);
    codes.v = Matrix::Zero(slots, width);
    state.objects.push_back(std::move(codes));
  }
  return state;
}

void adam_step(TrainState& state, const Gradients& head_grads, const Matrix& codeword_grads, std::size_t object_index,
               const TrainConfig& config) {
  if (object_index >= state.objects.size()) throw std::domain_error("adam_step: object index out of range");
  auto& codes = state.objects[object_index];
  if (codeword_grads.rows() != codes.codewords.rows() || codeword_grads.cols() != codes.codewords.cols()) {
    throw std::domain_error("adam_step: codeword gradient shape mismatch");
  }

  auto params = tensors(state.head);
  const auto grads = tensors(head_grads.head);
  auto m = tensors(state.head_m);
  auto v = tensors(state.head_v);
  if (grads.size() != params.size()) throw std::domain_error("adam_step: gradient layout mismatch");
  for (const auto& g : grads) require_finite(g, "head parameters");
  require_finite({codeword_grads.data(), static_cast<std::size_t>(codeword_grads.size())}, "codewords");

  AdamSettings settings{scheduled_step_size(config, state.step, state.total_steps), config.adam_beta1,
                        config.adam_beta2, config.adam_eps};
  ++state.step;
  for (std::size_t k = 0; k < params.size(); ++k) adam_update(params[k], grads[k], m[k], v[k], state.step, settings);

  ++codes.steps;
  const auto n = static_cast<std::size_t>(codes.codewords.size());
  adam_update({codes.codewords.data(), n}, {codeword_grads.data(), n}, {codes.m.data(), n}, {codes.v.data(), n},
              codes.steps, settings);
}

StepResult object_gradients(const TrainState& state, std::size_t object_index, const ObjectRecord& object,
                            std::span<const double> params, const TrainConfig& config) {
  const auto& codes = state.objects.at(object_index);
  const auto& head = state.head;
  const std::size_t slots = static_cast<std::size_t>(codes.codewords.rows());

  const PaddedTargets targets = pad_targets(object.gt_paths, slots, params);
  std::vector<Vector> words;
  std::vector<Matrix> raw;
  std::vector<double> conf;
  words.reserve(slots);
  raw.reserve(slots);
  conf.reserve(slots);
  for (std::size_t j = 0; j < slots; ++j) {
    words.push_back(codes.codewords.row(static_cast<Eigen::Index>(j)).transpose());
    raw.push_back(head_forward_batch(head, words.back(), params));
    conf.push_back(confidence_forward(head, words.back()));
  }

  const ObjectiveResult obj = objective(targets, raw, conf, config.gamma);

  StepResult out;
  out.loss = obj.loss;
  out.head_grads = zero_gradients(head);
  out.codeword_grads = Matrix::Zero(codes.codewords.rows(), codes.codewords.cols());
  for (std::size_t j = 0; j < slots; ++j) {
    out.head_grads.codeword.setZero();
    if (!obj.d_raw[j].isZero(0.0)) head_backward(head, words[j], params, obj.d_raw[j], out.head_grads);
    const double d_logit = obj.d_conf[j] * conf[j] * (1.0 - conf[j]);
    confidence_backward(head, words[j], d_logit, out.head_grads);
    out.codeword_grads.row(static_cast<Eigen::Index>(j)) = out.head_grads.codeword.transpose();
  }
  out.head_grads.codeword.setZero();
  return out;
}

double train_epoch(TrainState& state, std::span<const ObjectRecord> dataset, const TrainConfig& config) {
  check_dataset(dataset, config);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(mix_seed(config.seed, kShuffle, state.epoch));
  std::shuffle(order.begin(), order.end(), rng);

  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t o : order) {
    if (config.max_steps > 0 && state.step >= config.max_steps) break;
    const std::size_t index = find_object(state, dataset[o].id);
    ParamSamplingConfig sampling{config.sampling, config.samples, config.noise_sigma,
                                 mix_seed(config.seed, kParams, state.step)};
    const auto params = sample_params(sampling);
    StepResult r = object_gradients(state, index, dataset[o], params, config);
    if (!std::isfinite(r.loss.total)) {
      throw TrainingError("non-finite loss on object '" + dataset[o].id + "' at step " + std::to_string(state.step));
    }
    adam_step(state, r.head_grads, r.codeword_grads, index, config);
    state.history.push_back({r.loss.total, r.loss.points_loss, r.loss.conf_loss});
    sum += r.loss.total;
    ++count;
  }
  ++state.epoch;
  return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

void resume(TrainState& state, std::span<const ObjectRecord> dataset, const TrainConfig& config,
            const EpochCallback& on_epoch) {
  check_dataset(dataset, config);
  for (const auto& obj : dataset) find_object(state, obj.id);
  state.total_steps = planned_steps(dataset, config);
  while (state.epoch < config.epochs && (config.max_steps == 0 || state.step < config.max_steps)) {
    const double loss = train_epoch(state, dataset, config);
    if (on_epoch) on_epoch(state, loss);
  }
}

TrainState fit(std::span<const ObjectRecord> dataset, const HeadConfig& head, const TrainConfig& config,
               const EpochCallback& on_epoch) {
  TrainState state = init_state(head, config, dataset);
  resume(state, dataset, config, on_epoch);
  return state;
}

std::vector<PredictedPath> predict(const TrainState& state, const std::string& object_id, std::size_t samples,
                                   double conf_threshold) {
  const auto& codes = state.codes(object_id);
  const auto params = sample_params({SamplingStrategy::equispaced, samples, std::nullopt, 0});

  std::vector<PredictedPath> out;
  for (Eigen::Index j = 0; j < codes.codewords.rows(); ++j) {
    const Vector word = codes.codewords.row(j).transpose();
    const double conf = confidence_forward(state.head, word);
    if (conf < conf_threshold) continue;
    const Matrix raw = head_forward_batch(state.head, word, params);
    PredictedPath pred;
    pred.confidence = conf;
    pred.path.poses.reserve(params.size());
    for (Eigen::Index t = 0; t < raw.rows(); ++t) pred.path.poses.push_back(to_pose(raw.row(t).transpose()));
    out.push_back(std::move(pred));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const PredictedPath& a, const PredictedPath& b) { return a.confidence > b.confidence; });
  return out;
}

}  // namespace foldpath
