#pragma once

#include "foldpath/path_model.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace foldpath {

enum class Activation { relu, siren, finer };
enum class Conditioning { modulation, concat };

std::string_view to_string(Activation a);
std::string_view to_string(Conditioning c);
Activation activation_from_string(std::string_view name);
Conditioning conditioning_from_string(std::string_view name);

struct HeadConfig {
  std::size_t layers = 4;
  std::size_t hidden = 512;
  std::size_t codeword = 384;
  std::size_t conf_hidden = 384;
  Activation activation = Activation::finer;
  Conditioning conditioning = Conditioning::modulation;
  double omega0 = 30.0;
  double finer_bias_bound = 1.0;
  bool use_bias = true;
  std::uint64_t seed = 0;

  bool operator==(const HeadConfig&) const = default;
};

/// Throws std::domain_error on an unusable configuration.
void validate(const HeadConfig& config);

struct Dense {
  Matrix weight;
  Vector bias;

  bool operator==(const Dense& o) const { return weight == o.weight && bias == o.bias; }
};

/// Learnable parameters of one path head.
///
/// blocks[l] maps x^l to the pre-activation of block l: 1 -> H for l = 0 and
/// H -> H after, each widened by C inputs under concat conditioning.
/// modulator[l] produces h^l from the codeword (C -> H, then H + C -> H) and
/// is empty under concat conditioning. `out` maps x^L to the raw 6-vector.
/// The confidence branch is C -> conf_hidden -> 1 followed by a sigmoid.
struct HeadParams {
  HeadConfig config;
  std::vector<Dense> blocks;
  Dense out;
  std::vector<Dense> modulator;
  Dense conf_hidden;
  Dense conf_out;

  bool operator==(const HeadParams&) const = default;
};

/// Flat views over every tensor, always in the same order. Shared by the
/// optimizer, serialization and finite-difference checks.
std::vector<std::span<double>> tensors(HeadParams& params);
std::vector<std::span<const double>> tensors(const HeadParams& params);

/// Same shapes as `params`, all zero.
HeadParams zeros_like(const HeadParams& params);

/// Closed-form parameter count for a configuration.
std::size_t parameter_count(const HeadConfig& config);
std::size_t parameter_count(const HeadParams& params);

HeadParams init_head(const HeadConfig& config);

struct ActivationValue {
  double value = 0.0;
  double derivative = 0.0;
};

ActivationValue activation(double z, Activation kind, double omega0);

/// h^0 .. h^{L-1}; the modulator is always ReLU.
std::vector<Vector> modulator_forward(const HeadParams& params, const Vector& codeword);

using RawPose = Eigen::Matrix<double, 6, 1>;

struct HeadOutput {
  RawPose raw = RawPose::Zero();

  /// Position plus unit orientation. Throws if the orientation is zero.
  Pose6D pose() const;
};

Pose6D to_pose(const RawPose& raw);

HeadOutput head_forward(const HeadParams& params, const Vector& codeword, double x);

/// Batched forward; row t of the result is the raw output at xs[t].
Matrix head_forward_batch(const HeadParams& params, const Vector& codeword, std::span<const double> xs);

double confidence_logit(const HeadParams& params, const Vector& codeword);
double confidence_forward(const HeadParams& params, const Vector& codeword);

struct Gradients {
  HeadParams head;
  Vector codeword;
};

Gradients zero_gradients(const HeadParams& params);

/// Reverse-mode gradients of sum_t <upstream.row(t), raw(xs[t])>, accumulated
/// into `acc`. `acc.codeword` receives d/d(codeword).
void head_backward(const HeadParams& params, const Vector& codeword, std::span<const double> xs,
                   const Matrix& upstream, Gradients& acc);

Gradients head_backward(const HeadParams& params, const Vector& codeword, std::span<const double> xs,
                        const Matrix& upstream);

/// Accumulates d_logit * d(confidence logit)/d(theta) into `acc`.
void confidence_backward(const HeadParams& params, const Vector& codeword, double d_logit, Gradients& acc);

}  // namespace foldpath
