#include "foldpath/neural_field.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace foldpath {

using Batch = Eigen::MatrixXd;

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu:
      return "relu";
    case Activation::siren:
      return "siren";
    case Activation::finer:
      return "finer";
  }
  return "unknown";
}

std::string_view to_string(Conditioning c) {
  return c == Conditioning::modulation ? "modulation" : "concat";
}

Activation activation_from_string(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "siren") return Activation::siren;
  if (name == "finer") return Activation::finer;
  throw std::domain_error("unknown activation '" + std::string(name) + "'");
}

Conditioning conditioning_from_string(std::string_view name) {
  if (name == "modulation") return Conditioning::modulation;
  if (name == "concat") return Conditioning::concat;
  throw std::domain_error("unknown conditioning '" + std::string(name) + "'");
}

void validate(const HeadConfig& c) {
  if (c.layers < 1) throw std::domain_error("head config: layers must be >= 1");
  if (c.hidden < 1) throw std::domain_error("head config: hidden width must be >= 1");
  if (c.conf_hidden < 1) throw std::domain_error("head config: confidence width must be >= 1");
  if (c.codeword < 1 && c.conditioning == Conditioning::modulation) {
    throw std::domain_error("head config: modulation needs a codeword width >= 1");
  }
  if (!(c.omega0 > 0.0) || !std::isfinite(c.omega0)) throw std::domain_error("head config: omega0 must be positive");
  if (!(c.finer_bias_bound >= 0.0)) throw std::domain_error("head config: finer bias bound must be >= 0");
}

namespace {

Eigen::Index idx(std::size_t n) { return static_cast<Eigen::Index>(n); }

std::size_t block_input(const HeadConfig& c, std::size_t l) {
  const std::size_t base = l == 0 ? 1 : c.hidden;
  return c.conditioning == Conditioning::concat ? base + c.codeword : base;
}

std::size_t modulator_input(const HeadConfig& c, std::size_t l) {
  return l == 0 ? c.codeword : c.hidden + c.codeword;
}

Dense make_dense(std::size_t out, std::size_t in) {
  return Dense{Matrix::Zero(idx(out), idx(in)), Vector::Zero(idx(out))};
}

template <typename Visit>
void visit_dense(HeadParams& p, Visit&& visit) {
  for (auto& b : p.blocks) visit(b);
  visit(p.out);
  for (auto& m : p.modulator) visit(m);
  visit(p.conf_hidden);
  visit(p.conf_out);
}

}  // namespace

std::vector<std::span<double>> tensors(HeadParams& params) {
  std::vector<std::span<double>> out;
  visit_dense(params, [&](Dense& d) {
    out.emplace_back(d.weight.data(), static_cast<std::size_t>(d.weight.size()));
    out.emplace_back(d.bias.data(), static_cast<std::size_t>(d.bias.size()));
  });
  return out;
}

std::vector<std::span<const double>> tensors(const HeadParams& params) {
  std::vector<std::span<const double>> out;
  for (auto s : tensors(const_cast<HeadParams&>(params))) out.emplace_back(s.data(), s.size());
  return out;
}

HeadParams zeros_like(const HeadParams& params) {
  HeadParams z = params;
  visit_dense(z, [](Dense& d) {
    d.weight.setZero();
    d.bias.setZero();
  });
  return z;
}

std::size_t parameter_count(const HeadConfig& c) {
  std::size_t total = 0;
  for (std::size_t l = 0; l < c.layers; ++l) total += c.hidden * block_input(c, l) + c.hidden;
  total += 6 * c.hidden + 6;
  if (c.conditioning == Conditioning::modulation) {
    for (std::size_t l = 0; l < c.layers; ++l) total += c.hidden * modulator_input(c, l) + c.hidden;
  }
  total += c.conf_hidden * c.codeword + c.conf_hidden;
  total += c.conf_hidden + 1;
  return total;
}

std::size_t parameter_count(const HeadParams& params) {
  std::size_t total = 0;
  for (auto s : tensors(params)) total += s.size();
  return total;
}

HeadParams init_head(const HeadConfig& config) {
  validate(config);
  const HeadConfig& c = config;
  std::mt19937_64 rng(c.seed);
  auto fill = [&](auto& dst, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index k = 0; k < dst.size(); ++k) dst.data()[k] = bound > 0.0 ? dist(rng) : 0.0;
  };
  const bool sinusoidal = c.activation != Activation::relu;

  HeadParams p;
  p.config = c;
  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::size_t fan_in = block_input(c, l);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Dense d = make_dense(c.hidden, fan_in);
    if (!sinusoidal) {
      fill(d.weight, std::sqrt(6.0 / static_cast<double>(fan_in)));
    } else if (l == 0) {
      fill(d.weight, 1.0 / static_cast<double>(fan_in));
    } else {
      fill(d.weight, std::sqrt(6.0 / static_cast<double>(fan_in)) / c.omega0);
    }
    if (c.use_bias) {
      const bool finer_first = c.activation == Activation::finer && l == 0;
      fill(d.bias, finer_first ? c.finer_bias_bound : inv_sqrt);
    }
    p.blocks.push_back(std::move(d));
  }

  p.out = make_dense(6, c.hidden);
  const double out_bound = sinusoidal ? std::sqrt(6.0 / static_cast<double>(c.hidden)) / c.omega0
                                      : 1.0 / std::sqrt(static_cast<double>(c.hidden));
  fill(p.out.weight, out_bound);

  if (c.conditioning == Conditioning::modulation) {
    for (std::size_t l = 0; l < c.layers; ++l) {
      const std::size_t fan_in = modulator_input(c, l);
      Dense d = make_dense(c.hidden, fan_in);
      fill(d.weight, 1.0 / std::sqrt(static_cast<double>(fan_in)));
      // Unit bias so every block starts out passing its activation through.
      if (c.use_bias) d.bias.setOnes();
      p.modulator.push_back(std::move(d));
    }
  }

  p.conf_hidden = make_dense(c.conf_hidden, c.codeword);
  if (c.codeword > 0) fill(p.conf_hidden.weight, std::sqrt(6.0 / static_cast<double>(c.codeword)));
  p.conf_out = make_dense(1, c.conf_hidden);
  fill(p.conf_out.weight, 1.0 / std::sqrt(static_cast<double>(c.conf_hidden)));
  return p;
}

ActivationValue activation(double z, Activation kind, double omega0) {
  switch (kind) {
    case Activation::relu:
      return {z > 0.0 ? z : 0.0, z > 0.0 ? 1.0 : 0.0};
    case Activation::siren:
      return {std::sin(omega0 * z), omega0 * std::cos(omega0 * z)};
    case Activation::finer: {
      const double a = std::abs(z);
      const double phase = omega0 * (a + 1.0) * z;
      return {std::sin(phase), omega0 * (2.0 * a + 1.0) * std::cos(phase)};
    }
  }
  return {};
}

namespace {

void check_codeword(const HeadParams& params, const Vector& codeword) {
  if (static_cast<std::size_t>(codeword.size()) != params.config.codeword) {
    throw std::domain_error("codeword has " + std::to_string(codeword.size()) + " entries, head expects " +
                            std::to_string(params.config.codeword));
  }
}

struct Trace {
  std::vector<Vector> mod_pre;
  std::vector<Vector> mod;
  std::vector<Batch> inputs;
  std::vector<Batch> pre;
  std::vector<Batch> act;
  Batch last;
  Batch out;
};

Vector relu(const Vector& v) { return v.cwiseMax(0.0); }

void modulator_pass(const HeadParams& p, const Vector& codeword, Trace& tr) {
  const auto& c = p.config;
  Vector input = codeword;
  for (std::size_t l = 0; l < p.modulator.size(); ++l) {
    if (l > 0) {
      input.resize(idx(c.hidden + c.codeword));
      input << tr.mod.back(), codeword;
    }
    Vector g = p.modulator[l].weight * input + p.modulator[l].bias;
    tr.mod.push_back(relu(g));
    tr.mod_pre.push_back(std::move(g));
  }
}

Trace forward_trace(const HeadParams& p, const Vector& codeword, std::span<const double> xs) {
  check_codeword(p, codeword);
  for (double x : xs) {
    if (!(x >= -1.0 && x <= 1.0)) throw std::domain_error("head_forward: input " + std::to_string(x) + " outside [-1, 1]");
  }
  const auto& c = p.config;
  const Eigen::Index batch = idx(xs.size());
  const bool modulated = c.conditioning == Conditioning::modulation;

  Trace tr;
  if (modulated) modulator_pass(p, codeword, tr);

  Batch x(1, batch);
  for (Eigen::Index t = 0; t < batch; ++t) x(0, t) = xs[static_cast<std::size_t>(t)];

  for (std::size_t l = 0; l < c.layers; ++l) {
    Batch input;
    if (modulated) {
      input = std::move(x);
    } else {
      input.resize(x.rows() + idx(c.codeword), batch);
      input.topRows(x.rows()) = x;
      input.bottomRows(idx(c.codeword)) = codeword.replicate(1, batch);
    }
    Batch z = p.blocks[l].weight * input;
    z.colwise() += p.blocks[l].bias;
    Batch a = z.unaryExpr([&](double v) { return activation(v, c.activation, c.omega0).value; });
    x = modulated ? Batch(tr.mod[l].asDiagonal() * a) : a;
    tr.inputs.push_back(std::move(input));
    tr.pre.push_back(std::move(z));
    tr.act.push_back(std::move(a));
  }
  tr.out = p.out.weight * x;
  tr.out.colwise() += p.out.bias;
  tr.last = std::move(x);
  return tr;
}

}  // namespace

std::vector<Vector> modulator_forward(const HeadParams& params, const Vector& codeword) {
  check_codeword(params, codeword);
  if (params.config.conditioning != Conditioning::modulation) {
    throw std::domain_error("modulator_forward: head uses concat conditioning");
  }
  Trace tr;
  modulator_pass(params, codeword, tr);
  return tr.mod;
}

Pose6D to_pose(const RawPose& raw) {
  Pose6D pose;
  pose.position = raw.head<3>();
  const Vec3 dir = raw.tail<3>();
  const double n = dir.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw std::domain_error("head output has a zero orientation");
  pose.orientation = dir / n;
  return pose;
}

Pose6D HeadOutput::pose() const { return to_pose(raw); }

HeadOutput head_forward(const HeadParams& params, const Vector& codeword, double x) {
  const double xs[1] = {x};
  const Trace tr = forward_trace(params, codeword, xs);
  HeadOutput out;
  out.raw = tr.out.col(0);
  return out;
}

Matrix head_forward_batch(const HeadParams& params, const Vector& codeword, std::span<const double> xs) {
  return forward_trace(params, codeword, xs).out.transpose();
}

double confidence_logit(const HeadParams& params, const Vector& codeword) {
  check_codeword(params, codeword);
  const Vector hidden = relu(params.conf_hidden.weight * codeword + params.conf_hidden.bias);
  return (params.conf_out.weight * hidden)(0) + params.conf_out.bias(0);
}

double confidence_forward(const HeadParams& params, const Vector& codeword) {
  return 1.0 / (1.0 + std::exp(-confidence_logit(params, codeword)));
}

Gradients zero_gradients(const HeadParams& params) {
  return Gradients{zeros_like(params), Vector::Zero(idx(params.config.codeword))};
}

void head_backward(const HeadParams& p, const Vector& codeword, std::span<const double> xs, const Matrix& upstream,
                   Gradients& acc) {
  if (upstream.rows() != idx(xs.size()) || upstream.cols() != 6) {
    throw std::domain_error("head_backward: upstream must be " + std::to_string(xs.size()) + "x6");
  }
  if (!upstream.allFinite()) throw std::domain_error("head_backward: non-finite upstream gradient");
  const Trace tr = forward_trace(p, codeword, xs);
  const auto& c = p.config;
  const bool modulated = c.conditioning == Conditioning::modulation;
  const Eigen::Index cw = idx(c.codeword);
  auto& g = acc.head;

  const Batch d_out = upstream.transpose();
  g.out.weight += d_out * tr.last.transpose();
  if (c.use_bias) g.out.bias += d_out.rowwise().sum();
  Batch dx = p.out.weight.transpose() * d_out;

  std::vector<Vector> d_mod(c.layers);
  for (std::size_t l = c.layers; l-- > 0;) {
    Batch dz;
    if (modulated) {
      d_mod[l] = dx.cwiseProduct(tr.act[l]).rowwise().sum();
      dz = tr.mod[l].asDiagonal() * dx;
    } else {
      dz = std::move(dx);
    }
    dz.array() *= tr.pre[l].unaryExpr([&](double v) { return activation(v, c.activation, c.omega0).derivative; }).array();
    g.blocks[l].weight += dz * tr.inputs[l].transpose();
    if (c.use_bias) g.blocks[l].bias += dz.rowwise().sum();
    Batch d_in = p.blocks[l].weight.transpose() * dz;
    if (modulated) {
      dx = std::move(d_in);
    } else {
      acc.codeword += d_in.bottomRows(cw).rowwise().sum();
      dx = d_in.topRows(d_in.rows() - cw);
    }
  }

  if (!modulated) return;
  Vector carry = Vector::Zero(idx(c.hidden));
  for (std::size_t l = c.layers; l-- > 0;) {
    Vector dh = d_mod[l] + carry;
    Vector dg = dh.cwiseProduct((tr.mod_pre[l].array() > 0.0).cast<double>().matrix());
    if (l == 0) {
      g.modulator[0].weight += dg * codeword.transpose();
    } else {
      Vector input(idx(c.hidden) + cw);
      input << tr.mod[l - 1], codeword;
      g.modulator[l].weight += dg * input.transpose();
    }
    if (c.use_bias) g.modulator[l].bias += dg;
    const Vector d_in = p.modulator[l].weight.transpose() * dg;
    if (l == 0) {
      acc.codeword += d_in;
    } else {
      carry = d_in.head(idx(c.hidden));
      acc.codeword += d_in.tail(cw);
    }
  }
}

Gradients head_backward(const HeadParams& params, const Vector& codeword, std::span<const double> xs,
                        const Matrix& upstream) {
  Gradients acc = zero_gradients(params);
  head_backward(params, codeword, xs, upstream, acc);
  return acc;
}

void confidence_backward(const HeadParams& p, const Vector& codeword, double d_logit, Gradients& acc) {
  check_codeword(p, codeword);
  const Vector pre = p.conf_hidden.weight * codeword + p.conf_hidden.bias;
  const Vector hidden = relu(pre);
  acc.head.conf_out.weight += d_logit * hidden.transpose();
  if (p.config.use_bias) acc.head.conf_out.bias(0) += d_logit;
  const Vector d_pre = (d_logit * p.conf_out.weight.transpose()).cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
  acc.head.conf_hidden.weight += d_pre * codeword.transpose();
  if (p.config.use_bias) acc.head.conf_hidden.bias += d_pre;
  acc.codeword += p.conf_hidden.weight.transpose() * d_pre;
}

}  // namespace foldpath
