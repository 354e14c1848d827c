#include "foldpath/neural_field.hpp"

#include "doctest.h"
#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace foldpath;

namespace {

HeadConfig small_config(Activation act, Conditioning cond, std::uint64_t seed) {
  HeadConfig c;
  c.layers = 1 + seed % 3;
  c.hidden = 3 + seed % 6;
  c.codeword = 1 + seed % 4;
  c.conf_hidden = 2 + seed % 3;
  c.activation = act;
  c.conditioning = cond;
  c.seed = seed;
  return c;
}

Vector random_codeword(std::mt19937_64& rng, std::size_t n, double scale = 0.5) {
  std::normal_distribution<double> g(0.0, scale);
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = g(rng);
  return v;
}

void fill(HeadParams& p, double weight, double bias) {
  for (auto* d : {&p.out, &p.conf_hidden, &p.conf_out}) {
    d->weight.setConstant(weight);
    d->bias.setConstant(bias);
  }
  for (auto* group : {&p.blocks, &p.modulator}) {
    for (auto& d : *group) {
      d.weight.setConstant(weight);
      d.bias.setConstant(bias);
    }
  }
}

// Frobenius norms bound the operator norms from above, so this is a valid
// (loose) Lipschitz constant of x -> raw output.
double lipschitz_bound(const HeadParams& p, const Vector& codeword) {
  const auto& c = p.config;
  std::vector<Vector> h;
  if (c.conditioning == Conditioning::modulation) h = modulator_forward(p, codeword);
  const double cw_max = codeword.size() > 0 ? codeword.cwiseAbs().maxCoeff() : 0.0;
  double bound = p.out.weight.norm();
  double input_max = 1.0;
  for (std::size_t l = 0; l < c.layers; ++l) {
    const double mod = h.empty() ? 1.0 : h[l].cwiseAbs().maxCoeff();
    double slope = 1.0;
    if (c.activation != Activation::relu) {
      const double z = p.blocks[l].weight.cwiseAbs().rowwise().sum().maxCoeff() * std::max(input_max, cw_max) +
                       p.blocks[l].bias.cwiseAbs().maxCoeff();
      slope = c.omega0 * (c.activation == Activation::finer ? 2.0 * z + 1.0 : 1.0);
    }
    bound *= slope * mod * p.blocks[l].weight.norm();
    input_max = mod;
  }
  return bound;
}

}  // namespace

TEST_CASE("config validation and names") {
  CHECK_NOTHROW(validate(HeadConfig{}));
  HeadConfig c;
  c.layers = 0;
  CHECK_THROWS_AS(validate(c), std::domain_error);
  c = {};
  c.omega0 = 0.0;
  CHECK_THROWS_AS(validate(c), std::domain_error);
  c = {};
  c.codeword = 0;
  CHECK_THROWS_AS(validate(c), std::domain_error);
  c.conditioning = Conditioning::concat;
  CHECK_NOTHROW(validate(c));
  for (auto a : {Activation::relu, Activation::siren, Activation::finer}) CHECK(activation_from_string(to_string(a)) == a);
  for (auto m : {Conditioning::modulation, Conditioning::concat}) CHECK(conditioning_from_string(to_string(m)) == m);
  CHECK_THROWS_AS(activation_from_string("gelu"), std::domain_error);
}

TEST_CASE("init_head") {
  SUBCASE("default size") {
    const HeadConfig c;
    const HeadParams p = init_head(c);
    const std::size_t L = 4, H = 512, C = 384, F = 384;
    const std::size_t expected = (H + H) + (L - 1) * (H * H + H) + (6 * H + 6) + (H * C + H) +
                                 (L - 1) * (H * (H + C) + H) + (F * C + F) + (F + 1);
    CHECK(parameter_count(c) == expected);
    CHECK(parameter_count(p) == expected);
  }
  SUBCASE("concat widens the blocks and drops the modulator") {
    HeadConfig c = small_config(Activation::relu, Conditioning::concat, 5);
    const HeadParams p = init_head(c);
    CHECK(p.modulator.empty());
    CHECK(static_cast<std::size_t>(p.blocks[0].weight.cols()) == 1 + c.codeword);
    CHECK(parameter_count(p) == parameter_count(c));
  }
  SUBCASE("deterministic in the seed") {
    HeadConfig c = small_config(Activation::finer, Conditioning::modulation, 4);
    CHECK(init_head(c) == init_head(c));
    HeadConfig d = c;
    d.seed = 99;
    CHECK_FALSE(init_head(c) == init_head(d));
  }
  SUBCASE("sinusoidal ranges") {
    HeadConfig c;
    c.layers = 3;
    c.hidden = 64;
    c.codeword = 16;
    c.conf_hidden = 8;
    c.activation = Activation::siren;
    const HeadParams p = init_head(c);
    CHECK(p.blocks[0].weight.cwiseAbs().maxCoeff() <= 1.0);
    const double bound = std::sqrt(6.0 / 64.0) / c.omega0;
    for (std::size_t l = 1; l < c.layers; ++l) CHECK(p.blocks[l].weight.cwiseAbs().maxCoeff() <= bound);

    c.activation = Activation::finer;
    c.finer_bias_bound = 0.25;
    const HeadParams f = init_head(c);
    CHECK(f.blocks[0].bias.cwiseAbs().maxCoeff() <= 0.25);
    CHECK(f.blocks[0].bias.cwiseAbs().maxCoeff() > 0.0);
  }
}

TEST_CASE("activation") {
  CHECK(activation(-1.0, Activation::relu, 30).value == 0.0);
  CHECK(activation(2.0, Activation::relu, 30).value == 2.0);
  CHECK(activation(2.0, Activation::relu, 30).derivative == 1.0);
  CHECK(activation(0.0, Activation::siren, 30).value == 0.0);
  CHECK(activation(0.0, Activation::siren, 30).derivative == 30.0);
  CHECK(activation(0.0, Activation::finer, 30).value == 0.0);
  CHECK(activation(0.0, Activation::finer, 30).derivative == 30.0);
  for (auto kind : {Activation::siren, Activation::finer}) {
    for (double z : {-0.7, -0.1, 0.05, 0.3, 0.9}) {
      CHECK(activation(z, kind, 7.0).value == doctest::Approx(oracle::act(z, kind, 7.0)).epsilon(1e-15));
      double zz = z;
      const double numeric = oracle::central_difference([&] { return oracle::act(zz, kind, 7.0); }, &zz, 1e-6);
      CHECK(oracle::relative_error(activation(z, kind, 7.0).derivative, numeric) < 1e-7);
    }
  }
}

TEST_CASE("modulator_forward") {
  HeadConfig c;
  c.layers = 2;
  c.hidden = 2;
  c.codeword = 1;
  c.conf_hidden = 1;
  HeadParams p = init_head(c);

  fill(p, 0.0, 0.0);
  Vector P(1);
  P << 0.5;
  for (const auto& h : modulator_forward(p, P)) CHECK(h.isZero());

  // Unit weights, zero bias: h0 = relu(0.5), h1 = relu(0.5 + 0.5 + 0.5).
  fill(p, 1.0, 0.0);
  const auto h = modulator_forward(p, P);
  REQUIRE(h.size() == 2);
  CHECK(h[0] == Vector::Constant(2, 0.5));
  CHECK(h[1] == Vector::Constant(2, 1.5));

  std::mt19937_64 rng(8);
  const HeadParams q = init_head(small_config(Activation::finer, Conditioning::modulation, 7));
  for (int k = 0; k < 20; ++k) {
    for (const auto& v : modulator_forward(q, random_codeword(rng, q.config.codeword, 2.0))) CHECK(v.minCoeff() >= 0.0);
  }
  CHECK_THROWS_AS(modulator_forward(q, Vector::Zero(static_cast<Eigen::Index>(q.config.codeword) + 1)), std::domain_error);
}

TEST_CASE("head_forward") {
  std::mt19937_64 rng(12);
  SUBCASE("zero parameters give a zero raw output") {
    HeadParams p = init_head(small_config(Activation::siren, Conditioning::modulation, 2));
    fill(p, 0.0, 0.0);
    CHECK(head_forward(p, random_codeword(rng, p.config.codeword), 0.3).raw.isZero());
    CHECK_THROWS_AS(head_forward(p, random_codeword(rng, p.config.codeword), 0.3).pose(), std::domain_error);
  }
  SUBCASE("matches the scalar reference for every activation and conditioning") {
    for (auto act : {Activation::relu, Activation::siren, Activation::finer}) {
      for (auto cond : {Conditioning::modulation, Conditioning::concat}) {
        HeadConfig c;
        c.layers = 2;
        c.hidden = 8;
        c.codeword = 4;
        c.conf_hidden = 4;
        c.activation = act;
        c.conditioning = cond;
        c.seed = 3;
        const HeadParams p = init_head(c);
        const Vector cw = random_codeword(rng, 4);
        for (double x : {-1.0, -0.4, 0.25, 1.0}) {
          const auto raw = head_forward(p, cw, x).raw;
          const auto expected = oracle::reference_head(p, cw, x);
          for (int k = 0; k < 6; ++k) CHECK(raw(k) == doctest::Approx(expected[static_cast<std::size_t>(k)]).epsilon(1e-12));
        }
        const std::vector<double> xs{-0.9, 0.0, 0.6};
        const Matrix batch = head_forward_batch(p, cw, xs);
        REQUIRE(batch.rows() == 3);
        REQUIRE(batch.cols() == 6);
        for (Eigen::Index t = 0; t < 3; ++t) {
          CHECK(batch.row(t).isApprox(head_forward(p, cw, xs[static_cast<std::size_t>(t)]).raw.transpose(), 1e-13));
        }
      }
    }
  }
  SUBCASE("deterministic and unit orientation") {
    const HeadParams p = init_head(small_config(Activation::finer, Conditioning::modulation, 6));
    const Vector cw = random_codeword(rng, p.config.codeword);
    for (int k = 0; k <= 20; ++k) {
      const double x = -1.0 + k / 10.0;
      const auto a = head_forward(p, cw, x);
      CHECK(a.raw == head_forward(p, cw, x).raw);
      CHECK(std::abs(a.pose().orientation.norm() - 1.0) < 1e-6);
    }
  }
  SUBCASE("input range") {
    const HeadParams p = init_head(small_config(Activation::relu, Conditioning::modulation, 1));
    const Vector cw = Vector::Zero(static_cast<Eigen::Index>(p.config.codeword));
    CHECK_THROWS_AS(head_forward(p, cw, 1.01), std::domain_error);
    CHECK_THROWS_AS(head_forward(p, cw, -2.0), std::domain_error);
    CHECK_THROWS_AS(head_forward(p, Vector::Zero(9), 0.0), std::domain_error);
  }
}

TEST_CASE("concat without a codeword equals modulation with all-ones modulators") {
  for (auto act : {Activation::relu, Activation::siren, Activation::finer}) {
    HeadConfig cc;
    cc.layers = 3;
    cc.hidden = 6;
    cc.codeword = 0;
    cc.conf_hidden = 2;
    cc.activation = act;
    cc.conditioning = Conditioning::concat;
    cc.seed = 10;
    const HeadParams concat = init_head(cc);

    HeadConfig mc = cc;
    mc.codeword = 3;
    mc.conditioning = Conditioning::modulation;
    HeadParams mod = init_head(mc);
    mod.blocks = concat.blocks;
    mod.out = concat.out;
    for (auto& d : mod.modulator) {
      d.weight.setZero();
      d.bias.setOnes();
    }
    std::mt19937_64 rng(2);
    const Vector cw = random_codeword(rng, 3);
    for (int k = 0; k <= 10; ++k) {
      const double x = -1.0 + k / 5.0;
      CHECK(head_forward(concat, Vector(0), x).raw.isApprox(head_forward(mod, cw, x).raw, 1e-14));
    }
  }
}

TEST_CASE("continuity probe") {
  std::mt19937_64 rng(31);
  for (auto act : {Activation::siren, Activation::finer}) {
    HeadConfig c;
    c.layers = 3;
    c.hidden = 16;
    c.codeword = 8;
    c.conf_hidden = 4;
    c.activation = act;
    c.seed = 17;
    const HeadParams p = init_head(c);
    const Vector cw = random_codeword(rng, 8);
    const double bound = lipschitz_bound(p, cw);
    const double eps = 1e-6;
    double worst = 0.0;
    for (int k = 0; k < 2000; ++k) {
      const double x = -1.0 + k * (2.0 - eps) / 1999.0;
      const double jump = (head_forward(p, cw, x + eps).raw - head_forward(p, cw, x).raw).norm();
      worst = std::max(worst, jump / eps);
    }
    CHECK(worst <= bound);
    CHECK(std::isfinite(worst));
  }
}

TEST_CASE("confidence head") {
  HeadConfig c;
  c.layers = 1;
  c.hidden = 2;
  c.codeword = 1;
  c.conf_hidden = 1;
  HeadParams p = init_head(c);
  Vector P(1);
  P << 1.0;
  fill(p, 0.0, 0.0);
  CHECK(confidence_forward(p, P) == 0.5);
  fill(p, 1.0, 0.0);
  CHECK(confidence_logit(p, P) == 1.0);
  CHECK(confidence_forward(p, P) == doctest::Approx(0.7310585786300049).epsilon(1e-15));

  std::mt19937_64 rng(3);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const HeadParams q = init_head(small_config(Activation::relu, Conditioning::modulation, seed));
    const Vector cw = random_codeword(rng, q.config.codeword, 3.0);
    const double f = confidence_forward(q, cw);
    CHECK((f > 0.0 && f < 1.0));
    CHECK(confidence_logit(q, cw) == doctest::Approx(oracle::reference_logit(q, cw)).epsilon(1e-13));
  }
}

TEST_CASE("head_backward") {
  std::mt19937_64 rng(100);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  SUBCASE("zero upstream gives zero gradients") {
    const HeadParams p = init_head(small_config(Activation::finer, Conditioning::modulation, 3));
    const std::vector<double> xs{-0.5, 0.5};
    const auto grads = head_backward(p, random_codeword(rng, p.config.codeword), xs, Matrix::Zero(2, 6));
    for (const auto& t : tensors(grads.head)) {
      for (double v : t) CHECK(v == 0.0);
    }
    CHECK(grads.codeword.isZero());
  }

  SUBCASE("shape errors") {
    const HeadParams p = init_head(small_config(Activation::relu, Conditioning::modulation, 3));
    const std::vector<double> xs{-0.5, 0.5};
    CHECK_THROWS_AS(head_backward(p, random_codeword(rng, p.config.codeword), xs, Matrix::Zero(3, 6)),
                    std::domain_error);
  }

  SUBCASE("finite differences over every parameter and the codeword") {
    int configs = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 24; ++seed) {
      const auto act = static_cast<Activation>(seed % 3);
      const auto cond = (seed / 3) % 2 == 0 ? Conditioning::modulation : Conditioning::concat;
      HeadConfig c = small_config(act, cond, seed);
      c.omega0 = seed % 4 == 0 ? 30.0 : 3.0;
      HeadParams p = init_head(c);
      Vector cw = random_codeword(rng, c.codeword);
      std::vector<double> xs(4);
      for (double& x : xs) x = u(rng);
      Matrix upstream(4, 6);
      for (Eigen::Index k = 0; k < upstream.size(); ++k) upstream.data()[k] = g(rng);
      const double d_logit = g(rng);

      auto grads = head_backward(p, cw, xs, upstream);
      confidence_backward(p, cw, d_logit, grads);

      auto loss = [&] {
        double s = 0.0;
        for (std::size_t t = 0; t < xs.size(); ++t) {
          const auto out = oracle::reference_head(p, cw, xs[t]);
          for (int k = 0; k < 6; ++k) s += upstream(static_cast<Eigen::Index>(t), k) * out[static_cast<std::size_t>(k)];
        }
        return s + d_logit * oracle::reference_logit(p, cw);
      };

      auto params = tensors(p);
      const auto analytic = tensors(std::as_const(grads.head));
      REQUIRE(params.size() == analytic.size());
      for (std::size_t t = 0; t < params.size(); ++t) {
        for (std::size_t k = 0; k < params[t].size(); ++k) {
          const double numeric = oracle::central_difference(loss, &params[t][k], 1e-5);
          const double err = oracle::relative_error(analytic[t][k], numeric, 1e-4);
          worst = std::max(worst, err);
          CHECK(err < 1e-4);
        }
      }
      for (Eigen::Index k = 0; k < cw.size(); ++k) {
        const double numeric = oracle::central_difference(loss, &cw(k), 1e-5);
        const double err = oracle::relative_error(grads.codeword(k), numeric, 1e-4);
        worst = std::max(worst, err);
        CHECK(err < 1e-4);
      }
      ++configs;
    }
    CHECK(configs >= 20);
    MESSAGE("worst relative error " << worst);
  }

  SUBCASE("bias-free heads leave bias gradients at zero") {
    HeadConfig c = small_config(Activation::siren, Conditioning::modulation, 8);
    c.use_bias = false;
    const HeadParams p = init_head(c);
    const std::vector<double> xs{0.1, -0.3};
    Matrix up = Matrix::Ones(2, 6);
    const auto grads = head_backward(p, random_codeword(rng, c.codeword), xs, up);
    for (const auto& b : grads.head.blocks) CHECK(b.bias.isZero());
  }
}
