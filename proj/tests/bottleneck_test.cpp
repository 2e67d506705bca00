#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "cyin/bottleneck.hpp"
#include "cyin/errors.hpp"
#include "grad_check.hpp"

namespace cyin {
namespace {

using ag::Matrix;
using ag::Var;

Matrix filled(int r, int c, double v) { return Matrix::Constant(r, c, v); }

// Decoder that reproduces its input exactly: [I, -I] through ReLU then [I; -I].
IBDecoder identity_decoder(int dim) {
  Rng rng(0);
  IBDecoder d(dim, 2 * dim, dim, rng);
  Matrix w1(dim, 2 * dim);
  w1 << Matrix::Identity(dim, dim), -Matrix::Identity(dim, dim);
  Matrix w2(2 * dim, dim);
  w2 << Matrix::Identity(dim, dim), -Matrix::Identity(dim, dim);
  auto& layers = d.mlp().layers;
  layers[0].weight.mutable_value() = w1;
  layers[1].weight.mutable_value() = w2;
  layers[0].bias.mutable_value().setZero();
  layers[1].bias.mutable_value().setZero();
  return d;
}

TEST(GaussianKl, ClosedFormValues) {
  EXPECT_NEAR(gaussian_kl(Matrix::Zero(3, 4), filled(3, 4, 1.0)), 0.0, 1e-12);
  EXPECT_NEAR(gaussian_kl(filled(1, 1, 1.0), filled(1, 1, 1.0)), 0.5, 1e-12);
}

TEST(GaussianKl, MonteCarloOracle) {
  const double mu = 0.5, sigma = 0.5;
  Rng rng(11);
  double acc = 0.0;
  const int n = 1'000'000;
  // KL = E_q[log q(x) - log p(x)].
  for (int i = 0; i < n; ++i) {
    const double x = mu + sigma * rng.normal();
    const double log_q = -std::log(sigma) - 0.5 * std::pow((x - mu) / sigma, 2);
    const double log_p = -0.5 * x * x;
    acc += log_q - log_p;
  }
  EXPECT_NEAR(acc / n, gaussian_kl(filled(1, 1, mu), filled(1, 1, sigma)), 0.01);
}

TEST(GaussianKl, NonNegativeAndZeroOnlyAtPrior) {
  Rng rng(12);
  for (int t = 0; t < 200; ++t) {
    Matrix mu = rng.normal_matrix(2, 3);
    Matrix sigma = rng.normal_matrix(2, 3).array().abs() + 0.05;
    EXPECT_GT(gaussian_kl(mu, sigma), 0.0);
  }
  EXPECT_LT(std::abs(gaussian_kl(Matrix::Zero(2, 2), filled(2, 2, 1.0))), 1e-9);
}

TEST(GaussianKl, RejectsNonPositiveSigma) {
  EXPECT_THROW(gaussian_kl(Matrix::Zero(1, 2), Matrix::Zero(1, 2)), DomainError);
  EXPECT_THROW(gaussian_kl(Matrix::Zero(1, 2), filled(1, 2, -1.0)), DomainError);
}

TEST(GaussianKl, GradientMatchesFiniteDifference) {
  Rng rng(13);
  Var mu = ag::leaf(rng.normal_matrix(3, 2));
  Var s = ag::leaf(rng.normal_matrix(3, 2).array().abs() + 0.3);
  EXPECT_LT(testing::gradient_relative_error({mu, s}, [&] { return gaussian_kl(mu, s); }), 1e-7);
}

TEST(Reparameterize, MonteCarloStatistics) {
  Rng rng(14);
  const int n = 100'000;
  BottleneckLatent z =
      reparameterize(ag::constant(filled(n, 1, 1.0)), ag::constant(filled(n, 1, 2.0)),
                     Mode::Train, rng);
  const Matrix& s = z.sample.value();
  const double mean = s.mean();
  const double var = (s.array() - mean).square().sum() / (n - 1);
  EXPECT_NEAR(mean, 1.0, 0.02);
  EXPECT_NEAR(var, 4.0, 0.1);
  EXPECT_LT((s - (filled(n, 1, 1.0) + 2.0 * z.noise)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Reparameterize, EvalReturnsMu) {
  Rng rng(15);
  Matrix mu = rng.normal_matrix(4, 3);
  BottleneckLatent z = reparameterize(ag::constant(mu), ag::constant(filled(4, 3, 1.0)),
                                      Mode::Eval, rng);
  EXPECT_EQ(z.sample.value(), mu);
}

TEST(IBEncoderTest, FloorSigmaCollapsesSample) {
  Rng rng(16);
  IBConfig cfg{3, 5, 1.0};
  IBEncoder enc(4, cfg, rng);
  enc.sigma_head().weight.mutable_value().setZero();
  enc.sigma_head().bias.mutable_value().setConstant(-60.0);
  UnimodalRepr r{ag::constant(rng.normal_matrix(6, 4)), 0, 2};
  BottleneckLatent z = enc.encode(r, Mode::Train, rng);
  const double bound = kSigmaFloor * z.noise.cwiseAbs().maxCoeff() * (1 + 1e-9);
  EXPECT_LE((z.sample.value() - z.mu.value()).cwiseAbs().maxCoeff(), bound);
  EXPECT_TRUE((z.sigma.value().array() > 0.0).all());
}

TEST(IBEncoderTest, NonFiniteParametersRejected) {
  Rng rng(17);
  IBEncoder enc(4, IBConfig{3, 5, 1.0}, rng);
  enc.mu_head().weight.mutable_value()(0, 0) = std::nan("");
  UnimodalRepr r{ag::constant(rng.normal_matrix(2, 4)), 0, 2};
  EXPECT_THROW(enc.encode(r, Mode::Eval, rng), NumericalError);
}

TEST(TokenIb, PerfectDecoderAndPriorGiveZero) {
  Rng rng(18);
  Matrix f = rng.normal_matrix(4, 3);
  BottleneckLatent src =
      reparameterize(ag::constant(Matrix::Zero(4, 3)), ag::constant(filled(4, 3, 1.0)), Mode::Eval,
                     rng, 0, 2);
  // With sample = mu = 0 the identity decoder outputs 0; target equals that.
  UnimodalRepr tgt{ag::constant(Matrix::Zero(4, 3)), 1, 2};
  EXPECT_NEAR(token_ib_loss(src, tgt, identity_decoder(3), 4.0).scalar(), 0.0, 1e-12);
  // Identity decoder reproduces a generic sample too.
  src.sample = ag::constant(f);
  UnimodalRepr tgt2{ag::constant(f), 1, 2};
  EXPECT_NEAR(token_ib_terms(src, tgt2, identity_decoder(3)).likelihood.scalar(), 0.0, 1e-12);
}

TEST(TokenIb, BetaOnlyScalesLikelihood) {
  Rng rng(19);
  IBEncoder enc(3, IBConfig{2, 4, 1.0}, rng);
  IBDecoder dec(2, 4, 3, rng);
  UnimodalRepr r{ag::constant(rng.normal_matrix(4, 3)), 0, 2};
  BottleneckLatent z = enc.encode(r, Mode::Train, rng);
  IBTerms terms = token_ib_terms(z, r, dec);
  const double l1 = token_ib_loss(z, r, dec, 3.0).scalar();
  const double l2 = token_ib_loss(z, r, dec, 6.0).scalar();
  EXPECT_NEAR(l2 - l1, 3.0 * terms.likelihood.scalar(), 1e-12);
  EXPECT_NEAR(l1 - 3.0 * terms.likelihood.scalar(), terms.kl.scalar(), 1e-12);
}

TEST(TokenIb, LengthMismatchRejected) {
  Rng rng(20);
  IBDecoder dec(2, 4, 3, rng);
  BottleneckLatent z = reparameterize(ag::constant(Matrix::Zero(4, 2)),
                                      ag::constant(filled(4, 2, 1.0)), Mode::Eval, rng, 0, 2);
  UnimodalRepr r{ag::constant(Matrix::Zero(6, 3)), 1, 3};
  EXPECT_THROW(token_ib_loss(z, r, dec, 1.0), DimensionError);
}

TEST(TokenIb, EncoderGradientMatchesFiniteDifference) {
  Rng rng(21);
  IBEncoder enc(2, IBConfig{2, 3, 1.0}, rng);
  IBDecoder dec(2, 3, 2, rng);
  UnimodalRepr r{ag::constant(rng.normal_matrix(2, 2)), 0, 2};
  nn::ParamList params;
  enc.collect(params, "ib");
  const std::uint64_t seed = 99;
  auto f = [&] {
    Rng noise(seed);  // same draw on every evaluation
    return token_ib_loss(enc.encode(r, Mode::Train, noise), r, dec, 2.0);
  };
  EXPECT_LT(testing::gradient_relative_error(testing::leaves_of(params), f), 1e-4);
}

struct CyclicFixture {
  int u;
  std::vector<BottleneckLatent> latents;
  std::vector<UnimodalRepr> reprs;
  std::vector<IBDecoder> decoders;

  CyclicFixture(int u_, std::uint64_t seed) : u(u_) {
    Rng rng(seed);
    for (int s = 0; s < u; ++s) {
      Matrix sigma = rng.normal_matrix(4, 2).array().abs() + 0.2;
      latents.push_back(reparameterize(ag::constant(rng.normal_matrix(4, 2)),
                                       ag::constant(sigma), Mode::Train, rng, s, 2));
      reprs.push_back({ag::constant(rng.normal_matrix(4, 3)), s, 2});
    }
    for (int i = 0; i < u * u; ++i) decoders.emplace_back(2, 3, 3, rng);
  }
  double term(int s, int t, double beta) const {
    return token_ib_loss(latents[s], reprs[t], decoders[s * u + t], beta).scalar();
  }
};

TEST(CyclicTokenIbTest, ThreeModalityManualUnroll) {
  CyclicFixture fx(3, 22);
  const double beta = 2.5;
  const double self = (fx.term(0, 0, beta) + fx.term(1, 1, beta) + fx.term(2, 2, beta)) / 3.0;
  const double cross = (0.5 * (fx.term(0, 1, beta) + fx.term(1, 0, beta)) +
                        0.5 * (fx.term(1, 2, beta) + fx.term(2, 1, beta)) +
                        0.5 * (fx.term(0, 2, beta) + fx.term(2, 0, beta))) /
                       3.0;
  EXPECT_NEAR(cyclic_token_ib_loss(fx.latents, fx.reprs, fx.decoders, beta).scalar(),
              self + cross, 1e-10);
  CyclicTokenIB parts = cyclic_token_ib(fx.latents, fx.reprs, fx.decoders, beta, false);
  EXPECT_NEAR(parts.loss.scalar(), self, 1e-10);
  EXPECT_FALSE(parts.cross_terms.defined());
}

TEST(CyclicTokenIbTest, TwoModalityEnumeration) {
  CyclicFixture fx(2, 23);
  const double expected = (fx.term(0, 0, 1.0) + fx.term(1, 1, 1.0)) / 2.0 +
                          0.5 * (fx.term(0, 1, 1.0) + fx.term(1, 0, 1.0));
  EXPECT_NEAR(cyclic_token_ib_loss(fx.latents, fx.reprs, fx.decoders, 1.0).scalar(), expected,
              1e-12);
}

TEST(CyclicTokenIbTest, PerfectDecodersAndPriorGiveZero) {
  Rng rng(24);
  std::vector<BottleneckLatent> latents;
  std::vector<UnimodalRepr> reprs;
  std::vector<IBDecoder> decoders(9, identity_decoder(2));
  for (int s = 0; s < 3; ++s) {
    latents.push_back(reparameterize(ag::constant(Matrix::Zero(4, 2)),
                                     ag::constant(filled(4, 2, 1.0)), Mode::Eval, rng, s, 2));
    reprs.push_back({ag::constant(Matrix::Zero(4, 2)), s, 2});
  }
  EXPECT_NEAR(cyclic_token_ib_loss(latents, reprs, decoders, 5.0).scalar(), 0.0, 1e-12);
}

TEST(CyclicTokenIbTest, SwappingModalitiesIsInvariant) {
  CyclicFixture fx(3, 25);
  const double before = cyclic_token_ib_loss(fx.latents, fx.reprs, fx.decoders, 3.0).scalar();
  // Relabel modalities 0 <-> 2 and permute the decoder grid to match.
  const int perm[3] = {2, 1, 0};
  std::vector<BottleneckLatent> lat(3);
  std::vector<UnimodalRepr> rep(3);
  std::vector<IBDecoder> dec(9);
  for (int s = 0; s < 3; ++s) {
    lat[perm[s]] = fx.latents[s];
    rep[perm[s]] = fx.reprs[s];
    for (int t = 0; t < 3; ++t) dec[perm[s] * 3 + perm[t]] = fx.decoders[s * 3 + t];
  }
  EXPECT_NEAR(cyclic_token_ib_loss(lat, rep, dec, 3.0).scalar(), before, 1e-12);
}

TEST(CyclicTokenIbTest, NeedsTwoModalities) {
  CyclicFixture fx(2, 26);
  std::span<const BottleneckLatent> one(fx.latents.data(), 1);
  std::span<const UnimodalRepr> one_r(fx.reprs.data(), 1);
  std::span<const IBDecoder> one_d(fx.decoders.data(), 1);
  EXPECT_THROW(cyclic_token_ib_loss(one, one_r, one_d, 1.0), ArityError);
}

TEST(PoolLabelLatent, Arithmetic) {
  Rng rng(27);
  Matrix mu(2, 1), sigma(2, 1);
  mu << 0.0, 2.0;
  sigma << 1.0, 1.0;
  BottleneckLatent z = reparameterize(ag::constant(mu), ag::constant(sigma), Mode::Eval, rng, 0, 2);
  PooledLatent p = pool_label_latent(z);
  EXPECT_NEAR(p.mu.value()(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(p.sigma.value()(0, 0), 1.0, 1e-12);

  Matrix m1 = rng.normal_matrix(3, 4), s1 = rng.normal_matrix(3, 4).array().abs() + 0.1;
  PooledLatent single = pool_label_latent(
      reparameterize(ag::constant(m1), ag::constant(s1), Mode::Eval, rng, 0, 1));
  EXPECT_LT((single.mu.value() - m1).norm(), 1e-12);
  EXPECT_LT((single.sigma.value() - s1).norm(), 1e-12);
}

LabelPredictor constant_predictor(int c_b, int out, const Matrix& row) {
  Rng rng(0);
  LabelPredictor p(c_b, 2, out, rng);
  for (auto& layer : p.mlp().layers) {
    layer.weight.mutable_value().setZero();
    layer.bias.mutable_value().setZero();
  }
  p.mlp().layers.back().bias.mutable_value() = row;
  return p;
}

TEST(LabelIb, PerfectRegressionIsZero) {
  Rng rng(28);
  Labels y{Task::Regression, Vector::Constant(3, 1.25), 0};
  std::vector<PooledLatent> pooled{{ag::constant(Matrix::Zero(3, 2)), ag::constant(filled(3, 2, 1.0))}};
  std::vector<LabelPredictor> pred{constant_predictor(2, 1, filled(1, 1, 1.25))};
  EXPECT_NEAR(label_ib_loss(pooled, y, pred, 7.0, Mode::Train, rng).scalar(), 0.0, 1e-12);
}

TEST(LabelIb, UniformClassifierCostsBetaLogV) {
  Rng rng(29);
  Vector cls(4);
  cls << 0, 1, 2, 2;
  Labels y{Task::Classification, cls, 3};
  std::vector<PooledLatent> pooled{{ag::constant(Matrix::Zero(4, 2)), ag::constant(filled(4, 2, 1.0))},
                                   {ag::constant(Matrix::Zero(4, 2)), ag::constant(filled(4, 2, 1.0))}};
  std::vector<LabelPredictor> pred{constant_predictor(2, 3, Matrix::Zero(1, 3)),
                                   constant_predictor(2, 3, filled(1, 3, 0.7))};
  EXPECT_NEAR(label_ib_loss(pooled, y, pred, 2.0, Mode::Train, rng).scalar(), 2.0 * std::log(3.0),
              1e-12);
}

TEST(LabelIb, TaskMismatchRejected) {
  Rng rng(30);
  Labels y{Task::Regression, Vector::Zero(2), 0};
  std::vector<PooledLatent> pooled{{ag::constant(Matrix::Zero(2, 2)), ag::constant(filled(2, 2, 1.0))}};
  std::vector<LabelPredictor> pred{LabelPredictor(2, 3, 3, rng)};
  EXPECT_THROW(label_ib_loss(pooled, y, pred, 1.0, Mode::Eval, rng), TaskMismatchError);
}

TEST(LabelIb, ClassificationGradientMatchesFiniteDifference) {
  Rng rng(31);
  Vector cls(2);
  cls << 2, 0;
  Labels y{Task::Classification, cls, 3};
  Var mu = ag::leaf(rng.normal_matrix(2, 2));
  Var sigma = ag::leaf(rng.normal_matrix(2, 2).array().abs() + 0.3);
  std::vector<LabelPredictor> pred{LabelPredictor(2, 3, 3, rng)};
  nn::ParamList params;
  pred[0].collect(params, "p");
  std::vector<Var> leaves = testing::leaves_of(params);
  leaves.push_back(mu);
  leaves.push_back(sigma);
  auto f = [&] {
    Rng noise(5);
    std::vector<PooledLatent> pooled{{mu, sigma}};
    return label_ib_loss(pooled, y, pred, 1.5, Mode::Train, noise);
  };
  EXPECT_LT(testing::gradient_relative_error(leaves, f), 1e-4);
}

TEST(LabelIb, RegressionGradientMatchesFiniteDifference) {
  Rng rng(32);
  Vector vals(2);
  vals << 0.3, -1.1;
  Labels y{Task::Regression, vals, 0};
  Var mu = ag::leaf(rng.normal_matrix(2, 2));
  Var sigma = ag::leaf(rng.normal_matrix(2, 2).array().abs() + 0.3);
  std::vector<LabelPredictor> pred{LabelPredictor(2, 3, 1, rng)};
  auto f = [&] {
    Rng noise(6);
    std::vector<PooledLatent> pooled{{mu, sigma}};
    return label_ib_loss(pooled, y, pred, 1.5, Mode::Train, noise);
  };
  EXPECT_LT(testing::gradient_relative_error({mu, sigma}, f), 1e-4);
}

}  // namespace
}  // namespace cyin
