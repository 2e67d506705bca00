#include <gtest/gtest.h>

#include <string>

#include "cyin/encoders.hpp"
#include "cyin/errors.hpp"
#include "grad_check.hpp"

namespace cyin {
namespace {

using ag::Matrix;

class EncoderKinds : public ::testing::TestWithParam<MixingKind> {};

TEST_P(EncoderKinds, ZeroWeightsGiveZeroOutput) {
  Rng rng(3);
  ModalityEncoder enc(0, 5, 6, GetParam(), rng);
  enc.set_zero();
  Matrix x = rng.normal_matrix(4, 5);
  UnimodalRepr r = enc.encode(x);
  EXPECT_EQ(r.tokens.value().norm(), 0.0);
}

TEST_P(EncoderKinds, ShapeContract) {
  Rng rng(4);
  ModalityEncoder enc(1, 5, 7, GetParam(), rng);
  UnimodalRepr r = enc.encode(ag::constant(rng.normal_matrix(3 * 4, 5)), 4);
  EXPECT_EQ(r.tokens.rows(), 12);
  EXPECT_EQ(r.tokens.cols(), 7);
  EXPECT_EQ(r.num_samples(), 3);
  EXPECT_EQ(r.modality_id, 1);
  EXPECT_TRUE(r.tokens.value().allFinite());
}

TEST_P(EncoderKinds, SamplesAreIndependentInABatch) {
  Rng rng(5);
  ModalityEncoder enc(0, 3, 4, GetParam(), rng);
  Matrix a = rng.normal_matrix(3, 3), b = rng.normal_matrix(3, 3);
  Matrix both(6, 3);
  both << a, b;
  Matrix joint = enc.encode(ag::constant(both), 3).tokens.value();
  EXPECT_LT((joint.topRows(3) - enc.encode(a).tokens.value()).norm(), 1e-12);
  EXPECT_LT((joint.bottomRows(3) - enc.encode(b).tokens.value()).norm(), 1e-12);
}

// Directional derivative from the reverse pass against a central difference.
TEST_P(EncoderKinds, JacobianVectorProductMatchesFiniteDifference) {
  Rng rng(6);
  ModalityEncoder enc(0, 3, 4, GetParam(), rng);
  Matrix x = rng.normal_matrix(2, 3);
  Matrix dir = rng.normal_matrix(2, 3);
  Matrix probe = rng.normal_matrix(2, 4);
  auto f = [&](const Matrix& in) {
    ag::NoGradGuard g;
    return enc.encode(in).tokens.value().cwiseProduct(probe).sum();
  };
  ag::Var leaf = ag::leaf(x);
  ag::Var out = ag::sum(ag::mul(enc.encode(leaf, 2).tokens, ag::constant(probe)));
  ag::backward(out);
  const double analytic = leaf.grad().cwiseProduct(dir).sum();
  const double h = 1e-6;
  const double numeric = (f(x + h * dir) - f(x - h * dir)) / (2 * h);
  EXPECT_LT(std::abs(analytic - numeric), 1e-4);
}

TEST_P(EncoderKinds, ParameterGradients) {
  Rng rng(7);
  ModalityEncoder enc(0, 3, 4, GetParam(), rng);
  nn::ParamList params;
  enc.collect(params, "enc");
  for (const auto& p : params) EXPECT_EQ(p.group, nn::ParamGroup::Encoder);
  Matrix x = rng.normal_matrix(6, 3), probe = rng.normal_matrix(6, 4);
  auto f = [&] { return ag::sum(ag::mul(enc.encode(ag::constant(x), 3).tokens, ag::constant(probe))); };
  EXPECT_LT(testing::gradient_relative_error(testing::leaves_of(params), f), 1e-6);
}

TEST_P(EncoderKinds, WrongChannelCountNamesModality) {
  Rng rng(8);
  ModalityEncoder enc(2, 5, 4, GetParam(), rng);
  try {
    enc.encode(rng.normal_matrix(3, 6));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("modality 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("expects 5"), std::string::npos) << msg;
    EXPECT_NE(msg.find("got 6"), std::string::npos) << msg;
  }
}

INSTANTIATE_TEST_SUITE_P(Mixing, EncoderKinds,
                         ::testing::Values(MixingKind::Attention, MixingKind::Recurrent),
                         [](const auto& info) { return to_string(info.param); });

TEST(Mixing, ParseRoundTrip) {
  EXPECT_EQ(parse_mixing("attention"), MixingKind::Attention);
  EXPECT_EQ(parse_mixing("recurrent"), MixingKind::Recurrent);
  EXPECT_THROW(parse_mixing("lstm"), ConfigError);
}

}  // namespace
}  // namespace cyin
