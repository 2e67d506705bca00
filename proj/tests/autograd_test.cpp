#include <gtest/gtest.h>

#include <map>
#include <vector>

#include "cyin/autograd.hpp"
#include "cyin/errors.hpp"
#include "cyin/rng.hpp"
#include "grad_check.hpp"

namespace cyin {
namespace {

using ag::Matrix;
using ag::Var;
using testing::gradient_relative_error;

class OpGradients : public ::testing::Test {
 protected:
  Rng rng{42};
  Var rand_leaf(int r, int c) { return ag::leaf(rng.normal_matrix(r, c)); }
  Var positive_leaf(int r, int c) {
    return ag::leaf(rng.normal_matrix(r, c).array().abs() + 0.5);
  }
  // Random projection turns any matrix into a scalar with generic gradient.
  Var project(const Var& x) {
    auto it = probes_.find({x.rows(), x.cols()});
    if (it == probes_.end())
      it = probes_.emplace(std::make_pair(x.rows(), x.cols()), rng.normal_matrix(x.rows(), x.cols())).first;
    return ag::sum(ag::mul(x, ag::constant(it->second)));
  }
  std::map<std::pair<ag::Index, ag::Index>, Matrix> probes_;
};

TEST_F(OpGradients, Elementwise) {
  Var a = rand_leaf(3, 4), b = rand_leaf(3, 4), p = positive_leaf(3, 4);
  EXPECT_LT(gradient_relative_error({a, b}, [&] { return project(ag::add(a, b)); }), 1e-7);
  EXPECT_LT(gradient_relative_error({a, b}, [&] { return project(ag::sub(a, b)); }), 1e-7);
  EXPECT_LT(gradient_relative_error({a, b}, [&] { return project(ag::mul(a, b)); }), 1e-7);
  EXPECT_LT(gradient_relative_error({a}, [&] { return project(ag::scale(a, -2.5)); }), 1e-7);
  EXPECT_LT(gradient_relative_error({a}, [&] { return project(ag::tanh(a)); }), 1e-7);
  EXPECT_LT(gradient_relative_error({a}, [&] { return project(ag::relu(a)); }), 1e-7);
  EXPECT_LT(gradient_relative_error({a}, [&] { return project(ag::softplus(a)); }), 1e-7);
  EXPECT_LT(gradient_relative_error({a}, [&] { return project(ag::exp(a)); }), 1e-7);
  EXPECT_LT(gradient_relative_error({p}, [&] { return project(ag::log(p)); }), 1e-7);
  EXPECT_LT(gradient_relative_error({p}, [&] { return project(ag::sqrt(p)); }), 1e-7);
  EXPECT_LT(gradient_relative_error({a}, [&] { return project(ag::square(a)); }), 1e-7);
  EXPECT_LT(gradient_relative_error({a}, [&] { return project(ag::abs(a)); }), 1e-7);
}

TEST_F(OpGradients, MatrixAndBroadcast) {
  Var a = rand_leaf(3, 4), w = rand_leaf(4, 2), bias = rand_leaf(1, 2);
  EXPECT_LT(gradient_relative_error({a, w, bias},
                                    [&] { return project(ag::add_row(ag::matmul(a, w), bias)); }),
            1e-7);
  ag::Vector weights(3);
  weights << 1.0, 0.0, -2.0;
  EXPECT_LT(gradient_relative_error({a}, [&] { return project(ag::scale_rows(a, weights)); }), 1e-7);
  EXPECT_LT(gradient_relative_error({a}, [&] { return ag::mean(ag::row_sum(ag::square(a))); }), 1e-7);
}

TEST_F(OpGradients, Structural) {
  Var a = rand_leaf(4, 3), b = rand_leaf(4, 2), c = rand_leaf(2, 3);
  std::vector<Var> cols{a, b};
  std::vector<Var> rows{a, c};
  EXPECT_LT(gradient_relative_error({a, b}, [&] { return project(ag::concat_cols(cols)); }), 1e-7);
  EXPECT_LT(gradient_relative_error({a, c}, [&] { return project(ag::concat_rows(rows)); }), 1e-7);
  EXPECT_LT(gradient_relative_error({a}, [&] { return project(ag::slice_cols(a, 1, 2)); }), 1e-7);
  std::vector<ag::Index> idx{3, 1, 1};
  EXPECT_LT(gradient_relative_error({a}, [&] { return project(ag::gather_rows(a, idx)); }), 1e-7);
  Var d = rand_leaf(4, 3);
  std::vector<bool> take{true, false, false, true};
  EXPECT_LT(gradient_relative_error({a, d}, [&] { return project(ag::where_rows(take, a, d)); }), 1e-7);
  EXPECT_LT(gradient_relative_error({a}, [&] { return project(ag::segment_mean(a, 2)); }), 1e-7);
}

TEST_F(OpGradients, NormalizationAndSoftmax) {
  Var x = rand_leaf(3, 5), g = rand_leaf(1, 5), bias = rand_leaf(1, 5);
  EXPECT_LT(gradient_relative_error({x, g, bias}, [&] { return project(ag::layer_norm(x, g, bias)); }),
            1e-6);
  EXPECT_LT(gradient_relative_error({x}, [&] { return project(ag::softmax_rows(x)); }), 1e-7);
  EXPECT_LT(gradient_relative_error({x}, [&] { return project(ag::log_softmax_rows(x)); }), 1e-7);
}

TEST_F(OpGradients, SegmentAttention) {
  Var q = rand_leaf(6, 2), k = rand_leaf(6, 2), v = rand_leaf(6, 3);
  EXPECT_LT(gradient_relative_error(
                {q, k, v}, [&] { return project(ag::segment_attention(q, k, v, 3, 0.7)); }),
            1e-7);
}

TEST(Autograd, SegmentAttentionMatchesPerSegmentSoftmax) {
  Rng rng(3);
  Matrix q = rng.normal_matrix(4, 2), k = rng.normal_matrix(4, 2), v = rng.normal_matrix(4, 2);
  Var out = ag::segment_attention(ag::constant(q), ag::constant(k), ag::constant(v), 2, 0.5);
  for (int s = 0; s < 2; ++s) {
    Matrix p = ag::attention_weights(q.middleRows(s * 2, 2), k.middleRows(s * 2, 2), 0.5);
    Matrix expected = p * v.middleRows(s * 2, 2);
    EXPECT_TRUE(out.value().middleRows(s * 2, 2).isApprox(expected, 1e-14));
  }
}

TEST(Autograd, ConstantsCarryNoGraph) {
  Var a = ag::constant(Matrix::Ones(2, 2));
  Var b = ag::add(a, a);
  EXPECT_FALSE(b.requires_grad());
  EXPECT_TRUE(b.node()->parents.empty());
}

TEST(Autograd, NoGradGuardSuppressesRecording) {
  Var w = ag::leaf(Matrix::Ones(2, 2));
  {
    ag::NoGradGuard guard;
    EXPECT_FALSE(ag::add(w, w).requires_grad());
  }
  EXPECT_TRUE(ag::add(w, w).requires_grad());
}

TEST(Autograd, SharedSubexpressionAccumulates) {
  Var w = ag::leaf(Matrix::Constant(1, 1, 3.0));
  Var y = ag::mul(w, w);  // dy/dw = 2w
  ag::backward(ag::add(y, w));
  EXPECT_DOUBLE_EQ(w.grad()(0, 0), 7.0);
}

TEST(Autograd, ShapeErrors) {
  Var a = ag::constant(Matrix::Ones(2, 3));
  Var b = ag::constant(Matrix::Ones(3, 2));
  EXPECT_THROW(ag::add(a, b), DimensionError);
  EXPECT_THROW(ag::matmul(a, a), DimensionError);
  EXPECT_THROW(ag::segment_mean(a, 4), DimensionError);
}

}  // namespace
}  // namespace cyin
