#include <gtest/gtest.h>

#include <cmath>

#include "grad_check.hpp"
#include "hnko/autodiff.hpp"
#include "hnko/error.hpp"
#include "hnko/numerics.hpp"
#include "hnko/orthogonal.hpp"

using namespace testing_util;

namespace {

// Contract a matrix-valued output with a fixed random weight so every
// adjoint entry is exercised.
ad::Var contract(ad::Tape& t, ad::Var out, unsigned seed) {
  return ad::inner(out, t.constant(random_matrix(out.rows(), out.cols(), seed)));
}

constexpr double kTol = 1e-7;

}  // namespace

TEST(Autodiff, ForwardValuesMatchEigen) {
  ad::Tape t;
  const Matrix a = random_matrix(3, 4, 1), b = random_matrix(4, 2, 2), c = random_matrix(3, 1, 3);
  auto va = t.leaf(a), vb = t.leaf(b), vc = t.leaf(c);
  EXPECT_EQ(ad::matmul(va, vb).value(), a * b);
  EXPECT_EQ(ad::add_column(va, vc).value(), a.colwise() + c.col(0));
  EXPECT_EQ(ad::tanh(va).value(), a.array().tanh().matrix());
  EXPECT_EQ(ad::transpose(va).value(), a.transpose());
  EXPECT_DOUBLE_EQ(ad::sum_squares(va).scalar(), a.squaredNorm());
  EXPECT_EQ(ad::col_sum_squares(va).value(), a.colwise().squaredNorm());
  EXPECT_EQ(ad::slice_cols(va, 1, 2).value(), a.middleCols(1, 2));
  Matrix off = a.leftCols(3);
  off.diagonal().setZero();
  EXPECT_EQ(ad::off_diagonal(ad::slice_cols(va, 0, 3)).value(), off);
}

TEST(Autodiff, ExpmSkewMatchesMaterialize) {
  ad::Tape t;
  const Matrix p = random_matrix(10, 1, 4);
  const Matrix k = ad::expm_skew(t.leaf(p), 5).value();
  EXPECT_LT((k - hnko::numerics::expm(hnko::orthogonal::alpha(5, p.col(0)))).norm(), 1e-15);
}

TEST(Autodiff, MatmulAddSubScale) {
  Builder f = [](ad::Tape& t, const std::vector<ad::Var>& v) {
    auto y = ad::sub(ad::add(ad::matmul(v[0], v[1]), ad::scale(v[2], 1.5)), v[2]);
    return contract(t, y, 10);
  };
  EXPECT_LT(gradient_error(f, {random_matrix(3, 4, 1), random_matrix(4, 2, 2), random_matrix(3, 2, 3)}), kTol);
}

TEST(Autodiff, AddColumnAndSubScalar) {
  Builder f = [](ad::Tape& t, const std::vector<ad::Var>& v) {
    return contract(t, ad::sub_scalar(ad::add_column(v[0], v[1]), v[2]), 11);
  };
  EXPECT_LT(gradient_error(f, {random_matrix(3, 5, 4), random_matrix(3, 1, 5), random_matrix(1, 1, 6)}), kTol);
}

TEST(Autodiff, ElementwiseNonlinearities) {
  Builder f = [](ad::Tape& t, const std::vector<ad::Var>& v) {
    auto y = ad::add(ad::tanh(v[0]), ad::exp(ad::scale(v[0], 0.5)));
    return contract(t, y, 12);
  };
  EXPECT_LT(gradient_error(f, {random_matrix(4, 3, 7)}), kTol);
  Builder g = [](ad::Tape&, const std::vector<ad::Var>& v) {
    return ad::pow(ad::sum_squares(v[0]), -0.5);
  };
  EXPECT_LT(gradient_error(g, {random_matrix(4, 3, 8)}), kTol);
}

TEST(Autodiff, Reductions) {
  Builder f = [](ad::Tape& t, const std::vector<ad::Var>& v) {
    auto a = ad::sum_squares(ad::col_sum_squares(v[0]));
    auto b = ad::inner(v[0], v[1]);
    return ad::add(a, contract(t, b, 13));
  };
  EXPECT_LT(gradient_error(f, {random_matrix(3, 4, 9), random_matrix(3, 4, 10)}), kTol);
}

TEST(Autodiff, StructuralOps) {
  Builder f = [](ad::Tape& t, const std::vector<ad::Var>& v) {
    auto s = ad::slice_cols(v[0], 1, 3);                 // 3 x 3
    auto w = ad::scale_cols(s, v[1]);                    // columns scaled by 1 x 3
    auto o = ad::off_diagonal(ad::matmul(ad::transpose(w), w));
    return ad::sum_squares(ad::add(o, ad::scale(ad::transpose(o), 0.3)));
  };
  EXPECT_LT(gradient_error(f, {random_matrix(3, 5, 11), random_matrix(1, 3, 12)}), kTol);
}

TEST(Autodiff, Kron) {
  Builder f = [](ad::Tape& t, const std::vector<ad::Var>& v) {
    return contract(t, ad::kron(v[0], v[1]), 14);
  };
  EXPECT_LT(gradient_error(f, {random_matrix(2, 3, 13), random_matrix(3, 2, 14)}), kTol);
}

TEST(Autodiff, ExpmSkewSmallAndLarge) {
  // Large parameters force several squarings.
  for (double scale : {0.05, 1.0, 6.0}) {
    Builder f = [](ad::Tape& t, const std::vector<ad::Var>& v) {
      return contract(t, ad::expm_skew(v[0], 6), 15);
    };
    EXPECT_LT(gradient_error(f, {random_matrix(15, 1, 15, scale)}), 1e-6) << scale;
  }
}

TEST(Autodiff, ReusedNodeAccumulates) {
  ad::Tape t;
  auto x = t.leaf(Matrix::Constant(1, 1, 3.0));
  auto y = ad::inner(x, x);  // x^2
  auto z = ad::add(y, ad::scale(x, 2.0));
  t.backward(z);
  EXPECT_DOUBLE_EQ(x.grad()(0, 0), 8.0);
  t.backward(z);  // adjoints are reset between passes
  EXPECT_DOUBLE_EQ(x.grad()(0, 0), 8.0);
}

TEST(Autodiff, ShapeErrors) {
  ad::Tape t;
  auto a = t.leaf(Matrix::Zero(2, 3));
  auto b = t.leaf(Matrix::Zero(2, 3));
  EXPECT_THROW(ad::matmul(a, b), hnko::DimensionError);
  EXPECT_THROW(t.backward(a), hnko::DimensionError);
  EXPECT_THROW(ad::expm_skew(t.leaf(Matrix::Zero(4, 1)), 4), hnko::DimensionError);
}
