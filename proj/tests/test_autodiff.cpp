#include "gradcheck.hpp"

#include <gtest/gtest.h>

namespace hgnas {
namespace {

using testing::gradcheck;
using testing::project_to_scalar;
using testing::random_matrix;
using testing::Taped;
using testing::Vard;

constexpr double kTol = 1e-4;

TEST(Tape, GradientOfProductIsTransposed) {
  Taped t;
  MatrixXd a(1, 2), b(2, 1);
  a << 2, 3;
  b << 5, 7;
  auto va = t.variable(a);
  auto vb = t.variable(b);
  t.backward(ad::matmul(va, vb));
  EXPECT_EQ(t.grad(va.id), b.transpose());
  EXPECT_EQ(t.grad(vb.id), a.transpose());
}

TEST(Tape, ReusedNodeAccumulates) {
  Taped t;
  MatrixXd x = MatrixXd::Constant(1, 1, 3.0);
  auto v = t.variable(x);
  t.backward(ad::cwise_mul(v, v) + v);  // d/dx (x^2 + x) = 2x + 1
  EXPECT_DOUBLE_EQ(t.grad(v.id)(0, 0), 7.0);
}

TEST(Tape, ConstantsGetNoGradient) {
  Taped t;
  auto c = t.constant(MatrixXd::Ones(2, 2));
  auto v = t.variable(MatrixXd::Ones(2, 2));
  t.backward(ad::sum_all(ad::cwise_mul(c, v)));
  EXPECT_FALSE(t.has_grad(c.id));
  EXPECT_TRUE(t.has_grad(v.id));
}

TEST(Tape, BackwardTwiceGivesSameGradient) {
  Taped t;
  auto v = t.variable(MatrixXd::Constant(2, 2, 0.5));
  auto loss = ad::sum_all(ad::tanh(v));
  t.backward(loss);
  MatrixXd first = t.grad(v.id);
  t.backward(loss);
  EXPECT_EQ(first, t.grad(v.id));
}

TEST(Tape, RejectsNonScalarLoss) {
  Taped t;
  auto v = t.variable(MatrixXd::Ones(2, 1));
  EXPECT_THROW(t.backward(v), std::invalid_argument);
}

class ElementaryGradients : public ::testing::TestWithParam<int> {};

TEST_P(ElementaryGradients, MatchFiniteDifferences) {
  std::mt19937_64 rng(static_cast<std::uint64_t>(GetParam()));
  const std::uint64_t seed = static_cast<std::uint64_t>(GetParam()) + 100;
  auto a = random_matrix(3, 4, rng);
  auto b = random_matrix(3, 4, rng);
  auto w = random_matrix(4, 2, rng);
  auto row = random_matrix(1, 4, rng);
  auto s = random_matrix(1, 1, rng);

  EXPECT_LT(gradcheck([&](Taped&, const std::vector<Vard>& v) { return project_to_scalar(ad::matmul(v[0], v[1]), seed); },
                      {a, w}),
            kTol);
  EXPECT_LT(gradcheck([&](Taped&, const std::vector<Vard>& v) { return project_to_scalar(v[0] - v[1], seed); }, {a, b}),
            kTol);
  EXPECT_LT(gradcheck([&](Taped&, const std::vector<Vard>& v) { return project_to_scalar(ad::add_row(v[0], v[1]), seed); },
                      {a, row}),
            kTol);
  EXPECT_LT(gradcheck([&](Taped&, const std::vector<Vard>& v) { return project_to_scalar(ad::elu(v[0]), seed); }, {a}),
            kTol);
  EXPECT_LT(gradcheck([&](Taped&, const std::vector<Vard>& v) { return project_to_scalar(ad::sigmoid(v[0]), seed); }, {a}),
            kTol);
  EXPECT_LT(gradcheck([&](Taped&, const std::vector<Vard>& v) { return project_to_scalar(ad::maximum(v[0], v[1]), seed); },
                      {a, b}),
            kTol);
  EXPECT_LT(gradcheck([&](Taped&, const std::vector<Vard>& v) { return project_to_scalar(ad::softmax_rows(v[0]), seed); },
                      {a}),
            kTol);
  EXPECT_LT(gradcheck([&](Taped&, const std::vector<Vard>& v) { return project_to_scalar(ad::scale_by(v[0], v[1]), seed); },
                      {a, s}),
            kTol);
  EXPECT_LT(gradcheck(
                [&](Taped&, const std::vector<Vard>& v) {
                  return project_to_scalar(ad::concat_cols<double>({ad::block_cols(v[0], 1, 2), v[1]}), seed);
                },
                {a, b}),
            kTol);
  EXPECT_LT(gradcheck(
                [&](Taped&, const std::vector<Vard>& v) {
                  return project_to_scalar(ad::concat_rows<double>({ad::block_rows(v[0], 1, 2), ad::mean_rows(v[1])}), seed);
                },
                {a, b}),
            kTol);
}

INSTANTIATE_TEST_SUITE_P(Random, ElementaryGradients, ::testing::Range(0, 10));

}  // namespace
}  // namespace hgnas
