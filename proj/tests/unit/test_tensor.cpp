#include <gtest/gtest.h>

#include <cstdint>

#include "pel/errors.hpp"
#include "pel/ops.hpp"

using namespace pel;

TEST(Tensor, DataLengthMatchesDims) {
  const Tensor t(Dims{2, 3, 4, 5}, 1.5);
  EXPECT_EQ(t.size(), 120u);
  EXPECT_EQ(t.at(1, 2, 3, 4), 1.5);
  EXPECT_FALSE(t.has_grad());
}

TEST(Tensor, MismatchedValueCountThrows) { EXPECT_THROW(Tensor(Dims{1, 1, 2, 2}, std::vector<double>(3)), ShapeError); }

TEST(Tensor, CloneIsDetached) {
  Tensor a(Dims{1, 1, 1, 2}, std::vector<double>{1, 2});
  Tensor b = a.clone();
  b.data()[0] = 7;
  EXPECT_EQ(a.data()[0], 1);
  EXPECT_FALSE(a.shares_storage(b));
}

TEST(Tensor, GradHasDataDims) {
  Tensor x(Dims{1, 2, 2, 2}, 0.3);
  x.set_requires_grad(true);
  Graph g;
  g.backward(sum(g, x));
  EXPECT_EQ(x.grad().size(), x.size());
}

TEST(Graph, SumGradientIsOnes) {
  Tensor x(Dims{1, 2, 3, 1}, std::vector<double>{1, -2, 3, 4, 5, 6});
  x.set_requires_grad(true);
  Graph g;
  g.backward(sum(g, x));
  for (double v : x.grad()) EXPECT_EQ(v, 1.0);
}

TEST(Graph, SigmoidSumAtZero) {
  Tensor x(Dims{1, 1, 2, 2}, 0.0);
  x.set_requires_grad(true);
  Graph g;
  g.backward(sum(g, sigmoid(g, x)));
  for (double v : x.grad()) EXPECT_EQ(v, 0.25);
}

TEST(Graph, NonScalarLossRejected) {
  Tensor x(Dims{1, 1, 1, 2}, 1.0);
  x.set_requires_grad(true);
  Graph g;
  const Tensor y = scale(g, x, 2.0);
  EXPECT_THROW(g.backward(y), UsageError);
}

TEST(Graph, SecondBackwardRejected) {
  Tensor x(Dims{1, 1, 1, 1}, 1.0);
  x.set_requires_grad(true);
  Graph g;
  const Tensor l = sum(g, x);
  g.backward(l);
  EXPECT_THROW(g.backward(l), UsageError);
}

TEST(Graph, InferenceRecordsNothing) {
  Tensor x(Dims{1, 1, 1, 3}, 1.0);
  x.set_requires_grad(true);
  Graph g = Graph::inference();
  (void)sigmoid(g, relu(g, x));
  EXPECT_EQ(g.size(), 0u);
}

TEST(Graph, UntrackedInputsRecordNothing) {
  const Tensor x(Dims{1, 1, 1, 3}, 1.0);
  Graph g;
  (void)sigmoid(g, x);
  EXPECT_EQ(g.size(), 0u);
}

TEST(Graph, GradientsAccumulateAcrossUses) {
  // loss = sum(x * x) + sum(x)  ->  d/dx = 2x + 1
  Tensor x(Dims{1, 1, 1, 3}, std::vector<double>{1, -2, 0.5});
  x.set_requires_grad(true);
  Graph g;
  g.backward(add(g, sum(g, mul(g, x, x)), sum(g, x)));
  const auto gx = x.grad();
  EXPECT_EQ(gx[0], 3.0);
  EXPECT_EQ(gx[1], -3.0);
  EXPECT_EQ(gx[2], 2.0);
}

TEST(ParameterRegistry, DuplicateNamesRejected) {
  ParameterRegistry reg;
  reg.add("w", Tensor(Dims{1, 1, 1, 1}));
  EXPECT_THROW(reg.add("w", Tensor(Dims{1, 1, 1, 1})), ConfigError);
  EXPECT_EQ(reg.size(), 1u);
  EXPECT_TRUE(reg.find("w")->tensor.requires_grad());
}

TEST(Tensor, StorageIs64ByteAligned) {
  // Vectorised kernels pick their summation order from the buffer address.
  for (std::size_t n : {1u, 3u, 7u, 33u, 1000u}) {
    const Tensor a(Dims{1, 1, 1, n});
    const Tensor b(Dims{1, 1, 1, n}, std::vector<double>(n, 2.0));
    const Tensor c = b.clone();
    for (const Tensor* t : {&a, &b, &c}) {
      EXPECT_EQ(reinterpret_cast<std::uintptr_t>(t->data().data()) % 64, 0u);
    }
  }
}
