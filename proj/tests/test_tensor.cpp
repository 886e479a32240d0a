// Copyright 2026 The spikefirst Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "spikefirst/rng.hpp"
#include "spikefirst/tensor.hpp"

namespace sf = spikefirst;
using sf::Tensor;

namespace {

Tensor random_tensor(sf::Shape shape, std::uint64_t stream, double lo = -1.0, double hi = 1.0) {
  sf::RngStream rng{99, stream, 0};
  Tensor t = sf::rng_uniform(rng, shape);
  for (double& x : t.data()) x = lo + (hi - lo) * x;
  return t;
}

TEST(Tensor, RejectsNonFiniteAndBadLength) {
  EXPECT_THROW(Tensor({2}, std::vector<double>{1.0, NAN}), sf::ParameterError);
  EXPECT_THROW(Tensor({2}, std::vector<double>{1.0, INFINITY}), sf::ParameterError);
  EXPECT_THROW(Tensor({3}, std::vector<double>{1.0, 2.0}), sf::DimensionError);
}

TEST(Tensor, ElementwiseOps) {
  Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  Tensor b = Tensor::matrix({{1, 1}, {1, 1}});
  a += b;
  EXPECT_EQ(a, Tensor::matrix({{2, 3}, {4, 5}}));
  a -= b;
  a *= 2.0;
  EXPECT_EQ(a, Tensor::matrix({{2, 4}, {6, 8}}));
  EXPECT_DOUBLE_EQ(a.sum(), 20.0);
  EXPECT_THROW(a += Tensor({3}), sf::DimensionError);
}

TEST(Matmul, HandExamples) {
  const Tensor m = Tensor::matrix({{3, 4}, {5, 6}});
  EXPECT_EQ(sf::matmul(Tensor::identity(2), m), m);
  EXPECT_EQ(sf::matmul(Tensor::matrix({{1, 2}, {3, 4}}), Tensor::matrix({{5, 6}, {7, 8}})),
            Tensor::matrix({{19, 22}, {43, 50}}));
  EXPECT_EQ(sf::matmul(Tensor({2, 2}), m), Tensor({2, 2}));
  EXPECT_THROW(sf::matmul(Tensor({2, 3}), Tensor({2, 3})), sf::DimensionError);
}

TEST(Matmul, IdentityIsExactOnRandomMatrix) {
  const Tensor a = random_tensor({7, 5}, 1);
  EXPECT_EQ(sf::matmul(a, Tensor::identity(5)), a);
}

TEST(Matmul, MatchesNaiveOracle) {
  for (auto [m, k, n] : {std::tuple{1, 1, 1}, {3, 7, 5}, {16, 33, 9}, {64, 10, 128}}) {
    const Tensor a = random_tensor({std::size_t(m), std::size_t(k)}, 10 + m);
    const Tensor b = random_tensor({std::size_t(k), std::size_t(n)}, 20 + n);
    const Tensor got = sf::matmul(a, b);
    const Tensor want = oracle::naive_matmul(a, b);
    EXPECT_LT(oracle::rel_error(oracle::to_vec(got), oracle::to_vec(want)), 1e-14);
  }
}

TEST(Matmul, GemmTransposesMatchOracle) {
  const Tensor a = random_tensor({4, 6}, 3), b = random_tensor({6, 5}, 4);
  const Tensor want = oracle::naive_matmul(a, b);
  // a^T stored as [6 x 4], b^T stored as [5 x 6].
  Tensor at({6, 4}), bt({5, 6});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 6; ++j) at.at(j, i) = a.at(i, j);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 5; ++j) bt.at(j, i) = b.at(i, j);
  Tensor c({4, 5});
  sf::gemm(true, true, 4, 5, 6, at.raw(), bt.raw(), c.raw(), false);
  EXPECT_LT(oracle::rel_error(oracle::to_vec(c), oracle::to_vec(want)), 1e-14);
  sf::gemm(false, false, 4, 5, 6, a.raw(), b.raw(), c.raw(), true);
  Tensor twice = want;
  twice *= 2.0;
  EXPECT_LT(oracle::rel_error(oracle::to_vec(c), oracle::to_vec(twice)), 1e-14);
}

TEST(Matmul, Deterministic) {
  const Tensor a = random_tensor({50, 70}, 5), b = random_tensor({70, 30}, 6);
  EXPECT_EQ(sf::matmul(a, b), sf::matmul(a, b));
}

TEST(Conv2d, HandExamples) {
  const Tensor x({1, 2, 2}, {1, 2, 3, 4});
  const Tensor k({1, 1, 2, 2}, {1, 0, 0, 1});
  EXPECT_EQ(sf::conv2d(x, k, 1, 0), Tensor({1, 1, 1}, {5}));
  EXPECT_EQ(sf::conv2d(Tensor({2, 4, 4}), random_tensor({3, 2, 3, 3}, 7), 1, 1), Tensor({3, 4, 4}));
}

TEST(Conv2d, UnitKernelIsIdentityBitExact) {
  const Tensor x = random_tensor({1, 6, 5}, 8);
  EXPECT_EQ(sf::conv2d(x, Tensor({1, 1, 1, 1}, {1.0}), 1, 0), x);
}

TEST(Conv2d, MatchesDirectOracle) {
  struct Case { std::size_t ci, h, w, co, k, stride, pad; };
  for (const Case c : {Case{1, 5, 5, 1, 3, 1, 0}, Case{3, 8, 8, 4, 3, 1, 1}, Case{2, 7, 9, 3, 3, 2, 1},
                       Case{4, 8, 8, 2, 5, 1, 2}, Case{1, 28, 28, 6, 5, 1, 0}}) {
    const Tensor x = random_tensor({c.ci, c.h, c.w}, 30 + c.h);
    const Tensor k = random_tensor({c.co, c.ci, c.k, c.k}, 40 + c.co);
    const Tensor got = sf::conv2d(x, k, c.stride, c.pad);
    const Tensor want = oracle::naive_conv(x, k, c.stride, c.pad);
    ASSERT_EQ(got.shape(), want.shape());
    EXPECT_LT(oracle::rel_error(oracle::to_vec(got), oracle::to_vec(want)), 1e-14);
  }
}

TEST(Conv2d, BatchedEqualsPerImage) {
  const Tensor x = random_tensor({3, 2, 6, 6}, 50);
  const Tensor k = random_tensor({4, 2, 3, 3}, 51);
  const Tensor y = sf::conv2d(x, k, 1, 1);
  for (std::size_t b = 0; b < 3; ++b) {
    Tensor xb({2, 6, 6});
    std::copy_n(x.raw() + b * 72, 72, xb.raw());
    const Tensor yb = sf::conv2d(xb, k, 1, 1);
    for (std::size_t i = 0; i < yb.size(); ++i) EXPECT_NEAR(y[b * yb.size() + i], yb[i], 1e-13);
  }
}

TEST(Conv2d, ShapeErrors) {
  EXPECT_THROW(sf::conv2d(Tensor({1, 4, 4}), Tensor({1, 1, 5, 5}), 1, 0), sf::ShapeError);
  EXPECT_THROW(sf::conv2d(Tensor({1, 4, 4}), Tensor({1, 1, 2, 2}), 3, 0), sf::ShapeError);
  EXPECT_THROW(sf::conv2d(Tensor({2, 4, 4}), Tensor({1, 1, 2, 2}), 1, 0), sf::DimensionError);
}

TEST(Conv2dBackward, ZeroAndIdentityCases) {
  const Tensor x = random_tensor({1, 3, 3}, 60);
  const Tensor k = random_tensor({2, 1, 2, 2}, 61);
  const sf::ConvGrads z = sf::conv2d_backward(Tensor({2, 2, 2}), x, k, 1, 0);
  EXPECT_EQ(z.grad_input, Tensor({1, 3, 3}));
  EXPECT_EQ(z.grad_kernel, Tensor({2, 1, 2, 2}));
  const Tensor g = random_tensor({1, 3, 3}, 62);
  EXPECT_EQ(sf::conv2d_backward(g, x, Tensor({1, 1, 1, 1}, {1.0}), 1, 0).grad_input, g);
  EXPECT_THROW(sf::conv2d_backward(Tensor({2, 3, 3}), x, k, 1, 0), sf::DimensionError);
}

// L = sum(conv(x, k) * r) for a fixed random r, so dL/dy = r.
void check_conv_fd(sf::Shape xs, sf::Shape ks, std::size_t stride, std::size_t pad, std::uint64_t s) {
  const Tensor x = random_tensor(xs, s), k = random_tensor(ks, s + 1);
  const Tensor y = sf::conv2d(x, k, stride, pad);
  const Tensor r = random_tensor(y.shape(), s + 2);
  const sf::ConvGrads g = sf::conv2d_backward(r, x, k, stride, pad);
  auto loss_x = [&](const std::vector<double>& v) {
    const Tensor yy = sf::conv2d(Tensor(xs, v), k, stride, pad);
    double l = 0;
    for (std::size_t i = 0; i < yy.size(); ++i) l += yy[i] * r[i];
    return l;
  };
  auto loss_k = [&](const std::vector<double>& v) {
    const Tensor yy = sf::conv2d(x, Tensor(ks, v), stride, pad);
    double l = 0;
    for (std::size_t i = 0; i < yy.size(); ++i) l += yy[i] * r[i];
    return l;
  };
  EXPECT_LT(oracle::rel_error(oracle::to_vec(g.grad_input), oracle::central_diff(loss_x, oracle::to_vec(x), 1e-5)), 1e-6);
  EXPECT_LT(oracle::rel_error(oracle::to_vec(g.grad_kernel), oracle::central_diff(loss_k, oracle::to_vec(k), 1e-5)), 1e-6);
}

TEST(Conv2dBackward, MatchesFiniteDifferences) {
  check_conv_fd({1, 3, 3}, {1, 1, 2, 2}, 1, 0, 70);
  check_conv_fd({2, 6, 6}, {3, 2, 3, 3}, 1, 1, 80);
  check_conv_fd({4, 8, 8}, {2, 4, 2, 2}, 2, 0, 90);
  check_conv_fd({2, 2, 5, 5}, {2, 2, 3, 3}, 1, 0, 100);
}

TEST(Pool2d, HandExamples) {
  const Tensor x({1, 2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(sf::pool2d(x, 2, sf::PoolMode::kAverage).output, Tensor({1, 1, 1}, {2.5}));
  EXPECT_EQ(sf::pool2d(x, 2, sf::PoolMode::kMax).output, Tensor({1, 1, 1}, {4}));
  const Tensor r = random_tensor({2, 3, 3}, 110);
  EXPECT_EQ(sf::pool2d(r, 1, sf::PoolMode::kAverage).output, r);
  EXPECT_EQ(sf::pool2d(r, 1, sf::PoolMode::kMax).output, r);
  EXPECT_THROW(sf::pool2d(r, 2, sf::PoolMode::kMax), sf::ShapeError);
}

TEST(Pool2d, MatchesOracle) {
  const Tensor x = random_tensor({3, 8, 8}, 120);
  for (bool mx : {false, true}) {
    const auto got = sf::pool2d(x, 2, mx ? sf::PoolMode::kMax : sf::PoolMode::kAverage).output;
    EXPECT_LT(oracle::rel_error(oracle::to_vec(got), oracle::to_vec(oracle::naive_pool(x, 2, mx))), 1e-15);
  }
}

TEST(Pool2dBackward, MatchesFiniteDifferences) {
  for (bool mx : {false, true}) {
    const sf::PoolMode mode = mx ? sf::PoolMode::kMax : sf::PoolMode::kAverage;
    const sf::Shape xs{4, 8, 8};
    const Tensor x = random_tensor(xs, 130);
    const sf::PoolResult pr = sf::pool2d(x, 2, mode);
    const Tensor r = random_tensor(pr.output.shape(), 131);
    const Tensor g = sf::pool2d_backward(r, xs, 2, mode, pr.argmax);
    auto loss = [&](const std::vector<double>& v) {
      const Tensor y = sf::pool2d(Tensor(xs, v), 2, mode).output;
      double l = 0;
      for (std::size_t i = 0; i < y.size(); ++i) l += y[i] * r[i];
      return l;
    };
    // Random inputs keep every max unique by a margin far above h.
    EXPECT_LT(oracle::rel_error(oracle::to_vec(g), oracle::central_diff(loss, oracle::to_vec(x), 1e-7)), 1e-6);
  }
}

TEST(Rng, PhiloxKnownAnswers) {
  using A = sf::Philox4x32;
  EXPECT_EQ(sf::philox4x32_10({0, 0, 0, 0}, {0, 0}), (A{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(sf::philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
            (A{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(sf::philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
            (A{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Rng, ReplayIsBitIdentical) {
  sf::RngStream a{5, 6, 7}, b{5, 6, 7};
  EXPECT_EQ(sf::rng_uniform(a, {100}), sf::rng_uniform(b, {100}));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.counter, 107u);
  sf::RngStream c{5, 6, 7}, d{5, 6, 7};
  EXPECT_EQ(sf::rng_gaussian(c, {50}, 1.0, 2.0), sf::rng_gaussian(d, {50}, 1.0, 2.0));
}

TEST(Rng, DistinctStreamsDiffer) {
  sf::RngStream a{5, 1, 0}, b{5, 2, 0};
  EXPECT_NE(sf::rng_uniform(a, {8}), sf::rng_uniform(b, {8}));
}

TEST(Rng, UniformMean) {
  sf::RngStream r{1, 2, 0};
  const Tensor u = sf::rng_uniform(r, {100000});
  double mn = 1, mx = 0;
  for (double x : u.data()) {
    mn = std::min(mn, x);
    mx = std::max(mx, x);
  }
  EXPECT_GE(mn, 0.0);
  EXPECT_LT(mx, 1.0);
  EXPECT_NEAR(u.sum() / 1e5, 0.5, 0.01);
}

TEST(Rng, GaussianMoments) {
  sf::RngStream r{3, 4, 0};
  const Tensor g = sf::rng_gaussian(r, {100000}, 2.0, 3.0);
  double m = g.sum() / 1e5, v = 0;
  for (double x : g.data()) v += (x - m) * (x - m);
  v /= 1e5;
  EXPECT_NEAR(m, 2.0, 0.05);
  EXPECT_NEAR(v, 9.0, 0.2);
  sf::RngStream z{3, 4, 0};
  EXPECT_EQ(sf::rng_gaussian(z, {10}, 1.5, 0.0), Tensor({10}, 1.5));
  EXPECT_THROW(sf::rng_gaussian(z, {1}, 0.0, -1.0), sf::ParameterError);
}

TEST(Rng, BelowIsInRangeAndUnbiased) {
  sf::RngStream r{8, 9, 0};
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[r.below(7)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 400);
}

}  // namespace
