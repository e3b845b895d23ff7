// Copyright (c) 2026 The PointHR Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "pointhr/gradcheck.hpp"
#include "pointhr/seq_ops.hpp"
#include "support.hpp"

namespace pointhr {
namespace {

NeighborTable self_table(std::size_t n) {
  NeighborTable t;
  t.query_count = n;
  t.k = 1;
  for (std::uint32_t i = 0; i < n; ++i) t.indices.push_back(i);
  return t;
}

Mlp2 identity_mlp(std::size_t c) { return {Linear::identity(c), Linear::identity(c)}; }

TEST(Gather, MatchesLoopOracle) {
  std::mt19937_64 rng(1);
  const Matrix f = testing::random_matrix(rng, 64, 8);
  const auto table = testing::random_table(rng, 64, 64, 5);
  const auto g = gather_neighbors(f, table);
  for (std::size_t i = 0; i < 64; ++i) {
    for (std::size_t n = 0; n < 5; ++n) {
      for (std::size_t c = 0; c < 8; ++c) ASSERT_EQ(g(i, n, c), f(table.indices[i * 5 + n], c));
    }
  }
  EXPECT_EQ(gather_neighbors(f, self_table(64)).slot(3, 0)[2], f(3, 2));
}

TEST(Softmax, ZeroScoresAreUniform) {
  const auto w = neighbor_softmax(NeighborTensor(2, 4, 3));
  for (double v : w.values()) EXPECT_EQ(v, 0.25);
}

TEST(Softmax, LargeScoresDoNotOverflow) {
  NeighborTensor s(1, 2, 1);
  s(0, 0, 0) = 1000.0;
  s(0, 1, 0) = -1000.0;
  const auto w = neighbor_softmax(s);
  EXPECT_EQ(w(0, 0, 0), 1.0);
  EXPECT_EQ(w(0, 1, 0), 0.0);
}

TEST(Softmax, SlicesSumToOne) {
  std::mt19937_64 rng(2);
  NeighborTensor s(32, 8, 4);
  std::uniform_real_distribution<double> u(-5, 5);
  for (double& v : s.values()) v = u(rng);
  const auto w = neighbor_softmax(s);
  for (std::size_t i = 0; i < 32; ++i) {
    for (std::size_t d = 0; d < 4; ++d) {
      double sum = 0.0;
      for (std::size_t n = 0; n < 8; ++n) sum += w(i, n, d);
      ASSERT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

struct AttentionFixture {
  Matrix q, k, v;
  NeighborTable table;
  explicit AttentionFixture(std::mt19937_64& rng, std::size_t m = 16, std::size_t c = 8, std::size_t kk = 4)
      : q(testing::random_matrix(rng, m, c)),
        k(testing::random_matrix(rng, m, c)),
        v(testing::random_matrix(rng, m, c)),
        table(testing::random_table(rng, m, m, kk)) {}
  LocalExtractInputs inputs() const { return {q, k, v, table}; }
};

TEST(Va, ZeroPhiAveragesNeighbors) {
  std::mt19937_64 rng(3);
  const AttentionFixture f(rng);
  const Matrix out = va_extract(f.inputs(), Mlp2::zeros(8, 8, 8));
  for (std::size_t i = 0; i < 16; ++i) {
    for (std::size_t c = 0; c < 8; ++c) {
      double mean = 0.0;
      for (std::size_t n = 0; n < 4; ++n) mean += f.v(f.table.indices[i * 4 + n], c);
      ASSERT_NEAR(out(i, c), mean / 4.0, 1e-15);
    }
  }
}

TEST(Va, SingleSelfNeighborReturnsValues) {
  std::mt19937_64 rng(4);
  AttentionFixture f(rng);
  f.table = self_table(16);
  EXPECT_EQ(va_extract(f.inputs(), testing::random_mlp(rng, 8, 8, 8)), f.v);
}

TEST(Va, MatchesLoopOracle) {
  std::mt19937_64 rng(5);
  const AttentionFixture f(rng);
  const auto phi = testing::random_mlp(rng, 8, 8, 8);
  EXPECT_EQ(va_extract(f.inputs(), phi), testing::attention_oracle(f.q, f.k, f.v, f.table, phi, 8));
}

TEST(Va, WidthMismatchThrows) {
  std::mt19937_64 rng(6);
  const AttentionFixture f(rng);
  EXPECT_THROW(va_extract(f.inputs(), Mlp2::zeros(8, 8, 4)), InvalidArgument);
}

TEST(Gva, MatchesLoopOracle) {
  std::mt19937_64 rng(7);
  const AttentionFixture f(rng);
  const auto phi = testing::random_mlp(rng, 8, 8, 2);
  EXPECT_EQ(gva_extract(f.inputs(), phi, 2), testing::attention_oracle(f.q, f.k, f.v, f.table, phi, 2));
}

TEST(Gva, GroupsEqualChannelsIsVa) {
  std::mt19937_64 rng(8);
  const AttentionFixture f(rng);
  const auto phi = testing::random_mlp(rng, 8, 8, 8);
  EXPECT_EQ(gva_extract(f.inputs(), phi, 8), va_extract(f.inputs(), phi));
}

TEST(Gva, SingleGroupIsScalarAttention) {
  std::mt19937_64 rng(9);
  const AttentionFixture f(rng);
  const auto phi = testing::random_mlp(rng, 8, 8, 1);
  const Matrix out = gva_extract(f.inputs(), phi, 1);
  for (std::size_t i = 0; i < 16; ++i) {
    std::vector<double> logit(4);
    for (std::size_t n = 0; n < 4; ++n) {
      std::vector<double> rel(8);
      for (std::size_t c = 0; c < 8; ++c) rel[c] = f.q(i, c) - f.k(f.table.indices[i * 4 + n], c);
      logit[n] = testing::mlp(phi, rel)[0];
    }
    const double peak = *std::max_element(logit.begin(), logit.end());
    double z = 0.0;
    for (double& l : logit) z += (l = std::exp(l - peak));
    for (std::size_t c = 0; c < 8; ++c) {
      double acc = 0.0;
      for (std::size_t n = 0; n < 4; ++n) acc += logit[n] / z * f.v(f.table.indices[i * 4 + n], c);
      ASSERT_NEAR(out(i, c), acc, 1e-14);
    }
  }
}

TEST(Gva, NonDivisibleGroupsThrow) {
  std::mt19937_64 rng(10);
  const AttentionFixture f(rng);
  EXPECT_THROW(gva_extract(f.inputs(), Mlp2::zeros(8, 8, 3), 3), InvalidArgument);
}

TEST(Gva, PositionTermMatchesOracle) {
  std::mt19937_64 rng(11);
  const AttentionFixture f(rng);
  NeighborTensor pos(16, 4, 8);
  std::uniform_real_distribution<double> u(-1, 1);
  for (double& p : pos.values()) p = u(rng);
  const auto phi = testing::random_mlp(rng, 8, 8, 4);
  const LocalExtractInputs in{f.q, f.k, f.v, f.table, &pos};
  EXPECT_EQ(gva_extract(in, phi, 4), testing::attention_oracle(f.q, f.k, f.v, f.table, phi, 4, &pos));
}

TEST(MlpExtract, IdentitySelfTableReturnsValues) {
  std::mt19937_64 rng(12);
  const Matrix v = testing::random_matrix(rng, 10, 4, 0.0, 1.0);
  EXPECT_EQ(mlp_extract(v, self_table(10), identity_mlp(4)), v);
}

TEST(MlpExtract, MatchesLoopOracle) {
  std::mt19937_64 rng(13);
  const Matrix v = testing::random_matrix(rng, 16, 8);
  const auto table = testing::random_table(rng, 16, 16, 4);
  const auto phi = testing::random_mlp(rng, 8, 8, 8);
  EXPECT_EQ(mlp_extract(v, table, phi), testing::mlp_extract_oracle(v, table, phi));
}

TEST(MlpExtract, RowOrderDoesNotMatter) {
  std::mt19937_64 rng(14);
  const Matrix v = testing::random_matrix(rng, 16, 8);
  auto table = testing::random_table(rng, 16, 16, 4);
  const auto phi = testing::random_mlp(rng, 8, 8, 8);
  const Matrix a = mlp_extract(v, table, phi);
  for (std::size_t i = 0; i < 16; ++i) {
    std::reverse(table.indices.begin() + static_cast<long>(i * 4), table.indices.begin() + static_cast<long>(i * 4 + 4));
  }
  EXPECT_EQ(mlp_extract(v, table, phi), a);
}

TEST(Block, ZeroUpdateIsIdentity) {
  std::mt19937_64 rng(15);
  const auto coords = testing::random_points(rng, 32);
  const auto table = knn_query(coords, coords, 4);
  const Matrix x = testing::random_matrix(rng, 32, 16);
  for (auto kind : {OperatorKind::kVa, OperatorKind::kGva, OperatorKind::kMlp}) {
    auto p = testing::random_block(rng, kind, 16, 4, true);
    p.update = Linear::zeros(16, 16);
    EXPECT_EQ(sequence_block_forward(x, coords, table, p), x) << to_string(kind);
  }
}

TEST(Block, ConstantRowsStayConstantForMlp) {
  std::mt19937_64 rng(16);
  const auto coords = testing::random_points(rng, 20);
  const auto table = knn_query(coords, coords, 4);
  Matrix x(20, 8);
  for (std::size_t r = 0; r < 20; ++r) {
    for (std::size_t c = 0; c < 8; ++c) x(r, c) = 0.1 * static_cast<double>(c);
  }
  const auto p = testing::random_block(rng, OperatorKind::kMlp, 8, 1, false);
  const Matrix y = sequence_block_forward(x, coords, table, p);
  for (std::size_t r = 1; r < 20; ++r) {
    for (std::size_t c = 0; c < 8; ++c) ASSERT_EQ(y(r, c), y(0, c));
  }
}

TEST(Block, MatchesComposedOracle) {
  std::mt19937_64 rng(17);
  const auto coords = testing::random_points(rng, 32);
  const auto table = knn_query(coords, coords, 6);
  const Matrix x = testing::random_matrix(rng, 32, 16);
  for (auto kind : {OperatorKind::kVa, OperatorKind::kGva, OperatorKind::kMlp}) {
    for (bool position : {false, true}) {
      const auto p = testing::random_block(rng, kind, 16, 4, position);
      const Matrix y = sequence_block_forward(x, coords, table, p);
      ASSERT_TRUE(y.all_finite());
      EXPECT_EQ(y, testing::block_oracle(x, coords, table, p)) << to_string(kind) << " position=" << position;
    }
  }
}

TEST(Block, RejectsWidthMismatch) {
  std::mt19937_64 rng(18);
  const auto coords = testing::random_points(rng, 8);
  const auto table = knn_query(coords, coords, 2);
  const auto p = testing::random_block(rng, OperatorKind::kGva, 8, 2, false);
  EXPECT_THROW(sequence_block_forward(Matrix(8, 4), coords, table, p), InvalidArgument);
}

TEST(BlockSpecs, NamesAndWidths) {
  const auto specs = block_tensor_specs("b", OperatorKind::kGva, 16, 4, false);
  std::vector<std::string> names;
  for (const auto& s : specs) names.push_back(s.name);
  EXPECT_NE(std::find(names.begin(), names.end(), "b.phi.1.weight"), names.end());
  for (const auto& s : specs) {
    if (s.name == "b.phi.1.weight") EXPECT_EQ(s.shape, (std::vector<std::uint32_t>{4, 16}));
  }
  const auto mlp = block_tensor_specs("b", OperatorKind::kMlp, 16, 4, true);
  for (const auto& s : mlp) {
    EXPECT_EQ(s.name.find("query"), std::string::npos);
    EXPECT_EQ(s.name.find("pos."), std::string::npos);
  }
}

// Finite differences at eps = 1e-6 carry roughly 1e-10 of rounding noise, so
// entries whose true gradient is zero are compared in absolute terms.
struct GradExpect {
  GradTarget target;
  bool position;
};

class GradientAgreement : public ::testing::TestWithParam<GradExpect> {};

TEST_P(GradientAgreement, MatchesCentralDifferences) {
  const auto [target, position] = GetParam();
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    GradCaseOptions opt;
    opt.position = position;
    const auto report = run_gradcheck(target, opt, seed, 1e-6);
    const auto& r = report.result;
    ASSERT_TRUE(r.finite) << r.failure;
    EXPECT_GT(r.checked, 0u);
    EXPECT_LT(r.max_rel_error_above_floor, 1e-3) << to_string(target) << " seed " << seed;
    EXPECT_TRUE(r.max_rel_error < kGradTolerance || std::abs(r.worst_analytic - r.worst_numeric) < 1e-8)
        << to_string(target) << " seed " << seed << ": " << r.worst_tensor << "[" << r.worst_index << "]";
  }
}

INSTANTIATE_TEST_SUITE_P(Targets, GradientAgreement,
                         ::testing::Values(GradExpect{GradTarget::kLinear, false}, GradExpect{GradTarget::kVa, false},
                                           GradExpect{GradTarget::kGva, false}, GradExpect{GradTarget::kGva, true},
                                           GradExpect{GradTarget::kMlp, false},
                                           GradExpect{GradTarget::kBlockVa, false},
                                           GradExpect{GradTarget::kBlockGva, false},
                                           GradExpect{GradTarget::kBlockGva, true},
                                           GradExpect{GradTarget::kBlockMlp, false}));

TEST(GradCheck, LinearIsNearExact) {
  const auto report = run_gradcheck(GradTarget::kLinear, {}, 1, 1e-6);
  EXPECT_LT(report.result.max_rel_error, 1e-7);
  EXPECT_TRUE(report.passed());
}

TEST(GradCheck, MaxTiesAreRedrawn) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto c = make_grad_case(GradTarget::kMlp, {}, seed);
    const auto report = run_gradcheck(GradTarget::kMlp, {}, seed, 1e-6);
    if (c->nondifferentiable_margin() < kKinkMargin) EXPECT_GT(report.resamples, 0u);
  }
}

TEST(GradCheck, TargetNamesRoundTrip) {
  for (auto t : all_grad_targets()) EXPECT_EQ(parse_grad_target(to_string(t)), t);
  EXPECT_THROW(parse_grad_target("conv"), InvalidArgument);
}

}  // namespace
}  // namespace pointhr
