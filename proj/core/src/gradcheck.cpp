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


#include "pointhr/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "pointhr/seq_ops.hpp"
#include "pointhr/spatial.hpp"
#include "pointhr/weights.hpp"

namespace pointhr {
namespace {

constexpr double kInfinity = std::numeric_limits<double>::infinity();

class Sampler {
 public:
  Sampler(std::uint64_t seed, std::string_view stream) : rng_(seed, stream_id(stream)) {}
  double operator()(double lo, double hi) { return rng_.uniform(counter_++, lo, hi); }
  void fill(std::span<double> values, double lo, double hi) {
    for (double& v : values) v = (*this)(lo, hi);
  }

 private:
  CounterRng rng_;
  std::uint64_t counter_ = 0;
};

Matrix random_matrix(Sampler& s, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  s.fill(m.values(), -1.0, 1.0);
  return m;
}

Linear random_linear(Sampler& s, std::size_t in, std::size_t out) {
  Linear layer = Linear::zeros(in, out);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  s.fill(layer.weight.values(), -bound, bound);
  s.fill(layer.bias, -0.5, 0.5);
  return layer;
}

struct Geometry {
  std::vector<Point3> coords;
  NeighborTable table;
};

Geometry random_geometry(Sampler& s, std::size_t points, std::size_t k) {
  Geometry g;
  g.coords.resize(points);
  for (auto& p : g.coords) p = {s(0.0, 1.0), s(0.0, 1.0), s(0.0, 1.0)};
  g.table = knn_query(g.coords, g.coords, std::min(k, points));
  return g;
}

double relu_margin(const Linear& layer, const Matrix& x) {
  const Matrix pre = linear_forward(layer, x);
  double margin = kInfinity;
  for (double v : pre.values()) margin = std::min(margin, std::abs(v));
  return margin;
}

double max_margin(const Matrix& embedded, const NeighborTable& table) {
  double margin = kInfinity;
  for (std::size_t i = 0; i < table.query_count; ++i) {
    const auto row = table.row(i);
    if (row.size() < 2) continue;
    for (std::size_t c = 0; c < embedded.cols(); ++c) {
      double top = -kInfinity;
      double second = -kInfinity;
      for (auto j : row) {
        const double v = embedded(j, c);
        if (v > top) {
          second = top;
          top = v;
        } else if (v > second) {
          second = v;
        }
      }
      margin = std::min(margin, top - second);
    }
  }
  return margin;
}

Matrix relation_rows(const Matrix& q, const Matrix& k, const NeighborTable& table, const NeighborTensor* position) {
  Matrix rel(table.query_count * table.k, q.cols());
  for (std::size_t i = 0; i < table.query_count; ++i) {
    const auto row = table.row(i);
    for (std::size_t n = 0; n < table.k; ++n) {
      for (std::size_t c = 0; c < q.cols(); ++c) {
        double r = q(i, c) - k(row[n], c);
        if (position != nullptr) r += (*position)(i, n, c);
        rel(i * table.k + n, c) = r;
      }
    }
  }
  return rel;
}

NamedGradient gradient_of(std::string name, std::span<const double> values) {
  return {std::move(name), std::vector<double>(values.begin(), values.end())};
}

Matrix ones_like(const Matrix& m) { return Matrix(m.rows(), m.cols(), 1.0); }

class LinearCase final : public GradCase {
 public:
  LinearCase(const GradCaseOptions& o, std::uint64_t seed) {
    Sampler s(seed, "gradcheck.linear");
    x_ = random_matrix(s, o.points, o.channels);
    layer_ = random_linear(s, o.channels, o.channels);
  }
  std::vector<NamedBuffer> tensors() override {
    return {{"input", x_.values()}, {"weight", layer_.weight.values()}, {"bias", layer_.bias}};
  }
  Matrix outputs() const override { return linear_forward(layer_, x_); }
  std::vector<NamedGradient> gradients() const override {
    Linear grad = Linear::zeros(layer_.in(), layer_.out());
    const Matrix dx = linear_backward(layer_, x_, ones_like(outputs()), grad);
    return {gradient_of("input", dx.values()), gradient_of("weight", grad.weight.values()),
            gradient_of("bias", grad.bias)};
  }

 private:
  Matrix x_;
  Linear layer_;
};

class AttentionCase final : public GradCase {
 public:
  AttentionCase(bool grouped, const GradCaseOptions& o, std::uint64_t seed)
      : groups_(grouped ? o.groups : o.channels) {
    Sampler s(seed, grouped ? "gradcheck.gva" : "gradcheck.va");
    geometry_ = random_geometry(s, o.points, o.neighbors);
    q_ = random_matrix(s, o.points, o.channels);
    k_ = random_matrix(s, o.points, o.channels);
    v_ = random_matrix(s, o.points, o.channels);
    phi_ = {random_linear(s, o.channels, o.channels), random_linear(s, o.channels, groups_)};
    if (o.position) {
      position_ = NeighborTensor(o.points, geometry_.table.k, o.channels);
      s.fill(position_.values(), -0.5, 0.5);
      has_position_ = true;
    }
  }
  std::vector<NamedBuffer> tensors() override {
    std::vector<NamedBuffer> t{{"queries", q_.values()},
                               {"keys", k_.values()},
                               {"values", v_.values()},
                               {"phi.0.weight", phi_.first.weight.values()},
                               {"phi.0.bias", phi_.first.bias},
                               {"phi.1.weight", phi_.second.weight.values()},
                               {"phi.1.bias", phi_.second.bias}};
    if (has_position_) t.push_back({"position", position_.values()});
    return t;
  }
  Matrix outputs() const override { return gva_extract(inputs(), phi_, groups_); }
  std::vector<NamedGradient> gradients() const override {
    const auto g = attention_backward(inputs(), phi_, groups_, ones_like(outputs()));
    std::vector<NamedGradient> out{gradient_of("queries", g.queries.values()),
                                   gradient_of("keys", g.keys.values()),
                                   gradient_of("values", g.values.values()),
                                   gradient_of("phi.0.weight", g.phi.first.weight.values()),
                                   gradient_of("phi.0.bias", g.phi.first.bias),
                                   gradient_of("phi.1.weight", g.phi.second.weight.values()),
                                   gradient_of("phi.1.bias", g.phi.second.bias)};
    if (has_position_) out.push_back(gradient_of("position", g.position.values()));
    return out;
  }
  double nondifferentiable_margin() const override {
    return relu_margin(phi_.first, relation_rows(q_, k_, geometry_.table, has_position_ ? &position_ : nullptr));
  }

 private:
  LocalExtractInputs inputs() const {
    return {q_, k_, v_, geometry_.table, has_position_ ? &position_ : nullptr};
  }

  std::size_t groups_;
  Geometry geometry_;
  Matrix q_, k_, v_;
  Mlp2 phi_;
  NeighborTensor position_;
  bool has_position_ = false;
};

class MlpExtractCase final : public GradCase {
 public:
  MlpExtractCase(const GradCaseOptions& o, std::uint64_t seed) {
    Sampler s(seed, "gradcheck.mlp");
    geometry_ = random_geometry(s, o.points, o.neighbors);
    v_ = random_matrix(s, o.points, o.channels);
    phi_ = {random_linear(s, o.channels, o.channels), random_linear(s, o.channels, o.channels)};
  }
  std::vector<NamedBuffer> tensors() override {
    return {{"values", v_.values()},
            {"phi.0.weight", phi_.first.weight.values()},
            {"phi.0.bias", phi_.first.bias},
            {"phi.1.weight", phi_.second.weight.values()},
            {"phi.1.bias", phi_.second.bias}};
  }
  Matrix outputs() const override { return mlp_extract(v_, geometry_.table, phi_); }
  std::vector<NamedGradient> gradients() const override {
    const auto g = mlp_extract_backward(v_, geometry_.table, phi_, ones_like(outputs()));
    return {gradient_of("values", g.values.values()), gradient_of("phi.0.weight", g.phi.first.weight.values()),
            gradient_of("phi.0.bias", g.phi.first.bias), gradient_of("phi.1.weight", g.phi.second.weight.values()),
            gradient_of("phi.1.bias", g.phi.second.bias)};
  }
  double nondifferentiable_margin() const override {
    return std::min(relu_margin(phi_.first, v_), max_margin(mlp_forward(phi_, v_), geometry_.table));
  }

 private:
  Geometry geometry_;
  Matrix v_;
  Mlp2 phi_;
};

class BlockCase final : public GradCase {
 public:
  BlockCase(OperatorKind kind, const GradCaseOptions& o, std::uint64_t seed) {
    Sampler s(seed, std::string("gradcheck.block.") + std::string(to_string(kind)));
    geometry_ = random_geometry(s, o.points, o.neighbors);
    x_ = random_matrix(s, o.points, o.channels);
    const std::size_t groups = kind == OperatorKind::kVa ? o.channels : o.groups;
    const auto specs = block_tensor_specs("block", kind, o.channels, groups, o.position);
    const WeightStore store = init_weights(specs, seed);
    params_ = read_block(store, "block", kind, o.channels, groups, o.position);
    for_each_param(params_, [&s](const std::string& name, std::span<double> values) {
      if (name.ends_with(".gamma")) {
        s.fill(values, 0.5, 1.5);
      } else if (!name.ends_with(".weight")) {
        s.fill(values, -0.5, 0.5);
      }
    });
  }
  std::vector<NamedBuffer> tensors() override {
    std::vector<NamedBuffer> t{{"features", x_.values()}};
    for_each_param(params_, [&t](const std::string& name, std::span<double> values) { t.push_back({name, values}); });
    return t;
  }
  Matrix outputs() const override {
    return sequence_block_forward(x_, geometry_.coords, geometry_.table, params_);
  }
  std::vector<NamedGradient> gradients() const override {
    auto g = sequence_block_backward(x_, geometry_.coords, geometry_.table, params_, ones_like(outputs()));
    std::vector<NamedGradient> out{gradient_of("features", g.features.values())};
    for_each_param(g.params, [&out](const std::string& name, std::span<double> values) {
      out.push_back(gradient_of(name, values));
    });
    return out;
  }
  double nondifferentiable_margin() const override {
    const Matrix embedded = linear_forward(params_.embed, norm_forward(params_.norm_in, x_));
    if (params_.kind == OperatorKind::kMlp) {
      return std::min(relu_margin(params_.phi.first, embedded),
                      max_margin(mlp_forward(params_.phi, embedded), geometry_.table));
    }
    const Matrix q = linear_forward(params_.query, embedded);
    const Matrix k = linear_forward(params_.key, embedded);
    double margin = kInfinity;
    NeighborTensor position;
    if (params_.has_position) {
      Matrix rel(geometry_.table.query_count * geometry_.table.k, 3);
      for (std::size_t i = 0; i < geometry_.table.query_count; ++i) {
        const auto row = geometry_.table.row(i);
        for (std::size_t n = 0; n < row.size(); ++n) {
          for (int d = 0; d < 3; ++d) {
            rel(i * geometry_.table.k + n, d) = geometry_.coords[i][d] - geometry_.coords[row[n]][d];
          }
        }
      }
      margin = relu_margin(params_.position.first, rel);
      position = position_term(params_.position, geometry_.coords, geometry_.table);
    }
    const Matrix relation = relation_rows(q, k, geometry_.table, params_.has_position ? &position : nullptr);
    return std::min(margin, relu_margin(params_.phi.first, relation));
  }

 private:
  Geometry geometry_;
  Matrix x_;
  SequenceBlockParams params_;
};

}  // namespace

GradCheckResult finite_diff_check(GradCase& c, double eps, double floor) {
  if (!(eps > 0.0)) throw InvalidArgument("finite_diff_check: eps must be positive");
  GradCheckResult result;
  const auto analytic = c.gradients();
  auto buffers = c.tensors();
  if (analytic.size() != buffers.size()) throw InvalidArgument("finite_diff_check: gradient/tensor count mismatch");
  for (std::size_t t = 0; t < buffers.size(); ++t) {
    auto& buffer = buffers[t];
    const auto& grad = analytic[t].values;
    POINTHR_CHECK(grad.size() == buffer.values.size());
    for (std::size_t e = 0; e < buffer.values.size(); ++e) {
      if (!std::isfinite(grad[e])) {
        result.finite = false;
        result.failure = "non-finite gradient in tensor '" + buffer.name + "'";
        return result;
      }
      const double original = buffer.values[e];
      const double up = original + eps;
      const double down = original - eps;
      buffer.values[e] = up;
      const Matrix plus = c.outputs();
      buffer.values[e] = down;
      const Matrix minus = c.outputs();
      buffer.values[e] = original;
      double delta = 0.0;
      for (std::size_t i = 0; i < plus.size(); ++i) delta += plus.values()[i] - minus.values()[i];
      const double numeric = delta / (up - down);
      if (!std::isfinite(numeric)) {
        result.finite = false;
        result.failure = "non-finite numeric gradient in tensor '" + buffer.name + "'";
        return result;
      }
      const double denom = std::max({std::abs(grad[e]), std::abs(numeric), 1e-8});
      const double err = std::abs(grad[e] - numeric) / denom;
      ++result.checked;
      if (result.worst_tensor.empty() || err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_tensor = buffer.name;
        result.worst_index = e;
        result.worst_analytic = grad[e];
        result.worst_numeric = numeric;
      }
      if (std::max(std::abs(grad[e]), std::abs(numeric)) >= floor) {
        result.max_rel_error_above_floor = std::max(result.max_rel_error_above_floor, err);
      }
    }
  }
  return result;
}

std::string_view to_string(GradTarget target) {
  switch (target) {
    case GradTarget::kLinear: return "linear";
    case GradTarget::kVa: return "va";
    case GradTarget::kGva: return "gva";
    case GradTarget::kMlp: return "mlp";
    case GradTarget::kBlockVa: return "block-va";
    case GradTarget::kBlockGva: return "block-gva";
    case GradTarget::kBlockMlp: return "block-mlp";
  }
  return "?";
}

GradTarget parse_grad_target(std::string_view name) {
  for (auto t : all_grad_targets()) {
    if (to_string(t) == name) return t;
  }
  throw InvalidArgument("unknown gradcheck target '" + std::string(name) + "'");
}

const std::vector<GradTarget>& all_grad_targets() {
  static const std::vector<GradTarget> targets{GradTarget::kLinear,  GradTarget::kVa,       GradTarget::kGva,
                                               GradTarget::kMlp,     GradTarget::kBlockVa,  GradTarget::kBlockGva,
                                               GradTarget::kBlockMlp};
  return targets;
}

std::unique_ptr<GradCase> make_grad_case(GradTarget target, const GradCaseOptions& o, std::uint64_t seed) {
  if (o.points == 0 || o.channels == 0 || o.neighbors == 0) {
    throw InvalidArgument("gradcheck: points, channels and neighbors must be positive");
  }
  const bool grouped = target == GradTarget::kGva || target == GradTarget::kBlockGva;
  if (grouped && (o.groups == 0 || o.channels % o.groups != 0)) {
    throw InvalidArgument("gradcheck: groups must divide channels");
  }
  switch (target) {
    case GradTarget::kLinear: return std::make_unique<LinearCase>(o, seed);
    case GradTarget::kVa: return std::make_unique<AttentionCase>(false, o, seed);
    case GradTarget::kGva: return std::make_unique<AttentionCase>(true, o, seed);
    case GradTarget::kMlp: return std::make_unique<MlpExtractCase>(o, seed);
    case GradTarget::kBlockVa: return std::make_unique<BlockCase>(OperatorKind::kVa, o, seed);
    case GradTarget::kBlockGva: return std::make_unique<BlockCase>(OperatorKind::kGva, o, seed);
    case GradTarget::kBlockMlp: return std::make_unique<BlockCase>(OperatorKind::kMlp, o, seed);
  }
  throw InvalidArgument("unknown gradcheck target");
}

GradRunReport run_gradcheck(GradTarget target, const GradCaseOptions& options, std::uint64_t seed, double eps) {
  constexpr std::size_t kMaxDraws = 64;
  GradRunReport report;
  std::unique_ptr<GradCase> c;
  for (std::size_t draw = 0; draw < kMaxDraws; ++draw) {
    c = make_grad_case(target, options, draw == 0 ? seed : splitmix64(seed ^ (draw * 0x9e3779b97f4a7c15ull)));
    if (c->nondifferentiable_margin() >= kKinkMargin) break;
    ++report.resamples;
  }
  report.result = finite_diff_check(*c, eps);
  return report;
}

}  // namespace pointhr
