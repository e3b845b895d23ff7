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


#include "pointhr/seq_ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pointhr {
namespace {

inline double relu_scalar(double x) { return x > 0.0 ? x : 0.0; }

void check_linear(const Linear& layer, std::size_t in, const char* what) {
  if (layer.in() != in || layer.bias.size() != layer.out()) {
    throw InvalidArgument(std::string(what) + ": layer expects " + std::to_string(layer.in()) +
                          " inputs, got " + std::to_string(in));
  }
}

void check_table(const NeighborTable& table, std::size_t queries, std::size_t sources, const char* what) {
  if (table.query_count != queries) {
    throw InvalidArgument(std::string(what) + ": neighbor table has " + std::to_string(table.query_count) +
                          " rows for " + std::to_string(queries) + " points");
  }
  for (auto idx : table.indices) POINTHR_CHECK(idx < sources);
}

// Softmax over `count` entries spaced `stride` apart, max-subtracted.
void softmax_strided(const double* scores, double* out, std::size_t count, std::size_t stride) {
  double peak = scores[0];
  for (std::size_t n = 1; n < count; ++n) peak = std::max(peak, scores[n * stride]);
  double total = 0.0;
  for (std::size_t n = 0; n < count; ++n) {
    out[n * stride] = std::exp(scores[n * stride] - peak);
    total += out[n * stride];
  }
  for (std::size_t n = 0; n < count; ++n) out[n * stride] /= total;
}

// Dense layer on one vector with the weights stored input-major, so the inner
// loop runs across outputs. Every output still accumulates bias first, then
// inputs in ascending order.
class DenseKernel {
 public:
  explicit DenseKernel(const Linear& layer)
      : in_(layer.in()), out_(layer.out()), bias_(layer.bias), weight_t_(in_ * out_) {
    for (std::size_t o = 0; o < out_; ++o) {
      for (std::size_t c = 0; c < in_; ++c) weight_t_[c * out_ + o] = layer.weight(o, c);
    }
  }

  void apply(const double* __restrict x, double* __restrict out) const {
    std::copy(bias_.begin(), bias_.end(), out);
    for (std::size_t c = 0; c < in_; ++c) {
      const double xc = x[c];
      const double* __restrict w = weight_t_.data() + c * out_;
      for (std::size_t o = 0; o < out_; ++o) out[o] += w[o] * xc;
    }
  }

 private:
  std::size_t in_;
  std::size_t out_;
  std::vector<double> bias_;
  std::vector<double> weight_t_;
};

struct PhiKernels {
  explicit PhiKernels(const Mlp2& phi) : first(phi.first), second(phi.second) {}
  DenseKernel first;
  DenseKernel second;
};

struct AttentionScratch {
  std::vector<double> relation;  // K x C
  std::vector<double> hidden;    // K x H, post-activation
  std::vector<double> logits;    // K x G
  std::vector<double> weights;   // K x G
};

void validate_attention(const LocalExtractInputs& in, const Mlp2& phi, std::size_t groups) {
  const std::size_t channels = in.queries.cols();
  if (in.keys.cols() != channels || in.values.cols() != channels) {
    throw InvalidArgument("attention: query/key/value widths differ");
  }
  if (in.keys.rows() != in.values.rows()) throw InvalidArgument("attention: key/value rows differ");
  if (groups == 0 || channels % groups != 0) {
    throw InvalidArgument("attention: groups=" + std::to_string(groups) + " does not divide " +
                          std::to_string(channels) + " channels");
  }
  if (phi.first.in() != channels || phi.second.in() != phi.first.out() || phi.second.out() != groups) {
    throw InvalidArgument("attention: phi maps " + std::to_string(phi.first.in()) + " -> " +
                          std::to_string(phi.second.out()) + ", expected " + std::to_string(channels) +
                          " -> " + std::to_string(groups));
  }
  check_table(in.table, in.queries.rows(), in.keys.rows(), "attention");
  if (in.position != nullptr &&
      (in.position->points() != in.queries.rows() || in.position->neighbors() != in.table.k ||
       in.position->channels() != channels)) {
    throw InvalidArgument("attention: position term shape mismatch");
  }
}

// Fills scratch for point i: relations, hidden activations, logits, weights.
void attention_point(const LocalExtractInputs& in, const Mlp2& phi, const PhiKernels& kernels, std::size_t groups,
                     std::size_t i, AttentionScratch& s) {
  const std::size_t channels = in.queries.cols();
  const std::size_t k = in.table.k;
  const std::size_t hidden = phi.first.out();
  s.relation.resize(k * channels);
  s.hidden.resize(k * hidden);
  s.logits.resize(k * groups);
  s.weights.resize(k * groups);
  const auto row = in.table.row(i);
  const auto q = in.queries.row(i);
  for (std::size_t n = 0; n < k; ++n) {
    const auto key = in.keys.row(row[n]);
    double* r = s.relation.data() + n * channels;
    for (std::size_t c = 0; c < channels; ++c) r[c] = q[c] - key[c];
    if (in.position != nullptr) {
      const auto p = in.position->slot(i, n);
      for (std::size_t c = 0; c < channels; ++c) r[c] += p[c];
    }
    double* h = s.hidden.data() + n * hidden;
    kernels.first.apply(r, h);
    for (std::size_t u = 0; u < hidden; ++u) h[u] = relu_scalar(h[u]);
    kernels.second.apply(h, s.logits.data() + n * groups);
  }
  for (std::size_t l = 0; l < groups; ++l) {
    softmax_strided(s.logits.data() + l, s.weights.data() + l, k, groups);
  }
}

Matrix attention_forward(const LocalExtractInputs& in, const Mlp2& phi, std::size_t groups) {
  validate_attention(in, phi, groups);
  const std::size_t channels = in.queries.cols();
  const std::size_t per_group = channels / groups;
  const std::size_t k = in.table.k;
  Matrix out(in.queries.rows(), channels);
  const PhiKernels kernels(phi);
  parallel_for(in.queries.rows(), [&](std::size_t begin, std::size_t end) {
    AttentionScratch s;
    std::vector<double> expanded(channels);
    for (std::size_t i = begin; i < end; ++i) {
      attention_point(in, phi, kernels, groups, i, s);
      const auto row = in.table.row(i);
      double* __restrict dst = out.row(i).data();
      // Each channel sums over neighbors in row order starting from 0.
      for (std::size_t n = 0; n < k; ++n) {
        for (std::size_t c = 0; c < channels; ++c) expanded[c] = s.weights[n * groups + c / per_group];
        const double* __restrict v = in.values.row(row[n]).data();
        if (in.position != nullptr) {
          const double* __restrict p = in.position->slot(i, n).data();
          for (std::size_t c = 0; c < channels; ++c) dst[c] += expanded[c] * (v[c] + p[c]);
        } else {
          for (std::size_t c = 0; c < channels; ++c) dst[c] += expanded[c] * v[c];
        }
      }
    }
  });
  return out;
}

std::string suffix(const std::string& prefix, const char* name) { return prefix + "." + name; }

void append_norm_specs(std::vector<TensorSpec>& specs, const std::string& name, std::size_t width) {
  const auto w = static_cast<std::uint32_t>(width);
  specs.push_back({name + ".gamma", {w}, TensorInit::kOnes});
  specs.push_back({name + ".beta", {w}, TensorInit::kZeros});
}

Norm read_norm(const WeightStore& store, const std::string& name, std::size_t width) {
  const auto& gamma = store.at(name + ".gamma");
  const auto& beta = store.at(name + ".beta");
  if (gamma.shape != std::vector<std::uint32_t>{static_cast<std::uint32_t>(width)} || beta.shape != gamma.shape) {
    throw InvalidArgument("tensor '" + name + "' has the wrong shape for width " + std::to_string(width));
  }
  return {gamma.values, beta.values};
}

}  // namespace

Linear Linear::zeros(std::size_t in, std::size_t out) { return {Matrix(out, in), std::vector<double>(out, 0.0)}; }

Linear Linear::identity(std::size_t width) {
  Linear layer = zeros(width, width);
  for (std::size_t i = 0; i < width; ++i) layer.weight(i, i) = 1.0;
  return layer;
}

Norm Norm::identity(std::size_t width) { return {std::vector<double>(width, 1.0), std::vector<double>(width, 0.0)}; }
Norm Norm::zeros(std::size_t width) { return {std::vector<double>(width, 0.0), std::vector<double>(width, 0.0)}; }

Mlp2 Mlp2::zeros(std::size_t in, std::size_t hidden, std::size_t out) {
  return {Linear::zeros(in, hidden), Linear::zeros(hidden, out)};
}

Matrix linear_forward(const Linear& layer, const Matrix& x) {
  check_linear(layer, x.cols(), "linear");
  Matrix y(x.rows(), layer.out());
  const DenseKernel kernel(layer);
  parallel_for(x.rows(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) kernel.apply(x.row(r).data(), y.row(r).data());
  });
  return y;
}

Matrix linear_backward(const Linear& layer, const Matrix& x, const Matrix& dy, Linear& grad) {
  check_linear(layer, x.cols(), "linear backward");
  Matrix dx(x.rows(), layer.in());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto xr = x.row(r);
    const auto g = dy.row(r);
    auto dxr = dx.row(r);
    for (std::size_t o = 0; o < layer.out(); ++o) {
      if (g[o] == 0.0) continue;
      const auto w = layer.weight.row(o);
      auto gw = grad.weight.row(o);
      for (std::size_t c = 0; c < layer.in(); ++c) {
        dxr[c] += g[o] * w[c];
        gw[c] += g[o] * xr[c];
      }
      grad.bias[o] += g[o];
    }
  }
  return dx;
}

Matrix norm_forward(const Norm& norm, const Matrix& x) {
  if (norm.width() != x.cols()) throw InvalidArgument("norm: width mismatch");
  const std::size_t width = x.cols();
  Matrix y(x.rows(), width);
  parallel_for(x.rows(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      const auto xr = x.row(r);
      double mean = 0.0;
      for (double v : xr) mean += v;
      mean /= static_cast<double>(width);
      double var = 0.0;
      for (double v : xr) var += (v - mean) * (v - mean);
      var /= static_cast<double>(width);
      const double inv = 1.0 / std::sqrt(var + kNormEpsilon);
      auto yr = y.row(r);
      for (std::size_t c = 0; c < width; ++c) yr[c] = (xr[c] - mean) * inv * norm.gamma[c] + norm.beta[c];
    }
  });
  return y;
}

Matrix norm_backward(const Norm& norm, const Matrix& x, const Matrix& dy, Norm& grad) {
  const std::size_t width = x.cols();
  const double w = static_cast<double>(width);
  Matrix dx(x.rows(), width);
  std::vector<double> xhat(width);
  std::vector<double> dxhat(width);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto xr = x.row(r);
    double mean = 0.0;
    for (double v : xr) mean += v;
    mean /= w;
    double var = 0.0;
    for (double v : xr) var += (v - mean) * (v - mean);
    var /= w;
    const double inv = 1.0 / std::sqrt(var + kNormEpsilon);
    double mean_d = 0.0;
    double mean_dx = 0.0;
    for (std::size_t c = 0; c < width; ++c) {
      xhat[c] = (xr[c] - mean) * inv;
      dxhat[c] = dy(r, c) * norm.gamma[c];
      grad.gamma[c] += dy(r, c) * xhat[c];
      grad.beta[c] += dy(r, c);
      mean_d += dxhat[c];
      mean_dx += dxhat[c] * xhat[c];
    }
    mean_d /= w;
    mean_dx /= w;
    for (std::size_t c = 0; c < width; ++c) dx(r, c) = inv * (dxhat[c] - mean_d - xhat[c] * mean_dx);
  }
  return dx;
}

Matrix relu(const Matrix& x) {
  Matrix y = x;
  for (double& v : y.values()) v = relu_scalar(v);
  return y;
}

Matrix mlp_forward(const Mlp2& mlp, const Matrix& x) {
  check_linear(mlp.first, x.cols(), "mlp");
  check_linear(mlp.second, mlp.first.out(), "mlp");
  Matrix y(x.rows(), mlp.second.out());
  const PhiKernels kernels(mlp);
  parallel_for(x.rows(), [&](std::size_t begin, std::size_t end) {
    std::vector<double> hidden(mlp.first.out());
    for (std::size_t r = begin; r < end; ++r) {
      kernels.first.apply(x.row(r).data(), hidden.data());
      for (double& h : hidden) h = relu_scalar(h);
      kernels.second.apply(hidden.data(), y.row(r).data());
    }
  });
  return y;
}

Matrix mlp_backward(const Mlp2& mlp, const Matrix& x, const Matrix& dy, Mlp2& grad) {
  const Matrix pre = linear_forward(mlp.first, x);
  const Matrix hidden = relu(pre);
  Matrix dhidden = linear_backward(mlp.second, hidden, dy, grad.second);
  for (std::size_t i = 0; i < dhidden.size(); ++i) {
    if (!(pre.values()[i] > 0.0)) dhidden.values()[i] = 0.0;
  }
  return linear_backward(mlp.first, x, dhidden, grad.first);
}

NeighborTensor gather_neighbors(const Matrix& features, const NeighborTable& table) {
  check_table(table, table.query_count, features.rows(), "gather");
  NeighborTensor out(table.query_count, table.k, features.cols());
  for (std::size_t i = 0; i < table.query_count; ++i) {
    const auto row = table.row(i);
    for (std::size_t n = 0; n < table.k; ++n) {
      const auto src = features.row(row[n]);
      std::copy(src.begin(), src.end(), out.slot(i, n).begin());
    }
  }
  return out;
}

NeighborTensor neighbor_softmax(const NeighborTensor& scores) {
  NeighborTensor out(scores.points(), scores.neighbors(), scores.channels());
  const std::size_t k = scores.neighbors();
  const std::size_t d = scores.channels();
  if (k == 0) return out;
  for (std::size_t i = 0; i < scores.points(); ++i) {
    const double* src = scores.values().data() + i * k * d;
    double* dst = out.values().data() + i * k * d;
    for (std::size_t c = 0; c < d; ++c) softmax_strided(src + c, dst + c, k, d);
  }
  return out;
}

Matrix va_extract(const LocalExtractInputs& inputs, const Mlp2& phi) {
  if (phi.second.out() != inputs.queries.cols()) {
    throw InvalidArgument("va_extract: phi output width " + std::to_string(phi.second.out()) +
                          " != channel count " + std::to_string(inputs.queries.cols()));
  }
  return attention_forward(inputs, phi, inputs.queries.cols());
}

Matrix gva_extract(const LocalExtractInputs& inputs, const Mlp2& phi, std::size_t groups) {
  return attention_forward(inputs, phi, groups);
}

Matrix mlp_extract(const Matrix& values, const NeighborTable& table, const Mlp2& phi) {
  if (phi.second.out() != values.cols()) {
    throw InvalidArgument("mlp_extract: phi output width must equal the channel count");
  }
  check_table(table, table.query_count, values.rows(), "mlp_extract");
  const Matrix embedded = mlp_forward(phi, values);
  const std::size_t channels = values.cols();
  Matrix out(table.query_count, channels);
  parallel_for(table.query_count, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto row = table.row(i);
      auto dst = out.row(i);
      const auto first = embedded.row(row[0]);
      std::copy(first.begin(), first.end(), dst.begin());
      for (std::size_t n = 1; n < table.k; ++n) {
        const auto src = embedded.row(row[n]);
        for (std::size_t c = 0; c < channels; ++c) dst[c] = std::max(dst[c], src[c]);
      }
    }
  });
  return out;
}

AttentionGrads attention_backward(const LocalExtractInputs& in, const Mlp2& phi, std::size_t groups,
                                  const Matrix& dout) {
  validate_attention(in, phi, groups);
  const std::size_t channels = in.queries.cols();
  const std::size_t per_group = channels / groups;
  const std::size_t k = in.table.k;
  const std::size_t hidden = phi.first.out();

  AttentionGrads g{Matrix(in.queries.rows(), channels), Matrix(in.keys.rows(), channels),
                   Matrix(in.values.rows(), channels), NeighborTensor(),
                   Mlp2::zeros(channels, hidden, groups)};
  if (in.position != nullptr) g.position = NeighborTensor(in.queries.rows(), k, channels);

  const PhiKernels kernels(phi);
  AttentionScratch s;
  std::vector<double> dweights(k * groups);
  std::vector<double> dlogits(k * groups);
  std::vector<double> dhidden(hidden);
  std::vector<double> pre(hidden);
  std::vector<double> drelation(channels);
  for (std::size_t i = 0; i < in.queries.rows(); ++i) {
    attention_point(in, phi, kernels, groups, i, s);
    const auto row = in.table.row(i);
    const auto d = dout.row(i);
    std::fill(dweights.begin(), dweights.end(), 0.0);
    for (std::size_t n = 0; n < k; ++n) {
      for (std::size_t c = 0; c < channels; ++c) {
        const std::size_t l = c / per_group;
        double v = in.values(row[n], c);
        if (in.position != nullptr) v += (*in.position)(i, n, c);
        dweights[n * groups + l] += d[c] * v;
        const double dv = s.weights[n * groups + l] * d[c];
        g.values(row[n], c) += dv;
        if (in.position != nullptr) g.position(i, n, c) += dv;
      }
    }
    for (std::size_t l = 0; l < groups; ++l) {
      double dot = 0.0;
      for (std::size_t n = 0; n < k; ++n) dot += s.weights[n * groups + l] * dweights[n * groups + l];
      for (std::size_t n = 0; n < k; ++n) {
        dlogits[n * groups + l] = s.weights[n * groups + l] * (dweights[n * groups + l] - dot);
      }
    }
    for (std::size_t n = 0; n < k; ++n) {
      const double* h = s.hidden.data() + n * hidden;
      const double* r = s.relation.data() + n * channels;
      const double* dl = dlogits.data() + n * groups;
      std::fill(dhidden.begin(), dhidden.end(), 0.0);
      for (std::size_t l = 0; l < groups; ++l) {
        g.phi.second.bias[l] += dl[l];
        for (std::size_t u = 0; u < hidden; ++u) {
          g.phi.second.weight(l, u) += dl[l] * h[u];
          dhidden[u] += dl[l] * phi.second.weight(l, u);
        }
      }
      kernels.first.apply(r, pre.data());
      std::fill(drelation.begin(), drelation.end(), 0.0);
      for (std::size_t u = 0; u < hidden; ++u) {
        if (!(pre[u] > 0.0)) continue;
        g.phi.first.bias[u] += dhidden[u];
        for (std::size_t c = 0; c < channels; ++c) {
          g.phi.first.weight(u, c) += dhidden[u] * r[c];
          drelation[c] += dhidden[u] * phi.first.weight(u, c);
        }
      }
      for (std::size_t c = 0; c < channels; ++c) {
        g.queries(i, c) += drelation[c];
        g.keys(row[n], c) -= drelation[c];
        if (in.position != nullptr) g.position(i, n, c) += drelation[c];
      }
    }
  }
  return g;
}

MlpExtractGrads mlp_extract_backward(const Matrix& values, const NeighborTable& table, const Mlp2& phi,
                                     const Matrix& dout) {
  const Matrix embedded = mlp_forward(phi, values);
  const std::size_t channels = values.cols();
  Matrix dembedded(values.rows(), channels);
  for (std::size_t i = 0; i < table.query_count; ++i) {
    const auto row = table.row(i);
    for (std::size_t c = 0; c < channels; ++c) {
      std::size_t best = 0;
      for (std::size_t n = 1; n < table.k; ++n) {
        if (embedded(row[n], c) > embedded(row[best], c)) best = n;
      }
      dembedded(row[best], c) += dout(i, c);
    }
  }
  MlpExtractGrads g{Matrix(), Mlp2::zeros(phi.first.in(), phi.first.out(), phi.second.out())};
  g.values = mlp_backward(phi, values, dembedded, g.phi);
  return g;
}

std::size_t phi_output_width(OperatorKind kind, std::size_t channels, std::size_t groups) {
  return kind == OperatorKind::kGva ? groups : channels;
}

SequenceBlockParams SequenceBlockParams::zeros(OperatorKind kind, std::size_t channels, std::size_t groups,
                                               bool position) {
  SequenceBlockParams p;
  p.kind = kind;
  p.channels = channels;
  p.groups = kind == OperatorKind::kVa ? channels : groups;
  p.has_position = position && kind != OperatorKind::kMlp;
  p.norm_in = Norm::zeros(channels);
  p.embed = Linear::zeros(channels, channels);
  if (kind != OperatorKind::kMlp) {
    p.query = Linear::zeros(channels, channels);
    p.key = Linear::zeros(channels, channels);
    p.value = Linear::zeros(channels, channels);
  }
  p.phi = Mlp2::zeros(channels, channels, phi_output_width(kind, channels, p.groups));
  if (p.has_position) p.position = Mlp2::zeros(3, channels, channels);
  p.norm_out = Norm::zeros(channels);
  p.update = Linear::zeros(channels, channels);
  return p;
}

void append_linear_specs(std::vector<TensorSpec>& specs, const std::string& name, std::size_t in,
                         std::size_t out) {
  specs.push_back({name + ".weight",
                   {static_cast<std::uint32_t>(out), static_cast<std::uint32_t>(in)},
                   TensorInit::kFanInUniform});
  specs.push_back({name + ".bias", {static_cast<std::uint32_t>(out)}, TensorInit::kZeros});
}

Linear read_linear(const WeightStore& store, const std::string& name, std::size_t in, std::size_t out) {
  const auto& w = store.at(name + ".weight");
  const auto& b = store.at(name + ".bias");
  const std::vector<std::uint32_t> want{static_cast<std::uint32_t>(out), static_cast<std::uint32_t>(in)};
  if (w.shape != want || b.shape != std::vector<std::uint32_t>{static_cast<std::uint32_t>(out)}) {
    std::string got;
    for (auto d : w.shape) got += (got.empty() ? "" : "x") + std::to_string(d);
    throw InvalidArgument("tensor '" + name + ".weight' has shape " + got + ", expected " +
                          std::to_string(out) + "x" + std::to_string(in));
  }
  Linear layer = Linear::zeros(in, out);
  std::copy(w.values.begin(), w.values.end(), layer.weight.values().begin());
  layer.bias = b.values;
  return layer;
}

std::vector<TensorSpec> block_tensor_specs(const std::string& prefix, OperatorKind kind, std::size_t channels,
                                           std::size_t groups, bool position) {
  std::vector<TensorSpec> specs;
  const bool with_position = position && kind != OperatorKind::kMlp;
  append_norm_specs(specs, suffix(prefix, "norm_in"), channels);
  append_linear_specs(specs, suffix(prefix, "embed"), channels, channels);
  if (kind != OperatorKind::kMlp) {
    append_linear_specs(specs, suffix(prefix, "query"), channels, channels);
    append_linear_specs(specs, suffix(prefix, "key"), channels, channels);
    append_linear_specs(specs, suffix(prefix, "value"), channels, channels);
  }
  append_linear_specs(specs, suffix(prefix, "phi.0"), channels, channels);
  append_linear_specs(specs, suffix(prefix, "phi.1"), channels, phi_output_width(kind, channels, groups));
  if (with_position) {
    append_linear_specs(specs, suffix(prefix, "pos.0"), 3, channels);
    append_linear_specs(specs, suffix(prefix, "pos.1"), channels, channels);
  }
  append_norm_specs(specs, suffix(prefix, "norm_out"), channels);
  append_linear_specs(specs, suffix(prefix, "update"), channels, channels);
  return specs;
}

SequenceBlockParams read_block(const WeightStore& store, const std::string& prefix, OperatorKind kind,
                               std::size_t channels, std::size_t groups, bool position) {
  SequenceBlockParams p;
  p.kind = kind;
  p.channels = channels;
  p.groups = kind == OperatorKind::kVa ? channels : groups;
  p.has_position = position && kind != OperatorKind::kMlp;
  p.norm_in = read_norm(store, suffix(prefix, "norm_in"), channels);
  p.embed = read_linear(store, suffix(prefix, "embed"), channels, channels);
  if (kind != OperatorKind::kMlp) {
    p.query = read_linear(store, suffix(prefix, "query"), channels, channels);
    p.key = read_linear(store, suffix(prefix, "key"), channels, channels);
    p.value = read_linear(store, suffix(prefix, "value"), channels, channels);
  }
  p.phi.first = read_linear(store, suffix(prefix, "phi.0"), channels, channels);
  p.phi.second = read_linear(store, suffix(prefix, "phi.1"), channels, phi_output_width(kind, channels, p.groups));
  if (p.has_position) {
    p.position.first = read_linear(store, suffix(prefix, "pos.0"), 3, channels);
    p.position.second = read_linear(store, suffix(prefix, "pos.1"), channels, channels);
  }
  p.norm_out = read_norm(store, suffix(prefix, "norm_out"), channels);
  p.update = read_linear(store, suffix(prefix, "update"), channels, channels);
  return p;
}

void for_each_param(SequenceBlockParams& p,
                    const std::function<void(const std::string&, std::span<double>)>& visit) {
  auto linear = [&visit](const std::string& name, Linear& layer) {
    visit(name + ".weight", layer.weight.values());
    visit(name + ".bias", layer.bias);
  };
  auto norm = [&visit](const std::string& name, Norm& n) {
    visit(name + ".gamma", n.gamma);
    visit(name + ".beta", n.beta);
  };
  norm("norm_in", p.norm_in);
  linear("embed", p.embed);
  if (p.kind != OperatorKind::kMlp) {
    linear("query", p.query);
    linear("key", p.key);
    linear("value", p.value);
  }
  linear("phi.0", p.phi.first);
  linear("phi.1", p.phi.second);
  if (p.has_position) {
    linear("pos.0", p.position.first);
    linear("pos.1", p.position.second);
  }
  norm("norm_out", p.norm_out);
  linear("update", p.update);
}

namespace {

Matrix relative_positions(std::span<const Point3> coords, const NeighborTable& table) {
  Matrix rel(table.query_count * table.k, 3);
  for (std::size_t i = 0; i < table.query_count; ++i) {
    const auto row = table.row(i);
    for (std::size_t n = 0; n < table.k; ++n) {
      for (int d = 0; d < 3; ++d) rel(i * table.k + n, d) = coords[i][d] - coords[row[n]][d];
    }
  }
  return rel;
}

NeighborTensor as_neighbor_tensor(const Matrix& flat, std::size_t points, std::size_t k) {
  NeighborTensor t(points, k, flat.cols());
  std::copy(flat.values().begin(), flat.values().end(), t.values().begin());
  return t;
}

}  // namespace

NeighborTensor position_term(const Mlp2& position, std::span<const Point3> coords, const NeighborTable& table) {
  if (coords.size() < table.query_count) throw InvalidArgument("position term: too few coordinates");
  return as_neighbor_tensor(mlp_forward(position, relative_positions(coords, table)), table.query_count, table.k);
}

Matrix sequence_block_forward(const Matrix& features, std::span<const Point3> coords, const NeighborTable& table,
                              const SequenceBlockParams& params) {
  if (features.cols() != params.channels) {
    throw InvalidArgument("sequence block: input width " + std::to_string(features.cols()) + " != " +
                          std::to_string(params.channels));
  }
  const Matrix embedded = linear_forward(params.embed, norm_forward(params.norm_in, features));
  Matrix aggregated;
  if (params.kind == OperatorKind::kMlp) {
    aggregated = mlp_extract(embedded, table, params.phi);
  } else {
    const Matrix q = linear_forward(params.query, embedded);
    const Matrix k = linear_forward(params.key, embedded);
    const Matrix v = linear_forward(params.value, embedded);
    NeighborTensor position;
    if (params.has_position) position = position_term(params.position, coords, table);
    const LocalExtractInputs inputs{q, k, v, table, params.has_position ? &position : nullptr};
    aggregated = attention_forward(inputs, params.phi, params.groups);
  }
  Matrix out = linear_forward(params.update, norm_forward(params.norm_out, aggregated));
  auto dst = out.values();
  const auto src = features.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  return out;
}

SequenceBlockGrads sequence_block_backward(const Matrix& features, std::span<const Point3> coords,
                                           const NeighborTable& table, const SequenceBlockParams& params,
                                           const Matrix& dout) {
  SequenceBlockGrads g{Matrix(), SequenceBlockParams::zeros(params.kind, params.channels, params.groups,
                                                            params.has_position)};
  const Matrix normed_in = norm_forward(params.norm_in, features);
  const Matrix embedded = linear_forward(params.embed, normed_in);

  Matrix aggregated;
  Matrix q, k, v;
  NeighborTensor position;
  Matrix rel;
  if (params.kind == OperatorKind::kMlp) {
    aggregated = mlp_extract(embedded, table, params.phi);
  } else {
    q = linear_forward(params.query, embedded);
    k = linear_forward(params.key, embedded);
    v = linear_forward(params.value, embedded);
    if (params.has_position) {
      rel = relative_positions(coords, table);
      position = as_neighbor_tensor(mlp_forward(params.position, rel), table.query_count, table.k);
    }
    const LocalExtractInputs inputs{q, k, v, table, params.has_position ? &position : nullptr};
    aggregated = attention_forward(inputs, params.phi, params.groups);
  }
  const Matrix normed_out = norm_forward(params.norm_out, aggregated);

  const Matrix d_normed_out = linear_backward(params.update, normed_out, dout, g.params.update);
  const Matrix d_aggregated = norm_backward(params.norm_out, aggregated, d_normed_out, g.params.norm_out);

  Matrix d_embedded;
  if (params.kind == OperatorKind::kMlp) {
    auto eg = mlp_extract_backward(embedded, table, params.phi, d_aggregated);
    g.params.phi = std::move(eg.phi);
    d_embedded = std::move(eg.values);
  } else {
    const LocalExtractInputs inputs{q, k, v, table, params.has_position ? &position : nullptr};
    auto ag = attention_backward(inputs, params.phi, params.groups, d_aggregated);
    g.params.phi = std::move(ag.phi);
    d_embedded = linear_backward(params.query, embedded, ag.queries, g.params.query);
    const Matrix dk = linear_backward(params.key, embedded, ag.keys, g.params.key);
    const Matrix dv = linear_backward(params.value, embedded, ag.values, g.params.value);
    for (std::size_t i = 0; i < d_embedded.size(); ++i) d_embedded.values()[i] += dk.values()[i] + dv.values()[i];
    if (params.has_position) {
      Matrix dpos(table.query_count * table.k, params.channels);
      std::copy(ag.position.values().begin(), ag.position.values().end(), dpos.values().begin());
      mlp_backward(params.position, rel, dpos, g.params.position);
    }
  }
  const Matrix d_normed_in = linear_backward(params.embed, normed_in, d_embedded, g.params.embed);
  g.features = norm_backward(params.norm_in, features, d_normed_in, g.params.norm_in);
  for (std::size_t i = 0; i < g.features.size(); ++i) g.features.values()[i] += dout.values()[i];
  return g;
}

}  // namespace pointhr
