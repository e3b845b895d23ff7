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


#include "pointhr/model.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace pointhr {
namespace {

std::string block_name(int stage, int module, int branch, int block) {
  return "stage" + std::to_string(stage) + ".module" + std::to_string(module) + ".branch" + std::to_string(branch) +
         ".block" + std::to_string(block);
}

std::string fuse_name(int stage, int module, int source, int target, int step) {
  return "stage" + std::to_string(stage) + ".module" + std::to_string(module) + ".fuse" + std::to_string(source) +
         "to" + std::to_string(target) + ".step" + std::to_string(step);
}

std::string adapt_name(int stage, int branch) {
  return "stage" + std::to_string(stage) + ".adapt" + std::to_string(branch);
}

std::string new_branch_name(int stage) { return "stage" + std::to_string(stage) + ".new"; }

std::size_t linear_params(std::size_t in, std::size_t out) { return in * out + out; }

std::size_t block_params(const ModelConfig& config, int scale, std::size_t width) {
  std::size_t total = 0;
  for (const auto& spec : block_tensor_specs("b", config.op, width, block_groups(config, scale, width),
                                             config.pos_encoding)) {
    std::size_t n = 1;
    for (auto d : spec.shape) n *= d;
    total += n;
  }
  return total;
}

// Widths of branch j (1..4) after the last stage; index 0 is the stem width.
std::array<std::size_t, 5> final_widths(const ModelConfig& config) {
  std::array<std::size_t, 5> w{};
  w[0] = static_cast<std::size_t>(config.stem_channels);
  for (int j = 1; j <= 4; ++j) w[static_cast<std::size_t>(j)] = static_cast<std::size_t>(config.final_width(j));
  return w;
}

std::size_t width(const ModelConfig& config, int stage, int branch) {
  return static_cast<std::size_t>(config.branch_width(stage, branch));
}

// Walks the architecture in a fixed order, reporting every layer.
class Topology {
 public:
  virtual ~Topology() = default;
  virtual void linear(const std::string& name, std::size_t in, std::size_t out, int scale) = 0;
  virtual void block(const std::string& name, std::size_t width, int scale) = 0;
};

void walk(const ModelConfig& config, Topology& t) {
  const auto c0 = static_cast<std::size_t>(config.stem_channels);
  t.linear("stem.embed", static_cast<std::size_t>(config.in_channels), c0, 0);
  t.block("stem.block", c0, 0);
  t.linear("stem.down", c0, width(config, 1, 1), 1);
  for (int i = 1; i <= 4; ++i) {
    if (i > 1) {
      for (int j = 1; j < i; ++j) {
        if (width(config, i - 1, j) != width(config, i, j)) {
          t.linear(adapt_name(i, j), width(config, i - 1, j), width(config, i, j), j);
        }
      }
      t.linear(new_branch_name(i), width(config, i - 1, i - 1), width(config, i, i), i);
    }
    for (int m = 1; m <= config.modules[static_cast<std::size_t>(i - 1)]; ++m) {
      for (int j = 1; j <= i; ++j) {
        for (int b = 1; b <= config.blocks[static_cast<std::size_t>(i - 1)]; ++b) {
          t.block(block_name(i, m, j, b), width(config, i, j), j);
        }
      }
      if (i < 2) continue;
      for (int target = 1; target <= i; ++target) {
        for (int source = 1; source <= i; ++source) {
          if (source < target) {
            for (int s = 1; s <= target - source; ++s) {
              t.linear(fuse_name(i, m, source, target, s), width(config, i, source + s - 1),
                       width(config, i, source + s), source + s);
            }
          } else if (source > target) {
            for (int s = 1; s <= source - target; ++s) {
              t.linear(fuse_name(i, m, source, target, s), width(config, i, source - s + 1),
                       width(config, i, source - s), source - s);
            }
          }
        }
      }
    }
  }
  const auto w = final_widths(config);
  if (config.decoder == DecoderKind::kSum) {
    for (int j = 2; j <= 4; ++j) t.linear("decoder.sum" + std::to_string(j), w[static_cast<std::size_t>(j)], w[1], 1);
    t.linear("decoder.up0", w[1], w[0], 0);
  } else {
    for (int j = 3; j >= 0; --j) {
      const auto uj = static_cast<std::size_t>(j);
      t.linear("decoder.up" + std::to_string(j), w[uj + 1], w[uj], j);
      if (config.decoder == DecoderKind::kPgr) t.block("decoder.refine" + std::to_string(j), w[uj], j);
    }
  }
  t.linear("head.0", c0, c0, 0);
  t.linear("head.1", c0, static_cast<std::size_t>(config.num_classes), 0);
  for (int j = 1; j <= 3; ++j) {
    t.linear("cls.down" + std::to_string(j), w[static_cast<std::size_t>(j)], w[static_cast<std::size_t>(j) + 1], j + 1);
  }
  t.linear("cls.head0", w[4], w[4], -1);
  t.linear("cls.head1", w[4], static_cast<std::size_t>(config.num_classes), -1);
}

class GraphBuilder final : public Topology {
 public:
  explicit GraphBuilder(ModelGraph& graph) : graph_(graph) {}
  void linear(const std::string& name, std::size_t in, std::size_t out, int scale) override {
    append_linear_specs(graph_.tensors, name, in, out);
    graph_.layers.push_back({name, "linear", scale, in, out, linear_params(in, out)});
  }
  void block(const std::string& name, std::size_t width, int scale) override {
    const auto& config = graph_.config;
    auto specs = block_tensor_specs(name, config.op, width, block_groups(config, scale, width), config.pos_encoding);
    graph_.tensors.insert(graph_.tensors.end(), specs.begin(), specs.end());
    graph_.layers.push_back({name, "block", scale, width, width, block_params(config, scale, width)});
  }

 private:
  ModelGraph& graph_;
};

Matrix add(Matrix a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidArgument("cannot add " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " and " +
                          std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + " features");
  }
  auto dst = a.values();
  const auto src = b.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  return a;
}

Matrix block_at(const SequenceBlockParams& params, const Matrix& x, IndexSource& index, int scale) {
  const auto table = index.knn(scale);
  return sequence_block_forward(x, index.coords(scale), *table, params);
}

Matrix pool_once(const Matrix& x, IndexSource& index, int fine_scale) {
  const auto map = index.resample(fine_scale);
  return pool_rows(x, *map, PoolReduce::kMax);
}

Matrix unpool_once(const Matrix& x, IndexSource& index, int coarse_scale) {
  const auto map = index.resample(coarse_scale - 1);
  return unpool_rows(x, *map);
}

Matrix head_forward(const Linear& first, const Linear& second, const Matrix& x) {
  return linear_forward(second, relu(linear_forward(first, x)));
}

SequenceBlockParams read_block_at(const WeightStore& store, const std::string& name, const ModelConfig& config,
                                  std::size_t width, int scale) {
  return read_block(store, name, config.op, width, block_groups(config, scale, width), config.pos_encoding);
}

}  // namespace

std::size_t block_groups(const ModelConfig& config, int scale, std::size_t width) {
  return config.op == OperatorKind::kVa ? width : static_cast<std::size_t>(config.scale_groups(scale));
}

int ModelGraph::blocks_per_branch(int stage) const {
  if (stage < 1 || stage > 4) throw InvalidArgument("stage must be 1..4");
  const auto i = static_cast<std::size_t>(stage - 1);
  return config.modules[i] * config.blocks[i];
}

std::vector<int> ModelGraph::branch_widths(int stage) const {
  std::vector<int> out;
  for (int j = 1; j <= stage; ++j) out.push_back(config.branch_width(stage, j));
  return out;
}

std::vector<std::string> ModelGraph::tensor_names() const {
  std::vector<std::string> names;
  names.reserve(tensors.size());
  for (const auto& t : tensors) names.push_back(t.name);
  return names;
}

std::vector<std::string> ModelGraph::transition_chain() const {
  std::vector<std::string> chain;
  for (const auto& layer : layers) {
    if (layer.name == "stem.down" || layer.name.ends_with(".new")) chain.push_back(layer.name);
  }
  return chain;
}

ModelGraph build_model(const ModelConfig& config) {
  config.validate();
  ModelGraph graph;
  graph.config = config;
  GraphBuilder builder(graph);
  walk(config, builder);
  return graph;
}

WeightStore init_weights(const ModelConfig& config, std::uint64_t seed) {
  return init_weights(build_model(config).tensors, seed);
}

std::size_t count_params(const ModelConfig& config) {
  std::size_t total = 0;
  for (const auto& layer : build_model(config).layers) total += layer.params;
  return total;
}

FlopsEstimate estimate_flops(const ModelConfig& config, std::size_t n_points) {
  FlopsEstimate est;
  for (int s = 0; s < kNumScales; ++s) {
    est.points[static_cast<std::size_t>(s)] =
        std::max(1.0, static_cast<double>(n_points) / std::pow(kReferenceDownsample, s));
  }
  std::ostringstream assumption;
  assumption << "uniform reference cloud of " << n_points << " points; each grid level keeps 1/"
             << kReferenceDownsample << " of the points (per-scale counts";
  for (double p : est.points) assumption << ' ' << static_cast<std::size_t>(std::llround(p));
  assumption << ')';
  est.assumption = assumption.str();

  for (const auto& layer : build_model(config).layers) {
    if (layer.scale < 0) continue;  // classification head
    const double n = est.points[static_cast<std::size_t>(layer.scale)];
    const auto c = static_cast<double>(layer.in);
    if (layer.kind == "linear") {
      est.macs += n * c * static_cast<double>(layer.out);
      continue;
    }
    const double k = std::min(static_cast<double>(config.scale_neighbors(layer.scale)), n);
    const double g = static_cast<double>(block_groups(config, layer.scale, layer.in));
    double per_point = 2.0 * c * c;  // embed and update
    per_point += k * c;              // gather
    if (config.op == OperatorKind::kMlp) {
      per_point += 2.0 * c * c;
    } else {
      per_point += 3.0 * c * c;             // query, key, value
      per_point += k * (c * c + c * g);     // phi on every relation
      per_point += k * c;                   // weighted sum
      if (config.pos_encoding) per_point += k * (3.0 * c + c * c);
    }
    est.macs += n * per_point;
  }
  return est;
}

std::string params_report(const ModelConfig& config, std::size_t n_points) {
  const ModelGraph graph = build_model(config);
  std::map<std::string, std::size_t> groups;
  std::vector<std::string> order;
  std::size_t total = 0;
  for (const auto& layer : graph.layers) {
    const std::string group = layer.name.substr(0, layer.name.find('.'));
    if (groups.find(group) == groups.end()) order.push_back(group);
    groups[group] += layer.params;
    total += layer.params;
  }
  std::ostringstream out;
  out << "config:\n" << format_config(config);
  out << "parameters: " << total << " (" << std::fixed << std::setprecision(2) << static_cast<double>(total) / 1e6
      << "M)\n";
  out << "breakdown:\n";
  for (const auto& g : order) out << "  " << std::left << std::setw(10) << g << groups[g] << '\n';
  out << "layers:\n";
  for (const auto& layer : graph.layers) {
    out << "  " << std::left << std::setw(34) << layer.name << std::setw(7) << layer.kind << " scale "
        << (layer.scale < 0 ? std::string("-") : std::to_string(layer.scale)) << "  " << layer.in << " -> "
        << layer.out << "  params " << layer.params << '\n';
  }
  const auto flops = estimate_flops(config, n_points);
  out << "flops: " << std::setprecision(3) << flops.macs / 1e9 << " GMAC per forward\n";
  out << "flops assumption: " << flops.assumption << '\n';
  return out.str();
}

Network Network::from_weights(const WeightStore& store, const ModelConfig& config) {
  config.validate();
  Network net;
  net.config = config;
  const auto c0 = static_cast<std::size_t>(config.stem_channels);
  net.stem_embed = read_linear(store, "stem.embed", static_cast<std::size_t>(config.in_channels), c0);
  net.stem_block = read_block_at(store, "stem.block", config, c0, 0);
  net.stem_down = read_linear(store, "stem.down", c0, width(config, 1, 1));
  for (int i = 1; i <= 4; ++i) {
    auto& stage = net.stages[static_cast<std::size_t>(i - 1)];
    if (i > 1) {
      stage.adapt.resize(static_cast<std::size_t>(i - 1));
      for (int j = 1; j < i; ++j) {
        if (width(config, i - 1, j) != width(config, i, j)) {
          stage.adapt[static_cast<std::size_t>(j - 1)] =
              read_linear(store, adapt_name(i, j), width(config, i - 1, j), width(config, i, j));
        }
      }
      stage.new_branch = read_linear(store, new_branch_name(i), width(config, i - 1, i - 1), width(config, i, i));
    }
    for (int m = 1; m <= config.modules[static_cast<std::size_t>(i - 1)]; ++m) {
      ModuleParams module;
      module.blocks.resize(static_cast<std::size_t>(i));
      for (int j = 1; j <= i; ++j) {
        for (int b = 1; b <= config.blocks[static_cast<std::size_t>(i - 1)]; ++b) {
          module.blocks[static_cast<std::size_t>(j - 1)].push_back(
              read_block_at(store, block_name(i, m, j, b), config, width(config, i, j), j));
        }
      }
      module.fusion.branches = i;
      for (int target = 1; target <= i && i > 1; ++target) {
        for (int source = 1; source <= i; ++source) {
          if (source == target) continue;
          auto& path = module.fusion.paths[{source, target}];
          const int steps = std::abs(source - target);
          const int dir = source < target ? 1 : -1;
          for (int s = 1; s <= steps; ++s) {
            const int from = source + dir * (s - 1);
            path.push_back(read_linear(store, fuse_name(i, m, source, target, s), width(config, i, from),
                                       width(config, i, from + dir)));
          }
        }
      }
      stage.modules.push_back(std::move(module));
    }
  }
  const auto w = final_widths(config);
  if (config.decoder == DecoderKind::kSum) {
    for (int j = 2; j <= 4; ++j) {
      net.decoder.sum[static_cast<std::size_t>(j - 1)] =
          read_linear(store, "decoder.sum" + std::to_string(j), w[static_cast<std::size_t>(j)], w[1]);
    }
    net.decoder.up[0] = read_linear(store, "decoder.up0", w[1], w[0]);
  } else {
    for (int j = 3; j >= 0; --j) {
      const auto uj = static_cast<std::size_t>(j);
      net.decoder.up[uj] = read_linear(store, "decoder.up" + std::to_string(j), w[uj + 1], w[uj]);
      if (config.decoder == DecoderKind::kPgr) {
        net.decoder.refine[uj] = read_block_at(store, "decoder.refine" + std::to_string(j), config, w[uj], j);
      }
    }
  }
  net.head0 = read_linear(store, "head.0", c0, c0);
  net.head1 = read_linear(store, "head.1", c0, static_cast<std::size_t>(config.num_classes));
  for (int j = 1; j <= 3; ++j) {
    const auto uj = static_cast<std::size_t>(j);
    net.cls_down[uj - 1] = read_linear(store, "cls.down" + std::to_string(j), w[uj], w[uj + 1]);
  }
  net.cls_head0 = read_linear(store, "cls.head0", w[4], w[4]);
  net.cls_head1 = read_linear(store, "cls.head1", w[4], static_cast<std::size_t>(config.num_classes));
  return net;
}

StemOutput stem_forward(const PointCloud& cloud, IndexSource& index, const Network& net) {
  cloud.validate();
  const Matrix input = cloud.input_features();
  if (input.cols() != net.stem_embed.in()) {
    throw InvalidArgument("cloud has " + std::to_string(input.cols()) + " input channels (xyz + " +
                          std::to_string(cloud.feature_channels()) + " raw) but the weights expect " +
                          std::to_string(net.stem_embed.in()));
  }
  if (index.point_count(0) != cloud.size()) throw InvalidArgument("index was built for a different cloud");
  StemOutput out;
  out.scale0 = block_at(net.stem_block, linear_forward(net.stem_embed, input), index, 0);
  out.scale1 = linear_forward(net.stem_down, pool_once(out.scale0, index, 0));
  return out;
}

Matrix fuse_branches(std::span<const Matrix> states, int target_branch, IndexSource& index, const FusionUnit& unit) {
  if (static_cast<int>(states.size()) != unit.branches) {
    throw InvalidArgument("fusion expects " + std::to_string(unit.branches) + " branches, got " +
                          std::to_string(states.size()));
  }
  if (target_branch < 1 || target_branch > unit.branches) throw InvalidArgument("fusion target out of range");
  Matrix out = states[static_cast<std::size_t>(target_branch - 1)];
  for (int source = 1; source <= unit.branches; ++source) {
    if (source == target_branch) continue;
    const auto it = unit.paths.find({source, target_branch});
    POINTHR_CHECK(it != unit.paths.end());
    const auto& path = it->second;
    POINTHR_CHECK(path.size() == static_cast<std::size_t>(std::abs(source - target_branch)));
    Matrix y = states[static_cast<std::size_t>(source - 1)];
    for (std::size_t s = 0; s < path.size(); ++s) {
      const int step = static_cast<int>(s);
      y = source < target_branch ? pool_once(y, index, source + step) : unpool_once(y, index, source - step);
      y = linear_forward(path[s], y);
    }
    out = add(std::move(out), y);
  }
  return out;
}

EncoderOutput encoder_forward(const PointCloud& cloud, IndexSource& index, const Network& net) {
  EncoderOutput out;
  StemOutput stem = stem_forward(cloud, index, net);
  out.stem = std::move(stem.scale0);
  std::vector<Matrix> states{std::move(stem.scale1)};
  for (int i = 1; i <= 4; ++i) {
    const auto& stage = net.stages[static_cast<std::size_t>(i - 1)];
    if (i > 1) {
      Matrix fresh = linear_forward(*stage.new_branch, pool_once(states.back(), index, i - 1));
      for (std::size_t j = 0; j < stage.adapt.size(); ++j) {
        if (stage.adapt[j]) states[j] = linear_forward(*stage.adapt[j], states[j]);
      }
      states.push_back(std::move(fresh));
    }
    for (const auto& module : stage.modules) {
      for (std::size_t j = 0; j < states.size(); ++j) {
        for (const auto& block : module.blocks[j]) states[j] = block_at(block, states[j], index, static_cast<int>(j) + 1);
      }
      if (states.size() < 2) continue;
      std::vector<Matrix> fused;
      fused.reserve(states.size());
      for (int j = 1; j <= static_cast<int>(states.size()); ++j) {
        fused.push_back(fuse_branches(states, j, index, module.fusion));
      }
      states = std::move(fused);
    }
  }
  for (std::size_t j = 0; j < 4; ++j) out.branches[j] = std::move(states[j]);
  return out;
}

Matrix decoder_forward(const EncoderOutput& encoded, DecoderKind variant, IndexSource& index, const Network& net) {
  const auto& d = net.decoder;
  if (variant == DecoderKind::kSum) {
    Matrix acc = encoded.branches[0];
    for (int j = 2; j <= 4; ++j) {
      const auto& layer = d.sum[static_cast<std::size_t>(j - 1)];
      if (!layer) throw InvalidArgument("weights were built without the sum decoder");
      Matrix y = encoded.branches[static_cast<std::size_t>(j - 1)];
      for (int s = j; s >= 2; --s) y = unpool_once(y, index, s);
      acc = add(std::move(acc), linear_forward(*layer, y));
    }
    return add(encoded.stem, linear_forward(d.up[0], unpool_once(acc, index, 1)));
  }
  const bool refine = variant == DecoderKind::kPgr;
  if (refine && !d.refine[0]) throw InvalidArgument("weights were built without refinement blocks");
  if (d.up[3].weight.empty()) throw InvalidArgument("weights were built without the progressive decoder");
  Matrix state = encoded.branches[3];
  for (int j = 3; j >= 1; --j) {
    const auto uj = static_cast<std::size_t>(j);
    state = add(encoded.branches[uj - 1], linear_forward(d.up[uj], unpool_once(state, index, j + 1)));
    if (refine) state = block_at(*d.refine[uj], state, index, j);
  }
  state = add(encoded.stem, linear_forward(d.up[0], unpool_once(state, index, 1)));
  if (refine) state = block_at(*d.refine[0], state, index, 0);
  return state;
}

LabelOutput model_forward(const PointCloud& cloud, IndexSource& index, const Network& net) {
  const EncoderOutput encoded = encoder_forward(cloud, index, net);
  const Matrix decoded = decoder_forward(encoded, net.config.decoder, index, net);
  LabelOutput out;
  out.logits = {head_forward(net.head0, net.head1, decoded), 0};
#ifndef NDEBUG
  POINTHR_CHECK(out.logits.data.all_finite());
#endif
  out.labels = argmax_labels(out.logits.data);
  return out;
}

LabelOutput model_forward(const PointCloud& cloud, const IndexCache& cache, const WeightStore& weights,
                          const ModelConfig& config) {
  CachedIndex index(cache);
  return model_forward(cloud, index, Network::from_weights(weights, config));
}

std::vector<double> classification_forward(const PointCloud& cloud, IndexSource& index, const Network& net) {
  const EncoderOutput encoded = encoder_forward(cloud, index, net);
  Matrix state = encoded.branches[0];
  for (int j = 1; j <= 3; ++j) {
    const auto uj = static_cast<std::size_t>(j);
    state = add(encoded.branches[uj], linear_forward(net.cls_down[uj - 1], pool_once(state, index, j)));
  }
  Matrix pooled(1, state.cols());
  for (std::size_t c = 0; c < state.cols(); ++c) {
    double best = state(0, c);
    for (std::size_t r = 1; r < state.rows(); ++r) best = std::max(best, state(r, c));
    pooled(0, c) = best;
  }
  const Matrix logits = head_forward(net.cls_head0, net.cls_head1, pooled);
  return {logits.values().begin(), logits.values().end()};
}

std::vector<double> classification_forward(const PointCloud& cloud, const IndexCache& cache,
                                           const WeightStore& weights, const ModelConfig& config) {
  CachedIndex index(cache);
  return classification_forward(cloud, index, Network::from_weights(weights, config));
}

}  // namespace pointhr
