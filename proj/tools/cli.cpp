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


#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pointhr/bench.hpp"
#include "pointhr/config.hpp"
#include "pointhr/gradcheck.hpp"
#include "pointhr/index_cache.hpp"
#include "pointhr/io.hpp"
#include "pointhr/model.hpp"
#include "pointhr/spatial.hpp"
#include "pointhr/synthetic.hpp"
#include "pointhr/weights.hpp"

namespace pointhr::cli {
namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

ModelConfig resolve_config(const std::string& name) {
  if (is_preset_name(name)) return preset(name);
  return load_config_file(name);
}

void apply_overrides(ModelConfig& config, const std::string& op, const std::string& decoder) {
  if (!op.empty()) config.op = parse_operator(op);
  if (!decoder.empty()) config.decoder = parse_decoder(decoder);
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot open '" + path + "' for writing");
  return out;
}

WeightStore weights_for(const ModelConfig& config, const std::string& weights_path, std::optional<std::uint64_t> seed) {
  if (!weights_path.empty()) return load_weights(weights_path);
  return init_weights(config, seed.value_or(0));
}

// Checkers used by `oracle`. Each returns the number of violations.

std::size_t knn_mismatches(std::size_t points, std::uint64_t seed, std::size_t k) {
  PointCloud cloud = uniform_cloud(points, seed);
  // Make the last eighth coincide with earlier points.
  for (std::size_t i = points - points / 8; i < points; ++i) cloud.coords[i] = cloud.coords[i / 2];
  k = std::min(k, points);
  const auto fast = knn_query(cloud.coords, cloud.coords, k, KnnBackend::kGrid);
  const auto brute = knn_query(cloud.coords, cloud.coords, k, KnnBackend::kBrute);
  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < points; ++i) {
    const auto a = fast.row(i);
    const auto b = brute.row(i);
    if (!std::equal(a.begin(), a.end(), b.begin(), b.end())) ++mismatches;
  }
  return mismatches;
}

std::size_t fps_mismatches(std::size_t points, std::uint64_t seed) {
  const PointCloud cloud = uniform_cloud(points, seed);
  const auto& c = cloud.coords;
  const auto picked = fps_select(c, points);
  std::size_t mismatches = 0;
  std::size_t seed_index = 0;
  for (std::size_t i = 1; i < points; ++i) {
    if (c[i] < c[seed_index]) seed_index = i;
  }
  if (picked.empty() || picked[0] != seed_index) ++mismatches;
  std::vector<bool> selected(points, false);
  std::vector<double> nearest(points, std::numeric_limits<double>::infinity());
  for (std::size_t t = 0; t < picked.size(); ++t) {
    if (t > 0) {
      double best = -1.0;
      for (std::size_t i = 0; i < points; ++i) {
        if (!selected[i]) best = std::max(best, nearest[i]);
      }
      if (selected[picked[t]] || nearest[picked[t]] < best) ++mismatches;
    }
    selected[picked[t]] = true;
    for (std::size_t i = 0; i < points; ++i) nearest[i] = std::min(nearest[i], squared_distance(c[i], c[picked[t]]));
  }
  return mismatches;
}

std::size_t grid_mismatches(std::size_t points, std::uint64_t seed, double cell) {
  const PointCloud cloud = uniform_cloud(points, seed);
  const auto map = grid_pool_map(cloud.coords, cell);
  std::map<std::array<std::int64_t, 3>, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < points; ++i) {
    std::array<std::int64_t, 3> key{};
    for (std::size_t d = 0; d < 3; ++d) key[d] = static_cast<std::int64_t>(std::floor(cloud.coords[i][d] / cell));
    cells[key].push_back(i);
  }
  std::size_t mismatches = cells.size() == map.coarse_count() ? 0 : 1;
  std::size_t coarse = 0;
  for (const auto& [key, members] : cells) {
    Point3 mean{0, 0, 0};
    for (auto i : members) {
      if (map.down_assign[i] != coarse) ++mismatches;
      for (std::size_t d = 0; d < 3; ++d) mean[d] += cloud.coords[i][d];
    }
    for (std::size_t d = 0; d < 3 && coarse < map.coarse_count(); ++d) {
      mean[d] /= static_cast<double>(members.size());
      if (std::abs(mean[d] - map.coarse_coords[coarse][d]) > 1e-12) ++mismatches;
    }
    ++coarse;
  }
  return mismatches;
}

int cmd_infer(const std::string& config_name, const std::string& input, const std::string& weights_path,
              std::optional<std::uint64_t> seed, const std::string& output, const std::string& logits_path,
              const std::string& op, const std::string& decoder, bool no_cache, std::ostream& out) {
  ModelConfig config = resolve_config(config_name);
  apply_overrides(config, op, decoder);
  const PointCloud cloud = read_cloud(input);
  config.in_channels = 3 + static_cast<int>(cloud.feature_channels());
  const WeightStore weights = weights_for(config, weights_path, seed);
  const Network net = Network::from_weights(weights, config);

  LabelOutput result;
  if (no_cache) {
    OnTheFlyIndex index(cloud, config);
    result = model_forward(cloud, index, net);
  } else {
    const IndexCache cache = build_cache(cloud, config);
    CachedIndex index(cache);
    result = model_forward(cloud, index, net);
  }
  auto labels = open_output(output);
  write_labels(labels, result.labels);
  if (!logits_path.empty()) {
    auto logits = open_output(logits_path);
    write_matrix(logits, result.logits.data);
  }
  out << "points: " << cloud.size() << "\nclasses: " << config.num_classes << "\nlabels: " << output << '\n';
  return kExitOk;
}

int cmd_bench(const std::string& config_name, const std::string& input, std::size_t synthetic, std::size_t repeats,
              const std::string& weights_path, std::uint64_t seed, const std::string& op, const std::string& decoder,
              std::ostream& out, std::ostream& err) {
  ModelConfig config = resolve_config(config_name);
  apply_overrides(config, op, decoder);
  const PointCloud cloud = input.empty() ? room_cloud(synthetic, seed) : read_cloud(input);
  config.in_channels = 3 + static_cast<int>(cloud.feature_channels());
  const WeightStore weights = weights_for(config, weights_path, seed);

  std::vector<BenchReport> reports;
  reports.push_back(bench_index(cloud, config, weights, repeats, IndexMode::kCached));
  reports.push_back(bench_index(cloud, config, weights, repeats, IndexMode::kOnTheFly));
  out << "points: " << cloud.size() << "\n" << format_bench(reports);
  const double gain = 1.0 - reports[0].median_ms / reports[1].median_ms;
  out << "speedup=" << std::fixed << std::setprecision(1) << 100.0 * gain << "%\n";
  if (!(reports[0].output.logits.data == reports[1].output.logits.data)) {
    err << "error: cached and on-the-fly logits differ\n";
    return kExitRuntime;
  }
  out << "logits: identical\n";
  return kExitOk;
}

int cmd_gradcheck(const std::string& target, std::size_t points, std::size_t channels, std::size_t neighbors,
                  std::size_t groups, bool position, double eps, std::uint64_t seed, std::ostream& out) {
  GradCaseOptions options;
  options.points = points;
  options.channels = channels;
  options.neighbors = neighbors;
  options.groups = groups;
  options.position = position;
  const auto report = run_gradcheck(parse_grad_target(target), options, seed, eps);
  const auto& r = report.result;
  if (!r.finite) {
    out << "FAIL: " << r.failure << '\n';
    return kExitRuntime;
  }
  out << std::scientific << std::setprecision(3);
  out << "operator: " << target << "\nchecked: " << r.checked << "\nresamples: " << report.resamples << '\n';
  out << "max relative error: " << r.max_rel_error << " (" << r.worst_tensor << "[" << r.worst_index
      << "], analytic " << r.worst_analytic << ", numeric " << r.worst_numeric << ")\n";
  out << "max relative error where |gradient| >= 1e-6: " << r.max_rel_error_above_floor << '\n';
  out << (report.passed() ? "PASS" : "FAIL") << " (threshold " << kGradTolerance << ")\n";
  return report.passed() ? kExitOk : kExitRuntime;
}

int cmd_params(const std::string& config_name, std::size_t points, std::ostream& out) {
  const ModelConfig config = resolve_config(config_name);
  out << params_report(config, points);
  return kExitOk;
}

int cmd_oracle(const std::string& op, std::size_t points, std::uint64_t seed, std::size_t k, double cell,
               std::ostream& out) {
  if (points == 0) throw InvalidArgument("--points must be positive");
  std::size_t mismatches = 0;
  if (op == "knn") {
    mismatches = knn_mismatches(points, seed, k);
  } else if (op == "fps") {
    mismatches = fps_mismatches(points, seed);
  } else {
    mismatches = grid_mismatches(points, seed, cell);
  }
  out << "op: " << op << "\npoints: " << points << "\nmismatches: " << mismatches << '\n';
  return mismatches == 0 ? kExitOk : kExitRuntime;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"pointhr: high-resolution point cloud network toolkit"};
  app.require_subcommand(1);
  const std::vector<std::string> operators{"va", "gva", "mlp"};
  const std::vector<std::string> decoders{"sum", "pg", "pgr"};

  std::string config_name;
  std::string input;
  std::string weights_path;
  std::string output;
  std::string logits_path;
  std::string op;
  std::string decoder;
  std::uint64_t seed = 0;
  bool no_cache = false;

  auto* infer = app.add_subcommand("infer", "Label every point of a cloud");
  infer->add_option("--config", config_name, "Preset (T, S, B, L) or config file")->required();
  infer->add_option("--input", input, "Point cloud text file")->required();
  auto* infer_weights = infer->add_option("--weights", weights_path, "PHRW weight file");
  auto* infer_seed = infer->add_option("--seed", seed, "Initialize weights from this seed");
  infer_weights->excludes(infer_seed);
  infer_seed->excludes(infer_weights);
  infer->add_option("--output", output, "Label file, one label per line")->required();
  infer->add_option("--logits", logits_path, "Also write N x cls logits");
  infer->add_option("--operator", op, "Override the local extractor")->check(CLI::IsMember(operators));
  infer->add_option("--decoder", decoder, "Override the decoder")->check(CLI::IsMember(decoders));
  infer->add_flag("--no-cache", no_cache, "Recompute indices at their point of use");

  std::size_t repeats = 5;
  std::size_t synthetic = 100000;
  auto* bench = app.add_subcommand("bench", "Time cached against on-the-fly indexing");
  bench->add_option("--config", config_name, "Preset or config file")->required();
  auto* bench_input = bench->add_option("--input", input, "Point cloud text file");
  bench->add_option("--synthetic", synthetic, "Synthetic room size when --input is absent")->excludes(bench_input);
  bench->add_option("--repeat", repeats, "Timed passes per mode")->check(CLI::Range(3, 1000));
  bench->add_option("--weights", weights_path, "PHRW weight file");
  bench->add_option("--seed", seed, "Weight and synthetic cloud seed");
  bench->add_option("--operator", op)->check(CLI::IsMember(operators));
  bench->add_option("--decoder", decoder)->check(CLI::IsMember(decoders));

  std::string target = "gva";
  std::size_t points = 16;
  std::size_t channels = 8;
  std::size_t neighbors = 4;
  std::size_t groups = 2;
  bool position = false;
  double eps = 1e-6;
  auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  std::vector<std::string> targets;
  for (auto t : all_grad_targets()) targets.emplace_back(to_string(t));
  gradcheck->add_option("--operator", target, "va, gva, mlp, linear or block-<kind>")->check(CLI::IsMember(targets));
  gradcheck->add_option("--points", points)->check(CLI::PositiveNumber);
  gradcheck->add_option("--channels", channels)->check(CLI::PositiveNumber);
  gradcheck->add_option("--neighbors", neighbors)->check(CLI::PositiveNumber);
  gradcheck->add_option("--groups", groups)->check(CLI::PositiveNumber);
  gradcheck->add_flag("--position", position, "Enable the relative-position term");
  gradcheck->add_option("--eps", eps)->check(CLI::PositiveNumber);
  gradcheck->add_option("--seed", seed);

  std::size_t flop_points = 100000;
  auto* params = app.add_subcommand("params", "Parameter count, layer listing and FLOPs estimate");
  params->add_option("--config", config_name, "Preset or config file")->required();
  params->add_option("--points", flop_points, "Input size for the FLOPs estimate")->check(CLI::PositiveNumber);

  std::string oracle_op;
  std::size_t k = 16;
  double cell = 0.125;
  auto* oracle = app.add_subcommand("oracle", "Check fast spatial operators against brute force");
  oracle->add_option("--op", oracle_op, "knn, fps or grid")->required()->check(CLI::IsMember({"knn", "fps", "grid"}));
  oracle->add_option("--points", points)->check(CLI::PositiveNumber);
  oracle->add_option("--seed", seed);
  oracle->add_option("--k", k)->check(CLI::PositiveNumber);
  oracle->add_option("--cell", cell)->check(CLI::PositiveNumber);

  std::size_t in_channels = 3;
  auto* init = app.add_subcommand("init", "Write seeded initial weights");
  init->add_option("--config", config_name, "Preset or config file")->required();
  init->add_option("--seed", seed);
  init->add_option("--in-channels", in_channels, "xyz plus raw feature channels")->check(CLI::PositiveNumber);
  init->add_option("--output", output, "PHRW weight file")->required();
  init->add_option("--operator", op)->check(CLI::IsMember(operators));
  init->add_option("--decoder", decoder)->check(CLI::IsMember(decoders));

  std::string kind = "room";
  auto* synth = app.add_subcommand("synth", "Write a synthetic point cloud");
  synth->add_option("--points", points)->check(CLI::PositiveNumber);
  synth->add_option("--seed", seed);
  synth->add_option("--kind", kind)->check(CLI::IsMember({"room", "uniform"}));
  synth->add_option("--output", output)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*infer) {
      if (weights_path.empty() && infer_seed->count() == 0) {
        throw UsageError("infer needs --weights or --seed");
      }
      return cmd_infer(config_name, input, weights_path,
                       infer_seed->count() ? std::optional<std::uint64_t>(seed) : std::nullopt, output, logits_path,
                       op, decoder, no_cache, out);
    }
    if (*bench) {
      return cmd_bench(config_name, input, synthetic, repeats, weights_path, seed, op, decoder, out, err);
    }
    if (*gradcheck) return cmd_gradcheck(target, points, channels, neighbors, groups, position, eps, seed, out);
    if (*params) return cmd_params(config_name, flop_points, out);
    if (*oracle) return cmd_oracle(oracle_op, points, seed, k, cell, out);
    if (*init) {
      ModelConfig config = resolve_config(config_name);
      apply_overrides(config, op, decoder);
      config.in_channels = static_cast<int>(in_channels);
      save_weights(init_weights(config, seed), output);
      out << "tensors written: " << output << '\n';
      return kExitOk;
    }
    if (*synth) {
      save_cloud(kind == "room" ? room_cloud(points, seed) : uniform_cloud(points, seed), output);
      out << "points written: " << points << '\n';
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace pointhr::cli
