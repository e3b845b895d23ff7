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


#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pointhr/config.hpp"
#include "pointhr/tensor.hpp"

namespace pointhr {

struct NamedBuffer {
  std::string name;
  std::span<double> values;
};

struct NamedGradient {
  std::string name;
  std::vector<double> values;
};

// A differentiable function of named buffers. The loss is the sum of
// outputs(); gradients() returns d loss / d buffer in tensors() order.
class GradCase {
 public:
  virtual ~GradCase() = default;

  virtual std::vector<NamedBuffer> tensors() = 0;
  virtual Matrix outputs() const = 0;
  virtual std::vector<NamedGradient> gradients() const = 0;
  // Smallest distance from any ReLU pre-activation to 0 and from any max
  // winner to its runner-up. +inf when the function is smooth.
  virtual double nondifferentiable_margin() const { return std::numeric_limits<double>::infinity(); }
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  // Largest relative error among elements where max(|analytic|, |numeric|)
  // reaches `floor` in the call that produced this result.
  double max_rel_error_above_floor = 0.0;
  std::size_t checked = 0;
  bool finite = true;
  std::string failure;  // names the tensor holding a non-finite gradient
};

// Central differences of sum(outputs) against the analytic gradients, with
// relative error |a - n| / max(|a|, |n|, 1e-8).
GradCheckResult finite_diff_check(GradCase& c, double eps, double floor = 1e-6);

enum class GradTarget { kLinear, kVa, kGva, kMlp, kBlockVa, kBlockGva, kBlockMlp };

std::string_view to_string(GradTarget target);
GradTarget parse_grad_target(std::string_view name);
const std::vector<GradTarget>& all_grad_targets();

struct GradCaseOptions {
  std::size_t points = 8;
  std::size_t channels = 4;
  std::size_t neighbors = 3;
  std::size_t groups = 2;
  bool position = false;
};

std::unique_ptr<GradCase> make_grad_case(GradTarget target, const GradCaseOptions& options, std::uint64_t seed);

inline constexpr double kGradTolerance = 1e-4;
// Cases whose margin is below this are re-drawn before checking.
inline constexpr double kKinkMargin = 1e-4;

struct GradRunReport {
  GradCheckResult result;
  std::size_t resamples = 0;
  bool passed() const { return result.finite && result.max_rel_error < kGradTolerance; }
};

GradRunReport run_gradcheck(GradTarget target, const GradCaseOptions& options, std::uint64_t seed, double eps);

}  // namespace pointhr
