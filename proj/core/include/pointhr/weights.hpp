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
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pointhr {

// Counter-based generator: every draw is a pure function of
// (seed, stream, counter), so fill order never changes the values.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  std::uint64_t bits(std::uint64_t counter) const;
  // Uniform in [0, 1).
  double uniform(std::uint64_t counter) const;
  double uniform(std::uint64_t counter, double lo, double hi) const {
    return lo + (hi - lo) * uniform(counter);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t stream_id(std::string_view name);

struct Tensor {
  std::vector<std::uint32_t> shape;
  std::vector<double> values;

  std::size_t element_count() const;
  bool operator==(const Tensor&) const = default;
};

enum class TensorInit { kFanInUniform, kZeros, kOnes };

struct TensorSpec {
  std::string name;
  std::vector<std::uint32_t> shape;
  TensorInit init = TensorInit::kFanInUniform;
};

// Named tensors. Shapes are fixed once a tensor is added.
class WeightStore {
 public:
  void add(std::string name, Tensor tensor);
  bool contains(std::string_view name) const;
  const Tensor& at(std::string_view name) const;
  // Values may be edited in place; the shape may not.
  std::span<double> mutable_values(std::string_view name);

  std::vector<std::string> names() const;
  std::size_t tensor_count() const { return tensors_.size(); }
  std::size_t element_count() const;
  const std::map<std::string, Tensor, std::less<>>& tensors() const { return tensors_; }

  bool operator==(const WeightStore&) const = default;

 private:
  std::map<std::string, Tensor, std::less<>> tensors_;
};

// Linear weights ~ U[-1/sqrt(fan_in), 1/sqrt(fan_in)] with fan_in the last
// dimension, rounded to 32-bit so the weight file round-trips exactly.
WeightStore init_weights(std::span<const TensorSpec> specs, std::uint64_t seed);

// "PHRW" binary format, version 1, little-endian, 32-bit float payload.
void write_weights(const WeightStore& store, std::ostream& out);
WeightStore read_weights(std::istream& in);
void save_weights(const WeightStore& store, const std::string& path);
WeightStore load_weights(const std::string& path);

}  // namespace pointhr
