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


#include "pointhr/weights.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <limits>
#include <ostream>

#include "pointhr/common.hpp"

namespace pointhr {
namespace {

constexpr char kMagic[4] = {'P', 'H', 'R', 'W'};
constexpr std::uint32_t kVersion = 1;

void put_u8(std::ostream& out, std::uint8_t v) { out.put(static_cast<char>(v)); }

void put_u16(std::ostream& out, std::uint16_t v) {
  const char bytes[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  out.write(bytes, 2);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes, 4);
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void bytes(char* dst, std::size_t n, const std::string& context) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw FormatError("unexpected end of file" + context);
    }
  }
  std::uint8_t u8(const std::string& context) {
    char b = 0;
    bytes(&b, 1, context);
    return static_cast<std::uint8_t>(b);
  }
  std::uint16_t u16(const std::string& context) {
    unsigned char b[2];
    bytes(reinterpret_cast<char*>(b), 2, context);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
  std::uint32_t u32(const std::string& context) {
    unsigned char b[4];
    bytes(reinterpret_cast<char*>(b), 4, context);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& in_;
};

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t stream_id(std::string_view name) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t CounterRng::bits(std::uint64_t counter) const {
  return splitmix64(splitmix64(seed_ ^ splitmix64(stream_)) + counter);
}

double CounterRng::uniform(std::uint64_t counter) const {
  return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
}

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

void WeightStore::add(std::string name, Tensor tensor) {
  if (tensor.values.size() != tensor.element_count()) {
    throw InvalidArgument("tensor '" + name + "' value count does not match its shape");
  }
  if (name.empty() || name.size() > 0xffff) throw InvalidArgument("invalid tensor name");
  const auto [it, inserted] = tensors_.emplace(std::move(name), std::move(tensor));
  if (!inserted) throw InvalidArgument("duplicate tensor '" + it->first + "'");
}

bool WeightStore::contains(std::string_view name) const { return tensors_.find(name) != tensors_.end(); }

const Tensor& WeightStore::at(std::string_view name) const {
  const auto it = tensors_.find(name);
  if (it == tensors_.end()) throw InvalidArgument("missing tensor '" + std::string(name) + "'");
  return it->second;
}

std::span<double> WeightStore::mutable_values(std::string_view name) {
  const auto it = tensors_.find(name);
  if (it == tensors_.end()) throw InvalidArgument("missing tensor '" + std::string(name) + "'");
  return it->second.values;
}

std::vector<std::string> WeightStore::names() const {
  std::vector<std::string> out;
  out.reserve(tensors_.size());
  for (const auto& [name, _] : tensors_) out.push_back(name);
  return out;
}

std::size_t WeightStore::element_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : tensors_) n += t.element_count();
  return n;
}

WeightStore init_weights(std::span<const TensorSpec> specs, std::uint64_t seed) {
  WeightStore store;
  for (const auto& spec : specs) {
    Tensor t;
    t.shape = spec.shape;
    t.values.assign(t.element_count(), 0.0);
    switch (spec.init) {
      case TensorInit::kZeros:
        break;
      case TensorInit::kOnes:
        std::fill(t.values.begin(), t.values.end(), 1.0);
        break;
      case TensorInit::kFanInUniform: {
        const double fan_in = spec.shape.empty() ? 1.0 : static_cast<double>(spec.shape.back());
        const double bound = 1.0 / std::sqrt(fan_in);
        const CounterRng rng(seed, stream_id(spec.name));
        for (std::size_t i = 0; i < t.values.size(); ++i) {
          t.values[i] = static_cast<double>(static_cast<float>(rng.uniform(i, -bound, bound)));
        }
        break;
      }
    }
    store.add(spec.name, std::move(t));
  }
  return store;
}

void write_weights(const WeightStore& store, std::ostream& out) {
  static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(store.tensor_count()));
  for (const auto& [name, tensor] : store.tensors()) {
    if (tensor.shape.size() > 0xff) throw FormatError("tensor '" + name + "' has too many dimensions");
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u8(out, static_cast<std::uint8_t>(tensor.shape.size()));
    for (auto d : tensor.shape) put_u32(out, d);
    for (double v : tensor.values) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
}

WeightStore read_weights(std::istream& in) {
  Reader reader(in);
  char magic[4];
  reader.bytes(magic, 4, " in header");
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad magic: not a PHRW weight file");
  const std::uint32_t version = reader.u32(" in header");
  if (version != kVersion) {
    throw FormatError("unsupported PHRW version " + std::to_string(version));
  }
  const std::uint32_t count = reader.u32(" in header");
  WeightStore store;
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::string where = " in tensor #" + std::to_string(t);
    const std::uint16_t name_len = reader.u16(where);
    std::string name(name_len, '\0');
    reader.bytes(name.data(), name_len, where);
    const std::string context = " in tensor '" + name + "'";
    const std::uint8_t rank = reader.u8(context);
    Tensor tensor;
    tensor.shape.resize(rank);
    std::uint64_t elements = 1;
    for (auto& d : tensor.shape) {
      d = reader.u32(context);
      elements *= d;
      if (elements > (std::uint64_t{1} << 32)) throw FormatError("implausible shape" + context);
    }
    tensor.values.resize(static_cast<std::size_t>(elements));
    for (auto& v : tensor.values) v = static_cast<double>(std::bit_cast<float>(reader.u32(context)));
    if (store.contains(name)) throw FormatError("duplicate tensor" + context);
    store.add(name, std::move(tensor));
  }
  if (!reader.at_end()) {
    throw FormatError("tensor count header says " + std::to_string(count) +
                      " but more data follows the last tensor");
  }
  return store;
}

void save_weights(const WeightStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot open '" + path + "' for writing");
  write_weights(store, out);
  if (!out) throw FormatError("failed writing '" + path + "'");
}

WeightStore load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open weight file '" + path + "'");
  return read_weights(in);
}

}  // namespace pointhr
