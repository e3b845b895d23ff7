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

#include "pointhr/types.hpp"

namespace pointhr {

// Points uniform in [0, extent)^3.
PointCloud uniform_cloud(std::size_t n, std::uint64_t seed, double extent = 1.0);

// Surface scan of a furnished 4 m x 3 m x 2.5 m room: floor, four walls and
// a table top, sampled by area with millimetre jitter.
PointCloud room_cloud(std::size_t n, std::uint64_t seed);

}  // namespace pointhr
