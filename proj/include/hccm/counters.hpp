// Copyright 2026 The HCCM Authors. All Rights Reserved.
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

#ifndef HCCM_COUNTERS_HPP_
#define HCCM_COUNTERS_HPP_

#include <atomic>
#include <cstdint>

namespace hccm {

// Process-wide operation counters. The serving path is required to execute
// zero convolutions; tests read these to prove it.
struct OpCounters {
  static std::atomic<uint64_t>& conv2d_calls() {
    static std::atomic<uint64_t> n{0};
    return n;
  }
  static uint64_t conv2d() { return conv2d_calls().load(std::memory_order_relaxed); }
  static void bump_conv2d() { conv2d_calls().fetch_add(1, std::memory_order_relaxed); }
};

}  // namespace hccm

#endif  // HCCM_COUNTERS_HPP_
