// Copyright 2026 The ghzsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GHZSIM_RNG_H
#define GHZSIM_RNG_H

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace ghzsim {

/// SplitMix64 finalizer.
constexpr uint64_t mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Folds a run seed and a path of stream coordinates (source, slice,
/// event, ...) into one key. Distinct paths give independent streams.
constexpr uint64_t derive_key(uint64_t seed, std::initializer_list<uint64_t> path) {
    uint64_t k = mix64(seed ^ 0x6A09E667F3BCC909ULL);
    for (uint64_t p : path) {
        k = mix64(k + 0x9E3779B97F4A7C15ULL + mix64(p));
    }
    return k;
}

/// Counter-based SplitMix64. The n-th output depends only on (key, n), so
/// any shard of a run can be regenerated independently of thread layout.
class CounterRng {
   public:
    using result_type = uint64_t;

    explicit constexpr CounterRng(uint64_t key) : state_(key) {
    }

    static constexpr result_type min() {
        return 0;
    }
    static constexpr result_type max() {
        return std::numeric_limits<uint64_t>::max();
    }

    result_type operator()() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix64(state_);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
    }

   private:
    uint64_t state_;
};

}  // namespace ghzsim

#endif
