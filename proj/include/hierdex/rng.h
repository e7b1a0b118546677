// Copyright 2026 The HierDex Authors
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

#ifndef HIERDEX_RNG_H_
#define HIERDEX_RNG_H_

#include <cstdint>
#include <random>

namespace hierdex {

// Seeded generator shared by every stochastic component. Each worker, episode
// or trajectory owns its own instance; streams are derived from a master seed
// with Derive() so results do not depend on scheduling.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : seed_(seed), engine_(Mix(seed)) {}

  double Uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  // Inclusive on both ends.
  int UniformInt(int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(engine_);
  }
  double Normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }

  uint64_t seed() const { return seed_; }
  std::mt19937_64& engine() { return engine_; }

  // Independent child stream identified by a fixed offset.
  Rng Derive(uint64_t stream) const { return Rng(Mix(seed_ ^ Mix(stream + 1))); }

  static uint64_t Mix(uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

 private:
  uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace hierdex

#endif  // HIERDEX_RNG_H_
