// Copyright 2026 The ldpdl Authors
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

#ifndef LDPDL_RANDOM_H_
#define LDPDL_RANDOM_H_

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace ldpdl {

// Seeded pseudo-random source used by every randomized operation. There is no
// global generator: callers own an Rng and pass it explicitly.
//
// The uniform, Gaussian and Laplace transforms are implemented here rather
// than through <random> distributions so that streams are identical across
// standard library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  // Derives an independent stream from a base seed and two keys. Used to key
  // per-owner answer streams by (owner id, sample id) so results do not depend
  // on query scheduling.
  static Rng ForStream(uint64_t seed, uint64_t key_a, uint64_t key_b = 0);

  uint64_t NextU64() { return engine_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double Uniform();
  // Uniform double in the open interval (0, 1).
  double UniformOpen();
  // Uniform integer in [0, n). `n` must be positive.
  uint64_t UniformIndex(uint64_t n);
  // Standard normal draw (Box-Muller, one output per call).
  double Gaussian();
  // Zero-mean Laplace draw with the given scale.
  double Laplace(double scale);

  template <typename T>
  void Shuffle(std::vector<T>& values) {
    for (size_t i = values.size(); i > 1; --i) {
      size_t j = UniformIndex(i);
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer; exposed for seed derivation in higher layers.
uint64_t MixSeed(uint64_t value);

}  // namespace ldpdl

#endif  // LDPDL_RANDOM_H_
