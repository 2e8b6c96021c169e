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

#include <vector>

#include "benchmark/benchmark.h"
#include "ldpdl/mechanisms.h"
#include "ldpdl/random.h"

namespace ldpdl {
namespace {

void BM_Perturb(benchmark::State& state, MechanismKind kind) {
  const int k = static_cast<int>(state.range(0));
  const PrivacyParameter eps = *PrivacyParameter::Create(2.0);
  std::vector<double> values(k);
  for (int j = 0; j < k; ++j) values[j] = -1.0 + 2.0 * j / std::max(1, k - 1);
  const UnitVector z = *UnitVector::Create(values);
  Rng rng(7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(Perturb(kind, z, eps, rng));
  }
  state.SetItemsProcessed(state.iterations());
}

BENCHMARK_CAPTURE(BM_Perturb, piecewise, MechanismKind::kPiecewise)
    ->Arg(10)->Arg(100);
BENCHMARK_CAPTURE(BM_Perturb, duchi, MechanismKind::kDuchi)->Arg(10)->Arg(100);
BENCHMARK_CAPTURE(BM_Perturb, laplace, MechanismKind::kLaplace)
    ->Arg(10)->Arg(100);

void BM_PiecewiseOne(benchmark::State& state) {
  const PrivacyParameter eps = *PrivacyParameter::Create(1.0);
  Rng rng(11);
  double z = 0.3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(PiecewiseOne(z, eps, rng));
  }
}
BENCHMARK(BM_PiecewiseOne);

}  // namespace
}  // namespace ldpdl
