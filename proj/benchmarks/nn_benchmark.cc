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
#include "ldpdl/nn.h"
#include "ldpdl/random.h"

namespace ldpdl {
namespace {

void BM_Forward(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  Rng rng(3);
  const MlpModel model = *MlpModel::Create({d, 64, 10}, rng);
  std::vector<double> x(d, 0.5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(Forward(model, x));
  }
}
BENCHMARK(BM_Forward)->Arg(16)->Arg(784);

void BM_GradKd(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  Rng rng(5);
  const MlpModel model = *MlpModel::Create({d, 64, 10}, rng);
  const std::vector<DistillExample> batch(
      32, DistillExample{std::vector<double>(d, 0.25),
                         Logits{{0.1, -0.2, 0.3, 0.0, 1.0, -1.0, 0.5, 0.2,
                                 -0.4, 0.7}}});
  const DistillationConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(GradKd(model, batch, cfg));
  }
}
BENCHMARK(BM_GradKd)->Arg(16)->Arg(784);

}  // namespace
}  // namespace ldpdl
