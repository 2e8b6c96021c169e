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

#ifndef LDPDL_SAMPLING_H_
#define LDPDL_SAMPLING_H_

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "absl/status/statusor.h"
#include "absl/types/span.h"
#include "ldpdl/data.h"
#include "ldpdl/nn.h"
#include "ldpdl/random.h"

namespace ldpdl {

enum class SamplerKind : uint8_t { kActive, kRandom };

absl::string_view SamplerName(SamplerKind kind);
absl::StatusOr<SamplerKind> ParseSamplerKind(absl::string_view name);

struct ConfidenceScore {
  int64_t sample_id = 0;
  double score = 0.0;
};

// Mean gap between the largest probability and every class probability:
// (1 / (k - 1)) * sum_l (p* - p_l). 0 for a uniform prediction, 1 for one-hot.
// Requires k >= 2.
absl::StatusOr<double> LeastConfidenceScore(const SoftLabel& prediction);

// Scores every pool sample under the student at temperature 1.
absl::StatusOr<std::vector<ConfidenceScore>> LeastConfidenceScores(
    const MlpModel& student, const UnlabeledPool& pool);

// The `batch_size` lowest scores, ordered by (score, sample id).
absl::StatusOr<std::vector<int64_t>> SelectBatch(
    absl::Span<const ConfidenceScore> scores, size_t batch_size);

// Uniform sample without replacement.
absl::StatusOr<std::vector<int64_t>> RandomBatch(absl::Span<const int64_t> ids,
                                                 size_t batch_size, Rng& rng);

// CSV `sample_id,score,selected` for one sampling round.
void WriteScoreCsv(std::ostream& out, absl::Span<const ConfidenceScore> scores,
                   absl::Span<const int64_t> selected);

}  // namespace ldpdl

#endif  // LDPDL_SAMPLING_H_
