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

#include "ldpdl/sampling.h"

#include <algorithm>
#include <ostream>

#include "absl/container/flat_hash_set.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"

namespace ldpdl {

absl::string_view SamplerName(SamplerKind kind) {
  return kind == SamplerKind::kActive ? "active" : "random";
}

absl::StatusOr<SamplerKind> ParseSamplerKind(absl::string_view name) {
  if (name == "active" || name == "aqs") return SamplerKind::kActive;
  if (name == "random") return SamplerKind::kRandom;
  return absl::InvalidArgumentError(
      absl::StrCat("unknown sampler '", name, "' (expected active or random)"));
}

absl::StatusOr<double> LeastConfidenceScore(const SoftLabel& prediction) {
  const int k = prediction.k();
  if (k < 2) {
    return absl::InvalidArgumentError(
        "least-confidence scoring needs at least two classes");
  }
  const double top =
      *std::max_element(prediction.probs.begin(), prediction.probs.end());
  double gap = 0.0;
  for (double p : prediction.probs) gap += top - p;
  return gap / (k - 1);
}

absl::StatusOr<std::vector<ConfidenceScore>> LeastConfidenceScores(
    const MlpModel& student, const UnlabeledPool& pool) {
  if (pool.size() == 0) return absl::InvalidArgumentError("empty pool");
  std::vector<ConfidenceScore> scores;
  scores.reserve(pool.size());
  for (size_t i = 0; i < pool.size(); ++i) {
    absl::StatusOr<Logits> logits = Forward(student, pool.features.row(i));
    if (!logits.ok()) return logits.status();
    absl::StatusOr<SoftLabel> p = SoftmaxT(*logits, 1.0);
    if (!p.ok()) return p.status();
    absl::StatusOr<double> score = LeastConfidenceScore(*p);
    if (!score.ok()) return score.status();
    scores.push_back({pool.ids[i], *score});
  }
  return scores;
}

absl::StatusOr<std::vector<int64_t>> SelectBatch(
    absl::Span<const ConfidenceScore> scores, size_t batch_size) {
  if (batch_size > scores.size()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "cannot select %d samples from a pool of %d", batch_size, scores.size()));
  }
  std::vector<ConfidenceScore> sorted(scores.begin(), scores.end());
  auto by_score_then_id = [](const ConfidenceScore& a,
                             const ConfidenceScore& b) {
    if (a.score != b.score) return a.score < b.score;
    return a.sample_id < b.sample_id;
  };
  std::partial_sort(sorted.begin(), sorted.begin() + batch_size, sorted.end(),
                    by_score_then_id);
  std::vector<int64_t> ids;
  ids.reserve(batch_size);
  for (size_t i = 0; i < batch_size; ++i) ids.push_back(sorted[i].sample_id);
  return ids;
}

absl::StatusOr<std::vector<int64_t>> RandomBatch(absl::Span<const int64_t> ids,
                                                 size_t batch_size, Rng& rng) {
  if (batch_size > ids.size()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "cannot select %d samples from a pool of %d", batch_size, ids.size()));
  }
  std::vector<int64_t> pool(ids.begin(), ids.end());
  for (size_t i = 0; i < batch_size; ++i) {
    const size_t j = i + rng.UniformIndex(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(batch_size);
  return pool;
}

void WriteScoreCsv(std::ostream& out, absl::Span<const ConfidenceScore> scores,
                   absl::Span<const int64_t> selected) {
  absl::flat_hash_set<int64_t> chosen(selected.begin(), selected.end());
  out << "sample_id,score,selected\n";
  for (const ConfidenceScore& s : scores) {
    out << absl::StrFormat("%d,%.17g,%d\n", s.sample_id, s.score,
                           chosen.contains(s.sample_id) ? 1 : 0);
  }
}

}  // namespace ldpdl
