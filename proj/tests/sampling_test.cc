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
#include <cmath>
#include <set>
#include <sstream>
#include <vector>

#include "gmock/gmock.h"
#include "gtest/gtest.h"

namespace ldpdl {
namespace {

using ::testing::ElementsAre;

TEST(SamplerKindTest, NamesRoundTrip) {
  for (SamplerKind k : {SamplerKind::kActive, SamplerKind::kRandom}) {
    EXPECT_EQ(*ParseSamplerKind(SamplerName(k)), k);
  }
  EXPECT_FALSE(ParseSamplerKind("greedy").ok());
}

TEST(LeastConfidenceScoreTest, WorkedExamples) {
  EXPECT_NEAR(*LeastConfidenceScore({{0.7, 0.2, 0.1}}), 0.55, 1e-12);
  EXPECT_NEAR(*LeastConfidenceScore({{0.25, 0.25, 0.25, 0.25}}), 0.0, 1e-12);
  EXPECT_NEAR(*LeastConfidenceScore({{0.0, 1.0, 0.0}}), 1.0, 1e-12);
  EXPECT_NEAR(*LeastConfidenceScore({{0.5, 0.3, 0.2}}), 0.25, 1e-12);
  EXPECT_FALSE(LeastConfidenceScore({{1.0}}).ok());
}

TEST(LeastConfidenceScoreTest, BoundedAndPermutationInvariant) {
  Rng rng(1);
  for (int t = 0; t < 500; ++t) {
    const int k = 2 + static_cast<int>(rng.UniformIndex(9));
    std::vector<double> p(k);
    double sum = 0.0;
    for (double& v : p) sum += (v = rng.Uniform());
    for (double& v : p) v /= sum;
    const double score = *LeastConfidenceScore({p});
    EXPECT_GE(score, -1e-12);
    EXPECT_LE(score, 1.0 + 1e-12);
    rng.Shuffle(p);
    EXPECT_NEAR(*LeastConfidenceScore({p}), score, 1e-12);
  }
}

TEST(SelectBatchTest, LowestScoresWithIdTieBreak) {
  const std::vector<ConfidenceScore> scores = {
      {10, 0.5}, {3, 0.1}, {7, 0.1}, {1, 0.9}, {4, 0.3}};
  EXPECT_THAT(*SelectBatch(scores, 3), ElementsAre(3, 7, 4));
  EXPECT_THAT(*SelectBatch(scores, 0), ElementsAre());
  EXPECT_FALSE(SelectBatch(scores, 6).ok());
}

TEST(SelectBatchTest, WholePoolAndEqualScores) {
  std::vector<ConfidenceScore> scores;
  for (int64_t id : {9, 4, 6, 1, 8}) scores.push_back({id, 0.5});
  EXPECT_THAT(*SelectBatch(scores, 5), ElementsAre(1, 4, 6, 8, 9));
  EXPECT_THAT(*SelectBatch(scores, 2), ElementsAre(1, 4));
}

TEST(SelectBatchTest, SelectedNeverScoreAboveUnselected) {
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    std::vector<ConfidenceScore> scores;
    for (int64_t id = 0; id < 50; ++id) {
      // Coarse scores force ties.
      scores.push_back({id, static_cast<double>(rng.UniformIndex(10)) / 10.0});
    }
    const size_t s = 1 + rng.UniformIndex(50);
    const std::vector<int64_t> chosen = *SelectBatch(scores, s);
    ASSERT_EQ(chosen.size(), s);
    const std::set<int64_t> in(chosen.begin(), chosen.end());
    double max_in = -1.0;
    int64_t max_in_id = -1;
    for (const ConfidenceScore& c : scores) {
      if (in.contains(c.sample_id) &&
          (c.score > max_in || (c.score == max_in && c.sample_id > max_in_id))) {
        max_in = c.score;
        max_in_id = c.sample_id;
      }
    }
    for (const ConfidenceScore& c : scores) {
      if (in.contains(c.sample_id)) continue;
      EXPECT_TRUE(c.score > max_in || (c.score == max_in && c.sample_id > max_in_id));
    }
  }
}

TEST(RandomBatchTest, WholePoolIsPermutation) {
  const std::vector<int64_t> ids = {5, 3, 8, 1};
  Rng rng(1);
  std::vector<int64_t> batch = *RandomBatch(ids, 4, rng);
  std::sort(batch.begin(), batch.end());
  EXPECT_THAT(batch, ElementsAre(1, 3, 5, 8));
}

TEST(RandomBatchTest, SingleDrawFrequencies) {
  std::vector<int64_t> ids(10);
  for (int i = 0; i < 10; ++i) ids[i] = i;
  std::vector<int> hits(10, 0);
  Rng rng(12);
  const int trials = 100000;
  for (int t = 0; t < trials; ++t) ++hits[(*RandomBatch(ids, 1, rng))[0]];
  const double sd = std::sqrt(trials * 0.1 * 0.9);
  for (int h : hits) EXPECT_NEAR(h, trials * 0.1, 3 * sd);
}

TEST(RandomBatchTest, DistinctSubsetAndSeeded) {
  std::vector<int64_t> ids(100);
  for (int i = 0; i < 100; ++i) ids[i] = 1000 + i;
  Rng a(5), b(5);
  const std::vector<int64_t> first = *RandomBatch(ids, 30, a);
  EXPECT_EQ(first, *RandomBatch(ids, 30, b));
  const std::set<int64_t> unique(first.begin(), first.end());
  EXPECT_EQ(unique.size(), 30u);
  for (int64_t id : first) {
    EXPECT_TRUE(std::find(ids.begin(), ids.end(), id) != ids.end());
  }
  EXPECT_FALSE(RandomBatch(ids, 101, a).ok());
}

TEST(RandomBatchTest, RoughlyUniformInclusion) {
  std::vector<int64_t> ids(10);
  for (int i = 0; i < 10; ++i) ids[i] = i;
  std::vector<int> hits(10, 0);
  Rng rng(9);
  const int trials = 20000;
  for (int t = 0; t < trials; ++t) {
    const std::vector<int64_t> batch = *RandomBatch(ids, 3, rng);
    for (int64_t id : batch) ++hits[id];
  }
  // Each id is included with probability 0.3; 4 binomial standard errors.
  const double sd = std::sqrt(trials * 0.3 * 0.7);
  for (int h : hits) EXPECT_NEAR(h, trials * 0.3, 4 * sd);
}

TEST(LeastConfidenceScoresTest, ScoresEveryPoolSample) {
  Rng rng(2);
  const MlpModel model = *MlpModel::Create(std::vector<int>{3, 4, 5}, rng);
  UnlabeledPool pool;
  pool.features = Matrix(0, 3);
  for (int i = 0; i < 6; ++i) {
    pool.ids.push_back(100 - i);
    pool.features.AppendRow(std::vector<double>{0.1 * i, 0.5, 1.0 - 0.1 * i});
  }
  const std::vector<ConfidenceScore> scores = *LeastConfidenceScores(model, pool);
  ASSERT_EQ(scores.size(), 6u);
  for (int i = 0; i < 6; ++i) {
    EXPECT_EQ(scores[i].sample_id, 100 - i);
    const Logits z = *Forward(model, pool.features.row(i));
    EXPECT_DOUBLE_EQ(scores[i].score, *LeastConfidenceScore(*SoftmaxT(z, 1.0)));
  }
}

TEST(ScoreCsvTest, MarksSelection) {
  std::stringstream out;
  WriteScoreCsv(out, std::vector<ConfidenceScore>{{1, 0.25}, {2, 0.5}},
                std::vector<int64_t>{2});
  EXPECT_EQ(out.str(), "sample_id,score,selected\n1,0.25,0\n2,0.5,1\n");
}

}  // namespace
}  // namespace ldpdl
