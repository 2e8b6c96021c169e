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

#include "ldpdl/protocol.h"

#include <cmath>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "ldpdl/data.h"
#include "testing/oracles.h"

namespace ldpdl {
namespace {

using ::ldpdl::testing::MomentAccumulator;
using ::testing::DoubleNear;
using ::testing::Each;
using ::testing::HasSubstr;

// A single-layer teacher whose softmax output is `p` for every input.
MlpModel ConstantTeacher(int d, const std::vector<double>& p) {
  DenseLayer layer;
  layer.in = d;
  layer.out = static_cast<int>(p.size());
  layer.weights.assign(layer.in * layer.out, 0.0);
  for (double v : p) layer.bias.push_back(std::log(v));
  return *MlpModel::FromLayers({layer});
}

std::vector<double> Unmap(const PerturbedVector& v) {
  std::vector<double> p;
  for (double z : v.coords) p.push_back((z + 1.0) / 2.0);
  return p;
}

TEST(OwnerAnswerTest, HugeBudgetRecoversTeacherOutput) {
  const std::vector<double> p = {0.6, 0.3, 0.1};
  const MlpModel teacher = ConstantTeacher(2, p);
  for (MechanismKind m : {MechanismKind::kPiecewise, MechanismKind::kDuchi,
                          MechanismKind::kLaplace}) {
    Rng rng(1);
    const PerturbedVector y =
        *OwnerAnswer(teacher, std::vector<double>{0.5, 0.5}, 1e6, m, rng);
    if (m == MechanismKind::kDuchi) continue;  // two-point output
    const std::vector<double> back = Unmap(y);
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(back[j], p[j], 1e-3);
  }
}

TEST(OwnerAnswerTest, OneHotMapsToEndpoints) {
  DenseLayer layer{1, 2, {0.0, 0.0}, {200.0, -200.0}};
  const MlpModel teacher = *MlpModel::FromLayers({layer});
  Rng rng(2);
  const PerturbedVector y = *OwnerAnswer(teacher, std::vector<double>{0.0}, 1e6,
                                         MechanismKind::kPiecewise, rng);
  EXPECT_NEAR(y.coords[0], 1.0, 1e-9);
  EXPECT_NEAR(y.coords[1], -1.0, 1e-9);
}

TEST(OwnerAnswerTest, InverseMappedMeanIsUnbiased) {
  const std::vector<double> p = {0.5, 0.25, 0.15, 0.1};
  const MlpModel teacher = ConstantTeacher(1, p);
  for (MechanismKind m : {MechanismKind::kPiecewise, MechanismKind::kDuchi,
                          MechanismKind::kLaplace}) {
    Rng rng(3);
    std::vector<MomentAccumulator> acc(4);
    for (int i = 0; i < 100000; ++i) {
      const std::vector<double> back = Unmap(
          *OwnerAnswer(teacher, std::vector<double>{0.0}, 1.0, m, rng));
      for (int j = 0; j < 4; ++j) acc[j].Add(back[j]);
    }
    for (int j = 0; j < 4; ++j) {
      EXPECT_NEAR(acc[j].Get().mean, p[j], 4 * acc[j].Get().std_error)
          << MechanismName(m) << " coordinate " << j;
    }
  }
}

std::vector<OwnerLedger> FreshLedgers(int n, int64_t r_max) {
  const BudgetPlan plan = *PlanBudget(1.0, r_max, 1, 1);
  std::vector<OwnerLedger> ledgers;
  for (int i = 0; i < n; ++i) ledgers.emplace_back(i, plan);
  return ledgers;
}

TEST(SelectOwnersTest, AllOwnersWhenNqEqualsL) {
  const std::vector<OwnerLedger> ledgers = FreshLedgers(10, 5);
  Rng rng(1);
  const OwnerSelection s = *SelectOwners(ledgers, 10, rng);
  EXPECT_FALSE(s.short_selection);
  EXPECT_EQ(std::set<int>(s.owner_ids.begin(), s.owner_ids.end()).size(), 10u);
}

TEST(SelectOwnersTest, SingleOwnerIsUniform) {
  const std::vector<OwnerLedger> ledgers = FreshLedgers(8, 5);
  Rng rng(2);
  std::vector<int> hits(8, 0);
  const int trials = 100000;
  for (int t = 0; t < trials; ++t) ++hits[SelectOwners(ledgers, 1, rng)->owner_ids[0]];
  const double sd = std::sqrt(trials * (1.0 / 8) * (7.0 / 8));
  for (int h : hits) EXPECT_NEAR(h, trials / 8.0, 3 * sd);
}

TEST(SelectOwnersTest, ShortWhenFewRemain) {
  std::vector<OwnerLedger> ledgers = FreshLedgers(6, 1);
  for (int i : {0, 2, 5}) ASSERT_TRUE(ledgers[i].Charge(1.0).ok());
  Rng rng(3);
  const OwnerSelection s = *SelectOwners(ledgers, 5, rng);
  EXPECT_TRUE(s.short_selection);
  EXPECT_EQ(std::set<int>(s.owner_ids.begin(), s.owner_ids.end()),
            (std::set<int>{1, 3, 4}));
  for (int i : {1, 3, 4}) ASSERT_TRUE(ledgers[i].Charge(1.0).ok());
  EXPECT_FALSE(SelectOwners(ledgers, 5, rng).ok());
}

TEST(AggregateTest, NoiselessAnswersRecoverTarget) {
  const std::vector<double> p = {0.7, 0.2, 0.1};
  const PerturbedVector v{{0.4, -0.6, -0.8}, MechanismKind::kPiecewise, 1.0};
  const AggregatedTarget t = *AggregateSoftLabel({v, v, v});
  for (int j = 0; j < 3; ++j) {
    EXPECT_NEAR(t.target.probs[j], p[j], 1e-15);
    EXPECT_NEAR(t.pseudo_logits.values[j], std::log(p[j] + 1e-8), 1e-15);
  }
}

TEST(AggregateTest, SymmetricAnswersGiveUniform) {
  const PerturbedVector a{{1.5, -2.0, 0.3, 4.0}, MechanismKind::kLaplace, 1.0};
  const PerturbedVector b{{-1.5, 2.0, -0.3, -4.0}, MechanismKind::kLaplace, 1.0};
  EXPECT_THAT(AggregateSoftLabel({a, b})->target.probs, Each(DoubleNear(0.25, 1e-15)));
}

TEST(AggregateTest, ClampsAndFallsBackToUniform) {
  const PerturbedVector below{{-5.0, -3.0, -1.0}, MechanismKind::kPiecewise, 1.0};
  EXPECT_THAT(AggregateSoftLabel({below})->target.probs,
              Each(DoubleNear(1.0 / 3.0, 1e-15)));
  const PerturbedVector mixed{{3.0, -3.0, 0.0}, MechanismKind::kPiecewise, 1.0};
  const std::vector<double> p = AggregateSoftLabel({mixed})->target.probs;
  // Clamped (1, 0, 0.5), renormalized.
  EXPECT_NEAR(p[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(p[1], 0.0, 1e-15);
  EXPECT_NEAR(p[2], 1.0 / 3.0, 1e-15);
  EXPECT_FALSE(AggregateSoftLabel({}).ok());
}

TEST(AggregateTest, AveragingBeatsSingleAnswer) {
  const std::vector<double> p = {0.5, 0.3, 0.2};
  const MlpModel teacher = ConstantTeacher(1, p);
  Rng rng(4);
  double single = 0.0, many = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<PerturbedVector> answers;
    for (int i = 0; i < 30; ++i) {
      answers.push_back(*OwnerAnswer(teacher, std::vector<double>{0.0}, 2.0,
                                     MechanismKind::kPiecewise, rng));
    }
    auto err = [&](const std::vector<double>& q) {
      double e = 0.0;
      for (int j = 0; j < 3; ++j) e = std::max(e, std::abs(q[j] - p[j]));
      return e;
    };
    single += err(AggregateSoftLabel({answers[0]})->target.probs);
    many += err(AggregateSoftLabel(answers)->target.probs);
  }
  EXPECT_LT(many, single);
}

TEST(AggregateTest, TargetsStayOnSimplex) {
  Rng rng(5);
  for (int t = 0; t < 1000; ++t) {
    std::vector<PerturbedVector> answers;
    const int n = 1 + static_cast<int>(rng.UniformIndex(5));
    for (int i = 0; i < n; ++i) {
      PerturbedVector v{{}, MechanismKind::kLaplace, 1.0};
      for (int j = 0; j < 6; ++j) v.coords.push_back(8.0 * rng.Uniform() - 4.0);
      answers.push_back(v);
    }
    const SoftLabel p = AggregateSoftLabel(answers)->target;
    double sum = 0.0;
    for (double v : p.probs) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
      sum += v;
    }
    ASSERT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(DataOwnerTest, ChargesAndReportsExhaustion) {
  const BudgetPlan budget = *PlanBudget(1.0, 2, 1, 1);
  DataOwner owner(3, ConstantTeacher(2, {0.5, 0.5}), budget,
                  MechanismKind::kPiecewise, 9);
  const std::vector<double> x = {0.1, 0.2};
  EXPECT_FALSE(owner.Answer(1, x, budget.per_query_epsilon)->exhausted);
  EXPECT_FALSE(owner.Answer(2, x, budget.per_query_epsilon)->exhausted);
  EXPECT_TRUE(owner.Answer(3, x, budget.per_query_epsilon)->exhausted);
  EXPECT_EQ(owner.ledger().answered(), 2);
  EXPECT_FALSE(owner.Answer(4, std::vector<double>{0.1}, budget.per_query_epsilon).ok());
  EXPECT_FALSE(owner.Answer(4, x, 0.123).ok());
  EXPECT_EQ(owner.ledger().answered(), 2);
}

TEST(DataOwnerTest, AnswersKeyedBySampleNotOrder) {
  const BudgetPlan budget = *PlanBudget(4.0, 10, 1, 1);
  const MlpModel teacher = ConstantTeacher(1, {0.2, 0.3, 0.5});
  DataOwner a(0, teacher, budget, MechanismKind::kPiecewise, 7);
  DataOwner b(0, teacher, budget, MechanismKind::kPiecewise, 7);
  const std::vector<double> x = {0.0};
  const double eps = budget.per_query_epsilon;
  const PerturbedVector a1 = a.Answer(1, x, eps)->answer;
  const PerturbedVector a2 = a.Answer(2, x, eps)->answer;
  const PerturbedVector b2 = b.Answer(2, x, eps)->answer;
  const PerturbedVector b1 = b.Answer(1, x, eps)->answer;
  EXPECT_EQ(a1, b1);
  EXPECT_EQ(a2, b2);
  EXPECT_NE(a1, a2);
}

// Small blobs world shared by the run-loop tests.
struct World {
  ExperimentPlan plan;
  Dataset data;
  Partition partition;
  UnlabeledPool pool;
  Dataset test;
  std::vector<MlpModel> teachers;
};

World MakeWorld(double epsilon, int rounds = 3) {
  World w;
  w.plan.num_owners = 6;
  w.plan.n_q = 3;
  w.plan.total_epsilon = epsilon;
  w.plan.batch_per_round = 10;
  w.plan.rounds = rounds;
  w.plan.owner_shard_size = 40;
  w.plan.teacher_hidden = {16};
  w.plan.student_hidden = {16};
  w.plan.teacher_training.epochs = 30;
  w.plan.teacher_training.learning_rate = 0.2;
  w.plan.distill.epochs = 10;
  w.data = *GenBlobs(1, 3, 150, 4, 0.1);
  w.partition = *MakePartition(w.data, 6, 40, 60, 100, 2);
  w.pool = MakePool(w.data, w.partition.public_pool);
  w.test = Subset(w.data, w.partition.test_set);
  w.teachers = *TrainTeachers(w.plan, w.data, w.partition);
  return w;
}

absl::StatusOr<RunReport> RunWorld(const World& w) {
  InProcessFleet fleet(*MakeOwners(w.plan, w.teachers));
  return RunProtocol(w.plan, w.pool, w.test, fleet);
}

TEST(ExperimentPlanTest, Validates) {
  ExperimentPlan plan;
  EXPECT_TRUE(plan.Validate().ok());
  plan.n_q = plan.num_owners + 1;
  EXPECT_FALSE(plan.Validate().ok());
  plan = ExperimentPlan{};
  plan.total_epsilon = 0.0;
  EXPECT_FALSE(plan.Validate().ok());
  plan = ExperimentPlan{};
  plan.batch_per_round = 0;
  EXPECT_FALSE(plan.Validate().ok());
}

TEST(PlanForExperimentTest, MatchesBudgetFormula) {
  ExperimentPlan plan;  // L=20, N_Q=5, eps=8, S=200, I=5
  const BudgetPlan b = *PlanForExperiment(plan);
  EXPECT_EQ(b.r_max, 250);
  EXPECT_DOUBLE_EQ(b.per_query_epsilon, 0.032);
  plan.rounds = 0;
  EXPECT_EQ(PlanForExperiment(plan)->r_max, 0);
}

TEST(RunProtocolTest, ZeroRoundsLeavesStudentAtInit) {
  World w = MakeWorld(8.0, 0);
  const RunReport report = *RunWorld(w);
  EXPECT_TRUE(report.trace.empty());
  EXPECT_TRUE(report.rounds.empty());
  for (const OwnerLedger& l : report.ledgers) EXPECT_EQ(l.spent(), 0.0);
  w.plan.mechanism_seed = 99;
  EXPECT_EQ(RunWorld(w)->student, report.student);
}

TEST(RunProtocolTest, InvariantsHold) {
  const World w = MakeWorld(8.0);
  const RunReport report = *RunWorld(w);
  ASSERT_TRUE(report.status.ok()) << report.status;
  ASSERT_EQ(report.rounds.size(), 3u);
  EXPECT_EQ(report.trace.size(), 30u);
  std::set<int64_t> seen;
  std::vector<int64_t> per_owner(6, 0);
  for (const QueryRecord& r : report.trace) {
    EXPECT_TRUE(seen.insert(r.sample_id).second) << "sample queried twice";
    EXPECT_EQ(std::set<int>(r.owner_ids.begin(), r.owner_ids.end()).size(),
              r.owner_ids.size());
    EXPECT_EQ(r.owner_ids.size(), r.answers.size());
    EXPECT_EQ(r.eps_i, report.budget.per_query_epsilon);
    double sum = 0.0;
    for (double p : r.target.probs) sum += p;
    EXPECT_NEAR(sum, 1.0, 1e-9);
    for (int id : r.owner_ids) ++per_owner[id];
  }
  for (const OwnerLedger& l : report.ledgers) {
    EXPECT_LE(l.spent(), l.total_epsilon() + kBudgetTolerance);
    EXPECT_EQ(l.answered(), per_owner[l.owner_id()]);
  }
  EXPECT_EQ(report.rounds[0].pool_remaining, 50);
  EXPECT_EQ(report.rounds[2].pool_remaining, 30);
  EXPECT_EQ(report.rounds[1].queries_issued, 30);
}

TEST(RunProtocolTest, DeterministicGivenSeeds) {
  const World w = MakeWorld(2.0);
  const RunReport a = *RunWorld(w);
  const RunReport b = *RunWorld(w);
  std::stringstream ta, tb;
  WriteTrace(ta, a.trace);
  WriteTrace(tb, b.trace);
  EXPECT_EQ(ta.str(), tb.str());
  EXPECT_EQ(a.student, b.student);
}

TEST(RunProtocolTest, NearNoiselessStudentTracksTeachers) {
  World w = MakeWorld(1e6);
  w.data = *GenBlobs(1, 3, 250, 4, 0.1);
  w.partition = *MakePartition(w.data, 6, 40, 200, 100, 2);
  w.pool = MakePool(w.data, w.partition.public_pool);
  w.test = Subset(w.data, w.partition.test_set);
  w.teachers = *TrainTeachers(w.plan, w.data, w.partition);
  w.plan.batch_per_round = 40;
  w.plan.rounds = 5;
  w.plan.distill.epochs = 20;
  const RunReport report = *RunWorld(w);
  double best = 0.0;
  for (const MlpModel& t : w.teachers) {
    best = std::max(best, Accuracy(t, w.test.features, w.test.labels));
  }
  EXPECT_GE(report.rounds.back().student_test_accuracy, best - 0.05);
}

TEST(RunProtocolTest, StopsWhenPoolSmallerThanBatch) {
  World w = MakeWorld(8.0, 3);
  w.plan.batch_per_round = 25;  // 60 samples: two full rounds only
  const RunReport report = *RunWorld(w);
  EXPECT_EQ(report.rounds.size(), 2u);
}

TEST(RunProtocolTest, ExhaustedOwnersYieldPartialReport) {
  const World w = MakeWorld(8.0);
  // The data user plans more queries per owner than the owners allow, so
  // the owners' own ledgers decide. Six owners at two answers each admit
  // exactly 12 answers.
  const ExperimentPlan& plan = w.plan;
  const BudgetPlan user_budget = *PlanForExperiment(plan);
  ASSERT_GT(user_budget.r_max, 2);
  std::vector<std::shared_ptr<DataOwner>> strict;
  for (int i = 0; i < 6; ++i) {
    const BudgetPlan owner_budget{user_budget.total_epsilon, 2,
                                  user_budget.per_query_epsilon};
    strict.push_back(std::make_shared<DataOwner>(
        i, w.teachers[i], owner_budget, plan.mechanism, plan.mechanism_seed));
  }
  InProcessFleet strict_fleet(strict);
  const RunReport report = *RunProtocol(plan, w.pool, w.test, strict_fleet);
  EXPECT_FALSE(report.status.ok());
  int64_t answers = 0;
  for (const QueryRecord& r : report.trace) answers += r.owner_ids.size();
  EXPECT_EQ(answers, 12);
  for (const std::shared_ptr<DataOwner>& o : strict) EXPECT_EQ(o->ledger().answered(), 2);
}

TEST(RunProtocolTest, RejectsInvalidPlan) {
  const World w = MakeWorld(8.0, 0);
  InProcessFleet fleet(*MakeOwners(w.plan, w.teachers));
  ExperimentPlan bad = w.plan;
  bad.n_q = 100;
  EXPECT_FALSE(RunProtocol(bad, w.pool, w.test, fleet).ok());
}

TEST(TraceTest, JsonRoundTripIsExact) {
  QueryRecord r;
  r.round = 2;
  r.sample_id = 77;
  r.eps_i = 1.0 / 3.0;
  r.mechanism = MechanismKind::kDuchi;
  r.owner_ids = {4, 1};
  r.answers = {{{1.5, -1.5}, MechanismKind::kDuchi, 1.0 / 3.0},
               {{-1.5, 1.5}, MechanismKind::kDuchi, 1.0 / 3.0}};
  r.target = {{0.5, 0.5}};
  r.pseudo_logits = {{std::log(0.5 + 1e-8), std::log(0.5 + 1e-8)}};
  r.short_selection = true;
  const QueryRecord back = *QueryRecordFromJson(QueryRecordToJson(r));
  EXPECT_EQ(QueryRecordToJson(back), QueryRecordToJson(r));
  EXPECT_EQ(back.eps_i, r.eps_i);
  EXPECT_EQ(back.owner_ids, r.owner_ids);
  EXPECT_EQ(back.answers, r.answers);
  EXPECT_EQ(back.target, r.target);
  EXPECT_TRUE(back.short_selection);
}

TEST(TraceTest, ReadReportsLineNumbers) {
  QueryRecord r;
  r.owner_ids = {0};
  r.answers = {{{0.0}, MechanismKind::kPiecewise, 1.0}};
  r.target = {{1.0}};
  r.pseudo_logits = {{0.0}};
  std::stringstream in(QueryRecordToJson(r) + "\n{not json}\n");
  const absl::Status s = ReadTrace(in).status();
  EXPECT_FALSE(s.ok());
  EXPECT_THAT(std::string(s.message()), HasSubstr("2"));
  EXPECT_FALSE(QueryRecordFromJson(R"({"round": 1})").ok());
}

TEST(TraceTest, WriteThenReadRunTrace) {
  const World w = MakeWorld(4.0, 1);
  const RunReport report = *RunWorld(w);
  std::stringstream buf;
  WriteTrace(buf, report.trace);
  const std::vector<QueryRecord> back = *ReadTrace(buf);
  ASSERT_EQ(back.size(), report.trace.size());
  std::stringstream again;
  WriteTrace(again, back);
  EXPECT_EQ(again.str(), buf.str());
}

TEST(RoundMetricsCsvTest, Header) {
  std::stringstream out;
  WriteRoundMetricsCsv(out, {{1, 50, 30, 0.25, 0.5}});
  EXPECT_EQ(out.str(),
            "round,pool_remaining,queries_issued,mean_eps_spent,"
            "student_test_accuracy\n1,50,30,0.25,0.5\n");
}

}  // namespace
}  // namespace ldpdl
