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

#include "ldpdl/experiment.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"
#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "ldpdl/config.h"

namespace ldpdl {
namespace {

namespace fs = std::filesystem;
using ::testing::ElementsAre;
using ::testing::HasSubstr;

constexpr char kTinyConfig[] = R"(
mode = simulate
seed = 5
repeats = 2
mechanism = piecewise, laplace
sampler = active
epsilon = 2, 8
n_q = 2
num_owners = 4
batch_per_round = 10
rounds = 2
owner_shard_size = 30
teacher.hidden = 8
student.hidden = 8
teacher.epochs = 20
distill.epochs = 5
data.classes = 3
data.dims = 4
data.public_size = 30
data.test_size = 60
)";

RunConfig Tiny(const std::vector<std::string>& overrides = {}) {
  Config c = *Config::Parse(kTinyConfig, "tiny.conf");
  for (const std::string& o : overrides) EXPECT_TRUE(c.SetFromAssignment(o).ok());
  absl::StatusOr<RunConfig> rc = ParseRunConfig(c);
  EXPECT_TRUE(rc.ok()) << rc.status();
  return *rc;
}

std::string ReadFile(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path FreshDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

TEST(RunModeTest, NamesRoundTrip) {
  EXPECT_EQ(*ParseRunMode("simulate"), RunMode::kSimulate);
  EXPECT_EQ(*ParseRunMode(RunModeName(RunMode::kNetworked)), RunMode::kNetworked);
  EXPECT_FALSE(ParseRunMode("batch").ok());
}

TEST(ParseRunConfigTest, ReadsPlanAndSweep) {
  const RunConfig rc = Tiny();
  EXPECT_EQ(rc.mode, RunMode::kSimulate);
  EXPECT_EQ(rc.base_seed, 5u);
  EXPECT_EQ(rc.repeats, 2);
  EXPECT_THAT(rc.mechanisms, ElementsAre(MechanismKind::kPiecewise, MechanismKind::kLaplace));
  EXPECT_THAT(rc.epsilons, ElementsAre(2.0, 8.0));
  EXPECT_EQ(rc.plan.batch_per_round, 10);
  EXPECT_EQ(rc.plan.rounds, 2);
  EXPECT_THAT(rc.plan.teacher_hidden, ElementsAre(8));
  EXPECT_EQ(rc.plan.distill.epochs, 5);
  EXPECT_EQ(rc.dataset.classes, 3);
  EXPECT_FALSE(rc.canonical_config.empty());
}

TEST(ParseRunConfigTest, RejectsUnknownAndInvalidKeys) {
  const absl::Status unknown =
      ParseRunConfig(*Config::Parse(std::string(kTinyConfig) + "epsilom = 3\n")).status();
  EXPECT_FALSE(unknown.ok());
  EXPECT_THAT(std::string(unknown.message()), HasSubstr("epsilom"));
  auto bad = [](const std::string& override) {
    Config c = *Config::Parse(kTinyConfig);
    EXPECT_TRUE(c.SetFromAssignment(override).ok());
    return ParseRunConfig(c).status();
  };
  EXPECT_FALSE(bad("mode=cloud").ok());
  EXPECT_FALSE(bad("mechanism=gauss").ok());
  EXPECT_FALSE(bad("epsilon=0").ok());
  EXPECT_FALSE(bad("n_q=5").ok());               // exceeds num_owners
  EXPECT_FALSE(bad("batch_per_round=20").ok());  // S*I exceeds the public pool
  EXPECT_FALSE(bad("repeats=0").ok());
  EXPECT_FALSE(bad("owner.0=127.0.0.1:1").ok());  // directory in simulate mode
  EXPECT_TRUE(bad("bench.n=100").ok());
}

TEST(ExpandSweepTest, OrderVariesRepeatFastest) {
  const std::vector<SweepPoint> points = ExpandSweep(Tiny());
  ASSERT_EQ(points.size(), 8u);
  EXPECT_EQ(points[0].mechanism, MechanismKind::kPiecewise);
  EXPECT_EQ(points[0].epsilon, 2.0);
  EXPECT_EQ(points[0].repeat, 0);
  EXPECT_EQ(points[1].repeat, 1);
  EXPECT_EQ(points[2].epsilon, 8.0);
  EXPECT_EQ(points[4].mechanism, MechanismKind::kLaplace);
}

TEST(PlanForPointTest, SeedsPairedByRepeat) {
  const RunConfig rc = Tiny();
  const std::vector<SweepPoint> points = ExpandSweep(rc);
  const ExperimentPlan a = PlanForPoint(rc, points[0]);
  const ExperimentPlan b = PlanForPoint(rc, points[6]);  // laplace, eps 8, repeat 0
  const ExperimentPlan c = PlanForPoint(rc, points[1]);
  EXPECT_EQ(a.data_seed, b.data_seed);
  EXPECT_EQ(a.mechanism_seed, b.mechanism_seed);
  EXPECT_EQ(a.training_seed, b.training_seed);
  EXPECT_NE(a.data_seed, c.data_seed);
  EXPECT_EQ(b.mechanism, MechanismKind::kLaplace);
  EXPECT_EQ(b.total_epsilon, 8.0);
}

TEST(PrepareDataTest, SizesMatchPlan) {
  const RunConfig rc = Tiny();
  const ExperimentPlan plan = PlanForPoint(rc, ExpandSweep(rc)[0]);
  const PreparedData d = *PrepareData(rc.dataset, plan);
  EXPECT_EQ(d.partition.owner_shards.size(), 4u);
  EXPECT_EQ(d.pool.size(), 30u);
  EXPECT_EQ(d.test.size(), 60u);
  EXPECT_TRUE(CheckPartition(d.partition, d.dataset.size()).ok());
}

TEST(RunExperimentTest, WritesOutputsThatAudit) {
  const fs::path dir = FreshDir("ldpdl_experiment_outputs");
  RunConfig rc = Tiny();
  rc.output_dir = dir.string();
  const std::vector<PointResult> results = *RunExperiment(rc);
  ASSERT_EQ(results.size(), 8u);
  for (const PointResult& r : results) {
    EXPECT_TRUE(r.status.ok());
    EXPECT_LE(r.max_owner_spent, r.point.epsilon + kBudgetTolerance);
    EXPECT_EQ(r.round_accuracy.size(), 2u);
  }
  const std::string csv = ReadFile(dir / "results.csv");
  const std::vector<std::string> lines = absl::StrSplit(csv, '\n', absl::SkipEmpty());
  ASSERT_EQ(lines.size(), 9u);
  EXPECT_EQ(lines[0], absl::StrJoin(ResultColumns(), ","));
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  const fs::path run0 = dir / "runs" / RunId(0, results[0].point);
  for (const char* f : {"metrics.csv", "ledger.csv", "trace.jsonl", "student.ckpt"}) {
    EXPECT_TRUE(fs::exists(run0 / f)) << f;
  }
  std::ifstream ckpt(run0 / "student.ckpt", std::ios::binary);
  EXPECT_EQ(*ReadCheckpoint(ckpt), results[0].report->student);
  const AuditReport audit = *AuditExperiment(dir.string());
  EXPECT_TRUE(audit.ok()) << audit.problems.front();
  EXPECT_EQ(audit.runs, 8);
  EXPECT_EQ(audit.records, 8 * 20);
  fs::remove_all(dir);
}

TEST(RunExperimentTest, AuditCatchesTampering) {
  const fs::path dir = FreshDir("ldpdl_experiment_tamper");
  RunConfig rc = Tiny();
  rc.output_dir = dir.string();
  rc.mechanisms = {MechanismKind::kPiecewise};
  rc.epsilons = {2.0};
  rc.repeats = 1;
  const std::vector<PointResult> results = *RunExperiment(rc);
  const fs::path run = dir / "runs" / RunId(0, results[0].point);
  ASSERT_TRUE(AuditRunDirectory(run.string())->ok());

  // Duplicate the first trace record.
  const std::string trace = ReadFile(run / "trace.jsonl");
  const std::string first = trace.substr(0, trace.find('\n') + 1);
  std::ofstream(run / "trace.jsonl", std::ios::binary) << trace << first;
  const AuditReport dup = *AuditRunDirectory(run.string());
  EXPECT_FALSE(dup.ok());
  EXPECT_THAT(absl::StrJoin(dup.problems, "\n"), HasSubstr("queried twice"));
  std::ofstream(run / "trace.jsonl", std::ios::binary) << trace;

  // Inflate one owner's spend past the budget.
  std::stringstream ledger_in(ReadFile(run / "ledger.csv"));
  std::vector<LedgerRow> rows = *ReadLedgerCsv(ledger_in);
  std::ofstream ledger(run / "ledger.csv", std::ios::binary);
  ledger << "owner_id,total_epsilon,per_query_epsilon,answered,spent\n";
  for (size_t i = 0; i < rows.size(); ++i) {
    const double spent = i == 0 ? rows[i].total_epsilon * 2 : rows[i].spent;
    ledger << absl::StrFormat("%d,%.17g,%.17g,%d,%.17g\n", rows[i].owner_id,
                              rows[i].total_epsilon, rows[i].per_query_epsilon,
                              rows[i].answered, spent);
  }
  ledger.close();
  const AuditReport over = *AuditRunDirectory(run.string());
  EXPECT_FALSE(over.ok());
  EXPECT_THAT(absl::StrJoin(over.problems, "\n"), HasSubstr("spent"));
  EXPECT_FALSE(AuditRunDirectory((dir / "missing").string()).ok());
  fs::remove_all(dir);
}

TEST(RunExperimentTest, RepeatsAreDeterministicAcrossJobCounts) {
  const fs::path a = FreshDir("ldpdl_experiment_det_a");
  const fs::path b = FreshDir("ldpdl_experiment_det_b");
  RunConfig rc = Tiny();
  rc.output_dir = a.string();
  ASSERT_TRUE(RunExperiment(rc).ok());
  rc.output_dir = b.string();
  rc.jobs = 3;
  ASSERT_TRUE(RunExperiment(rc).ok());
  EXPECT_EQ(ReadFile(a / "results.csv"), ReadFile(b / "results.csv"));
  const std::string id = RunId(5, ExpandSweep(rc)[5]);
  EXPECT_EQ(ReadFile(a / "runs" / id / "trace.jsonl"),
            ReadFile(b / "runs" / id / "trace.jsonl"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(RunPointTest, LoopbackNetworkMatchesSimulation) {
  RunConfig sim = Tiny();
  sim.output_dir.clear();
  RunConfig net = sim;
  net.mode = RunMode::kNetworked;
  const SweepPoint point = ExpandSweep(sim)[3];
  const PointResult a = *RunPoint(sim, point);
  const PointResult b = *RunPoint(net, point);
  std::stringstream ta, tb;
  WriteTrace(ta, a.report->trace);
  WriteTrace(tb, b.report->trace);
  EXPECT_EQ(ta.str(), tb.str());
  EXPECT_EQ(a.report->student, b.report->student);
}

TEST(RunPointTest, UnreachableDirectoryFailsFast) {
  RunConfig rc = Tiny({"mode=networked", "mechanism=piecewise", "epsilon=2",
                       "repeats=1", "net.timeout_ms=300", "owner.0=127.0.0.1:1",
                       "owner.1=127.0.0.1:1", "owner.2=127.0.0.1:1",
                       "owner.3=127.0.0.1:1"});
  EXPECT_FALSE(RunPoint(rc, ExpandSweep(rc)[0]).ok());
}

TEST(BuildOwnerTest, MatchesSimulatedOwner) {
  RunConfig rc = Tiny({"mechanism=piecewise", "epsilon=2", "repeats=1"});
  const std::shared_ptr<DataOwner> owner = *BuildOwner(rc, 2);
  EXPECT_EQ(owner->owner_id(), 2);
  EXPECT_EQ(owner->input_width(), 4);
  EXPECT_EQ(owner->class_count(), 3);
  const PointResult r = *RunPoint(rc, ExpandSweep(rc)[0]);
  EXPECT_EQ(owner->ledger().r_max(), r.budget.r_max);
  EXPECT_FALSE(BuildOwner(rc, 4).ok());
}

TEST(BenchTest, ParsesAndRuns) {
  const Config c = *Config::Parse(
      "bench.mechanisms = piecewise, duchi\nbench.epsilons = 1, 2\n"
      "bench.n = 500, 2000\nbench.k = 3\nbench.repeats = 2\nbench.seed = 4\n");
  const BenchConfig bc = *ParseBenchConfig(c);
  const std::vector<BenchRow> rows = *BenchMechanisms(bc);
  ASSERT_EQ(rows.size(), 2u * 2 * 2);
  for (const BenchRow& r : rows) {
    EXPECT_GT(r.max_abs_error, 0.0);
    EXPECT_GE(r.max_abs_error * std::sqrt(3.0) + 1e-12, r.rmse);
  }
  const std::vector<BenchRow> again = *BenchMechanisms(bc);
  for (size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(again[i].max_abs_error, rows[i].max_abs_error);
    EXPECT_EQ(again[i].rmse, rows[i].rmse);
  }
  std::stringstream out;
  WriteBenchCsv(out, rows);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')),
            "mechanism,epsilon,n,k,repeats,max_abs_error,rmse");
  EXPECT_FALSE(ParseBenchConfig(*Config::Parse("bench.typo = 1\n")).ok());
  EXPECT_FALSE(ParseBenchConfig(*Config::Parse("bench.epsilons = 0\n")).ok());
}

}  // namespace
}  // namespace ldpdl
