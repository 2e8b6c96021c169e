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

#ifndef LDPDL_EXPERIMENT_H_
#define LDPDL_EXPERIMENT_H_

#include <cstdint>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "ldpdl/config.h"
#include "ldpdl/data.h"
#include "ldpdl/protocol.h"
#include "ldpdl/transport.h"

namespace ldpdl {

inline constexpr char kLdpdlVersion[] = "0.1.0";

enum class RunMode { kSimulate, kNetworked };

absl::string_view RunModeName(RunMode mode);
absl::StatusOr<RunMode> ParseRunMode(absl::string_view name);

struct DatasetSpec {
  std::string source = "blobs";  // "blobs" or "idx"
  // Synthetic blobs.
  int classes = 10;
  int dims = 16;
  double spread = 0.15;
  // IDX files.
  std::string idx_images;
  std::string idx_labels;
  int public_size = 1200;
  int test_size = 1000;
};

// An experiment: a base plan, sweep lists and run settings. Each sweep point
// overrides the plan's mechanism, sampler, total epsilon, n_q and num_owners.
struct RunConfig {
  ExperimentPlan plan;
  RunMode mode = RunMode::kSimulate;
  DatasetSpec dataset;
  std::string output_dir = "ldpdl_out";
  std::vector<MechanismKind> mechanisms;
  std::vector<SamplerKind> samplers;
  std::vector<double> epsilons;
  std::vector<int> n_qs;
  std::vector<int> owner_counts;
  int repeats = 1;
  uint64_t base_seed = 1;
  int jobs = 1;
  // Networked mode: remote owner nodes. Empty means loopback nodes started
  // in this process.
  OwnerDirectory directory;
  int timeout_ms = 10000;
  // Canonical form of the source config, hashed into the manifest.
  std::string canonical_config;

  absl::Status Validate() const;
};

// Reads every documented key (see docs/file_formats.md) and rejects
// unknown ones.
absl::StatusOr<RunConfig> ParseRunConfig(const Config& config);

struct SweepPoint {
  MechanismKind mechanism = MechanismKind::kPiecewise;
  SamplerKind sampler = SamplerKind::kActive;
  double epsilon = 0.0;
  int n_q = 0;
  int num_owners = 0;
  int repeat = 0;
};

// Cartesian product in the order mechanism, sampler, epsilon, n_q, owners,
// repeat (repeat varies fastest).
std::vector<SweepPoint> ExpandSweep(const RunConfig& config);

// Seeds depend only on the base seed and the repeat index, so sweep points
// sharing a repeat are paired.
ExperimentPlan PlanForPoint(const RunConfig& config, const SweepPoint& point);

// Dataset and partition for a plan; the source is sized to fit exactly.
struct PreparedData {
  Dataset dataset;
  Partition partition;
  UnlabeledPool pool;
  Dataset test;
};
absl::StatusOr<PreparedData> PrepareData(const DatasetSpec& source_spec,
                                         const ExperimentPlan& plan);

struct PointResult {
  SweepPoint point;
  ExperimentPlan plan;
  BudgetPlan budget;
  std::vector<double> round_accuracy;
  double final_accuracy = 0.0;
  double best_teacher_accuracy = 0.0;
  double total_spent = 0.0;
  double max_owner_spent = 0.0;
  int64_t answers = 0;
  absl::Status status;
  std::shared_ptr<const RunReport> report;
};

// Trains the teachers, runs the protocol in the configured mode and
// summarizes the outcome.
absl::StatusOr<PointResult> RunPoint(const RunConfig& config,
                                     const SweepPoint& point);

// Runs every sweep point on `config.jobs` workers. When `config.output_dir`
// is nonempty, writes results.csv, manifest.json and runs/<run id>/ there.
absl::StatusOr<std::vector<PointResult>> RunExperiment(const RunConfig& config);

std::string RunId(size_t index, const SweepPoint& point);

// Columns of results.csv, in order.
const std::vector<std::string>& ResultColumns();
void WriteResultsCsv(std::ostream& out, absl::Span<const PointResult> results);

// Teacher and owner for one id of the first sweep point, for serving over the
// network with the same data and budget as the data user's config.
absl::StatusOr<std::shared_ptr<DataOwner>> BuildOwner(const RunConfig& config,
                                                      int owner_id);

// Re-checks one run directory: ledger spent within budget, trace and ledger
// answer counts agree, owners distinct per record, targets on the simplex,
// and no sample queried twice.
struct AuditReport {
  int runs = 0;
  int64_t records = 0;
  std::vector<std::string> problems;
  bool ok() const { return problems.empty(); }
};
absl::StatusOr<AuditReport> AuditRunDirectory(const std::string& run_dir);
// Audits every runs/<id>/ below an experiment's output directory.
absl::StatusOr<AuditReport> AuditExperiment(const std::string& output_dir);

// Monte-Carlo mean estimation error of each mechanism.
struct BenchConfig {
  std::vector<MechanismKind> mechanisms = {MechanismKind::kPiecewise,
                                           MechanismKind::kDuchi,
                                           MechanismKind::kLaplace};
  std::vector<double> epsilons = {1.0};
  std::vector<int> sample_sizes = {10000};
  std::vector<int> dims = {10};
  int repeats = 10;
  uint64_t seed = 1;

  absl::Status Validate() const;
};
absl::StatusOr<BenchConfig> ParseBenchConfig(const Config& config);

struct BenchRow {
  MechanismKind mechanism = MechanismKind::kPiecewise;
  double epsilon = 0.0;
  int n = 0;
  int k = 0;
  int repeats = 0;
  // Averaged over repeats: max over coordinates of |estimate - true mean|.
  double max_abs_error = 0.0;
  double rmse = 0.0;
};

// Each repeat draws n inputs uniformly from [-1, 1]^k and estimates their
// mean from perturbed copies. Inputs are shared across mechanisms and
// epsilons for a given (n, k, repeat).
absl::StatusOr<std::vector<BenchRow>> BenchMechanisms(const BenchConfig& config);
void WriteBenchCsv(std::ostream& out, absl::Span<const BenchRow> rows);

}  // namespace ldpdl

#endif  // LDPDL_EXPERIMENT_H_
