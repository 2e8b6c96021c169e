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

#include <algorithm>
#include <bit>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <thread>

#include "absl/container/flat_hash_set.h"
#include "absl/strings/match.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "json.hpp"
#include "ldpdl/status_macros.h"

namespace ldpdl {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

// Stream keys under the base seed.
constexpr uint64_t kDataSeedKey = 11;
constexpr uint64_t kMechanismSeedKey = 12;
constexpr uint64_t kTrainingSeedKey = 13;
constexpr uint64_t kPartitionSeedKey = 14;
constexpr uint64_t kBenchInputKey = 21;
constexpr uint64_t kBenchNoiseKey = 22;

// 64-bit FNV-1a; stable across platforms, used only as a config fingerprint.
uint64_t Fingerprint(absl::string_view text) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (char c : text) {
    h ^= static_cast<uint8_t>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

template <typename T, typename Parse>
absl::StatusOr<std::vector<T>> ParseNames(const Config& config,
                                          absl::string_view key,
                                          std::vector<std::string> fallback,
                                          Parse parse) {
  LDPDL_ASSIGN_OR_RETURN(std::vector<std::string> names,
                         config.GetStringList(key, std::move(fallback)));
  std::vector<T> out;
  for (const std::string& name : names) {
    absl::StatusOr<T> v = parse(name);
    if (!v.ok()) {
      return absl::InvalidArgumentError(
          absl::StrFormat("key '%s': %s", key, v.status().message()));
    }
    out.push_back(*v);
  }
  return out;
}

absl::Status WriteFile(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  out << contents;
  out.close();
  if (!out) {
    return absl::InternalError(absl::StrFormat("cannot write %s", path.string()));
  }
  return absl::OkStatus();
}

template <typename Writer>
absl::Status WriteStream(const fs::path& path, Writer write) {
  std::ofstream out(path, std::ios::binary);
  write(out);
  out.close();
  if (!out) {
    return absl::InternalError(absl::StrFormat("cannot write %s", path.string()));
  }
  return absl::OkStatus();
}

absl::Status WriteRunArtifacts(const fs::path& dir, const RunReport& report) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    return absl::InternalError(
        absl::StrFormat("cannot create %s: %s", dir.string(), ec.message()));
  }
  LDPDL_RETURN_IF_ERROR(WriteStream(dir / "metrics.csv", [&](std::ostream& o) {
    WriteRoundMetricsCsv(o, report.rounds);
  }));
  LDPDL_RETURN_IF_ERROR(WriteStream(dir / "ledger.csv", [&](std::ostream& o) {
    WriteLedgerCsv(o, report.ledgers);
  }));
  LDPDL_RETURN_IF_ERROR(WriteStream(dir / "trace.jsonl", [&](std::ostream& o) {
    WriteTrace(o, report.trace);
  }));
  return WriteStream(dir / "student.ckpt", [&](std::ostream& o) {
    WriteCheckpoint(o, report.student);
  });
}

std::string ManifestJson(const RunConfig& config,
                         absl::Span<const PointResult> results) {
  json runs = json::array();
  for (size_t i = 0; i < results.size(); ++i) {
    const PointResult& r = results[i];
    runs.push_back({
        {"run_id", RunId(i, r.point)},
        {"mechanism", std::string(MechanismName(r.point.mechanism))},
        {"sampler", std::string(SamplerName(r.point.sampler))},
        {"epsilon", r.point.epsilon},
        {"n_q", r.point.n_q},
        {"num_owners", r.point.num_owners},
        {"repeat", r.point.repeat},
        {"data_seed", r.plan.data_seed},
        {"mechanism_seed", r.plan.mechanism_seed},
        {"training_seed", r.plan.training_seed},
    });
  }
  json manifest = {
      {"tool", "ldpdl"},
      {"version", kLdpdlVersion},
      {"config_hash", absl::StrFormat("%016x", Fingerprint(config.canonical_config))},
      {"config", config.canonical_config},
      {"mode", std::string(RunModeName(config.mode))},
      {"base_seed", config.base_seed},
      {"repeats", config.repeats},
      {"runs", std::move(runs)},
  };
  return manifest.dump(2) + "\n";
}

template <typename T>
std::vector<T> OrDefault(const std::vector<T>& values, T fallback) {
  return values.empty() ? std::vector<T>{fallback} : values;
}

}  // namespace

absl::string_view RunModeName(RunMode mode) {
  return mode == RunMode::kSimulate ? "simulate" : "networked";
}

absl::StatusOr<RunMode> ParseRunMode(absl::string_view name) {
  if (name == "simulate") return RunMode::kSimulate;
  if (name == "networked") return RunMode::kNetworked;
  return absl::InvalidArgumentError(absl::StrFormat(
      "unknown mode '%s' (expected simulate or networked)", name));
}

absl::Status RunConfig::Validate() const {
  if (mechanisms.empty() || samplers.empty() || epsilons.empty() ||
      n_qs.empty() || owner_counts.empty()) {
    return absl::InvalidArgumentError("sweep lists must be nonempty");
  }
  if (repeats < 1) return absl::InvalidArgumentError("repeats must be at least 1");
  if (jobs < 1) return absl::InvalidArgumentError("jobs must be at least 1");
  if (timeout_ms <= 0) return absl::InvalidArgumentError("timeout must be positive");
  if (dataset.source != "blobs" && dataset.source != "idx") {
    return absl::InvalidArgumentError(absl::StrFormat(
        "unknown data source '%s' (expected blobs or idx)", dataset.source));
  }
  if (dataset.public_size < 0 || dataset.test_size <= 0) {
    return absl::InvalidArgumentError(
        "public size must be nonnegative and test size positive");
  }
  if (static_cast<int64_t>(plan.batch_per_round) * plan.rounds >
      dataset.public_size) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "rounds x batch_per_round (%d x %d) exceeds the public pool (%d)",
        plan.rounds, plan.batch_per_round, dataset.public_size));
  }
  if (dataset.source == "blobs" &&
      (dataset.classes < 2 || dataset.dims < 1 || dataset.spread < 0.0)) {
    return absl::InvalidArgumentError(
        "blobs need at least 2 classes, 1 dim and a nonnegative spread");
  }
  if (!directory.empty()) {
    if (mode != RunMode::kNetworked) {
      return absl::InvalidArgumentError(
          "owner addresses are only used in networked mode");
    }
    if (ExpandSweep(*this).size() != 1) {
      return absl::InvalidArgumentError(
          "remote owner nodes serve one plan; use a single sweep point and "
          "repeats = 1");
    }
  }
  for (const SweepPoint& p : ExpandSweep(*this)) {
    LDPDL_RETURN_IF_ERROR(PlanForPoint(*this, p).Validate());
  }
  return absl::OkStatus();
}

absl::StatusOr<RunConfig> ParseRunConfig(const Config& config) {
  RunConfig rc;
  ExperimentPlan& plan = rc.plan;
  LDPDL_ASSIGN_OR_RETURN(std::string mode, config.GetString("mode", "simulate"));
  LDPDL_ASSIGN_OR_RETURN(rc.mode, ParseRunMode(mode));
  LDPDL_ASSIGN_OR_RETURN(rc.output_dir, config.GetString("output_dir", rc.output_dir));
  LDPDL_ASSIGN_OR_RETURN(rc.repeats, config.GetInt("repeats", rc.repeats));
  LDPDL_ASSIGN_OR_RETURN(rc.base_seed, config.GetUint64("seed", rc.base_seed));
  LDPDL_ASSIGN_OR_RETURN(rc.jobs, config.GetInt("jobs", rc.jobs));

  LDPDL_ASSIGN_OR_RETURN(
      rc.mechanisms, ParseNames<MechanismKind>(config, "mechanism", {"piecewise"},
                                               ParseMechanismKind));
  LDPDL_ASSIGN_OR_RETURN(
      rc.samplers,
      ParseNames<SamplerKind>(config, "sampler", {"active"}, ParseSamplerKind));
  LDPDL_ASSIGN_OR_RETURN(rc.epsilons,
                         config.GetDoubleList("epsilon", {plan.total_epsilon}));
  LDPDL_ASSIGN_OR_RETURN(rc.n_qs, config.GetIntList("n_q", {plan.n_q}));
  LDPDL_ASSIGN_OR_RETURN(rc.owner_counts,
                         config.GetIntList("num_owners", {plan.num_owners}));

  LDPDL_ASSIGN_OR_RETURN(plan.batch_per_round,
                         config.GetInt("batch_per_round", plan.batch_per_round));
  LDPDL_ASSIGN_OR_RETURN(plan.rounds, config.GetInt("rounds", plan.rounds));
  LDPDL_ASSIGN_OR_RETURN(plan.owner_shard_size,
                         config.GetInt("owner_shard_size", plan.owner_shard_size));
  LDPDL_ASSIGN_OR_RETURN(
      plan.accumulate_queries,
      config.GetBool("accumulate_queries", plan.accumulate_queries));

  LDPDL_ASSIGN_OR_RETURN(plan.teacher_hidden,
                         config.GetIntList("teacher.hidden", plan.teacher_hidden));
  TrainConfig& tc = plan.teacher_training;
  LDPDL_ASSIGN_OR_RETURN(tc.learning_rate,
                         config.GetDouble("teacher.learning_rate", tc.learning_rate));
  LDPDL_ASSIGN_OR_RETURN(tc.batch_size,
                         config.GetInt("teacher.batch_size", tc.batch_size));
  LDPDL_ASSIGN_OR_RETURN(tc.epochs, config.GetInt("teacher.epochs", tc.epochs));

  LDPDL_ASSIGN_OR_RETURN(plan.student_hidden,
                         config.GetIntList("student.hidden", plan.student_hidden));
  DistillationConfig& dc = plan.distill;
  LDPDL_ASSIGN_OR_RETURN(dc.alpha, config.GetDouble("distill.alpha", dc.alpha));
  LDPDL_ASSIGN_OR_RETURN(dc.beta, config.GetDouble("distill.beta", dc.beta));
  LDPDL_ASSIGN_OR_RETURN(dc.tau, config.GetDouble("distill.tau", dc.tau));
  LDPDL_ASSIGN_OR_RETURN(dc.learning_rate,
                         config.GetDouble("distill.learning_rate", dc.learning_rate));
  LDPDL_ASSIGN_OR_RETURN(dc.batch_size,
                         config.GetInt("distill.batch_size", dc.batch_size));
  LDPDL_ASSIGN_OR_RETURN(dc.epochs, config.GetInt("distill.epochs", dc.epochs));

  DatasetSpec& ds = rc.dataset;
  LDPDL_ASSIGN_OR_RETURN(ds.source, config.GetString("data.source", ds.source));
  LDPDL_ASSIGN_OR_RETURN(ds.classes, config.GetInt("data.classes", ds.classes));
  LDPDL_ASSIGN_OR_RETURN(ds.dims, config.GetInt("data.dims", ds.dims));
  LDPDL_ASSIGN_OR_RETURN(ds.spread, config.GetDouble("data.spread", ds.spread));
  LDPDL_ASSIGN_OR_RETURN(ds.idx_images, config.GetString("data.idx_images", ""));
  LDPDL_ASSIGN_OR_RETURN(ds.idx_labels, config.GetString("data.idx_labels", ""));
  LDPDL_ASSIGN_OR_RETURN(ds.public_size,
                         config.GetInt("data.public_size", ds.public_size));
  LDPDL_ASSIGN_OR_RETURN(ds.test_size, config.GetInt("data.test_size", ds.test_size));

  LDPDL_ASSIGN_OR_RETURN(rc.timeout_ms, config.GetInt("net.timeout_ms", rc.timeout_ms));
  const int max_owners =
      *std::max_element(rc.owner_counts.begin(), rc.owner_counts.end());
  if (!config.KeysWithPrefix("owner.").empty()) {
    LDPDL_ASSIGN_OR_RETURN(rc.directory, ParseDirectory(config, max_owners));
  }
  // Benchmark keys belong to bench-mechanisms; tolerate them here.
  for (const std::string& key : config.KeysWithPrefix("bench.")) {
    LDPDL_RETURN_IF_ERROR(config.GetString(key, "").status());
  }
  LDPDL_RETURN_IF_ERROR(config.CheckAllUsed());
  rc.canonical_config = config.Canonical();
  LDPDL_RETURN_IF_ERROR(rc.Validate());
  return rc;
}

std::vector<SweepPoint> ExpandSweep(const RunConfig& config) {
  std::vector<SweepPoint> points;
  for (MechanismKind m : OrDefault(config.mechanisms, config.plan.mechanism)) {
    for (SamplerKind s : OrDefault(config.samplers, config.plan.sampler)) {
      for (double e : OrDefault(config.epsilons, config.plan.total_epsilon)) {
        for (int nq : OrDefault(config.n_qs, config.plan.n_q)) {
          for (int l : OrDefault(config.owner_counts, config.plan.num_owners)) {
            for (int r = 0; r < std::max(config.repeats, 1); ++r) {
              points.push_back({m, s, e, nq, l, r});
            }
          }
        }
      }
    }
  }
  return points;
}

ExperimentPlan PlanForPoint(const RunConfig& config, const SweepPoint& point) {
  ExperimentPlan plan = config.plan;
  plan.mechanism = point.mechanism;
  plan.sampler = point.sampler;
  plan.total_epsilon = point.epsilon;
  plan.n_q = point.n_q;
  plan.num_owners = point.num_owners;
  const uint64_t r = static_cast<uint64_t>(point.repeat);
  plan.data_seed = Rng::ForStream(config.base_seed, kDataSeedKey, r).NextU64();
  plan.mechanism_seed =
      Rng::ForStream(config.base_seed, kMechanismSeedKey, r).NextU64();
  plan.training_seed =
      Rng::ForStream(config.base_seed, kTrainingSeedKey, r).NextU64();
  return plan;
}

absl::StatusOr<PreparedData> PrepareData(const DatasetSpec& source_spec,
                                         const ExperimentPlan& plan) {
  const int64_t needed = static_cast<int64_t>(plan.num_owners) *
                             plan.owner_shard_size +
                         source_spec.public_size + source_spec.test_size;
  PreparedData out;
  if (source_spec.source == "blobs") {
    const int per_class =
        static_cast<int>((needed + source_spec.classes - 1) / source_spec.classes);
    LDPDL_ASSIGN_OR_RETURN(out.dataset, GenBlobs(plan.data_seed, source_spec.classes,
                                                 per_class, source_spec.dims,
                                                 source_spec.spread));
  } else if (source_spec.source == "idx") {
    LDPDL_ASSIGN_OR_RETURN(out.dataset, LoadIdx(source_spec.idx_images, source_spec.idx_labels));
  } else {
    return absl::InvalidArgumentError(
        absl::StrFormat("unknown data source '%s'", source_spec.source));
  }
  const uint64_t partition_seed =
      Rng::ForStream(plan.data_seed, kPartitionSeedKey).NextU64();
  LDPDL_ASSIGN_OR_RETURN(
      out.partition,
      MakePartition(out.dataset, plan.num_owners, plan.owner_shard_size,
                    source_spec.public_size, source_spec.test_size, partition_seed));
  LDPDL_RETURN_IF_ERROR(CheckPartition(out.partition, out.dataset.size()));
  out.pool = MakePool(out.dataset, out.partition.public_pool);
  out.test = Subset(out.dataset, out.partition.test_set);
  return out;
}

namespace {

struct TrainedOwners {
  PreparedData data;
  // Empty when the owners are remote.
  std::vector<MlpModel> teachers;
  double best_teacher_accuracy = std::nan("");
};

// Teachers depend on the repeat (through the seeds) and on the owner count,
// but not on epsilon, n_q, mechanism or sampler.
absl::StatusOr<TrainedOwners> TrainOwners(const RunConfig& config,
                                          const ExperimentPlan& plan) {
  TrainedOwners out;
  LDPDL_ASSIGN_OR_RETURN(out.data, PrepareData(config.dataset, plan));
  if (config.mode == RunMode::kNetworked && !config.directory.empty()) {
    return out;
  }
  LDPDL_ASSIGN_OR_RETURN(out.teachers,
                         TrainTeachers(plan, out.data.dataset, out.data.partition));
  out.best_teacher_accuracy = 0.0;
  for (const MlpModel& t : out.teachers) {
    out.best_teacher_accuracy =
        std::max(out.best_teacher_accuracy,
                 Accuracy(t, out.data.test.features, out.data.test.labels));
  }
  return out;
}

absl::StatusOr<PointResult> RunPointWith(const RunConfig& config,
                                         const SweepPoint& point,
                                         const TrainedOwners& trained) {
  PointResult result;
  result.point = point;
  result.plan = PlanForPoint(config, point);
  const ExperimentPlan& plan = result.plan;
  const PreparedData& data = trained.data;
  result.best_teacher_accuracy = trained.best_teacher_accuracy;

  std::unique_ptr<OwnerFleet> fleet;
  std::vector<std::unique_ptr<OwnerNode>> nodes;
  if (config.mode == RunMode::kNetworked && !config.directory.empty()) {
    LDPDL_ASSIGN_OR_RETURN(
        fleet, RemoteFleet::Connect(config.directory, data.test.k, plan.mechanism,
                                    std::chrono::milliseconds(config.timeout_ms)));
  } else {
    LDPDL_ASSIGN_OR_RETURN(std::vector<std::shared_ptr<DataOwner>> owners,
                           MakeOwners(plan, trained.teachers));
    if (config.mode == RunMode::kSimulate) {
      fleet = std::make_unique<InProcessFleet>(std::move(owners));
    } else {
      OwnerDirectory directory;
      for (const std::shared_ptr<DataOwner>& owner : owners) {
        LDPDL_ASSIGN_OR_RETURN(std::unique_ptr<OwnerNode> node,
                               OwnerNode::Start("127.0.0.1:0", owner));
        directory[owner->owner_id()] = node->address();
        nodes.push_back(std::move(node));
      }
      LDPDL_ASSIGN_OR_RETURN(
          fleet, RemoteFleet::Connect(directory, data.test.k, plan.mechanism,
                                      std::chrono::milliseconds(config.timeout_ms)));
    }
  }

  LDPDL_ASSIGN_OR_RETURN(RunReport report,
                         RunProtocol(plan, data.pool, data.test, *fleet));
  fleet.reset();
  nodes.clear();

  result.budget = report.budget;
  for (const RoundMetrics& m : report.rounds) {
    result.round_accuracy.push_back(m.student_test_accuracy);
  }
  result.final_accuracy =
      Accuracy(report.student, data.test.features, data.test.labels);
  for (const OwnerLedger& l : report.ledgers) {
    result.total_spent += l.spent();
    result.max_owner_spent = std::max(result.max_owner_spent, l.spent());
    result.answers += l.answered();
  }
  result.status = report.status;
  result.report = std::make_shared<const RunReport>(std::move(report));
  return result;
}

}  // namespace

absl::StatusOr<PointResult> RunPoint(const RunConfig& config,
                                     const SweepPoint& point) {
  LDPDL_ASSIGN_OR_RETURN(TrainedOwners trained,
                         TrainOwners(config, PlanForPoint(config, point)));
  return RunPointWith(config, point, trained);
}

std::string RunId(size_t index, const SweepPoint& point) {
  return absl::StrFormat("run%04d_%s_%s_eps%g_nq%d_L%d_r%d", index,
                         MechanismName(point.mechanism),
                         SamplerName(point.sampler), point.epsilon, point.n_q,
                         point.num_owners, point.repeat);
}

const std::vector<std::string>& ResultColumns() {
  static const auto* columns = new std::vector<std::string>{
      "run_id",          "mechanism",         "sampler",
      "epsilon",         "n_q",               "num_owners",
      "repeat",          "data_seed",         "mechanism_seed",
      "training_seed",   "r_max",             "per_query_epsilon",
      "final_accuracy",  "best_teacher_accuracy", "round_accuracies",
      "total_spent",     "max_owner_spent",   "answers",
      "status"};
  return *columns;
}

void WriteResultsCsv(std::ostream& out, absl::Span<const PointResult> results) {
  out << absl::StrJoin(ResultColumns(), ",") << "\n";
  for (size_t i = 0; i < results.size(); ++i) {
    const PointResult& r = results[i];
    std::vector<std::string> rounds;
    for (double a : r.round_accuracy) rounds.push_back(absl::StrFormat("%.6f", a));
    out << absl::StrFormat(
        "%s,%s,%s,%.17g,%d,%d,%d,%d,%d,%d,%d,%.17g,%.6f,%.6f,%s,%.17g,%.17g,%d,%s\n",
        RunId(i, r.point), MechanismName(r.point.mechanism),
        SamplerName(r.point.sampler), r.point.epsilon, r.point.n_q,
        r.point.num_owners, r.point.repeat, r.plan.data_seed,
        r.plan.mechanism_seed, r.plan.training_seed, r.budget.r_max,
        r.budget.per_query_epsilon, r.final_accuracy, r.best_teacher_accuracy,
        absl::StrJoin(rounds, ";"), r.total_spent, r.max_owner_spent, r.answers,
        r.status.ok() ? "ok" : "exhausted");
  }
}

absl::StatusOr<std::vector<PointResult>> RunExperiment(const RunConfig& config) {
  LDPDL_RETURN_IF_ERROR(config.Validate());
  const std::vector<SweepPoint> points = ExpandSweep(config);
  std::vector<std::optional<absl::StatusOr<PointResult>>> slots(points.size());
  std::atomic<size_t> next{0};
  std::mutex cache_mu;
  std::map<std::pair<int, int>,
           std::shared_future<std::shared_ptr<absl::StatusOr<TrainedOwners>>>>
      cache;
  auto trained_for = [&](const SweepPoint& p) {
    std::promise<std::shared_ptr<absl::StatusOr<TrainedOwners>>> promise;
    std::shared_future<std::shared_ptr<absl::StatusOr<TrainedOwners>>> future;
    bool owner = false;
    {
      std::lock_guard<std::mutex> lock(cache_mu);
      auto [it, inserted] = cache.try_emplace({p.repeat, p.num_owners});
      if (inserted) {
        it->second = promise.get_future().share();
        owner = true;
      }
      future = it->second;
    }
    if (owner) {
      promise.set_value(std::make_shared<absl::StatusOr<TrainedOwners>>(
          TrainOwners(config, PlanForPoint(config, p))));
    }
    return future.get();
  };
  auto worker = [&] {
    for (size_t i = next.fetch_add(1); i < points.size(); i = next.fetch_add(1)) {
      std::shared_ptr<absl::StatusOr<TrainedOwners>> trained =
          trained_for(points[i]);
      if (!trained->ok()) {
        slots[i] = trained->status();
        continue;
      }
      slots[i] = RunPointWith(config, points[i], **trained);
    }
  };
  const int jobs = std::min<int>(config.jobs, static_cast<int>(points.size()));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int j = 0; j < jobs; ++j) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();
  }

  std::vector<PointResult> results;
  for (size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i]->ok()) {
      return absl::Status(
          slots[i]->status().code(),
          absl::StrFormat("%s: %s", RunId(i, points[i]),
                          slots[i]->status().message()));
    }
    results.push_back(**std::move(slots[i]));
  }

  if (!config.output_dir.empty()) {
    const fs::path root(config.output_dir);
    std::error_code ec;
    fs::create_directories(root / "runs", ec);
    if (ec) {
      return absl::InternalError(absl::StrFormat(
          "cannot create %s: %s", root.string(), ec.message()));
    }
    LDPDL_RETURN_IF_ERROR(WriteStream(root / "results.csv", [&](std::ostream& o) {
      WriteResultsCsv(o, results);
    }));
    LDPDL_RETURN_IF_ERROR(
        WriteFile(root / "manifest.json", ManifestJson(config, results)));
    for (size_t i = 0; i < results.size(); ++i) {
      LDPDL_RETURN_IF_ERROR(WriteRunArtifacts(
          root / "runs" / RunId(i, results[i].point), *results[i].report));
    }
  }
  return results;
}

absl::StatusOr<std::shared_ptr<DataOwner>> BuildOwner(const RunConfig& config,
                                                      int owner_id) {
  const std::vector<SweepPoint> points = ExpandSweep(config);
  if (points.empty()) return absl::InvalidArgumentError("empty sweep");
  const ExperimentPlan plan = PlanForPoint(config, points.front());
  LDPDL_RETURN_IF_ERROR(plan.Validate());
  if (owner_id < 0 || owner_id >= plan.num_owners) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "owner id %d is outside [0, %d)", owner_id, plan.num_owners));
  }
  LDPDL_ASSIGN_OR_RETURN(PreparedData data, PrepareData(config.dataset, plan));
  LDPDL_ASSIGN_OR_RETURN(
      MlpModel teacher,
      TrainTeacher(plan, Subset(data.dataset, data.partition.owner_shards[owner_id]),
                   owner_id));
  LDPDL_ASSIGN_OR_RETURN(BudgetPlan budget, PlanForExperiment(plan));
  return std::make_shared<DataOwner>(owner_id, std::move(teacher), budget,
                                     plan.mechanism, plan.mechanism_seed);
}

absl::StatusOr<AuditReport> AuditRunDirectory(const std::string& run_dir) {
  const fs::path dir(run_dir);
  std::ifstream ledger_in(dir / "ledger.csv");
  std::ifstream trace_in(dir / "trace.jsonl");
  if (!ledger_in || !trace_in) {
    return absl::NotFoundError(
        absl::StrFormat("%s lacks ledger.csv or trace.jsonl", run_dir));
  }
  LDPDL_ASSIGN_OR_RETURN(std::vector<LedgerRow> ledger, ReadLedgerCsv(ledger_in));
  LDPDL_ASSIGN_OR_RETURN(std::vector<QueryRecord> trace, ReadTrace(trace_in));

  AuditReport report;
  report.runs = 1;
  report.records = static_cast<int64_t>(trace.size());
  auto problem = [&](std::string text) {
    report.problems.push_back(absl::StrFormat("%s: %s", run_dir, text));
  };

  std::vector<int64_t> answered(ledger.size(), 0);
  absl::flat_hash_set<int64_t> seen_samples;
  for (const QueryRecord& r : trace) {
    if (!seen_samples.insert(r.sample_id).second) {
      problem(absl::StrFormat("sample %d was queried twice", r.sample_id));
    }
    absl::flat_hash_set<int> owners(r.owner_ids.begin(), r.owner_ids.end());
    if (owners.size() != r.owner_ids.size()) {
      problem(absl::StrFormat("sample %d: repeated owner ids", r.sample_id));
    }
    for (int id : r.owner_ids) {
      if (id < 0 || static_cast<size_t>(id) >= ledger.size()) {
        problem(absl::StrFormat("sample %d: unknown owner %d", r.sample_id, id));
        continue;
      }
      ++answered[id];
    }
    double sum = 0.0;
    bool in_range = true;
    for (double p : r.target.probs) {
      sum += p;
      in_range = in_range && p >= 0.0 && p <= 1.0;
    }
    if (!in_range || std::abs(sum - 1.0) > 1e-9) {
      problem(absl::StrFormat("sample %d: target is not a distribution",
                              r.sample_id));
    }
  }
  for (size_t i = 0; i < ledger.size(); ++i) {
    const LedgerRow& row = ledger[i];
    if (row.owner_id != static_cast<int>(i)) {
      problem(absl::StrFormat("ledger row %d has owner id %d", i, row.owner_id));
    }
    if (row.spent > row.total_epsilon + kBudgetTolerance) {
      problem(absl::StrFormat("owner %d spent %.17g of %.17g", row.owner_id,
                              row.spent, row.total_epsilon));
    }
    if (row.answered != answered[i]) {
      problem(absl::StrFormat("owner %d: ledger shows %d answers, trace %d",
                              row.owner_id, row.answered, answered[i]));
    }
    const double recomputed =
        static_cast<double>(answered[i]) * row.per_query_epsilon;
    if (std::abs(recomputed - row.spent) > kBudgetTolerance) {
      problem(absl::StrFormat("owner %d: spent %.17g but trace implies %.17g",
                              row.owner_id, row.spent, recomputed));
    }
  }
  return report;
}

absl::StatusOr<AuditReport> AuditExperiment(const std::string& output_dir) {
  const fs::path runs = fs::path(output_dir) / "runs";
  std::error_code ec;
  if (!fs::is_directory(runs, ec)) {
    return absl::NotFoundError(
        absl::StrFormat("%s has no runs/ directory", output_dir));
  }
  std::vector<fs::path> dirs;
  for (const fs::directory_entry& e : fs::directory_iterator(runs)) {
    if (e.is_directory()) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  AuditReport total;
  for (const fs::path& d : dirs) {
    LDPDL_ASSIGN_OR_RETURN(AuditReport r, AuditRunDirectory(d.string()));
    total.runs += r.runs;
    total.records += r.records;
    total.problems.insert(total.problems.end(), r.problems.begin(),
                          r.problems.end());
  }
  return total;
}

absl::Status BenchConfig::Validate() const {
  if (mechanisms.empty() || epsilons.empty() || sample_sizes.empty() ||
      dims.empty()) {
    return absl::InvalidArgumentError("benchmark lists must be nonempty");
  }
  for (double e : epsilons) {
    if (!std::isfinite(e) || e <= 0.0) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "epsilon must be positive and finite, got %g", e));
    }
  }
  for (int n : sample_sizes) {
    if (n < 1) return absl::InvalidArgumentError("sample sizes must be positive");
  }
  for (int k : dims) {
    if (k < 1) return absl::InvalidArgumentError("dimensions must be positive");
  }
  if (repeats < 1) return absl::InvalidArgumentError("repeats must be at least 1");
  return absl::OkStatus();
}

absl::StatusOr<BenchConfig> ParseBenchConfig(const Config& config) {
  BenchConfig bc;
  LDPDL_ASSIGN_OR_RETURN(
      bc.mechanisms,
      ParseNames<MechanismKind>(config, "bench.mechanisms",
                                {"piecewise", "duchi", "laplace"},
                                ParseMechanismKind));
  LDPDL_ASSIGN_OR_RETURN(bc.epsilons, config.GetDoubleList("bench.epsilons", bc.epsilons));
  LDPDL_ASSIGN_OR_RETURN(bc.sample_sizes, config.GetIntList("bench.n", bc.sample_sizes));
  LDPDL_ASSIGN_OR_RETURN(bc.dims, config.GetIntList("bench.k", bc.dims));
  LDPDL_ASSIGN_OR_RETURN(bc.repeats, config.GetInt("bench.repeats", bc.repeats));
  LDPDL_ASSIGN_OR_RETURN(bc.seed, config.GetUint64("bench.seed", bc.seed));
  std::vector<std::string> unknown;
  for (const std::string& key : config.KeysWithPrefix("bench.")) {
    static const auto* known = new absl::flat_hash_set<std::string>{
        "bench.mechanisms", "bench.epsilons", "bench.n",
        "bench.k",          "bench.repeats",  "bench.seed"};
    if (!known->contains(key)) unknown.push_back(key);
  }
  if (!unknown.empty()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "%s: unknown benchmark key(s) %s", config.source(),
        absl::StrJoin(unknown, ", ")));
  }
  LDPDL_RETURN_IF_ERROR(bc.Validate());
  return bc;
}

absl::StatusOr<std::vector<BenchRow>> BenchMechanisms(const BenchConfig& config) {
  LDPDL_RETURN_IF_ERROR(config.Validate());
  std::vector<BenchRow> rows;
  for (MechanismKind mechanism : config.mechanisms) {
    for (double epsilon : config.epsilons) {
      LDPDL_ASSIGN_OR_RETURN(PrivacyParameter eps, PrivacyParameter::Create(epsilon));
      for (int n : config.sample_sizes) {
        for (int k : config.dims) {
          BenchRow row{mechanism, epsilon, n, k, config.repeats, 0.0, 0.0};
          for (int rep = 0; rep < config.repeats; ++rep) {
            const uint64_t key =
                (static_cast<uint64_t>(n) << 32) ^ (static_cast<uint64_t>(k) << 8) ^
                static_cast<uint64_t>(rep);
            Rng input_rng = Rng::ForStream(config.seed, kBenchInputKey, key);
            Rng noise_rng = Rng::ForStream(
                config.seed ^ MixSeed(std::bit_cast<uint64_t>(epsilon) +
                                      static_cast<uint64_t>(mechanism)),
                kBenchNoiseKey, key);
            std::vector<double> truth(k, 0.0);
            std::vector<double> estimate(k, 0.0);
            std::vector<double> z(k);
            for (int i = 0; i < n; ++i) {
              for (int j = 0; j < k; ++j) {
                z[j] = 2.0 * input_rng.Uniform() - 1.0;
                truth[j] += z[j];
              }
              LDPDL_ASSIGN_OR_RETURN(UnitVector u, UnitVector::Create(z));
              const PerturbedVector y = Perturb(mechanism, u, eps, noise_rng);
              for (int j = 0; j < k; ++j) estimate[j] += y.coords[j];
            }
            double max_err = 0.0, sq = 0.0;
            for (int j = 0; j < k; ++j) {
              const double err = std::abs(estimate[j] - truth[j]) / n;
              max_err = std::max(max_err, err);
              sq += err * err;
            }
            row.max_abs_error += max_err / config.repeats;
            row.rmse += std::sqrt(sq / k) / config.repeats;
          }
          rows.push_back(row);
        }
      }
    }
  }
  return rows;
}

void WriteBenchCsv(std::ostream& out, absl::Span<const BenchRow> rows) {
  out << "mechanism,epsilon,n,k,repeats,max_abs_error,rmse\n";
  for (const BenchRow& r : rows) {
    out << absl::StrFormat("%s,%.17g,%d,%d,%d,%.17g,%.17g\n",
                           MechanismName(r.mechanism), r.epsilon, r.n, r.k,
                           r.repeats, r.max_abs_error, r.rmse);
  }
}

}  // namespace ldpdl
