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

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "absl/container/flat_hash_map.h"
#include "absl/container/flat_hash_set.h"
#include "absl/strings/str_format.h"
#include "json.hpp"
#include "ldpdl/status_macros.h"

namespace ldpdl {
namespace {

using json = nlohmann::json;

// Stream keys under the training seed.
constexpr uint64_t kTeacherStream = 1;
constexpr uint64_t kStudentInitStream = 2;
constexpr uint64_t kStudentTrainStream = 3;
constexpr uint64_t kSamplerStream = 4;
constexpr uint64_t kOwnerSelectStream = 5;

constexpr double kPseudoLogitOffset = 1e-8;

std::vector<int> Widths(int input, const std::vector<int>& hidden, int k) {
  std::vector<int> widths = {input};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(k);
  return widths;
}

double MeanSpent(absl::Span<const OwnerLedger> ledgers) {
  if (ledgers.empty()) return 0.0;
  double total = 0.0;
  for (const OwnerLedger& l : ledgers) total += l.spent();
  return total / static_cast<double>(ledgers.size());
}

}  // namespace

absl::Status ExperimentPlan::Validate() const {
  if (num_owners <= 0 || n_q <= 0 || batch_per_round <= 0 || rounds < 0 ||
      owner_shard_size <= 0) {
    return absl::InvalidArgumentError(
        "plan needs positive num_owners, n_q, batch_per_round and "
        "owner_shard_size, and nonnegative rounds");
  }
  if (n_q > num_owners) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "n_q (%d) cannot exceed the number of owners (%d)", n_q, num_owners));
  }
  if (!std::isfinite(total_epsilon) || total_epsilon <= 0.0) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "total epsilon must be positive, got %g", total_epsilon));
  }
  for (int w : teacher_hidden) {
    if (w <= 0) return absl::InvalidArgumentError("teacher widths must be positive");
  }
  for (int w : student_hidden) {
    if (w <= 0) return absl::InvalidArgumentError("student widths must be positive");
  }
  LDPDL_RETURN_IF_ERROR(distill.Validate());
  return teacher_training.Validate();
}

absl::StatusOr<BudgetPlan> PlanForExperiment(const ExperimentPlan& plan) {
  LDPDL_RETURN_IF_ERROR(plan.Validate());
  if (plan.planned_queries() == 0) {
    return BudgetPlan{plan.total_epsilon, 0, 0.0};
  }
  return PlanBudget(plan.total_epsilon, plan.planned_queries(), plan.n_q,
                    plan.num_owners);
}

absl::StatusOr<PerturbedVector> OwnerAnswer(const MlpModel& teacher,
                                            absl::Span<const double> x,
                                            double eps_i,
                                            MechanismKind mechanism, Rng& rng) {
  LDPDL_ASSIGN_OR_RETURN(PrivacyParameter eps, PrivacyParameter::Create(eps_i));
  LDPDL_ASSIGN_OR_RETURN(Logits logits, Forward(teacher, x));
  LDPDL_ASSIGN_OR_RETURN(SoftLabel p, SoftmaxT(logits, 1.0));
  std::vector<double> mapped(p.probs.size());
  for (size_t j = 0; j < mapped.size(); ++j) {
    mapped[j] = std::clamp(2.0 * p.probs[j] - 1.0, -1.0, 1.0);
  }
  LDPDL_ASSIGN_OR_RETURN(UnitVector z, UnitVector::Create(std::move(mapped)));
  return Perturb(mechanism, z, eps, rng);
}

absl::StatusOr<OwnerSelection> SelectOwners(
    absl::Span<const OwnerLedger> ledgers, int n_q, Rng& rng) {
  if (n_q <= 0) return absl::InvalidArgumentError("n_q must be positive");
  std::vector<int> available = AvailableOwners(ledgers);
  if (available.empty()) {
    return absl::ResourceExhaustedError("every data owner has exhausted its budget");
  }
  OwnerSelection selection;
  const size_t want = std::min<size_t>(n_q, available.size());
  selection.short_selection = available.size() < static_cast<size_t>(n_q);
  for (size_t i = 0; i < want; ++i) {
    const size_t j = i + rng.UniformIndex(available.size() - i);
    std::swap(available[i], available[j]);
  }
  available.resize(want);
  selection.owner_ids = std::move(available);
  return selection;
}

absl::StatusOr<AggregatedTarget> AggregateSoftLabel(
    absl::Span<const PerturbedVector> answers) {
  LDPDL_ASSIGN_OR_RETURN(std::vector<double> mean, EstimateMean(answers));
  AggregatedTarget out;
  out.target.probs.resize(mean.size());
  double total = 0.0;
  for (size_t j = 0; j < mean.size(); ++j) {
    out.target.probs[j] = std::clamp((mean[j] + 1.0) / 2.0, 0.0, 1.0);
    total += out.target.probs[j];
  }
  for (double& p : out.target.probs) {
    p = total > 0.0 ? p / total : 1.0 / static_cast<double>(mean.size());
  }
  out.pseudo_logits.values.resize(mean.size());
  for (size_t j = 0; j < mean.size(); ++j) {
    out.pseudo_logits.values[j] =
        std::log(out.target.probs[j] + kPseudoLogitOffset);
  }
  return out;
}

DataOwner::DataOwner(int owner_id, MlpModel teacher, const BudgetPlan& budget,
                     MechanismKind mechanism, uint64_t mechanism_seed)
    : owner_id_(owner_id),
      teacher_(std::move(teacher)),
      mechanism_(mechanism),
      mechanism_seed_(mechanism_seed),
      ledger_(owner_id, budget) {}

absl::StatusOr<OwnerReply> DataOwner::Answer(int64_t sample_id,
                                             absl::Span<const double> x,
                                             double eps_i) {
  if (x.size() != static_cast<size_t>(teacher_.input_width())) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "owner %d: query has %d features, expected %d", owner_id_, x.size(),
        teacher_.input_width()));
  }
  {
    std::lock_guard<std::mutex> lock(mu_);
    absl::Status charged = ledger_.Charge(eps_i);
    if (absl::IsResourceExhausted(charged)) return OwnerReply{true, {}};
    if (!charged.ok()) return charged;
  }
  Rng rng = Rng::ForStream(mechanism_seed_, static_cast<uint64_t>(owner_id_),
                           static_cast<uint64_t>(sample_id));
  LDPDL_ASSIGN_OR_RETURN(PerturbedVector answer,
                         OwnerAnswer(teacher_, x, eps_i, mechanism_, rng));
  return OwnerReply{false, std::move(answer)};
}

OwnerLedger DataOwner::ledger() const {
  std::lock_guard<std::mutex> lock(mu_);
  return ledger_;
}

absl::StatusOr<OwnerReply> InProcessFleet::Query(int owner_id,
                                                 int64_t sample_id,
                                                 absl::Span<const double> x,
                                                 double eps_i) {
  if (owner_id < 0 || owner_id >= size()) {
    return absl::NotFoundError(absl::StrFormat("no owner with id %d", owner_id));
  }
  return owners_[owner_id]->Answer(sample_id, x, eps_i);
}

absl::StatusOr<MlpModel> TrainTeacher(const ExperimentPlan& plan,
                                      const Dataset& shard, int owner_id) {
  Rng rng = Rng::ForStream(plan.training_seed, kTeacherStream,
                           static_cast<uint64_t>(owner_id));
  const std::vector<int> widths =
      Widths(static_cast<int>(shard.dims()), plan.teacher_hidden, shard.k);
  LDPDL_ASSIGN_OR_RETURN(MlpModel model, MlpModel::Create(widths, rng));
  return TrainSupervised(std::move(model), shard.features, shard.labels,
                         plan.teacher_training, rng);
}

absl::StatusOr<std::vector<MlpModel>> TrainTeachers(const ExperimentPlan& plan,
                                                    const Dataset& ds,
                                                    const Partition& partition) {
  if (partition.owner_shards.size() != static_cast<size_t>(plan.num_owners)) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "partition has %d shards, plan has %d owners",
        partition.owner_shards.size(), plan.num_owners));
  }
  std::vector<MlpModel> teachers;
  teachers.reserve(plan.num_owners);
  for (int l = 0; l < plan.num_owners; ++l) {
    const Dataset shard = Subset(ds, partition.owner_shards[l]);
    LDPDL_ASSIGN_OR_RETURN(MlpModel teacher, TrainTeacher(plan, shard, l));
    teachers.push_back(std::move(teacher));
  }
  return teachers;
}

absl::StatusOr<std::vector<std::shared_ptr<DataOwner>>> MakeOwners(
    const ExperimentPlan& plan, std::vector<MlpModel> teachers) {
  LDPDL_ASSIGN_OR_RETURN(BudgetPlan budget, PlanForExperiment(plan));
  if (teachers.size() != static_cast<size_t>(plan.num_owners)) {
    return absl::InvalidArgumentError("teacher count does not match the plan");
  }
  std::vector<std::shared_ptr<DataOwner>> owners;
  for (int l = 0; l < plan.num_owners; ++l) {
    owners.push_back(std::make_shared<DataOwner>(
        l, std::move(teachers[l]), budget, plan.mechanism, plan.mechanism_seed));
  }
  return owners;
}

absl::StatusOr<RunReport> RunProtocol(const ExperimentPlan& plan,
                                      const UnlabeledPool& pool,
                                      const Dataset& test, OwnerFleet& fleet) {
  LDPDL_ASSIGN_OR_RETURN(BudgetPlan budget, PlanForExperiment(plan));
  if (fleet.size() != plan.num_owners) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "fleet has %d owners, plan has %d", fleet.size(), plan.num_owners));
  }
  if (test.k < 2) {
    return absl::InvalidArgumentError("need at least two classes");
  }
  const int input_width = static_cast<int>(pool.features.cols());
  if (pool.size() > 0 && test.size() > 0 &&
      test.dims() != pool.features.cols()) {
    return absl::InvalidArgumentError("pool and test features differ in width");
  }

  Rng init_rng = Rng::ForStream(plan.training_seed, kStudentInitStream);
  LDPDL_ASSIGN_OR_RETURN(
      MlpModel student,
      MlpModel::Create(Widths(input_width, plan.student_hidden, test.k),
                       init_rng));
  RunReport report{.student = std::move(student), .budget = budget};
  for (int l = 0; l < plan.num_owners; ++l) report.ledgers.emplace_back(l, budget);

  absl::flat_hash_map<int64_t, size_t> row_of;
  for (size_t i = 0; i < pool.size(); ++i) row_of[pool.ids[i]] = i;
  // Remaining pool, in original order.
  std::vector<int64_t> remaining = pool.ids;
  std::vector<DistillExample> examples;
  const size_t batch = static_cast<size_t>(plan.batch_per_round);

  for (int round = 1; round <= plan.rounds; ++round) {
    if (remaining.size() < batch) break;

    std::vector<int64_t> chosen;
    if (plan.sampler == SamplerKind::kRandom || round == 1) {
      Rng sampler_rng = Rng::ForStream(plan.training_seed, kSamplerStream,
                                       static_cast<uint64_t>(round));
      LDPDL_ASSIGN_OR_RETURN(chosen, RandomBatch(remaining, batch, sampler_rng));
    } else {
      UnlabeledPool candidates;
      candidates.ids = remaining;
      std::vector<size_t> rows;
      rows.reserve(remaining.size());
      for (int64_t id : remaining) rows.push_back(row_of.at(id));
      candidates.features = pool.features.SelectRows(rows);
      LDPDL_ASSIGN_OR_RETURN(std::vector<ConfidenceScore> scores,
                             LeastConfidenceScores(report.student, candidates));
      LDPDL_ASSIGN_OR_RETURN(chosen, SelectBatch(scores, batch));
    }
    {
      absl::flat_hash_set<int64_t> taken(chosen.begin(), chosen.end());
      std::erase_if(remaining, [&](int64_t id) { return taken.contains(id); });
    }

    if (!plan.accumulate_queries) examples.clear();
    int64_t queries_issued = 0;
    for (int64_t sample_id : chosen) {
      absl::Span<const double> x = pool.features.row(row_of.at(sample_id));
      Rng select_rng = Rng::ForStream(plan.training_seed, kOwnerSelectStream,
                                      static_cast<uint64_t>(sample_id));
      absl::StatusOr<OwnerSelection> selection =
          SelectOwners(report.ledgers, plan.n_q, select_rng);
      if (!selection.ok()) {
        report.status = selection.status();
        return report;
      }

      QueryRecord record;
      record.round = round;
      record.sample_id = sample_id;
      record.eps_i = budget.per_query_epsilon;
      record.mechanism = plan.mechanism;
      std::vector<int> pending = selection->owner_ids;
      absl::flat_hash_set<int> asked(pending.begin(), pending.end());
      for (size_t next = 0; next < pending.size(); ++next) {
        const int owner = pending[next];
        LDPDL_ASSIGN_OR_RETURN(
            OwnerReply reply,
            fleet.Query(owner, sample_id, x, budget.per_query_epsilon));
        if (reply.exhausted) {
          // The owner's own ledger disagrees with the mirror; stop asking it
          // and draw a replacement among owners not yet asked.
          report.ledgers[owner].Close();
          std::vector<int> spare;
          for (int id : AvailableOwners(report.ledgers)) {
            if (!asked.contains(id)) spare.push_back(id);
          }
          if (!spare.empty()) {
            const int replacement = spare[select_rng.UniformIndex(spare.size())];
            asked.insert(replacement);
            pending.push_back(replacement);
          }
          continue;
        }
        LDPDL_RETURN_IF_ERROR(
            report.ledgers[owner].Charge(budget.per_query_epsilon));
        record.owner_ids.push_back(owner);
        record.answers.push_back(std::move(reply.answer));
        ++queries_issued;
      }
      if (record.answers.empty()) {
        report.status =
            absl::ResourceExhaustedError("no owner answered; budgets exhausted");
        return report;
      }
      record.short_selection =
          record.answers.size() < static_cast<size_t>(plan.n_q);
      LDPDL_ASSIGN_OR_RETURN(AggregatedTarget target,
                             AggregateSoftLabel(record.answers));
      record.target = std::move(target.target);
      record.pseudo_logits = target.pseudo_logits;
      examples.push_back(
          {std::vector<double>(x.begin(), x.end()), std::move(target.pseudo_logits)});
      report.trace.push_back(std::move(record));
    }

    Rng train_rng = Rng::ForStream(plan.training_seed, kStudentTrainStream,
                                   static_cast<uint64_t>(round));
    LDPDL_ASSIGN_OR_RETURN(
        report.student,
        TrainDistill(std::move(report.student), examples, plan.distill,
                     train_rng));

    RoundMetrics metrics;
    metrics.round = round;
    metrics.pool_remaining = static_cast<int64_t>(remaining.size());
    metrics.queries_issued = queries_issued;
    metrics.mean_eps_spent = MeanSpent(report.ledgers);
    metrics.student_test_accuracy =
        Accuracy(report.student, test.features, test.labels);
    report.rounds.push_back(metrics);
  }
  return report;
}

std::string QueryRecordToJson(const QueryRecord& record) {
  json answers = json::array();
  for (const PerturbedVector& a : record.answers) answers.push_back(a.coords);
  json j = {
      {"round", record.round},
      {"sample_id", record.sample_id},
      {"eps_i", record.eps_i},
      {"mechanism", std::string(MechanismName(record.mechanism))},
      {"owners", record.owner_ids},
      {"answers", std::move(answers)},
      {"target", record.target.probs},
      {"pseudo_logits", record.pseudo_logits.values},
      {"short", record.short_selection},
  };
  return j.dump();
}

absl::StatusOr<QueryRecord> QueryRecordFromJson(absl::string_view line) {
  json j = json::parse(line.begin(), line.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    return absl::InvalidArgumentError("trace line is not a JSON object");
  }
  QueryRecord r;
  try {
    r.round = j.at("round").get<int>();
    r.sample_id = j.at("sample_id").get<int64_t>();
    r.eps_i = j.at("eps_i").get<double>();
    LDPDL_ASSIGN_OR_RETURN(
        r.mechanism, ParseMechanismKind(j.at("mechanism").get<std::string>()));
    r.owner_ids = j.at("owners").get<std::vector<int>>();
    for (const json& a : j.at("answers")) {
      r.answers.push_back(
          {a.get<std::vector<double>>(), r.mechanism, r.eps_i});
    }
    r.target.probs = j.at("target").get<std::vector<double>>();
    r.pseudo_logits.values = j.at("pseudo_logits").get<std::vector<double>>();
    r.short_selection = j.at("short").get<bool>();
  } catch (const json::exception& e) {
    return absl::InvalidArgumentError(
        absl::StrFormat("trace line is missing fields: %s", e.what()));
  }
  if (r.answers.size() != r.owner_ids.size()) {
    return absl::InvalidArgumentError("trace line: owners and answers differ");
  }
  return r;
}

void WriteTrace(std::ostream& out, absl::Span<const QueryRecord> trace) {
  for (const QueryRecord& r : trace) out << QueryRecordToJson(r) << '\n';
}

absl::StatusOr<std::vector<QueryRecord>> ReadTrace(std::istream& in) {
  std::vector<QueryRecord> trace;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    absl::StatusOr<QueryRecord> record = QueryRecordFromJson(line);
    if (!record.ok()) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "trace line %d: %s", line_number, record.status().message()));
    }
    trace.push_back(*std::move(record));
  }
  return trace;
}

void WriteRoundMetricsCsv(std::ostream& out,
                          absl::Span<const RoundMetrics> rounds) {
  out << "round,pool_remaining,queries_issued,mean_eps_spent,"
         "student_test_accuracy\n";
  for (const RoundMetrics& m : rounds) {
    out << absl::StrFormat("%d,%d,%d,%.17g,%.17g\n", m.round, m.pool_remaining,
                           m.queries_issued, m.mean_eps_spent,
                           m.student_test_accuracy);
  }
}

}  // namespace ldpdl
