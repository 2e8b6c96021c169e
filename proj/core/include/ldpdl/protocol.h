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

#ifndef LDPDL_PROTOCOL_H_
#define LDPDL_PROTOCOL_H_

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/types/span.h"
#include "ldpdl/accountant.h"
#include "ldpdl/data.h"
#include "ldpdl/mechanisms.h"
#include "ldpdl/nn.h"
#include "ldpdl/random.h"
#include "ldpdl/sampling.h"

namespace ldpdl {

// Everything needed to run one private knowledge-transfer experiment.
struct ExperimentPlan {
  int num_owners = 20;        // L
  int n_q = 5;                // owners queried per public sample
  double total_epsilon = 8.0;  // per-owner budget
  int batch_per_round = 200;  // S
  int rounds = 5;             // I
  MechanismKind mechanism = MechanismKind::kPiecewise;
  SamplerKind sampler = SamplerKind::kActive;
  DistillationConfig distill;
  TrainConfig teacher_training;
  std::vector<int> teacher_hidden = {64};
  std::vector<int> student_hidden = {64};
  int owner_shard_size = 200;
  // Train the student on every record gathered so far rather than only the
  // current round's records.
  bool accumulate_queries = true;
  uint64_t data_seed = 1;
  uint64_t mechanism_seed = 2;
  uint64_t training_seed = 3;

  int64_t planned_queries() const {
    return static_cast<int64_t>(rounds) * batch_per_round;
  }
  absl::Status Validate() const;
};

// Per-owner budget implied by the plan (r_max from rounds * S * N_Q / L).
// With zero rounds no queries are planned and r_max is 0.
absl::StatusOr<BudgetPlan> PlanForExperiment(const ExperimentPlan& plan);

// Teacher softmax output mapped to [-1, 1]^k by z = 2p - 1 and perturbed.
absl::StatusOr<PerturbedVector> OwnerAnswer(const MlpModel& teacher,
                                            absl::Span<const double> x,
                                            double eps_i,
                                            MechanismKind mechanism, Rng& rng);

struct OwnerSelection {
  std::vector<int> owner_ids;
  // Fewer than n_q owners had budget left.
  bool short_selection = false;
};

// Uniform sample without replacement of min(n_q, available) owners among the
// non-exhausted ledgers. Fails when no owner has budget left.
absl::StatusOr<OwnerSelection> SelectOwners(
    absl::Span<const OwnerLedger> ledgers, int n_q, Rng& rng);

struct AggregatedTarget {
  SoftLabel target;
  Logits pseudo_logits;
};

// Mean of the answers, mapped back by (z + 1) / 2, clamped to [0, 1] and
// renormalized (uniform if nothing survives the clamp). Pseudo-logits are
// ln(p + 1e-8).
absl::StatusOr<AggregatedTarget> AggregateSoftLabel(
    absl::Span<const PerturbedVector> answers);

struct OwnerReply {
  bool exhausted = false;
  PerturbedVector answer;
};

// A data owner: a trained teacher plus the authoritative budget ledger. Safe
// to call from several threads; charges are serialized.
class DataOwner {
 public:
  DataOwner(int owner_id, MlpModel teacher, const BudgetPlan& budget,
            MechanismKind mechanism, uint64_t mechanism_seed);

  // Charges the ledger and, if budget remains, answers with a perturbed soft
  // label. The randomness is keyed by (owner id, sample id).
  absl::StatusOr<OwnerReply> Answer(int64_t sample_id,
                                    absl::Span<const double> x, double eps_i);

  int owner_id() const { return owner_id_; }
  int input_width() const { return teacher_.input_width(); }
  int class_count() const { return teacher_.class_count(); }
  MechanismKind mechanism() const { return mechanism_; }
  const MlpModel& teacher() const { return teacher_; }
  OwnerLedger ledger() const;

 private:
  const int owner_id_;
  const MlpModel teacher_;
  const MechanismKind mechanism_;
  const uint64_t mechanism_seed_;
  mutable std::mutex mu_;
  OwnerLedger ledger_;
};

// The data user's handle on the set of owners, local or remote.
class OwnerFleet {
 public:
  virtual ~OwnerFleet() = default;
  virtual int size() const = 0;
  // Transport failures surface as errors; budget exhaustion is a reply.
  virtual absl::StatusOr<OwnerReply> Query(int owner_id, int64_t sample_id,
                                           absl::Span<const double> x,
                                           double eps_i) = 0;
};

class InProcessFleet : public OwnerFleet {
 public:
  explicit InProcessFleet(std::vector<std::shared_ptr<DataOwner>> owners)
      : owners_(std::move(owners)) {}

  int size() const override { return static_cast<int>(owners_.size()); }
  absl::StatusOr<OwnerReply> Query(int owner_id, int64_t sample_id,
                                   absl::Span<const double> x,
                                   double eps_i) override;

  const std::vector<std::shared_ptr<DataOwner>>& owners() const {
    return owners_;
  }

 private:
  std::vector<std::shared_ptr<DataOwner>> owners_;
};

// Trains one teacher on an owner's shard.
absl::StatusOr<MlpModel> TrainTeacher(const ExperimentPlan& plan,
                                      const Dataset& shard, int owner_id);

// Trains every teacher on its shard of `ds`.
absl::StatusOr<std::vector<MlpModel>> TrainTeachers(const ExperimentPlan& plan,
                                                    const Dataset& ds,
                                                    const Partition& partition);

// Wraps trained teachers as in-process owners with fresh ledgers.
absl::StatusOr<std::vector<std::shared_ptr<DataOwner>>> MakeOwners(
    const ExperimentPlan& plan, std::vector<MlpModel> teachers);

struct QueryRecord {
  int round = 0;
  int64_t sample_id = 0;
  double eps_i = 0.0;
  MechanismKind mechanism = MechanismKind::kPiecewise;
  std::vector<int> owner_ids;
  std::vector<PerturbedVector> answers;
  SoftLabel target;
  Logits pseudo_logits;
  bool short_selection = false;
};

struct RoundMetrics {
  int round = 0;
  int64_t pool_remaining = 0;
  int64_t queries_issued = 0;
  double mean_eps_spent = 0.0;
  double student_test_accuracy = 0.0;
};

struct RunReport {
  MlpModel student;
  BudgetPlan budget;
  std::vector<RoundMetrics> rounds = {};
  // The data user's mirror of every owner's ledger.
  std::vector<OwnerLedger> ledgers = {};
  std::vector<QueryRecord> trace = {};
  // Non-OK when the run stopped early because every owner was exhausted.
  absl::Status status = absl::OkStatus();
};

// Runs the private knowledge-transfer loop: per round, pick S pool samples
// (uniformly in round 1 or for the random sampler, otherwise least
// confidence), remove them from the pool, query N_Q owners per sample,
// aggregate, and distill into the student. Stops after `plan.rounds` rounds
// or when fewer than S samples remain. Transport errors fail the call;
// budget exhaustion across all owners yields a partial report.
absl::StatusOr<RunReport> RunProtocol(const ExperimentPlan& plan,
                                      const UnlabeledPool& pool,
                                      const Dataset& test, OwnerFleet& fleet);

// Line-delimited JSON, one QueryRecord per line.
std::string QueryRecordToJson(const QueryRecord& record);
absl::StatusOr<QueryRecord> QueryRecordFromJson(absl::string_view line);
void WriteTrace(std::ostream& out, absl::Span<const QueryRecord> trace);
absl::StatusOr<std::vector<QueryRecord>> ReadTrace(std::istream& in);

// CSV `round,pool_remaining,queries_issued,mean_eps_spent,student_test_accuracy`.
void WriteRoundMetricsCsv(std::ostream& out,
                          absl::Span<const RoundMetrics> rounds);

}  // namespace ldpdl

#endif  // LDPDL_PROTOCOL_H_
