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

#ifndef LDPDL_ACCOUNTANT_H_
#define LDPDL_ACCOUNTANT_H_

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/types/span.h"

namespace ldpdl {

// Tolerance used when comparing cumulative spend against the total budget.
inline constexpr double kBudgetTolerance = 1e-9;

// Per-owner query budget under basic sequential composition.
struct BudgetPlan {
  double total_epsilon = 0.0;
  int64_t r_max = 0;
  // total_epsilon / r_max, rounded down if needed so that
  // r_max * per_query_epsilon <= total_epsilon holds in floating point.
  double per_query_epsilon = 0.0;
};

// r_max = ceil(planned_queries * n_q / num_owners). The ceiling (rather than
// the average) makes the bound hold for any owner that answers up to r_max
// queries, however unbalanced owner selection turns out.
absl::StatusOr<BudgetPlan> PlanBudget(double total_epsilon,
                                      int64_t planned_queries, int64_t n_q,
                                      int64_t num_owners);

// Budget state of one data owner. Mutation is not synchronized; callers that
// share a ledger across threads serialize access themselves.
class OwnerLedger {
 public:
  OwnerLedger(int owner_id, const BudgetPlan& plan);

  // Charges one query at `eps_i`.
  //   OK                  -> answered += 1, spent += eps_i.
  //   ResourceExhausted   -> the query would exceed r_max or total epsilon;
  //                          the ledger is unchanged.
  //   InvalidArgument     -> eps_i differs from the planned per-query budget.
  absl::Status Charge(double eps_i);

  // Refuses all further charges. Used by a data user's local mirror when an
  // owner reports exhaustion on its own.
  void Close() { closed_ = true; }

  bool exhausted() const { return closed_ || answered_ >= r_max_; }

  int owner_id() const { return owner_id_; }
  double total_epsilon() const { return total_epsilon_; }
  double per_query_epsilon() const { return per_query_epsilon_; }
  int64_t answered() const { return answered_; }
  int64_t r_max() const { return r_max_; }
  double spent() const {
    return static_cast<double>(answered_) * per_query_epsilon_;
  }

 private:
  int owner_id_;
  double total_epsilon_;
  double per_query_epsilon_;
  int64_t r_max_;
  int64_t answered_ = 0;
  bool closed_ = false;
};

// Ids of owners with remaining budget, ascending.
std::vector<int> AvailableOwners(absl::Span<const OwnerLedger> ledgers);

// One row of the ledger audit dump.
struct LedgerRow {
  int owner_id = 0;
  double total_epsilon = 0.0;
  double per_query_epsilon = 0.0;
  int64_t answered = 0;
  double spent = 0.0;
};

LedgerRow ToRow(const OwnerLedger& ledger);

// CSV with header `owner_id,total_epsilon,per_query_epsilon,answered,spent`.
// Reals are written with 17 significant digits so they parse back exactly.
void WriteLedgerCsv(std::ostream& out, absl::Span<const OwnerLedger> ledgers);
absl::StatusOr<std::vector<LedgerRow>> ReadLedgerCsv(std::istream& in);

}  // namespace ldpdl

#endif  // LDPDL_ACCOUNTANT_H_
