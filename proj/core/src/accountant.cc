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

#include "ldpdl/accountant.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "absl/strings/numbers.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_split.h"
#include "absl/strings/strip.h"

namespace ldpdl {

absl::StatusOr<BudgetPlan> PlanBudget(double total_epsilon,
                                      int64_t planned_queries, int64_t n_q,
                                      int64_t num_owners) {
  if (!std::isfinite(total_epsilon) || total_epsilon <= 0.0) {
    return absl::InvalidArgumentError(
        absl::StrFormat("total epsilon must be positive, got %g", total_epsilon));
  }
  if (planned_queries <= 0 || n_q <= 0 || num_owners <= 0) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "planned_queries (%d), n_q (%d) and num_owners (%d) must be positive",
        planned_queries, n_q, num_owners));
  }
  BudgetPlan plan;
  plan.total_epsilon = total_epsilon;
  const int64_t owner_queries = planned_queries * n_q;
  plan.r_max = (owner_queries + num_owners - 1) / num_owners;
  double per_query = total_epsilon / static_cast<double>(plan.r_max);
  while (per_query * static_cast<double>(plan.r_max) > total_epsilon) {
    per_query = std::nextafter(per_query, 0.0);
  }
  plan.per_query_epsilon = per_query;
  return plan;
}

OwnerLedger::OwnerLedger(int owner_id, const BudgetPlan& plan)
    : owner_id_(owner_id),
      total_epsilon_(plan.total_epsilon),
      per_query_epsilon_(plan.per_query_epsilon),
      r_max_(plan.r_max) {}

absl::Status OwnerLedger::Charge(double eps_i) {
  const double drift = std::abs(eps_i - per_query_epsilon_);
  if (!(drift <= 1e-12 * std::max(1.0, per_query_epsilon_))) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "owner %d: charge of %.17g does not match planned per-query epsilon "
        "%.17g",
        owner_id_, eps_i, per_query_epsilon_));
  }
  if (exhausted()) {
    return absl::ResourceExhaustedError(absl::StrFormat(
        "owner %d has answered %d of %d queries", owner_id_, answered_, r_max_));
  }
  const double next_spent =
      static_cast<double>(answered_ + 1) * per_query_epsilon_;
  if (next_spent > total_epsilon_ + kBudgetTolerance) {
    return absl::ResourceExhaustedError(absl::StrFormat(
        "owner %d: spending %.17g would exceed total epsilon %.17g", owner_id_,
        next_spent, total_epsilon_));
  }
  ++answered_;
  return absl::OkStatus();
}

std::vector<int> AvailableOwners(absl::Span<const OwnerLedger> ledgers) {
  std::vector<int> ids;
  for (const OwnerLedger& ledger : ledgers) {
    if (!ledger.exhausted()) ids.push_back(ledger.owner_id());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

LedgerRow ToRow(const OwnerLedger& ledger) {
  return {ledger.owner_id(), ledger.total_epsilon(), ledger.per_query_epsilon(),
          ledger.answered(), ledger.spent()};
}

void WriteLedgerCsv(std::ostream& out, absl::Span<const OwnerLedger> ledgers) {
  out << "owner_id,total_epsilon,per_query_epsilon,answered,spent\n";
  for (const OwnerLedger& ledger : ledgers) {
    const LedgerRow row = ToRow(ledger);
    out << absl::StrFormat("%d,%.17g,%.17g,%d,%.17g\n", row.owner_id,
                           row.total_epsilon, row.per_query_epsilon,
                           row.answered, row.spent);
  }
}

absl::StatusOr<std::vector<LedgerRow>> ReadLedgerCsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) ||
      absl::StripTrailingAsciiWhitespace(line) !=
          "owner_id,total_epsilon,per_query_epsilon,answered,spent") {
    return absl::InvalidArgumentError("ledger CSV: missing or unexpected header");
  }
  std::vector<LedgerRow> rows;
  int line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    absl::string_view trimmed = absl::StripTrailingAsciiWhitespace(line);
    if (trimmed.empty()) continue;
    std::vector<absl::string_view> fields = absl::StrSplit(trimmed, ',');
    LedgerRow row;
    if (fields.size() != 5 || !absl::SimpleAtoi(fields[0], &row.owner_id) ||
        !absl::SimpleAtod(fields[1], &row.total_epsilon) ||
        !absl::SimpleAtod(fields[2], &row.per_query_epsilon) ||
        !absl::SimpleAtoi(fields[3], &row.answered) ||
        !absl::SimpleAtod(fields[4], &row.spent)) {
      return absl::InvalidArgumentError(
          absl::StrFormat("ledger CSV line %d is malformed", line_number));
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace ldpdl
