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

#ifndef LDPDL_STATUS_MACROS_H_
#define LDPDL_STATUS_MACROS_H_

#include "absl/status/status.h"
#include "absl/status/statusor.h"

#define LDPDL_STATUS_CONCAT_INNER_(a, b) a##b
#define LDPDL_STATUS_CONCAT_(a, b) LDPDL_STATUS_CONCAT_INNER_(a, b)

// Evaluates an expression producing absl::Status and returns it from the
// enclosing function if it is not OK.
#define LDPDL_RETURN_IF_ERROR(expr)            \
  do {                                         \
    const ::absl::Status _ldpdl_status = (expr); \
    if (!_ldpdl_status.ok()) return _ldpdl_status; \
  } while (0)

// Evaluates an absl::StatusOr<T> expression; on success moves the value into
// `lhs`, otherwise returns the status from the enclosing function.
#define LDPDL_ASSIGN_OR_RETURN(lhs, rexpr)                                   \
  LDPDL_ASSIGN_OR_RETURN_IMPL_(                                              \
      LDPDL_STATUS_CONCAT_(_ldpdl_statusor_, __LINE__), lhs, rexpr)

#define LDPDL_ASSIGN_OR_RETURN_IMPL_(statusor, lhs, rexpr) \
  auto statusor = (rexpr);                                 \
  if (!statusor.ok()) return statusor.status();            \
  lhs = std::move(statusor).value()

#endif  // LDPDL_STATUS_MACROS_H_
