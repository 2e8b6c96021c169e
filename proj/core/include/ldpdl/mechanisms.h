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

#ifndef LDPDL_MECHANISMS_H_
#define LDPDL_MECHANISMS_H_

#include <cstdint>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "absl/types/span.h"
#include "ldpdl/random.h"

namespace ldpdl {

// Perturbation primitives for numeric vectors in [-1, 1]^k under epsilon-LDP.
//
// All three mechanisms are unbiased per coordinate. Piecewise and Duchi share
// the same m-of-k attribute sampling frame: m coordinates are chosen without
// replacement, each is perturbed at epsilon / m and scaled by k / m, and the
// remaining coordinates are reported as 0. Laplace perturbs every coordinate
// at epsilon / k with sensitivity 2.

enum class MechanismKind : uint8_t {
  kPiecewise = 0,
  kDuchi = 1,
  kLaplace = 2,
};

absl::string_view MechanismName(MechanismKind kind);
absl::StatusOr<MechanismKind> ParseMechanismKind(absl::string_view name);

// Privacy budget for a single mechanism invocation, in nats. Always finite
// and strictly positive.
class PrivacyParameter {
 public:
  static absl::StatusOr<PrivacyParameter> Create(double epsilon);

  double epsilon() const { return epsilon_; }

 private:
  explicit PrivacyParameter(double epsilon) : epsilon_(epsilon) {}
  double epsilon_;
};

// A k-dimensional vector with every coordinate in [-1, 1].
class UnitVector {
 public:
  static absl::StatusOr<UnitVector> Create(std::vector<double> coords);

  absl::Span<const double> coords() const { return coords_; }
  int k() const { return static_cast<int>(coords_.size()); }

 private:
  explicit UnitVector(std::vector<double> coords) : coords_(std::move(coords)) {}
  std::vector<double> coords_;
};

struct PerturbedVector {
  std::vector<double> coords;
  MechanismKind mechanism = MechanismKind::kPiecewise;
  double epsilon_used = 0.0;

  int k() const { return static_cast<int>(coords.size()); }
  friend bool operator==(const PerturbedVector&, const PerturbedVector&) =
      default;
};

// Number of attributes perturbed by the m-of-k frame:
// max{1, min{k, floor(epsilon / 2.5)}}.
int SubsampleCount(double epsilon, int k);

// Output half-width of the one-dimensional Piecewise mechanism,
// (e^{eps/2} + 1) / (e^{eps/2} - 1). Evaluated as 1 + 2 / expm1(eps/2) so that
// very large budgets give 1 instead of inf/inf.
double PiecewiseDelta(double epsilon);

// Probability of sampling from the central interval [L(z), R(z)].
double PiecewiseCentralProbability(double epsilon);

// Central interval [L(z), R(z)] for input z.
struct Interval {
  double lo;
  double hi;
};
Interval PiecewiseCentralInterval(double z, double epsilon);

// Output magnitude of Duchi's scalar mechanism, (e^eps + 1) / (e^eps - 1).
double DuchiDelta(double epsilon);

// Probability that Duchi's scalar mechanism outputs +DuchiDelta for input z.
double DuchiPlusProbability(double z, double epsilon);

// One-dimensional Piecewise mechanism. Rejects z outside [-1, 1].
absl::StatusOr<double> PiecewiseOne(double z, PrivacyParameter eps, Rng& rng);

// Exact density of PiecewiseOne's output at `out`; 0 outside [-Delta, Delta].
absl::StatusOr<double> PiecewiseOneDensity(double z, PrivacyParameter eps,
                                           double out);

// Duchi's two-point scalar mechanism. Rejects z outside [-1, 1].
absl::StatusOr<double> DuchiOne(double z, PrivacyParameter eps, Rng& rng);

PerturbedVector PiecewiseMulti(const UnitVector& z, PrivacyParameter eps,
                               Rng& rng);
PerturbedVector DuchiMulti(const UnitVector& z, PrivacyParameter eps, Rng& rng);
PerturbedVector LaplaceMulti(const UnitVector& z, PrivacyParameter eps,
                             Rng& rng);

// Dispatches to the mechanism named by `kind`.
PerturbedVector Perturb(MechanismKind kind, const UnitVector& z,
                        PrivacyParameter eps, Rng& rng);

// Coordinate-wise arithmetic mean. No clipping or renormalization. Fails on
// an empty list or on vectors that disagree in k or mechanism.
absl::StatusOr<std::vector<double>> EstimateMean(
    absl::Span<const PerturbedVector> perturbed);

}  // namespace ldpdl

#endif  // LDPDL_MECHANISMS_H_
