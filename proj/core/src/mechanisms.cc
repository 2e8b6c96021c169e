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

#include "ldpdl/mechanisms.h"

#include <cmath>
#include <limits>
#include <numeric>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"

namespace ldpdl {
namespace {

bool InUnitRange(double z) { return z >= -1.0 && z <= 1.0; }

absl::Status CheckUnitInput(double z) {
  if (!InUnitRange(z)) {
    return absl::OutOfRangeError(
        absl::StrFormat("mechanism input %g is outside [-1, 1]", z));
  }
  return absl::OkStatus();
}

double PiecewiseOneUnchecked(double z, double epsilon, Rng& rng) {
  const double delta = PiecewiseDelta(epsilon);
  const Interval central = PiecewiseCentralInterval(z, epsilon);
  if (rng.Uniform() < PiecewiseCentralProbability(epsilon)) {
    return central.lo + (central.hi - central.lo) * rng.Uniform();
  }
  // One uniform draw over the union [-delta, lo] U [hi, delta], whose total
  // length is delta + 1.
  const double left_length = central.lo + delta;
  const double u = rng.Uniform() * (delta + 1.0);
  if (u < left_length) return -delta + u;
  return central.hi + (u - left_length);
}

double DuchiOneUnchecked(double z, double epsilon, Rng& rng) {
  const double magnitude = DuchiDelta(epsilon);
  return rng.Uniform() < DuchiPlusProbability(z, epsilon) ? magnitude
                                                          : -magnitude;
}

// Perturbs m = SubsampleCount(eps, k) attributes chosen uniformly without
// replacement; each gets (k / m) * scalar(z_j, eps / m).
template <typename ScalarMechanism>
PerturbedVector SubsampledPerturb(const UnitVector& z, PrivacyParameter eps,
                                  MechanismKind kind, Rng& rng,
                                  ScalarMechanism scalar) {
  const int k = z.k();
  const int m = SubsampleCount(eps.epsilon(), k);
  const double sub_epsilon = eps.epsilon() / m;
  const double scale = static_cast<double>(k) / m;

  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  PerturbedVector out{std::vector<double>(k, 0.0), kind, eps.epsilon()};
  for (int i = 0; i < m; ++i) {
    const int j = i + static_cast<int>(rng.UniformIndex(k - i));
    std::swap(order[i], order[j]);
    const int attribute = order[i];
    out.coords[attribute] =
        scale * scalar(z.coords()[attribute], sub_epsilon, rng);
  }
  return out;
}

}  // namespace

absl::string_view MechanismName(MechanismKind kind) {
  switch (kind) {
    case MechanismKind::kPiecewise:
      return "piecewise";
    case MechanismKind::kDuchi:
      return "duchi";
    case MechanismKind::kLaplace:
      return "laplace";
  }
  return "unknown";
}

absl::StatusOr<MechanismKind> ParseMechanismKind(absl::string_view name) {
  if (name == "piecewise" || name == "pm") return MechanismKind::kPiecewise;
  if (name == "duchi") return MechanismKind::kDuchi;
  if (name == "laplace") return MechanismKind::kLaplace;
  return absl::InvalidArgumentError(absl::StrCat(
      "unknown mechanism '", name, "' (expected piecewise, duchi or laplace)"));
}

absl::StatusOr<PrivacyParameter> PrivacyParameter::Create(double epsilon) {
  if (!std::isfinite(epsilon) || epsilon <= 0.0) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "epsilon must be finite and positive, got %g", epsilon));
  }
  return PrivacyParameter(epsilon);
}

absl::StatusOr<UnitVector> UnitVector::Create(std::vector<double> coords) {
  if (coords.empty()) {
    return absl::InvalidArgumentError("unit vector must have k >= 1");
  }
  for (size_t j = 0; j < coords.size(); ++j) {
    if (!InUnitRange(coords[j])) {
      return absl::OutOfRangeError(absl::StrFormat(
          "unit vector coordinate %d is %g, outside [-1, 1]", j, coords[j]));
    }
  }
  return UnitVector(std::move(coords));
}

int SubsampleCount(double epsilon, int k) {
  const double ratio = std::floor(epsilon / 2.5);
  if (ratio < 1.0) return 1;
  if (ratio >= static_cast<double>(k)) return k;
  return static_cast<int>(ratio);
}

double PiecewiseDelta(double epsilon) {
  return 1.0 + 2.0 / std::expm1(epsilon / 2.0);
}

double PiecewiseCentralProbability(double epsilon) {
  return 1.0 / (1.0 + std::exp(-epsilon / 2.0));
}

Interval PiecewiseCentralInterval(double z, double epsilon) {
  const double delta = PiecewiseDelta(epsilon);
  const double lo = (delta + 1.0) / 2.0 * z - (delta - 1.0) / 2.0;
  return {lo, lo + delta - 1.0};
}

double DuchiDelta(double epsilon) { return 1.0 + 2.0 / std::expm1(epsilon); }

double DuchiPlusProbability(double z, double epsilon) {
  return 0.5 + z / (2.0 * DuchiDelta(epsilon));
}

absl::StatusOr<double> PiecewiseOne(double z, PrivacyParameter eps, Rng& rng) {
  if (absl::Status s = CheckUnitInput(z); !s.ok()) return s;
  return PiecewiseOneUnchecked(z, eps.epsilon(), rng);
}

absl::StatusOr<double> PiecewiseOneDensity(double z, PrivacyParameter eps,
                                           double out) {
  if (absl::Status s = CheckUnitInput(z); !s.ok()) return s;
  const double epsilon = eps.epsilon();
  const double delta = PiecewiseDelta(epsilon);
  if (!(out >= -delta && out <= delta)) return 0.0;
  const Interval central = PiecewiseCentralInterval(z, epsilon);
  if (out >= central.lo && out <= central.hi) {
    // p / (delta - 1), with delta - 1 = 2 / expm1(eps / 2).
    return PiecewiseCentralProbability(epsilon) * std::expm1(epsilon / 2.0) /
           2.0;
  }
  // Remaining mass spread over the two tails, total length delta + 1.
  const double tail_probability = 1.0 / (1.0 + std::exp(epsilon / 2.0));
  return tail_probability / (delta + 1.0);
}

absl::StatusOr<double> DuchiOne(double z, PrivacyParameter eps, Rng& rng) {
  if (absl::Status s = CheckUnitInput(z); !s.ok()) return s;
  return DuchiOneUnchecked(z, eps.epsilon(), rng);
}

PerturbedVector PiecewiseMulti(const UnitVector& z, PrivacyParameter eps,
                               Rng& rng) {
  return SubsampledPerturb(z, eps, MechanismKind::kPiecewise, rng,
                           PiecewiseOneUnchecked);
}

PerturbedVector DuchiMulti(const UnitVector& z, PrivacyParameter eps,
                           Rng& rng) {
  return SubsampledPerturb(z, eps, MechanismKind::kDuchi, rng,
                           DuchiOneUnchecked);
}

PerturbedVector LaplaceMulti(const UnitVector& z, PrivacyParameter eps,
                             Rng& rng) {
  const int k = z.k();
  const double scale = 2.0 * k / eps.epsilon();
  PerturbedVector out{std::vector<double>(z.coords().begin(), z.coords().end()),
                      MechanismKind::kLaplace, eps.epsilon()};
  for (double& c : out.coords) c += rng.Laplace(scale);
  return out;
}

PerturbedVector Perturb(MechanismKind kind, const UnitVector& z,
                        PrivacyParameter eps, Rng& rng) {
  switch (kind) {
    case MechanismKind::kPiecewise:
      return PiecewiseMulti(z, eps, rng);
    case MechanismKind::kDuchi:
      return DuchiMulti(z, eps, rng);
    case MechanismKind::kLaplace:
      return LaplaceMulti(z, eps, rng);
  }
  return PiecewiseMulti(z, eps, rng);
}

absl::StatusOr<std::vector<double>> EstimateMean(
    absl::Span<const PerturbedVector> perturbed) {
  if (perturbed.empty()) {
    return absl::InvalidArgumentError("cannot estimate the mean of no vectors");
  }
  const int k = perturbed.front().k();
  const MechanismKind kind = perturbed.front().mechanism;
  std::vector<double> sum(k, 0.0);
  for (size_t i = 0; i < perturbed.size(); ++i) {
    const PerturbedVector& v = perturbed[i];
    if (v.k() != k) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "vector %d has k=%d, expected %d", i, v.k(), k));
    }
    if (v.mechanism != kind) {
      return absl::InvalidArgumentError(absl::StrCat(
          "vector ", i, " was produced by ", MechanismName(v.mechanism),
          ", expected ", MechanismName(kind)));
    }
    for (int j = 0; j < k; ++j) sum[j] += v.coords[j];
  }
  for (double& s : sum) s /= static_cast<double>(perturbed.size());
  return sum;
}

}  // namespace ldpdl
