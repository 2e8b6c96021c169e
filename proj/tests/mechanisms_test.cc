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
#include <set>
#include <vector>

#include "absl/status/status.h"
#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "testing/oracles.h"

namespace ldpdl {
namespace {

using ::ldpdl::testing::Grid;
using ::ldpdl::testing::MomentAccumulator;
using ::ldpdl::testing::Moments;
using ::testing::DoubleNear;
using ::testing::Each;
using ::testing::ElementsAre;

PrivacyParameter Eps(double e) { return *PrivacyParameter::Create(e); }
UnitVector Unit(std::vector<double> z) { return *UnitVector::Create(std::move(z)); }

TEST(PrivacyParameterTest, RejectsNonPositiveAndNonFinite) {
  EXPECT_FALSE(PrivacyParameter::Create(0.0).ok());
  EXPECT_FALSE(PrivacyParameter::Create(-1.0).ok());
  EXPECT_FALSE(PrivacyParameter::Create(std::nan("")).ok());
  EXPECT_FALSE(PrivacyParameter::Create(INFINITY).ok());
  EXPECT_DOUBLE_EQ(PrivacyParameter::Create(0.5)->epsilon(), 0.5);
}

TEST(UnitVectorTest, ValidatesRange) {
  EXPECT_TRUE(UnitVector::Create({-1.0, 0.0, 1.0}).ok());
  EXPECT_FALSE(UnitVector::Create({}).ok());
  EXPECT_FALSE(UnitVector::Create({1.0000001}).ok());
  EXPECT_FALSE(UnitVector::Create({std::nan("")}).ok());
}

TEST(MechanismKindTest, NamesRoundTrip) {
  for (MechanismKind k : {MechanismKind::kPiecewise, MechanismKind::kDuchi,
                          MechanismKind::kLaplace}) {
    EXPECT_EQ(*ParseMechanismKind(MechanismName(k)), k);
  }
  EXPECT_FALSE(ParseMechanismKind("gaussian").ok());
}

TEST(SubsampleCountTest, MatchesFormula) {
  EXPECT_EQ(SubsampleCount(2.5, 10), 1);
  EXPECT_EQ(SubsampleCount(5.0, 10), 2);
  EXPECT_EQ(SubsampleCount(0.1, 10), 1);
  EXPECT_EQ(SubsampleCount(100.0, 10), 10);
  for (double e : Grid(0.01, 40.0, 100)) {
    for (int k : {1, 3, 10}) {
      EXPECT_EQ(SubsampleCount(e, k), testing::SubsampleCountOracle(e, k))
          << "eps=" << e << " k=" << k;
    }
  }
}

TEST(PiecewiseTest, ClosedFormsAtTwoLnThree) {
  const double eps = 2.0 * std::log(3.0);
  EXPECT_NEAR(PiecewiseDelta(eps), 2.0, 1e-12);
  EXPECT_NEAR(PiecewiseCentralProbability(eps), 0.75, 1e-12);
  const Interval at0 = PiecewiseCentralInterval(0.0, eps);
  EXPECT_NEAR(at0.lo, -0.5, 1e-12);
  EXPECT_NEAR(at0.hi, 0.5, 1e-12);
  const Interval at1 = PiecewiseCentralInterval(1.0, eps);
  EXPECT_NEAR(at1.lo, 1.0, 1e-12);
  EXPECT_NEAR(at1.hi, 2.0, 1e-12);
}

TEST(PiecewiseTest, DensityValuesAtTwoLnThree) {
  const PrivacyParameter eps = Eps(2.0 * std::log(3.0));
  EXPECT_NEAR(*PiecewiseOneDensity(0.0, eps, 0.0), 0.75, 1e-12);
  EXPECT_NEAR(*PiecewiseOneDensity(0.0, eps, 0.3), 0.75, 1e-12);
  EXPECT_NEAR(*PiecewiseOneDensity(0.0, eps, 1.0), 1.0 / 12.0, 1e-12);
  EXPECT_NEAR(*PiecewiseOneDensity(0.0, eps, -1.9), 1.0 / 12.0, 1e-12);
  EXPECT_EQ(*PiecewiseOneDensity(0.0, eps, 2.5), 0.0);
}

TEST(PiecewiseTest, DensityMatchesOracleAndIntegratesToOne) {
  for (double e : {0.5, 1.0, 2.0, 4.0, 8.0}) {
    for (double z : Grid(-1.0, 1.0, 21)) {
      const double delta = PiecewiseDelta(e);
      const std::vector<double> ys = Grid(-delta, delta, 20001);
      double integral = 0.0;
      for (size_t i = 0; i + 1 < ys.size(); ++i) {
        const double mid = 0.5 * (ys[i] + ys[i + 1]);
        const double d = *PiecewiseOneDensity(z, Eps(e), mid);
        const long double oracle = testing::PiecewiseDensityOracle(z, e, mid);
        ASSERT_NEAR(d, static_cast<double>(oracle), 1e-12 * (1.0 + d));
        integral += d * (ys[i + 1] - ys[i]);
      }
      EXPECT_NEAR(integral, 1.0, 1e-3) << "eps=" << e << " z=" << z;
    }
  }
}

TEST(PiecewiseTest, DensityRatioBoundedByExpEpsilon) {
  for (double e : {0.5, 1.0, 2.0, 4.0}) {
    const double delta = PiecewiseDelta(e);
    double worst = 0.0;
    for (double y : Grid(-delta, delta, 1000)) {
      const double hi = *PiecewiseOneDensity(1.0, Eps(e), y);
      const double lo = *PiecewiseOneDensity(-1.0, Eps(e), y);
      worst = std::max({worst, hi / lo, lo / hi});
    }
    EXPECT_LE(worst, std::exp(e) * (1.0 + 1e-12)) << "eps=" << e;
  }
}

TEST(PiecewiseTest, RejectsOutOfRangeInput) {
  Rng rng(1);
  EXPECT_EQ(PiecewiseOne(1.5, Eps(1.0), rng).status().code(),
            absl::StatusCode::kOutOfRange);
  EXPECT_EQ(PiecewiseOneDensity(-1.01, Eps(1.0), 0.0).status().code(),
            absl::StatusCode::kOutOfRange);
}

TEST(PiecewiseTest, OutputInRangeAndRegionFrequencies) {
  const double eps = 2.0 * std::log(3.0);
  Rng rng(5);
  int central = 0, left = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double y = *PiecewiseOne(0.0, Eps(eps), rng);
    ASSERT_GE(y, -2.0);
    ASSERT_LE(y, 2.0);
    if (y >= -0.5 && y <= 0.5) ++central;
    if (y < -0.5) ++left;
  }
  // Binomial frequencies: central 3/4, left tail 1/8 (half of the 1/4 tail
  // mass, the two tails having equal length at z = 0).
  EXPECT_NEAR(central / double(n), 0.75, 4 * std::sqrt(0.75 * 0.25 / n));
  EXPECT_NEAR(left / double(n), 0.125, 4 * std::sqrt(0.125 * 0.875 / n));
}

TEST(PiecewiseTest, TailSidesProportionalToLength) {
  // z = 0.8 at eps = 1: the left tail is much longer than the right one.
  const double eps = 1.0, z = 0.8;
  const double delta = PiecewiseDelta(eps);
  const Interval c = PiecewiseCentralInterval(z, eps);
  const double left_len = c.lo + delta, right_len = delta - c.hi;
  const double expected_left =
      (1.0 - PiecewiseCentralProbability(eps)) * left_len / (left_len + right_len);
  Rng rng(9);
  const int n = 200000;
  int left = 0;
  for (int i = 0; i < n; ++i) {
    if (*PiecewiseOne(z, Eps(eps), rng) < c.lo) ++left;
  }
  EXPECT_NEAR(left / double(n), expected_left,
              4 * std::sqrt(expected_left * (1 - expected_left) / n));
}

TEST(PiecewiseTest, UnbiasedAtPointFour) {
  Rng rng(11);
  MomentAccumulator acc;
  for (int i = 0; i < 200000; ++i) acc.Add(*PiecewiseOne(0.4, Eps(1.0), rng));
  const Moments m = acc.Get();
  EXPECT_NEAR(m.mean, 0.4, 0.02);
  EXPECT_NEAR(m.mean, 0.4, 4 * m.std_error);
}

TEST(PiecewiseTest, HugeBudgetIsNearlyExact) {
  Rng rng(2);
  EXPECT_DOUBLE_EQ(PiecewiseDelta(1e6), 1.0);
  for (double z : {-1.0, -0.3, 0.0, 0.7, 1.0}) {
    EXPECT_NEAR(*PiecewiseOne(z, Eps(1e6), rng), z, 1e-9);
  }
}

TEST(PiecewiseMultiTest, SupportAndScale) {
  Rng rng(3);
  const UnitVector z = Unit({0.1, -0.2, 0.3, 0.4, -0.5, 0.6, 0.7, -0.8, 0.9, 0.0});
  for (double e : {2.5, 5.0, 12.5}) {
    const int m = SubsampleCount(e, 10);
    const double bound = 10.0 / m * PiecewiseDelta(e / m);
    for (int t = 0; t < 2000; ++t) {
      const PerturbedVector y = PiecewiseMulti(z, Eps(e), rng);
      EXPECT_EQ(y.mechanism, MechanismKind::kPiecewise);
      EXPECT_DOUBLE_EQ(y.epsilon_used, e);
      int nonzero = 0;
      for (double v : y.coords) {
        if (v != 0.0) ++nonzero;
        ASSERT_LE(std::abs(v), bound * (1 + 1e-12));
      }
      ASSERT_EQ(nonzero, m);
    }
  }
}

TEST(PiecewiseMultiTest, ZeroInputIsUnbiased) {
  Rng rng(4);
  std::vector<MomentAccumulator> acc(3);
  const UnitVector z = Unit({0.0, 0.0, 0.0});
  for (int i = 0; i < 300000; ++i) {
    const PerturbedVector y = PiecewiseMulti(z, Eps(1.0), rng);
    for (int j = 0; j < 3; ++j) acc[j].Add(y.coords[j]);
  }
  for (const MomentAccumulator& a : acc) {
    EXPECT_NEAR(a.Get().mean, 0.0, 0.05);
    EXPECT_NEAR(a.Get().mean, 0.0, 4 * a.Get().std_error);
  }
}

TEST(DuchiTest, TwoPointFormula) {
  EXPECT_NEAR(DuchiDelta(std::log(3.0)), 2.0, 1e-12);
  EXPECT_NEAR(DuchiPlusProbability(1.0, std::log(3.0)), 0.75, 1e-12);
  for (double e : {0.1, 1.0, 7.0}) {
    EXPECT_DOUBLE_EQ(DuchiPlusProbability(0.0, e), 0.5);
  }
  for (double e : {0.5, 1.0, 2.0, 4.0, 8.0}) {
    for (double z : Grid(-1.0, 1.0, 201)) {
      EXPECT_NEAR(DuchiPlusProbability(z, e),
                  static_cast<double>(testing::DuchiPlusOracle(z, e)), 1e-15);
    }
  }
}

TEST(DuchiTest, OutputsAreTwoPointAndUnbiased) {
  Rng rng(6);
  MomentAccumulator acc;
  const double delta = DuchiDelta(1.0);
  for (int i = 0; i < 200000; ++i) {
    const double y = *DuchiOne(0.4, Eps(1.0), rng);
    ASSERT_TRUE(y == delta || y == -delta);
    acc.Add(y);
  }
  EXPECT_NEAR(acc.Get().mean, 0.4, 0.03);
  EXPECT_NEAR(acc.Get().mean, 0.4, 4 * acc.Get().std_error);
  EXPECT_FALSE(DuchiOne(-2.0, Eps(1.0), rng).ok());
}

TEST(DuchiMultiTest, FrameStructure) {
  Rng rng(8);
  const UnitVector z = Unit(std::vector<double>(10, 0.3));
  const double magnitude = 10.0 * DuchiDelta(2.5);
  std::set<double> magnitudes;
  for (int t = 0; t < 1000; ++t) {
    const PerturbedVector y = DuchiMulti(z, Eps(2.5), rng);
    int nonzero = 0;
    for (double v : y.coords) {
      if (v == 0.0) continue;
      ++nonzero;
      magnitudes.insert(std::abs(v));
      EXPECT_DOUBLE_EQ(std::abs(v), magnitude);
    }
    EXPECT_EQ(nonzero, 1);
  }
  EXPECT_LE(magnitudes.size(), 2u);
}

TEST(DuchiMultiTest, ZeroInputIsUnbiased) {
  Rng rng(10);
  std::vector<MomentAccumulator> acc(3);
  const UnitVector z = Unit({0.0, 0.0, 0.0});
  for (int i = 0; i < 300000; ++i) {
    const PerturbedVector y = DuchiMulti(z, Eps(2.0), rng);
    for (int j = 0; j < 3; ++j) acc[j].Add(y.coords[j]);
  }
  for (const MomentAccumulator& a : acc) {
    EXPECT_NEAR(a.Get().mean, 0.0, 4 * a.Get().std_error);
  }
}

TEST(LaplaceTest, HugeBudgetIsNearlyExact) {
  Rng rng(12);
  const UnitVector z = Unit({0.5, -0.25, 1.0});
  const PerturbedVector y = LaplaceMulti(z, Eps(1e6), rng);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(y.coords[j], z.coords()[j], 1e-3);
}

TEST(LaplaceTest, VarianceMatchesScale) {
  // k = 1, eps = 2: scale b = 2k/eps = 1 and variance 2b^2 = 2.
  Rng rng(13);
  MomentAccumulator acc;
  const UnitVector z = Unit({0.0});
  for (int i = 0; i < 200000; ++i) acc.Add(LaplaceMulti(z, Eps(2.0), rng).coords[0]);
  EXPECT_NEAR(acc.Get().variance, 2.0, 0.2);
}

TEST(LaplaceTest, ZeroInputIsUnbiased) {
  Rng rng(14);
  std::vector<MomentAccumulator> acc(10);
  const UnitVector z = Unit(std::vector<double>(10, 0.0));
  for (int i = 0; i < 200000; ++i) {
    const PerturbedVector y = LaplaceMulti(z, Eps(1.0), rng);
    for (int j = 0; j < 10; ++j) acc[j].Add(y.coords[j]);
  }
  for (const MomentAccumulator& a : acc) {
    EXPECT_NEAR(a.Get().mean, 0.0, 4 * a.Get().std_error);
  }
}

TEST(PerturbTest, DeterministicGivenSeed) {
  const UnitVector z = Unit({0.2, -0.6, 0.4});
  for (MechanismKind k : {MechanismKind::kPiecewise, MechanismKind::kDuchi,
                          MechanismKind::kLaplace}) {
    Rng a(77), b(77);
    for (int i = 0; i < 100; ++i) {
      EXPECT_EQ(Perturb(k, z, Eps(3.0), a), Perturb(k, z, Eps(3.0), b));
    }
  }
}

TEST(EstimateMeanTest, IdentityAndSymmetry) {
  const PerturbedVector v{{1.5, -2.0}, MechanismKind::kLaplace, 1.0};
  const PerturbedVector neg{{-1.5, 2.0}, MechanismKind::kLaplace, 1.0};
  EXPECT_THAT(*EstimateMean({v}), ElementsAre(1.5, -2.0));
  EXPECT_THAT(*EstimateMean({v, neg}), Each(DoubleNear(0.0, 0.0)));
}

TEST(EstimateMeanTest, RejectsEmptyAndMixedInputs) {
  EXPECT_FALSE(EstimateMean({}).ok());
  const PerturbedVector a{{1.0, 2.0}, MechanismKind::kLaplace, 1.0};
  const PerturbedVector b{{1.0}, MechanismKind::kLaplace, 1.0};
  const PerturbedVector c{{1.0, 2.0}, MechanismKind::kDuchi, 1.0};
  EXPECT_FALSE(EstimateMean({a, b}).ok());
  EXPECT_FALSE(EstimateMean({a, c}).ok());
}

TEST(EstimateMeanTest, ErrorShrinksWithSampleSize) {
  const UnitVector z = Unit({0.2, -0.6, 0.4});
  auto max_error = [&](int n, uint64_t seed) {
    Rng rng(seed);
    std::vector<PerturbedVector> ys;
    ys.reserve(n);
    for (int i = 0; i < n; ++i) ys.push_back(PiecewiseMulti(z, Eps(2.0), rng));
    const std::vector<double> mean = *EstimateMean(ys);
    double err = 0.0;
    for (int j = 0; j < 3; ++j) err = std::max(err, std::abs(mean[j] - z.coords()[j]));
    return err;
  };
  double small = 0.0, large = 0.0;
  for (uint64_t s = 0; s < 10; ++s) {
    small += max_error(100000, 100 + s);
    large += max_error(200000, 200 + s);
  }
  // Expected ratio 1/sqrt(2) ~ 0.71; generous statistical slack.
  EXPECT_GT(large / small, 0.5);
  EXPECT_LT(large / small, 0.95);
}

}  // namespace
}  // namespace ldpdl
