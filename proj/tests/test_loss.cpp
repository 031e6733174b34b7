// Copyright 2026 The bevkd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <limits>
#include <random>

#include "bevkd/loss.hpp"

namespace bevkd {
namespace {

TEST(TotalLoss, Examples) {
  for (double l1 : {0.0, 0.3, 5.0}) EXPECT_EQ(total_loss(1.0, 0.0, 0.0, l1, 2.0).l_total, 1.0);
  EXPECT_EQ(total_loss(0.0, 2.0, 3.0).l_total, 5.0);
  EXPECT_NEAR(total_loss(0.5, 2.0, 4.0, 0.25, 0.1).l_total, 1.4, 1e-12);
}

TEST(TotalLoss, ReportCarriesComponents) {
  const LossReport r = total_loss(0.5, 2.0, 4.0, 0.25, 0.1);
  EXPECT_EQ(r.l_apprentice, 0.5);
  EXPECT_EQ(r.l_td, 2.0);
  EXPECT_EQ(r.l_or, 4.0);
  EXPECT_EQ(r.lambda1, 0.25);
  EXPECT_EQ(r.lambda2, 0.1);
  const nlohmann::json j = r;
  EXPECT_EQ(j.at("l_total").get<double>(), r.l_total);
  EXPECT_EQ(j.at("lambda2").get<double>(), 0.1);
}

TEST(TotalLoss, LinearAndZeroWeightsRecoverApprenticeLoss) {
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = u(rng), td = u(rng), orr = u(rng), l1 = u(rng), l2 = u(rng);
    const LossReport r = total_loss(a, td, orr, l1, l2);
    EXPECT_NEAR(r.l_total, a + l1 * td + l2 * orr, 1e-12);
    EXPECT_EQ(total_loss(a, td, orr, 0.0, 0.0).l_total, a);
    EXPECT_NEAR(total_loss(a, 2 * td, orr, l1, l2).l_total - r.l_total, l1 * td, 1e-12);
  }
}

TEST(TotalLoss, RejectsNonFiniteAndNegativeWeights) {
  for (auto call : {+[] { return total_loss(std::numeric_limits<double>::quiet_NaN(), 0, 0); },
                    +[] { return total_loss(0, std::numeric_limits<double>::infinity(), 0); },
                    +[] { return total_loss(0, 0, 0, 1, -std::numeric_limits<double>::infinity()); }}) {
    try {
      call();
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::NonFiniteInput);
    }
  }
  try {
    total_loss(1, 1, 1, -0.5, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidSpec);
  }
}

}  // namespace
}  // namespace bevkd
