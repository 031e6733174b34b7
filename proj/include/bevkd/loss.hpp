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

#pragma once

#include <cmath>

#include <nlohmann/json.hpp>

#include "bevkd/error.hpp"

namespace bevkd {

struct LossReport {
  double l_apprentice = 0.0;
  double l_td = 0.0;
  double l_or = 0.0;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double l_total = 0.0;
};

/// l_total = l_a + lambda1 * l_td + lambda2 * l_or. l_a is supplied by the caller.
inline LossReport total_loss(double l_a, double l_td, double l_or, double lambda1 = 1.0, double lambda2 = 1.0) {
  for (double v : {l_a, l_td, l_or, lambda1, lambda2}) {
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFiniteInput, "loss terms and weights must be finite");
  }
  if (lambda1 < 0.0 || lambda2 < 0.0) throw Error(ErrorKind::InvalidSpec, "loss weights must be nonnegative");
  return {l_a, l_td, l_or, lambda1, lambda2, l_a + lambda1 * l_td + lambda2 * l_or};
}

inline void to_json(nlohmann::json& j, const LossReport& r) {
  j = nlohmann::json{{"l_apprentice", r.l_apprentice}, {"l_td", r.l_td},       {"l_or", r.l_or},
                     {"lambda1", r.lambda1},           {"lambda2", r.lambda2}, {"l_total", r.l_total}};
}

}  // namespace bevkd
