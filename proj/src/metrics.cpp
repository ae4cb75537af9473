// Copyright 2026 The HCCM Authors. All Rights Reserved.
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

#include "hccm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "hccm/errors.hpp"

namespace hccm {

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ContractError("auc: scores/labels length mismatch");
  const size_t n = scores.size();
  int64_t positives = 0;
  for (int l : labels) positives += (l == 1) ? 1 : 0;
  int64_t negatives = static_cast<int64_t>(n) - positives;
  if (positives == 0 || negatives == 0) {
    throw UndefinedMetricError("auc: need at least one positive and one negative label");
  }

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&scores](size_t a, size_t b) { return scores[a] < scores[b]; });

  // Doubled average ranks stay integral through tie groups, so the
  // Mann-Whitney numerator is exact.
  uint64_t doubled_rank_sum_pos = 0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // group occupies 1-based ranks [i+1, j]; doubled average rank = i+1+j
    uint64_t doubled_rank = static_cast<uint64_t>(i) + 1 + static_cast<uint64_t>(j);
    for (size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) doubled_rank_sum_pos += doubled_rank;
    }
    i = j;
  }
  uint64_t numerator2 =
      doubled_rank_sum_pos - static_cast<uint64_t>(positives) * (positives + 1);
  return static_cast<double>(numerator2) /
         (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

double logloss(double yhat, int label) {
  double p = std::clamp(yhat, 1e-12, 1.0 - 1e-12);
  return label == 1 ? -std::log(p) : -std::log(1.0 - p);
}

std::string metrics_to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["variant"] = r.variant;
  j["seed"] = r.seed;
  j["epoch_logloss"] = r.epoch_logloss;
  j["batch_logloss"] = r.batch_logloss;
  j["epoch_auc"] = r.epoch_auc;
  j["test_auc"] = r.test_auc;
  j["param_checksum"] = r.param_checksum;
  return j.dump(2);
}

std::string metrics_to_text(const MetricsReport& r) {
  std::ostringstream os;
  os << "variant " << r.variant << "  seed " << r.seed << "\n";
  for (size_t e = 0; e < r.epoch_logloss.size(); ++e) {
    os << "  epoch " << (e + 1) << "  train logloss " << r.epoch_logloss[e] << "\n";
  }
  os << "  test auc " << r.test_auc << "\n";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(r.param_checksum));
  os << "  param checksum " << buf << "\n";
  return os.str();
}

}  // namespace hccm
