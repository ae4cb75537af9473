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

#ifndef HCCM_METRICS_HPP_
#define HCCM_METRICS_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "hccm/tensor.hpp"

namespace hccm {

// Rank-based AUC with ties counted 0.5. The numerator is accumulated in
// integers (doubled Mann-Whitney U), so the result is exactly the O(n^2)
// pairwise probability for any input that fits in memory.
// Throws UndefinedMetricError when labels are single-class.
double auc(std::span<const double> scores, std::span<const int> labels);

// Negative log-likelihood of one prediction, with yhat clamped away from
// the boundary before the log.
double logloss(double yhat, int label);

// Per-precision clamp for the logloss boundary. Finite-difference checks
// need 1e-12 in 64-bit; 1e-12 is below float resolution near 1, so the
// 32-bit path clamps wider.
template <typename S>
constexpr S logloss_eps() {
  if constexpr (std::is_same_v<S, double>) {
    return S(1e-12);
  } else {
    return S(1e-6);
  }
}

// Batch-mean logloss as a differentiable op: labels are constants,
// predictions carry gradient.
template <typename S>
Tensor<S> logloss_mean(const Tensor<S>& yhat, const std::vector<int>& labels) {
  if (yhat.rank() != 1 || yhat.dim(0) != static_cast<int>(labels.size())) {
    throw ShapeError("logloss_mean: predictions and labels disagree in length");
  }
  const int n = yhat.dim(0);
  const S eps = logloss_eps<S>();
  S total = S(0);
  for (int i = 0; i < n; ++i) {
    S p = std::clamp(yhat.value_at(i), eps, S(1) - eps);
    total += labels[static_cast<size_t>(i)] == 1 ? -std::log(p) : -std::log(S(1) - p);
  }
  Tensor<S> out = Tensor<S>::scalar(total / static_cast<S>(n));
  detail::maybe_record(out, detail::tracked(yhat),
                       [yi = yhat.impl(), labels, n, eps](const ArrayX<S>& g) {
                         if (!yi->requires_grad) return;
                         if (yi->grad.size() == 0) yi->grad = ArrayX<S>::Zero(n);
                         S inv_n = g[0] / static_cast<S>(n);
                         for (int i = 0; i < n; ++i) {
                           S p = yi->value[i];
                           if (p <= eps || p >= S(1) - eps) continue;  // flat clamp region
                           S y = labels[static_cast<size_t>(i)] == 1 ? S(1) : S(0);
                           yi->grad[i] += inv_n * (p - y) / (p * (S(1) - p));
                         }
                       });
  return out;
}

// Trainer output. wall_clock_seconds is diagnostic only and never appears
// in serialized reports, which must be byte-stable across reruns.
struct MetricsReport {
  std::string variant;
  uint64_t seed = 0;
  std::vector<double> epoch_logloss;  // sample-weighted mean per epoch
  std::vector<double> batch_logloss;
  std::vector<double> epoch_auc;  // held-out AUC after each epoch
  double test_auc = 0.0;          // best held-out AUC across epochs
  double wall_clock_seconds = 0.0;
  uint64_t param_checksum = 0;
};

std::string metrics_to_json(const MetricsReport& r);
std::string metrics_to_text(const MetricsReport& r);

}  // namespace hccm

#endif  // HCCM_METRICS_HPP_
