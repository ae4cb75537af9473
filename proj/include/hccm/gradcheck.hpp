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

#ifndef HCCM_GRADCHECK_HPP_
#define HCCM_GRADCHECK_HPP_

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "hccm/tensor.hpp"

namespace hccm {

// Central-difference gradient verification. `f` rebuilds the forward graph
// from the current parameter values and returns a scalar; the analytic
// gradient comes from one taped backward pass, the numeric one from
// forward-only evaluations at theta +/- eps. Per coordinate the reported
// error is |analytic - numeric| / max(1, |analytic|); the result is the
// maximum over every coordinate of every parameter.
//
// Only meaningful in 64-bit mode: central differences drown in rounding
// noise at 32-bit precision.
template <typename S>
double grad_check(const std::function<Tensor<S>()>& f, std::span<Tensor<S>> params, double eps) {
  if (eps <= 0) throw ContractError("grad_check: eps must be positive");
  for (auto& p : params) p.zero_grad();  // discard accumulations from earlier passes

  Tape<S> tape;
  Tensor<S> out;
  {
    typename Tape<S>::Scope scope(tape);
    out = f();
  }
  double f0 = static_cast<double>(out.scalar_value());
  if (!std::isfinite(f0)) throw NumericError("grad_check: f is non-finite at theta");
  tape.backward(out);

  std::vector<ArrayX<S>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) analytic.push_back(p.grad());
  for (auto& p : params) p.zero_grad();

  auto eval = [&f]() {
    Tensor<S> y = f();  // no active tape: forward only
    double v = static_cast<double>(y.scalar_value());
    if (!std::isfinite(v)) throw NumericError("grad_check: f is non-finite near theta");
    return v;
  };

  double max_err = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& v = params[pi].values();
    for (int64_t i = 0; i < v.size(); ++i) {
      S keep = v[i];
      v[i] = keep + static_cast<S>(eps);
      double fp = eval();
      v[i] = keep - static_cast<S>(eps);
      double fm = eval();
      v[i] = keep;
      double numeric = (fp - fm) / (2.0 * eps);
      double a = static_cast<double>(analytic[pi][i]);
      double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      if (err > max_err) max_err = err;
    }
  }
  return max_err;
}

// Single-parameter form.
template <typename S>
double grad_check(const std::function<Tensor<S>()>& f, Tensor<S> theta, double eps) {
  Tensor<S> params[1] = {theta};
  return grad_check(f, std::span<Tensor<S>>(params), eps);
}

}  // namespace hccm

#endif  // HCCM_GRADCHECK_HPP_
