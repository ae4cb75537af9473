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
//
// Mini-batch training loop. One tape per batch; visual towers of repeated
// (pic, category) pairs are shared within the batch, which keeps the
// per-step cost bounded by the number of distinct catalog images rather
// than the batch size. The trainer itself is single-threaded: batch order,
// gradient accumulation, and optimizer state are all deterministic for a
// given seed. Evaluation is read-only and may fan out across threads.

#ifndef HCCM_TRAIN_HPP_
#define HCCM_TRAIN_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "hccm/checkpoint.hpp"
#include "hccm/feature_cache.hpp"
#include "hccm/metrics.hpp"
#include "hccm/model.hpp"

namespace hccm {

struct TrainConfig {
  Variant variant = Variant::Hccm;
  int batch_size = 128;
  int epochs = 1;
  double learning_rate = 1e-3;
  std::string optimizer = "adam";
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  uint64_t seed = 42;
  std::string precision = "f64";  // "f64" | "f32"
  bool deterministic = true;
  std::vector<int> hidden{400, 160, 80};
  int truncate = 10;
  int threads = 1;

  void validate() const {
    if (batch_size < 1) throw ConfigError("train.batch_size: must be positive");
    if (epochs < 0) throw ConfigError("train.epochs: must be >= 0");
    if (!(learning_rate >= 0.0)) throw ConfigError("train.learning_rate: must be >= 0");
    if (optimizer != "adam" && optimizer != "sgd") {
      throw ConfigError("train.optimizer: expected 'adam' or 'sgd'");
    }
    if (precision != "f64" && precision != "f32") {
      throw ConfigError("train.precision: expected 'f64' or 'f32'");
    }
    if (threads < 1) throw ConfigError("train.threads: must be positive");
    if (truncate < 0) throw ConfigError("train.truncate: must be >= 0");
    for (int hdim : hidden) {
      if (hdim < 1) throw ConfigError("train.hidden: dims must be positive");
    }
  }
};

template <typename S>
class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg)
      : adam_(cfg.optimizer == "adam"),
        lr_(static_cast<S>(cfg.learning_rate)),
        beta1_(static_cast<S>(cfg.adam_beta1)),
        beta2_(static_cast<S>(cfg.adam_beta2)),
        eps_(static_cast<S>(cfg.adam_eps)) {}

  void step(std::span<const NamedParam<S>> params) {
    if (adam_ && m_.empty()) {
      for (const auto& p : params) {
        m_.push_back(ArrayX<S>::Zero(p.tensor.size()));
        v_.push_back(ArrayX<S>::Zero(p.tensor.size()));
      }
    }
    if (adam_) {
      ++t_;
      S bc1 = S(1) - std::pow(beta1_, static_cast<S>(t_));
      S bc2 = S(1) - std::pow(beta2_, static_cast<S>(t_));
      for (size_t i = 0; i < params.size(); ++i) {
        ArrayX<S> g = params[i].tensor.grad();
        m_[i] = beta1_ * m_[i] + (S(1) - beta1_) * g;
        v_[i] = beta2_ * v_[i] + (S(1) - beta2_) * g.square();
        params[i].tensor.values() -= lr_ * (m_[i] / bc1) / ((v_[i] / bc2).sqrt() + eps_);
      }
    } else {
      for (const auto& p : params) p.tensor.values() -= lr_ * p.tensor.grad();
    }
  }

 private:
  bool adam_;
  S lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::vector<ArrayX<S>> m_, v_;
};

// Scores every sample; towers are computed once per distinct (pic, cat)
// pair up front, then samples fan out across `threads`.
template <typename S>
std::vector<double> score_dataset(const HccmModel<S>& model, const Dataset& data,
                                  const FeatureMapSource<S>& maps, int threads = 1) {
  VisualMemo<S> memo;
  if (model.variant() != Variant::Din) {
    for (const auto& s : data) {
      auto warm = [&](uint64_t pic, uint16_t cat) {
        uint64_t key = (pic << 16) | cat;
        if (memo.find(key) == memo.end()) memo.emplace(key, model.visual_vector(pic, cat, maps));
      };
      warm(s.cand_pic, s.cand_cat);
      for (const auto& b : s.behaviors) warm(b.pic, b.cat);
    }
  }
  std::vector<double> scores(data.size());
  auto run = [&](size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i) {
      scores[i] =
          static_cast<double>(model.forward(data[i], maps, &memo).scalar_value());
    }
  };
  if (threads <= 1 || data.size() < 64) {
    run(0, data.size());
  } else {
    std::vector<std::thread> pool;
    size_t chunk = (data.size() + static_cast<size_t>(threads) - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      size_t begin = chunk * static_cast<size_t>(t);
      size_t end = std::min(begin + chunk, data.size());
      if (begin >= end) break;
      pool.emplace_back(run, begin, end);
    }
    for (auto& th : pool) th.join();
  }
  return scores;
}

template <typename S>
double evaluate_auc(const HccmModel<S>& model, const Dataset& data,
                    const FeatureMapSource<S>& maps, int threads = 1) {
  std::vector<double> scores = score_dataset(model, data, maps, threads);
  std::vector<int> labels;
  labels.reserve(data.size());
  for (const auto& s : data) labels.push_back(s.label);
  return auc(scores, labels);
}

template <typename S>
class Trainer {
 public:
  Trainer(HccmModel<S>& model, TrainConfig cfg) : model_(model), cfg_(std::move(cfg)) {
    cfg_.validate();
    if (model_.variant() != cfg_.variant) {
      throw ConfigError("train.variant does not match the model variant");
    }
  }

  MetricsReport fit(const Dataset& train, const Dataset& test, const FeatureMapSource<S>& maps) {
    auto t0 = std::chrono::steady_clock::now();
    for (const auto& s : train) {
      if (s.label != 0 && s.label != 1) {
        throw ConfigError("train: dataset contains unlabeled samples");
      }
    }
    MetricsReport report;
    report.variant = variant_name(cfg_.variant);
    report.seed = cfg_.seed;

    auto params = model_.trainable_params();
    Optimizer<S> opt(cfg_);
    const size_t n = train.size();

    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
      std::vector<size_t> order = shuffled_order(n, epoch);
      double epoch_loss_weighted = 0.0;
      for (size_t start = 0; start < n; start += static_cast<size_t>(cfg_.batch_size)) {
        size_t end = std::min(n, start + static_cast<size_t>(cfg_.batch_size));
        double batch_loss =
            train_batch(train, order, start, end, maps, params, opt, epoch);
        report.batch_logloss.push_back(batch_loss);
        epoch_loss_weighted += batch_loss * static_cast<double>(end - start);
      }
      report.epoch_logloss.push_back(epoch_loss_weighted / static_cast<double>(n));
      if (!test.empty()) {
        report.epoch_auc.push_back(evaluate_auc(model_, test, maps, cfg_.threads));
      }
    }

    // Held-out AUC is reported at its best epoch, the usual early-stopping
    // reading of a validation metric.
    if (!report.epoch_auc.empty()) {
      report.test_auc = *std::max_element(report.epoch_auc.begin(), report.epoch_auc.end());
    }
    report.param_checksum = model_checksum(model_);
    report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
  }

 private:
  std::vector<size_t> shuffled_order(size_t n, int epoch) const {
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(cfg_.seed, 0x5affe1ULL ^ static_cast<uint64_t>(epoch));
    for (size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.next_below(i)]);
    return order;
  }

  double train_batch(const Dataset& train, const std::vector<size_t>& order, size_t start,
                     size_t end, const FeatureMapSource<S>& maps,
                     std::span<const NamedParam<S>> params, Optimizer<S>& opt, int epoch) {
    Tape<S> tape;
    typename Tape<S>::Scope scope(tape);
    VisualMemo<S> memo;
    std::vector<Tensor<S>> yhats;
    std::vector<int> labels;
    yhats.reserve(end - start);
    labels.reserve(end - start);
    for (size_t i = start; i < end; ++i) {
      const Sample& s = train[order[i]];
      yhats.push_back(model_.forward(s, maps, &memo));
      labels.push_back(s.label);
    }
    Tensor<S> scores = concat(std::span<const Tensor<S>>(yhats), 0);
    Tensor<S> loss = logloss_mean(scores, labels);
    double loss_value = static_cast<double>(loss.scalar_value());
    if (!std::isfinite(loss_value)) {
      double norm = 0.0;
      for (const auto& p : params) {
        norm += static_cast<double>((p.tensor.values() * p.tensor.values()).sum());
      }
      throw NumericError("training aborted: non-finite loss at epoch " + std::to_string(epoch) +
                         ", batch starting at sample " + std::to_string(start) +
                         ", parameter L2^2 = " + std::to_string(norm));
    }
    tape.backward(loss);
    opt.step(params);
    for (const auto& p : params) p.tensor.zero_grad();
    return loss_value;
  }

  HccmModel<S>& model_;
  TrainConfig cfg_;
};

}  // namespace hccm

#endif  // HCCM_TRAIN_HPP_
