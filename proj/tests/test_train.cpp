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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "fixtures.hpp"
#include "hccm/train.hpp"

using namespace hccm;
using hccm::testing::toy_model_config;
using hccm::testing::toy_synth_config;

namespace {

TrainConfig toy_train_config(Variant v) {
  TrainConfig cfg;
  cfg.variant = v;
  cfg.batch_size = 32;
  cfg.epochs = 1;
  cfg.learning_rate = 3e-3;
  cfg.seed = 77;
  cfg.hidden = {16, 8};
  cfg.truncate = 5;
  return cfg;
}

double mean_logloss(const HccmModel<double>& model, const Dataset& data,
                    const FeatureMapSource<double>& maps) {
  std::vector<double> scores = score_dataset(model, data, maps);
  double total = 0;
  for (size_t i = 0; i < data.size(); ++i) total += logloss(scores[i], data[i].label);
  return total / static_cast<double>(data.size());
}

}  // namespace

TEST_CASE("zero learning rate leaves parameters and losses untouched") {
  SyntheticData data = gen_dataset(toy_synth_config());
  HccmModel<double> model(toy_model_config(Variant::Hccm), 5);
  FeatureMapSource<double> maps(&data.catalog, &model.fixed());

  uint64_t before = model_checksum(model);
  TrainConfig cfg = toy_train_config(Variant::Hccm);
  cfg.learning_rate = 0.0;
  cfg.epochs = 3;
  Trainer<double> trainer(model, cfg);
  MetricsReport report = trainer.fit(data.train, data.test, maps);
  CHECK(model_checksum(model) == before);
  REQUIRE(report.epoch_logloss.size() == 3);
  CHECK(std::abs(report.epoch_logloss[0] - report.epoch_logloss[1]) <= 1e-12);
  CHECK(std::abs(report.epoch_logloss[0] - report.epoch_logloss[2]) <= 1e-12);
}

TEST_CASE("one epoch of training lowers the train logloss for every variant") {
  SyntheticData data = gen_dataset(toy_synth_config());
  for (Variant v : {Variant::Din, Variant::DinFixedCnn, Variant::Hcm, Variant::Hccm}) {
    CAPTURE(variant_name(v));
    HccmModel<double> model(toy_model_config(v), 9);
    FeatureMapSource<double> maps(&data.catalog, &model.fixed());
    double before = mean_logloss(model, data.train, maps);
    Trainer<double> trainer(model, toy_train_config(v));
    trainer.fit(data.train, {}, maps);
    double after = mean_logloss(model, data.train, maps);
    CHECK(after < before);
  }
}

TEST_CASE("same seed reproduces the final checksum bit for bit") {
  SyntheticData data = gen_dataset(toy_synth_config());
  auto run = [&](uint64_t seed) {
    HccmModel<double> model(toy_model_config(Variant::Hccm), seed);
    FeatureMapSource<double> maps(&data.catalog, &model.fixed());
    TrainConfig cfg = toy_train_config(Variant::Hccm);
    cfg.seed = seed;
    cfg.epochs = 2;
    Trainer<double> trainer(model, cfg);
    return trainer.fit(data.train, data.test, maps);
  };
  MetricsReport a = run(123);
  MetricsReport b = run(123);
  CHECK(a.param_checksum == b.param_checksum);
  CHECK(a.test_auc == b.test_auc);
  REQUIRE(a.batch_logloss.size() == b.batch_logloss.size());
  for (size_t i = 0; i < a.batch_logloss.size(); ++i) {
    CHECK(std::memcmp(&a.batch_logloss[i], &b.batch_logloss[i], sizeof(double)) == 0);
  }
  MetricsReport c = run(124);
  CHECK(c.param_checksum != a.param_checksum);
}

TEST_CASE("loss trajectories with and without the cache agree bitwise") {
  SyntheticData data = gen_dataset(toy_synth_config());
  auto run = [&](bool use_cache) {
    HccmModel<double> model(toy_model_config(Variant::Hccm), 31);
    FeatureMapCache cache = FeatureMapCache::build(data.catalog, model.fixed());
    FeatureMapSource<double> maps =
        use_cache ? FeatureMapSource<double>(&cache)
                  : FeatureMapSource<double>(&data.catalog, &model.fixed());
    TrainConfig cfg = toy_train_config(Variant::Hccm);
    cfg.epochs = 3;
    Trainer<double> trainer(model, cfg);
    return trainer.fit(data.train, data.test, maps);
  };
  MetricsReport with_cache = run(true);
  MetricsReport without = run(false);
  REQUIRE(with_cache.batch_logloss.size() == without.batch_logloss.size());
  for (size_t i = 0; i < with_cache.batch_logloss.size(); ++i) {
    CHECK(std::memcmp(&with_cache.batch_logloss[i], &without.batch_logloss[i],
                      sizeof(double)) == 0);
  }
  CHECK(with_cache.param_checksum == without.param_checksum);
  CHECK(with_cache.test_auc == without.test_auc);
}

TEST_CASE("training aborts with diagnostics when the loss turns non-finite") {
  SyntheticData data = gen_dataset(toy_synth_config());
  HccmModel<double> model(toy_model_config(Variant::Din), 3);
  FeatureMapSource<double> maps(&data.catalog, &model.fixed());
  // Poison one head weight; the first forward pass must trip the guard.
  model.head().layers[0].weight.values()[0] = std::numeric_limits<double>::infinity();
  Trainer<double> trainer(model, toy_train_config(Variant::Din));
  CHECK_THROWS_AS(trainer.fit(data.train, {}, maps), NumericError);
}

TEST_CASE("sgd optimizer trains too") {
  SyntheticData data = gen_dataset(toy_synth_config());
  HccmModel<double> model(toy_model_config(Variant::Din), 15);
  FeatureMapSource<double> maps(&data.catalog, &model.fixed());
  double before = mean_logloss(model, data.train, maps);
  TrainConfig cfg = toy_train_config(Variant::Din);
  cfg.optimizer = "sgd";
  cfg.learning_rate = 0.05;
  cfg.epochs = 2;
  Trainer<double> trainer(model, cfg);
  trainer.fit(data.train, {}, maps);
  CHECK(mean_logloss(model, data.train, maps) < before);
}

TEST_CASE("trainer rejects unlabeled samples and mismatched variants") {
  SyntheticData data = gen_dataset(toy_synth_config());
  HccmModel<double> model(toy_model_config(Variant::Din), 3);
  FeatureMapSource<double> maps(&data.catalog, &model.fixed());
  Dataset bad = data.train;
  bad[0].label = -1;
  Trainer<double> trainer(model, toy_train_config(Variant::Din));
  CHECK_THROWS_AS(trainer.fit(bad, {}, maps), ConfigError);
  CHECK_THROWS_AS(Trainer<double>(model, toy_train_config(Variant::Hccm)), ConfigError);
}

TEST_CASE("multi-threaded evaluation matches single-threaded scores") {
  SyntheticData data = gen_dataset(toy_synth_config());
  HccmModel<double> model(toy_model_config(Variant::Hccm), 8);
  FeatureMapSource<double> maps(&data.catalog, &model.fixed());
  std::vector<double> one = score_dataset(model, data.test, maps, 1);
  std::vector<double> four = score_dataset(model, data.test, maps, 4);
  REQUIRE(one.size() == four.size());
  for (size_t i = 0; i < one.size(); ++i) CHECK(one[i] == four[i]);
}

TEST_CASE("float32 training mode runs and reproduces itself") {
  SyntheticData data = gen_dataset(toy_synth_config());
  auto run = [&] {
    HccmModel<float> model(toy_model_config(Variant::Hccm), 11);
    FeatureMapSource<float> maps(&data.catalog, &model.fixed());
    TrainConfig cfg = toy_train_config(Variant::Hccm);
    cfg.precision = "f32";
    Trainer<float> trainer(model, cfg);
    return trainer.fit(data.train, data.test, maps);
  };
  MetricsReport a = run();
  MetricsReport b = run();
  CHECK(a.param_checksum == b.param_checksum);
  CHECK(std::isfinite(a.epoch_logloss.at(0)));
  CHECK(a.test_auc == b.test_auc);
}
