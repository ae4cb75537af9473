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

#include <chrono>
#include <filesystem>

#include "fixtures.hpp"
#include "hccm/counters.hpp"
#include "hccm/train.hpp"

using namespace hccm;
using hccm::testing::toy_model_config;
using hccm::testing::toy_synth_config;

TEST_CASE("cache entries equal the frozen stack output bitwise") {
  SyntheticData data = gen_dataset(toy_synth_config());
  FixedCnn cnn = FixedCnn::init(3, std::vector<int>{6, 8}, 3, 99);
  FeatureMapCache cache = FeatureMapCache::build(data.catalog, cnn);
  CHECK(cache.size() == data.catalog.size());
  for (size_t i = 0; i < data.catalog.size(); ++i) {
    const CatalogEntry& e = data.catalog.at(i);
    FeatureMapF direct = cnn.forward(e.image);
    const FeatureMapF& stored = cache.lookup(e.id);
    CHECK(stored.v == direct.v);
  }
  CHECK_THROWS_AS(cache.lookup(424242), CacheMissError);
}

TEST_CASE("cache files are byte-identical across rebuilds and round trip") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "hccm_cache_test";
  fs::create_directories(dir);
  SyntheticData data = gen_dataset(toy_synth_config());
  FixedCnn cnn = FixedCnn::init(3, std::vector<int>{6, 8}, 3, 99);

  FeatureMapCache a = FeatureMapCache::build(data.catalog, cnn);
  FeatureMapCache b = FeatureMapCache::build(data.catalog, cnn);
  a.save((dir / "a.fmc").string());
  b.save((dir / "b.fmc").string());
  CHECK(read_file_bytes((dir / "a.fmc").string()) == read_file_bytes((dir / "b.fmc").string()));

  FeatureMapCache loaded = FeatureMapCache::load((dir / "a.fmc").string());
  loaded.verify(cnn);
  CHECK(loaded.size() == a.size());
  CHECK(loaded.map_w() == a.map_w());
  for (size_t i = 0; i < data.catalog.size(); ++i) {
    uint64_t id = data.catalog.at(i).id;
    CHECK(loaded.lookup(id).v == a.lookup(id).v);
  }
  fs::remove_all(dir);
}

TEST_CASE("stale caches are rejected at verification") {
  SyntheticData data = gen_dataset(toy_synth_config());
  FixedCnn cnn = FixedCnn::init(3, std::vector<int>{6, 8}, 3, 99);
  FeatureMapCache cache = FeatureMapCache::build(data.catalog, cnn);

  // Same seed, fresh storage: equal until one weight is perturbed.
  FixedCnn other = FixedCnn::init(3, std::vector<int>{6, 8}, 3, 99);
  CHECK(other.checksum() == cnn.checksum());
  other.layers()[0].kernel.values()[0] += 1e-4f;
  CHECK(other.checksum() != cnn.checksum());
  CHECK_THROWS_AS(cache.verify(other), StaleCacheError);
  cache.verify(cnn);  // the producing parameters still pass
}

TEST_CASE("empty catalogs cannot be cached") {
  ImageCatalog empty;
  FixedCnn cnn = FixedCnn::init(3, std::vector<int>{6, 8}, 3, 99);
  CHECK_THROWS_AS(FeatureMapCache::build(empty, cnn), ConfigError);
}

TEST_CASE("the cache removes every fixed-stack convolution from training") {
  // Desk-sized images make the frozen stack the dominant per-step cost.
  SyntheticConfig synth = toy_synth_config();
  synth.image_w = 32;
  synth.image_h = 32;
  synth.users = 60;
  synth.test_users = 10;
  synth.impressions_per_user = 8;
  SyntheticData data = gen_dataset(synth);

  ModelConfig mc = toy_model_config(Variant::Hccm);
  mc.image_w = 32;
  mc.image_h = 32;
  mc.fixed_channels = {8, 12, 16};  // 32 -> 16 -> 8 -> 4
  HccmModel<double> model(mc, 7);
  FeatureMapCache cache = FeatureMapCache::build(data.catalog, model.fixed());

  TrainConfig tc;
  tc.variant = Variant::Hccm;
  tc.batch_size = 4;  // 100 batches over 400 train samples
  tc.epochs = 1;
  tc.hidden = {16, 8};
  tc.truncate = 5;

  auto run = [&](const FeatureMapSource<double>& maps, uint64_t& convs, double& seconds) {
    HccmModel<double> m(mc, 7);
    Trainer<double> trainer(m, tc);
    uint64_t before = OpCounters::conv2d();
    auto t0 = std::chrono::steady_clock::now();
    trainer.fit(data.train, {}, maps);
    seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    convs = OpCounters::conv2d() - before;
  };

  FeatureMapSource<double> cached(&cache);
  FeatureMapSource<double> on_the_fly(&data.catalog, &model.fixed());
  uint64_t convs_cached = 0, convs_fly = 0;
  double time_cached = 0, time_fly = 0;
  run(cached, convs_cached, time_cached);
  run(on_the_fly, convs_fly, time_fly);

  // Counter proof: the fixed stack (3 convs per distinct image per batch)
  // executes only on the uncached path.
  CHECK(convs_fly > convs_cached);
  CHECK((convs_fly - convs_cached) % 3 == 0);
  // And the skipped work is visible on the clock.
  CHECK(time_cached < time_fly);
}
