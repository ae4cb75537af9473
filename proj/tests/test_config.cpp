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

#include <string>

#include "hccm/run_config.hpp"

using namespace hccm;

TEST_CASE("defaults finalize cleanly and round trip through json") {
  RunConfig cfg;
  cfg.finalize();
  RunConfig back = RunConfig::from_json_text(cfg.to_json_text());
  back.finalize();
  CHECK(back.seed == cfg.seed);
  CHECK(back.data.users == cfg.data.users);
  CHECK(back.data.alpha == cfg.data.alpha);
  CHECK(back.model.embed_dim == cfg.model.embed_dim);
  CHECK(back.model.hidden == cfg.model.hidden);
  CHECK(back.train.batch_size == cfg.train.batch_size);
  CHECK(back.train.variant == cfg.train.variant);
  CHECK(back.negative_sample_rate == cfg.negative_sample_rate);
}

TEST_CASE("unknown keys are rejected with their json path") {
  try {
    RunConfig::from_json_text(R"({"data": {"alpha_x": 1.0}})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("data.alpha_x") != std::string::npos);
  }
  try {
    RunConfig::from_json_text(R"({"nonsense": {}})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("nonsense") != std::string::npos);
  }
}

TEST_CASE("wrong value types are rejected with their json path") {
  try {
    RunConfig::from_json_text(R"({"train": {"batch_size": "large"}})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("train.batch_size") != std::string::npos);
  }
  CHECK_THROWS_AS(RunConfig::from_json_text("not json"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json_text(R"({"train": {"variant": "DCN"}})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json_file("/nonexistent/cfg.json"), ConfigError);
}

TEST_CASE("the master seed flows into sections unless pinned") {
  RunConfig cfg = RunConfig::from_json_text(R"({"seed": 99})");
  CHECK(cfg.data.seed == 99);
  CHECK(cfg.train.seed == 99);

  RunConfig pinned = RunConfig::from_json_text(R"({"seed": 99, "data": {"seed": 7}})");
  CHECK(pinned.data.seed == 7);
  CHECK(pinned.train.seed == 99);

  pinned.apply_seed(123);  // the --seed flag wins everywhere
  CHECK(pinned.seed == 123);
  CHECK(pinned.data.seed == 123);
  CHECK(pinned.train.seed == 123);
}

TEST_CASE("finalize copies cross-section fields into the model config") {
  RunConfig cfg = RunConfig::from_json_text(R"({
    "data": {"image_w": 16, "image_h": 16, "categories": 4, "behavior_max": 8},
    "train": {"variant": "HCM", "hidden": [32, 16], "truncate": 8}
  })");
  cfg.finalize();
  CHECK(cfg.model.variant == Variant::Hcm);
  CHECK(cfg.model.hidden == std::vector<int>{32, 16});
  CHECK(cfg.model.truncate == 8);
  CHECK(cfg.model.image_w == 16);
  CHECK(cfg.model.categories == 4);
}

TEST_CASE("cross-section contradictions are caught") {
  RunConfig cfg = RunConfig::from_json_text(R"({
    "data": {"behavior_max": 20},
    "train": {"truncate": 10}
  })");
  CHECK_THROWS_AS(cfg.finalize(), ConfigError);

  RunConfig rate = RunConfig::from_json_text(R"({"data": {"negative_sample_rate": 0.0}})");
  CHECK_THROWS_AS(rate.finalize(), ConfigError);

  RunConfig bad_precision = RunConfig::from_json_text(R"({"train": {"precision": "f16"}})");
  CHECK_THROWS_AS(bad_precision.finalize(), ConfigError);
}
