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

#include "hccm/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hccm/errors.hpp"

namespace hccm {

using nlohmann::json;

namespace {

void ensure_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(path + ": expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (allowed.find(it.key()) == allowed.end()) {
      throw ConfigError("unknown config key: " + path + it.key());
    }
  }
}

template <typename T>
void read_field(const json& j, const std::string& path, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config field " + path + key + " has the wrong type");
  }
}

void read_variant(const json& j, const std::string& path, const char* key, Variant& out) {
  if (!j.contains(key)) return;
  std::string name;
  read_field(j, path, key, name);
  out = parse_variant(name);
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ensure_keys(j, "", {"seed", "data", "model", "train", "cache", "serve"});

  RunConfig cfg;
  read_field(j, "", "seed", cfg.seed);
  cfg.data.seed = cfg.seed;
  cfg.train.seed = cfg.seed;

  if (j.contains("data")) {
    const json& d = j.at("data");
    const std::string p = "data.";
    ensure_keys(d, p,
                {"users", "test_users", "impressions_per_user", "categories",
                 "images_per_category", "image_w", "image_h", "behavior_min", "behavior_max",
                 "noise", "alpha", "beta", "bias", "negative_sample_rate", "seed"});
    read_field(d, p, "users", cfg.data.users);
    read_field(d, p, "test_users", cfg.data.test_users);
    read_field(d, p, "impressions_per_user", cfg.data.impressions_per_user);
    read_field(d, p, "categories", cfg.data.categories);
    read_field(d, p, "images_per_category", cfg.data.images_per_category);
    read_field(d, p, "image_w", cfg.data.image_w);
    read_field(d, p, "image_h", cfg.data.image_h);
    read_field(d, p, "behavior_min", cfg.data.behavior_min);
    read_field(d, p, "behavior_max", cfg.data.behavior_max);
    read_field(d, p, "noise", cfg.data.noise);
    read_field(d, p, "alpha", cfg.data.alpha);
    read_field(d, p, "beta", cfg.data.beta);
    read_field(d, p, "bias", cfg.data.bias);
    read_field(d, p, "negative_sample_rate", cfg.negative_sample_rate);
    read_field(d, p, "seed", cfg.data.seed);
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    const std::string p = "model.";
    ensure_keys(m, p,
                {"embed_dim", "fixed_channels", "fixed_kernel", "trainable_channels",
                 "trainable_kernel", "user_table", "item_table", "pic_table", "category_table",
                 "context_table", "num_context", "attn_reduction"});
    read_field(m, p, "embed_dim", cfg.model.embed_dim);
    read_field(m, p, "fixed_channels", cfg.model.fixed_channels);
    read_field(m, p, "fixed_kernel", cfg.model.fixed_kernel);
    read_field(m, p, "trainable_channels", cfg.model.trainable_channels);
    read_field(m, p, "trainable_kernel", cfg.model.trainable_kernel);
    read_field(m, p, "user_table", cfg.model.user_table);
    read_field(m, p, "item_table", cfg.model.item_table);
    read_field(m, p, "pic_table", cfg.model.pic_table);
    read_field(m, p, "category_table", cfg.model.category_table);
    read_field(m, p, "context_table", cfg.model.context_table);
    read_field(m, p, "num_context", cfg.model.num_context);
    read_field(m, p, "attn_reduction", cfg.model.attn_reduction);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    const std::string p = "train.";
    ensure_keys(t, p,
                {"variant", "batch_size", "epochs", "learning_rate", "optimizer", "adam_beta1",
                 "adam_beta2", "adam_eps", "precision", "deterministic", "hidden", "truncate",
                 "threads", "seed"});
    read_variant(t, p, "variant", cfg.train.variant);
    read_field(t, p, "batch_size", cfg.train.batch_size);
    read_field(t, p, "epochs", cfg.train.epochs);
    read_field(t, p, "learning_rate", cfg.train.learning_rate);
    read_field(t, p, "optimizer", cfg.train.optimizer);
    read_field(t, p, "adam_beta1", cfg.train.adam_beta1);
    read_field(t, p, "adam_beta2", cfg.train.adam_beta2);
    read_field(t, p, "adam_eps", cfg.train.adam_eps);
    read_field(t, p, "precision", cfg.train.precision);
    read_field(t, p, "deterministic", cfg.train.deterministic);
    read_field(t, p, "hidden", cfg.train.hidden);
    read_field(t, p, "truncate", cfg.train.truncate);
    read_field(t, p, "threads", cfg.train.threads);
    read_field(t, p, "seed", cfg.train.seed);
  }
  if (j.contains("cache")) {
    ensure_keys(j.at("cache"), "cache.", {"path"});
    read_field(j.at("cache"), "cache.", "path", cfg.cache_path);
  }
  if (j.contains("serve")) {
    ensure_keys(j.at("serve"), "serve.", {"port"});
    read_field(j.at("serve"), "serve.", "port", cfg.serve_port);
  }
  return cfg;
}

RunConfig RunConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

void RunConfig::apply_seed(uint64_t s) {
  seed = s;
  data.seed = s;
  train.seed = s;
}

void RunConfig::finalize() {
  model.variant = train.variant;
  model.hidden = train.hidden;
  model.truncate = train.truncate;
  model.image_w = data.image_w;
  model.image_h = data.image_h;
  model.image_c = 3;
  model.categories = data.categories;

  if (!(negative_sample_rate > 0.0) || negative_sample_rate > 1.0) {
    throw ConfigError("data.negative_sample_rate: must be in (0, 1]");
  }
  if (data.behavior_max > train.truncate) {
    throw ConfigError("data.behavior_max exceeds train.truncate");
  }
  data.validate();
  train.validate();
  model.validate();
}

std::string RunConfig::to_json_text() const {
  json j;
  j["seed"] = seed;
  j["data"] = {{"users", data.users},
               {"test_users", data.test_users},
               {"impressions_per_user", data.impressions_per_user},
               {"categories", data.categories},
               {"images_per_category", data.images_per_category},
               {"image_w", data.image_w},
               {"image_h", data.image_h},
               {"behavior_min", data.behavior_min},
               {"behavior_max", data.behavior_max},
               {"noise", data.noise},
               {"alpha", data.alpha},
               {"beta", data.beta},
               {"bias", data.bias},
               {"negative_sample_rate", negative_sample_rate},
               {"seed", data.seed}};
  j["model"] = {{"embed_dim", model.embed_dim},
                {"fixed_channels", model.fixed_channels},
                {"fixed_kernel", model.fixed_kernel},
                {"trainable_channels", model.trainable_channels},
                {"trainable_kernel", model.trainable_kernel},
                {"user_table", model.user_table},
                {"item_table", model.item_table},
                {"pic_table", model.pic_table},
                {"category_table", model.category_table},
                {"context_table", model.context_table},
                {"num_context", model.num_context},
                {"attn_reduction", model.attn_reduction}};
  j["train"] = {{"variant", variant_name(train.variant)},
                {"batch_size", train.batch_size},
                {"epochs", train.epochs},
                {"learning_rate", train.learning_rate},
                {"optimizer", train.optimizer},
                {"adam_beta1", train.adam_beta1},
                {"adam_beta2", train.adam_beta2},
                {"adam_eps", train.adam_eps},
                {"precision", train.precision},
                {"deterministic", train.deterministic},
                {"hidden", train.hidden},
                {"truncate", train.truncate},
                {"threads", train.threads},
                {"seed", train.seed}};
  j["cache"] = {{"path", cache_path}};
  j["serve"] = {{"port", serve_port}};
  return j.dump(2);
}

}  // namespace hccm
