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
// Desk-toy fixtures shared across test binaries: 8x8x3 images reduced by a
// two-stage fixed stack to 2x2x8 maps, four categories, tiny tables.

#ifndef HCCM_TESTS_FIXTURES_HPP_
#define HCCM_TESTS_FIXTURES_HPP_

#include "hccm/model.hpp"
#include "hccm/synth.hpp"

namespace hccm::testing {

inline ModelConfig toy_model_config(Variant v) {
  ModelConfig cfg;
  cfg.variant = v;
  cfg.image_w = 8;
  cfg.image_h = 8;
  cfg.image_c = 3;
  cfg.fixed_channels = {6, 8};     // 8x8 -> 4x4 -> 2x2, c = 8
  cfg.trainable_channels = {8, 16};
  cfg.embed_dim = 8;
  cfg.categories = 4;
  cfg.user_table = 32;
  cfg.item_table = 64;
  cfg.pic_table = 64;
  cfg.category_table = 16;
  cfg.context_table = 16;
  cfg.num_context = 2;
  cfg.attn_reduction = 4;
  cfg.hidden = {16, 8};
  cfg.truncate = 5;
  return cfg;
}

inline SyntheticConfig toy_synth_config() {
  SyntheticConfig cfg;
  cfg.users = 40;
  cfg.test_users = 10;
  cfg.impressions_per_user = 6;
  cfg.categories = 4;
  cfg.images_per_category = 6;
  cfg.image_w = 8;
  cfg.image_h = 8;
  cfg.behavior_min = 2;
  cfg.behavior_max = 4;
  cfg.seed = 1234;
  return cfg;
}

// One well-formed 3-behavior sample over the toy catalog.
inline Sample toy_sample() {
  Sample s;
  s.user_id = 3;
  s.context_ids = {5, 2};
  s.item_id = 7;
  s.cand_pic = 7;
  s.cand_cat = 1;  // pic 7 belongs to category 1 (6 images per category)
  s.behaviors = {{0, 0}, {13, 2}, {8, 1}};
  s.label = 1;
  return s;
}

}  // namespace hccm::testing

#endif  // HCCM_TESTS_FIXTURES_HPP_
