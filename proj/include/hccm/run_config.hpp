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
// One JSON config document with {data, model, train, cache, serve}
// sections. Unknown keys are rejected with their JSON path; the top-level
// seed flows into every section unless a section pins its own.

#ifndef HCCM_RUN_CONFIG_HPP_
#define HCCM_RUN_CONFIG_HPP_

#include <string>

#include "hccm/model.hpp"
#include "hccm/synth.hpp"
#include "hccm/train.hpp"

namespace hccm {

struct RunConfig {
  uint64_t seed = 42;
  SyntheticConfig data;
  // Fraction of train-split negatives kept by gen-data; 1.0 disables
  // downsampling. Positives are always kept.
  double negative_sample_rate = 1.0;
  ModelConfig model;
  TrainConfig train;
  std::string cache_path;
  int serve_port = 8080;

  static RunConfig from_json_text(const std::string& text);
  static RunConfig from_json_file(const std::string& path);

  // Forces one master seed everywhere (the --seed flag).
  void apply_seed(uint64_t s);

  // Copies the cross-section fields (variant, hidden, image extents,
  // categories, ...) into the model config and validates everything.
  void finalize();

  std::string to_json_text() const;
};

}  // namespace hccm

#endif  // HCCM_RUN_CONFIG_HPP_
