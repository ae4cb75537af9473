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
// Subcommand implementations behind the CLI. Every command is a pure
// function of (config, seed, input files) in deterministic mode: stdout
// and written artifacts are byte-stable across reruns; timings go to
// stderr only.

#ifndef HCCM_COMMANDS_HPP_
#define HCCM_COMMANDS_HPP_

#include <string>

#include "hccm/run_config.hpp"

namespace hccm {

int cmd_gen_data(RunConfig cfg, const std::string& out_dir);

int cmd_precompute(RunConfig cfg, const std::string& catalog_path,
                   const std::string& model_ckpt, const std::string& out_path);

int cmd_train(RunConfig cfg, const std::string& data_dir, const std::string& cache_path,
              const std::string& model_out, const std::string& report_out);

int cmd_eval(RunConfig cfg, const std::string& model_path, const std::string& data_path,
             const std::string& catalog_path, const std::string& cache_path,
             const std::string& report_out);

int cmd_export_table(RunConfig cfg, const std::string& model_path,
                     const std::string& catalog_path, const std::string& out_path);

// Exactly one of http_port > 0 or a replay path ("-" = stdin).
int cmd_serve(RunConfig cfg, const std::string& model_path, const std::string& table_path,
              int http_port, const std::string& replay_path);

// Full-model finite-difference verification on the toy geometry;
// exit 0 iff the max relative error is within tolerance.
int cmd_gradcheck(RunConfig cfg, const std::string& variant);

// Trains and evaluates all four variants on one generated dataset and
// prints the ladder report.
int cmd_ablation(RunConfig cfg, const std::string& report_out);

}  // namespace hccm

#endif  // HCCM_COMMANDS_HPP_
