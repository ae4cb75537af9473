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

#include <CLI11.hpp>
#include <iostream>
#include <optional>

#include "hccm/commands.hpp"
#include "hccm/errors.hpp"

namespace {

struct GlobalFlags {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<std::string> variant;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<double> learning_rate;
  std::optional<std::string> precision;
  std::optional<int> threads;
};

// File values load first; explicit flags win over them.
hccm::RunConfig resolve_config(const GlobalFlags& flags) {
  hccm::RunConfig cfg;
  if (!flags.config_path.empty()) cfg = hccm::RunConfig::from_json_file(flags.config_path);
  if (flags.seed) cfg.apply_seed(*flags.seed);
  if (flags.variant) cfg.train.variant = hccm::parse_variant(*flags.variant);
  if (flags.epochs) cfg.train.epochs = *flags.epochs;
  if (flags.batch_size) cfg.train.batch_size = *flags.batch_size;
  if (flags.learning_rate) cfg.train.learning_rate = *flags.learning_rate;
  if (flags.precision) cfg.train.precision = *flags.precision;
  if (flags.threads) cfg.train.threads = *flags.threads;
  return cfg;
}

void add_common_flags(CLI::App* cmd, GlobalFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON config file");
  cmd->add_option("--seed", flags.seed, "master seed; overrides every section seed");
}

void add_train_flags(CLI::App* cmd, GlobalFlags& flags) {
  cmd->add_option("--variant", flags.variant, "DIN, DIN+FixedCNN, HCM, or HCCM");
  cmd->add_option("--epochs", flags.epochs, "training epochs");
  cmd->add_option("--batch-size", flags.batch_size, "mini-batch size");
  cmd->add_option("--lr", flags.learning_rate, "learning rate");
  cmd->add_option("--precision", flags.precision, "f64 or f32");
  cmd->add_option("--threads", flags.threads, "evaluation threads");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybrid-CNN CTR model toolkit"};
  app.require_subcommand(1);
  GlobalFlags flags;

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic impression log");
  std::string out_dir;
  add_common_flags(gen, flags);
  gen->add_option("--out", out_dir, "output directory")->required();

  auto* pre = app.add_subcommand("precompute", "store fixed-CNN feature maps per pic id");
  std::string catalog_path, model_path, out_path;
  add_common_flags(pre, flags);
  pre->add_option("--catalog", catalog_path, "catalog file")->required();
  pre->add_option("--model", model_path, "checkpoint supplying the frozen stack (optional)");
  pre->add_option("--out", out_path, "cache file to write")->required();

  auto* train = app.add_subcommand("train", "train one variant");
  std::string data_dir, cache_path, train_model_out, report_out;
  add_common_flags(train, flags);
  add_train_flags(train, flags);
  train->add_option("--data", data_dir, "directory from gen-data")->required();
  train->add_option("--cache", cache_path, "feature-map cache file");
  train->add_option("--out", train_model_out, "checkpoint to write");
  train->add_option("--report", report_out, "metrics report JSON to write");

  auto* eval = app.add_subcommand("eval", "score a dataset with a checkpoint");
  std::string eval_model, eval_data, eval_catalog, eval_cache, eval_report;
  add_common_flags(eval, flags);
  eval->add_option("--model", eval_model, "checkpoint")->required();
  eval->add_option("--data", eval_data, "JSONL dataset")->required();
  eval->add_option("--catalog", eval_catalog, "catalog file")->required();
  eval->add_option("--cache", eval_cache, "feature-map cache file");
  eval->add_option("--report", eval_report, "report JSON to write");

  auto* exll = app.add_subcommand("export-table", "export per-image representations");
  std::string ex_model, ex_catalog, ex_out;
  add_common_flags(exll, flags);
  exll->add_option("--model", ex_model, "checkpoint")->required();
  exll->add_option("--catalog", ex_catalog, "catalog file")->required();
  exll->add_option("--out", ex_out, "table file to write")->required();

  auto* serve = app.add_subcommand("serve", "answer predict requests from a table");
  std::string sv_model, sv_table, sv_replay;
  int sv_port = 0;
  add_common_flags(serve, flags);
  serve->add_option("--model", sv_model, "checkpoint")->required();
  serve->add_option("--table", sv_table, "representation table")->required();
  serve->add_option("--http", sv_port, "HTTP port for POST /predict");
  serve->add_option("--replay", sv_replay, "JSONL request file, or - for stdin");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  std::string gc_variant = "HCCM";
  add_common_flags(gradcheck, flags);
  gradcheck->add_option("--variant", gc_variant, "DIN, DIN+FixedCNN, HCM, or HCCM");

  auto* ablation = app.add_subcommand("ablation", "train and compare all four variants");
  std::string ab_report;
  add_common_flags(ablation, flags);
  add_train_flags(ablation, flags);
  ablation->add_option("--report", ab_report, "report JSON to write");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    hccm::RunConfig cfg = resolve_config(flags);
    if (gen->parsed()) return hccm::cmd_gen_data(cfg, out_dir);
    if (pre->parsed()) return hccm::cmd_precompute(cfg, catalog_path, model_path, out_path);
    if (train->parsed()) {
      return hccm::cmd_train(cfg, data_dir, cache_path, train_model_out, report_out);
    }
    if (eval->parsed()) {
      return hccm::cmd_eval(cfg, eval_model, eval_data, eval_catalog, eval_cache, eval_report);
    }
    if (exll->parsed()) return hccm::cmd_export_table(cfg, ex_model, ex_catalog, ex_out);
    if (serve->parsed()) return hccm::cmd_serve(cfg, sv_model, sv_table, sv_port, sv_replay);
    if (gradcheck->parsed()) return hccm::cmd_gradcheck(cfg, gc_variant);
    if (ablation->parsed()) return hccm::cmd_ablation(cfg, ab_report);
    std::cerr << "no subcommand\n";
    return 2;
  } catch (const hccm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
