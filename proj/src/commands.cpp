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

#include "hccm/commands.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "hccm/checkpoint.hpp"
#include "hccm/gradcheck.hpp"
#include "hccm/serving.hpp"
#include "hccm/synth.hpp"
#include "hccm/train.hpp"

// after the Eigen-backed headers: its socket-layer includes leak macros
// that break Eigen's product kernels when seen first
#include <httplib.h>
#include <json.hpp>

namespace hccm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string hex64(uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

void emit_report(const MetricsReport& report, const std::string& report_out) {
  std::cout << metrics_to_text(report);
  if (!report_out.empty()) atomic_write_text(report_out, metrics_to_json(report) + "\n");
  std::cerr << "wall clock: " << report.wall_clock_seconds << " s\n";
}

Dataset load_split(const std::string& path) {
  Dataset d = read_jsonl(path);
  if (d.empty()) throw ConfigError("dataset is empty: " + path);
  return d;
}

template <typename S>
int run_train(const RunConfig& cfg, const std::string& data_dir, const std::string& cache_path,
              const std::string& model_out, const std::string& report_out) {
  Dataset train = load_split(data_dir + "/train.jsonl");
  Dataset test = load_split(data_dir + "/test.jsonl");
  ImageCatalog catalog = ImageCatalog::load(data_dir + "/catalog.bin");

  HccmModel<S> model(cfg.model, cfg.seed);
  std::optional<FeatureMapCache> cache;
  if (!cache_path.empty()) {
    cache = FeatureMapCache::load(cache_path);
    cache->verify(model.fixed());
  }
  FeatureMapSource<S> maps = cache ? FeatureMapSource<S>(&*cache)
                                   : FeatureMapSource<S>(&catalog, &model.fixed());
  Trainer<S> trainer(model, cfg.train);
  MetricsReport report = trainer.fit(train, test, maps);
  if (!model_out.empty()) save_checkpoint(model, model_out);
  emit_report(report, report_out);
  return 0;
}

template <typename S>
int run_eval(const RunConfig& cfg, const std::string& model_path, const std::string& data_path,
             const std::string& catalog_path, const std::string& cache_path,
             const std::string& report_out) {
  HccmModel<S> model = load_checkpoint<S>(model_path);
  Dataset data = load_split(data_path);
  ImageCatalog catalog = ImageCatalog::load(catalog_path);
  std::optional<FeatureMapCache> cache;
  if (!cache_path.empty()) {
    cache = FeatureMapCache::load(cache_path);
    cache->verify(model.fixed());
  }
  FeatureMapSource<S> maps = cache ? FeatureMapSource<S>(&*cache)
                                   : FeatureMapSource<S>(&catalog, &model.fixed());

  std::vector<double> scores = score_dataset(model, data, maps, cfg.train.threads);
  std::vector<int> labels;
  labels.reserve(data.size());
  double loss = 0.0;
  for (size_t i = 0; i < data.size(); ++i) {
    if (data[i].label != 0 && data[i].label != 1) {
      throw ConfigError("eval: dataset contains unlabeled samples");
    }
    labels.push_back(data[i].label);
    loss += logloss(scores[i], data[i].label);
  }
  loss /= static_cast<double>(data.size());
  double metric = auc(scores, labels);

  json j;
  j["variant"] = variant_name(model.variant());
  j["samples"] = data.size();
  j["auc"] = metric;
  j["logloss"] = loss;
  j["model_checksum"] = hex64(model_checksum(model));
  std::cout << "variant " << variant_name(model.variant()) << "  samples " << data.size()
            << "  auc " << metric << "  logloss " << loss << "\n";
  if (!report_out.empty()) atomic_write_text(report_out, j.dump(2) + "\n");
  return 0;
}

json response_to_json(const PredictResponse& r) {
  json j;
  j["yhat"] = r.yhat;
  j["model_checksum"] = hex64(r.model_checksum);
  j["table_checksum"] = hex64(r.table_checksum);
  return j;
}

int serve_replay(const ServePredictor<double>& predictor, const std::string& replay_path) {
  std::ifstream file;
  std::istream* in = nullptr;
  if (replay_path == "-") {
    in = &std::cin;
  } else {
    file.open(replay_path);
    if (!file) throw IoError("cannot open replay file: " + replay_path);
    in = &file;
  }
  std::string line;
  while (std::getline(*in, line)) {
    if (line.empty()) continue;
    json out;
    try {
      Sample req = sample_from_json_line(line);
      out = response_to_json(predictor.predict(req));
    } catch (const TableMissError& e) {
      out = {{"error", "table_miss"}, {"detail", e.what()}};
    } catch (const Error& e) {
      out = {{"error", "bad_request"}, {"detail", e.what()}};
    }
    std::cout << out.dump() << "\n";
  }
  return 0;
}

int serve_http(const ServePredictor<double>& predictor, int port) {
  httplib::Server server;
  server.Post("/predict", [&predictor](const httplib::Request& req, httplib::Response& res) {
    try {
      Sample request = sample_from_json_line(req.body);
      res.set_content(response_to_json(predictor.predict(request)).dump(), "application/json");
    } catch (const TableMissError& e) {
      res.status = 422;
      res.set_content(json{{"error", "table_miss"}, {"detail", e.what()}}.dump(),
                      "application/json");
    } catch (const Error& e) {
      res.status = 400;
      res.set_content(json{{"error", "bad_request"}, {"detail", e.what()}}.dump(),
                      "application/json");
    }
  });
  server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"status\":\"ok\"}", "application/json");
  });
  std::cerr << "serving on port " << port << "\n";
  if (!server.listen("0.0.0.0", port)) {
    throw IoError("cannot listen on port " + std::to_string(port));
  }
  return 0;
}

ModelConfig gradcheck_model_config(Variant v) {
  // The verification geometry: 8x8x3 images through a two-stage fixed
  // stack to 2x2x8 maps, three behaviors, small tables throughout.
  ModelConfig cfg;
  cfg.variant = v;
  cfg.image_w = 8;
  cfg.image_h = 8;
  cfg.fixed_channels = {6, 8};
  cfg.trainable_channels = {8, 16};
  cfg.categories = 4;
  cfg.user_table = 32;
  cfg.item_table = 64;
  cfg.pic_table = 64;
  cfg.category_table = 16;
  cfg.context_table = 16;
  cfg.attn_reduction = 4;
  cfg.hidden = {16, 8};
  cfg.truncate = 5;
  return cfg;
}

SyntheticConfig gradcheck_synth_config(uint64_t seed) {
  SyntheticConfig cfg;
  cfg.users = 4;
  cfg.test_users = 1;
  cfg.impressions_per_user = 2;
  cfg.categories = 4;
  cfg.images_per_category = 6;
  cfg.image_w = 8;
  cfg.image_h = 8;
  cfg.behavior_min = 3;
  cfg.behavior_max = 3;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

int cmd_gen_data(RunConfig cfg, const std::string& out_dir) {
  cfg.finalize();
  SyntheticData data = gen_dataset(cfg.data);
  size_t before = data.train.size();
  if (cfg.negative_sample_rate < 1.0) {
    data.train = downsample_negatives(data.train, cfg.negative_sample_rate, cfg.seed);
  }
  fs::create_directories(out_dir);
  write_jsonl(out_dir + "/train.jsonl", data.train);
  write_jsonl(out_dir + "/test.jsonl", data.test);
  data.catalog.save(out_dir + "/catalog.bin");

  auto positives = [](const Dataset& d) {
    size_t p = 0;
    for (const auto& s : d) p += (s.label == 1) ? 1 : 0;
    return p;
  };
  std::cout << "catalog " << data.catalog.size() << " images\n"
            << "train " << data.train.size() << " samples (" << positives(data.train)
            << " positive, " << before << " before downsampling)\n"
            << "test " << data.test.size() << " samples (" << positives(data.test)
            << " positive)\n";
  return 0;
}

int cmd_precompute(RunConfig cfg, const std::string& catalog_path, const std::string& model_ckpt,
                   const std::string& out_path) {
  cfg.finalize();
  ImageCatalog catalog = ImageCatalog::load(catalog_path);
  FixedCnn fixed;
  if (model_ckpt.empty()) {
    fixed = HccmModel<double>(cfg.model, cfg.seed).fixed();
  } else {
    fixed = load_checkpoint<double>(model_ckpt).fixed();
  }
  FeatureMapCache cache = FeatureMapCache::build(catalog, fixed);
  cache.save(out_path);
  std::cout << "cache " << cache.size() << " entries, map " << cache.map_w() << "x"
            << cache.map_h() << "x" << cache.map_c() << ", fixed checksum "
            << hex64(cache.fixed_checksum()) << "\n";
  return 0;
}

int cmd_train(RunConfig cfg, const std::string& data_dir, const std::string& cache_path,
              const std::string& model_out, const std::string& report_out) {
  cfg.finalize();
  std::string cache = !cache_path.empty() ? cache_path : cfg.cache_path;
  if (cfg.train.precision == "f32") {
    return run_train<float>(cfg, data_dir, cache, model_out, report_out);
  }
  return run_train<double>(cfg, data_dir, cache, model_out, report_out);
}

int cmd_eval(RunConfig cfg, const std::string& model_path, const std::string& data_path,
             const std::string& catalog_path, const std::string& cache_path,
             const std::string& report_out) {
  std::string cache = !cache_path.empty() ? cache_path : cfg.cache_path;
  if (cfg.train.precision == "f32") {
    return run_eval<float>(cfg, model_path, data_path, catalog_path, cache, report_out);
  }
  return run_eval<double>(cfg, model_path, data_path, catalog_path, cache, report_out);
}

int cmd_export_table(RunConfig, const std::string& model_path, const std::string& catalog_path,
                     const std::string& out_path) {
  HccmModel<double> model = load_checkpoint<double>(model_path);
  ImageCatalog catalog = ImageCatalog::load(catalog_path);
  FeatureMapSource<double> maps(&catalog, &model.fixed());
  RepresentationTable table = RepresentationTable::build(model, catalog, maps);
  table.save(out_path);
  std::cout << "table " << table.size() << " entries, dv " << table.dv() << ", model checksum "
            << hex64(table.model_checksum()) << "\n";
  return 0;
}

int cmd_serve(RunConfig cfg, const std::string& model_path, const std::string& table_path,
              int http_port, const std::string& replay_path) {
  if ((http_port > 0) == !replay_path.empty()) {
    throw ConfigError("serve: pass exactly one of --http PORT or --replay FILE");
  }
  HccmModel<double> model = load_checkpoint<double>(model_path);
  RepresentationTable table = RepresentationTable::load(table_path);
  ServePredictor<double> predictor(model, table);  // rejects foreign tables
  if (http_port > 0) return serve_http(predictor, http_port);
  (void)cfg;
  return serve_replay(predictor, replay_path);
}

int cmd_gradcheck(RunConfig cfg, const std::string& variant) {
  Variant v = parse_variant(variant);
  SyntheticData data = gen_dataset(gradcheck_synth_config(cfg.seed));
  HccmModel<double> model(gradcheck_model_config(v), cfg.seed);
  FeatureMapSource<double> maps(&data.catalog, &model.fixed());

  Sample sample;
  for (const auto& s : data.train) {
    if (s.behaviors.size() == 3) {
      sample = s;
      break;
    }
  }
  sample.label = 1;

  auto named = model.trainable_params();
  std::vector<Tensor<double>> params;
  int64_t coords = 0;
  for (auto& p : named) {
    params.push_back(p.tensor);
    coords += p.tensor.size();
  }
  auto loss_fn = [&] {
    Tensor<double> yhat = model.forward(sample, maps);
    return logloss_mean(yhat, std::vector<int>{sample.label});
  };
  double err = grad_check<double>(loss_fn, std::span<Tensor<double>>(params), 1e-5);

  // The frozen stack must stay outside the gradient graph entirely.
  bool frozen_clean = true;
  {
    Tape<double> tape;
    {
      Tape<double>::Scope scope(tape);
      tape.backward(loss_fn());
    }
    for (const auto& layer : model.fixed().layers()) {
      frozen_clean = frozen_clean && !layer.kernel.has_grad() && !layer.bias.has_grad();
      frozen_clean = frozen_clean && layer.kernel.grad().abs().sum() == 0.0f;
    }
    for (auto& p : params) p.zero_grad();
  }

  const double tolerance = 1e-4;
  std::printf("gradcheck variant=%s parameters=%zu coordinates=%lld\n", variant_name(v),
              named.size(), static_cast<long long>(coords));
  std::printf("max relative error: %.6e (tolerance %.1e)\n", err, tolerance);
  std::printf("frozen fixed-CNN gradients: %s\n", frozen_clean ? "all zero" : "NONZERO");
  bool pass = err <= tolerance && frozen_clean;
  std::printf("%s\n", pass ? "PASS" : "FAIL");
  return pass ? 0 : 1;
}

namespace {

struct AblationRow {
  std::string name;
  double auc = 0.0;
  MetricsReport report;
};

template <typename S>
std::vector<AblationRow> run_ablation(const RunConfig& cfg, const SyntheticData& data) {
  // All variants share the frozen stack (same seed), so one cache serves all.
  FeatureMapCache cache;
  {
    ModelConfig probe = cfg.model;
    probe.variant = Variant::DinFixedCnn;
    cache = FeatureMapCache::build(data.catalog, HccmModel<S>(probe, cfg.seed).fixed());
  }
  std::vector<AblationRow> rows;
  for (Variant v : {Variant::Din, Variant::DinFixedCnn, Variant::Hcm, Variant::Hccm}) {
    ModelConfig mc = cfg.model;
    mc.variant = v;
    TrainConfig tc = cfg.train;
    tc.variant = v;
    HccmModel<S> model(mc, cfg.seed);
    cache.verify(model.fixed());
    FeatureMapSource<S> maps(&cache);
    Trainer<S> trainer(model, tc);
    MetricsReport report = trainer.fit(data.train, data.test, maps);
    std::cerr << variant_name(v) << ": " << report.wall_clock_seconds << " s\n";
    rows.push_back({variant_name(v), report.test_auc, std::move(report)});
  }
  return rows;
}

}  // namespace

int cmd_ablation(RunConfig cfg, const std::string& report_out) {
  cfg.finalize();
  SyntheticData data = gen_dataset(cfg.data);
  if (cfg.negative_sample_rate < 1.0) {
    data.train = downsample_negatives(data.train, cfg.negative_sample_rate, cfg.seed);
  }
  std::vector<AblationRow> rows = cfg.train.precision == "f32"
                                      ? run_ablation<float>(cfg, data)
                                      : run_ablation<double>(cfg, data);
  double base = rows.front().auc;
  std::printf("%-14s %-8s %s\n", "model", "auc", "auc gain");
  json jrows = json::array();
  for (size_t i = 0; i < rows.size(); ++i) {
    char gain[32];
    if (i == 0) {
      std::snprintf(gain, sizeof gain, "-");
    } else {
      std::snprintf(gain, sizeof gain, "%.2f%%", (rows[i].auc - base) * 100.0);
    }
    std::printf("%-14s %.4f   %s\n", rows[i].name.c_str(), rows[i].auc, gain);
    jrows.push_back({{"variant", rows[i].name},
                     {"auc", rows[i].auc},
                     {"auc_gain", i == 0 ? json(nullptr) : json(rows[i].auc - base)},
                     {"epoch_logloss", rows[i].report.epoch_logloss},
                     {"param_checksum", hex64(rows[i].report.param_checksum)}});
  }
  if (!report_out.empty()) {
    json j;
    j["seed"] = cfg.seed;
    j["rows"] = jrows;
    atomic_write_text(report_out, j.dump(2) + "\n");
  }
  return 0;
}

}  // namespace hccm
