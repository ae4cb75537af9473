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
// Acceptance suite: one pass/fail line per criterion. Expects the path to
// the CLI binary as its only argument (used by the determinism criterion).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "hccm/checkpoint.hpp"
#include "hccm/counters.hpp"
#include "hccm/gradcheck.hpp"
#include "hccm/metrics.hpp"
#include "hccm/serving.hpp"
#include "hccm/synth.hpp"
#include "hccm/train.hpp"

namespace fs = std::filesystem;
using namespace hccm;

namespace {

std::string g_cli;
fs::path g_dir;

double elapsed_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// The desk-scale ablation profile: data defaults as shipped; training uses
// the desk head and epoch count documented in the README.

TrainConfig ablation_train_config(Variant v, uint64_t seed) {
  TrainConfig tc;
  tc.variant = v;
  tc.batch_size = 128;
  tc.epochs = 5;
  tc.learning_rate = 1e-3;
  tc.seed = seed;
  tc.hidden = {64, 32};
  tc.truncate = 10;
  return tc;
}

ModelConfig ablation_model_config(Variant v, const SyntheticConfig& data) {
  ModelConfig mc;
  mc.variant = v;
  mc.image_w = data.image_w;
  mc.image_h = data.image_h;
  mc.categories = data.categories;
  mc.hidden = {64, 32};
  mc.truncate = 10;
  return mc;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

bool ablation_ordering(std::string& detail) {
  const std::vector<uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<std::vector<double>> aucs(4);
  for (uint64_t seed : seeds) {
    SyntheticConfig dc;  // data defaults: ~50k train / 10k test
    dc.seed = seed;
    SyntheticData data = gen_dataset(dc);
    FeatureMapCache cache;
    {
      HccmModel<double> probe(ablation_model_config(Variant::DinFixedCnn, dc), seed);
      cache = FeatureMapCache::build(data.catalog, probe.fixed());
    }
    int vi = 0;
    for (Variant v :
         {Variant::Din, Variant::DinFixedCnn, Variant::Hcm, Variant::Hccm}) {
      HccmModel<double> model(ablation_model_config(v, dc), seed);
      cache.verify(model.fixed());
      FeatureMapSource<double> maps(&cache);
      Trainer<double> trainer(model, ablation_train_config(v, seed));
      MetricsReport report = trainer.fit(data.train, data.test, maps);
      aucs[static_cast<size_t>(vi++)].push_back(report.test_auc);
      std::fprintf(stderr, "  seed %llu %-14s auc %.4f (%.1fs)\n",
                   static_cast<unsigned long long>(seed), variant_name(v), report.test_auc,
                   report.wall_clock_seconds);
    }
  }
  double din = median(aucs[0]);
  double fixed = median(aucs[1]);
  double hcm = median(aucs[2]);
  double hccm = median(aucs[3]);
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "median AUC: DIN %.4f < +FixedCNN %.4f < HCM %.4f <= HCCM %.4f, HCCM-DIN %.4f",
                din, fixed, hcm, hccm, hccm - din);
  detail = buf;
  return din < fixed && fixed < hcm && hcm <= hccm && (hccm - din) >= 0.01;
}

// ---------------------------------------------------------------------------

bool gradient_integrity(std::string& detail) {
  auto t0 = std::chrono::steady_clock::now();
  SyntheticConfig sc;
  sc.users = 4;
  sc.test_users = 1;
  sc.impressions_per_user = 2;
  sc.categories = 4;
  sc.images_per_category = 6;
  sc.image_w = 8;
  sc.image_h = 8;
  sc.behavior_min = 3;
  sc.behavior_max = 3;
  sc.seed = 7;
  SyntheticData data = gen_dataset(sc);

  ModelConfig mc;
  mc.variant = Variant::Hccm;
  mc.image_w = 8;
  mc.image_h = 8;
  mc.fixed_channels = {6, 8};  // 8x8 -> 4x4 -> 2x2, c = 8
  mc.trainable_channels = {8, 16};
  mc.categories = 4;
  mc.user_table = 32;
  mc.item_table = 64;
  mc.pic_table = 64;
  mc.category_table = 16;
  mc.context_table = 16;
  mc.hidden = {16, 8};
  mc.truncate = 5;
  HccmModel<double> model(mc, 7);
  FeatureMapSource<double> maps(&data.catalog, &model.fixed());

  Sample sample = data.train.front();
  sample.label = 1;

  auto named = model.trainable_params();
  std::vector<Tensor<double>> params;
  int64_t coords = 0;
  for (auto& p : named) {
    params.push_back(p.tensor);
    coords += p.tensor.size();
  }
  auto loss_fn = [&] {
    return logloss_mean(model.forward(sample, maps), std::vector<int>{1});
  };
  double err = grad_check<double>(loss_fn, std::span<Tensor<double>>(params), 1e-5);

  bool frozen_clean = true;
  {
    Tape<double> tape;
    {
      Tape<double>::Scope scope(tape);
      tape.backward(loss_fn());
    }
    for (const auto& layer : model.fixed().layers()) {
      frozen_clean = frozen_clean && !layer.kernel.has_grad() && !layer.bias.has_grad() &&
                     layer.kernel.grad().abs().sum() == 0.0f &&
                     layer.bias.grad().abs().sum() == 0.0f;
    }
    for (auto& p : params) p.zero_grad();
  }
  double secs = elapsed_since(t0);
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "max rel err %.3e over %lld coords, frozen grads %s, %.1fs",
                err, static_cast<long long>(coords), frozen_clean ? "zero" : "NONZERO", secs);
  detail = buf;
  return err <= 1e-4 && frozen_clean && secs <= 120.0;
}

bool cache_equivalence(std::string& detail) {
  SyntheticConfig sc;
  sc.users = 150;
  sc.test_users = 30;
  sc.impressions_per_user = 10;
  sc.seed = 11;
  SyntheticData data = gen_dataset(sc);

  auto run = [&](bool use_cache) {
    ModelConfig mc = ablation_model_config(Variant::Hccm, sc);
    HccmModel<double> model(mc, 11);
    FeatureMapCache cache = FeatureMapCache::build(data.catalog, model.fixed());
    FeatureMapSource<double> maps = use_cache
                                        ? FeatureMapSource<double>(&cache)
                                        : FeatureMapSource<double>(&data.catalog, &model.fixed());
    TrainConfig tc = ablation_train_config(Variant::Hccm, 11);
    tc.epochs = 3;
    Trainer<double> trainer(model, tc);
    return trainer.fit(data.train, data.test, maps);
  };
  MetricsReport with_cache = run(true);
  MetricsReport without = run(false);
  bool same = with_cache.batch_logloss.size() == without.batch_logloss.size();
  for (size_t i = 0; same && i < with_cache.batch_logloss.size(); ++i) {
    same = std::memcmp(&with_cache.batch_logloss[i], &without.batch_logloss[i],
                       sizeof(double)) == 0;
  }
  same = same && with_cache.param_checksum == without.param_checksum;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu batch losses over 3 epochs bitwise %s, checksums %s",
                with_cache.batch_logloss.size(), same ? "identical" : "DIFFERENT",
                with_cache.param_checksum == without.param_checksum ? "match" : "MISMATCH");
  detail = buf;
  return same;
}

bool serving_equivalence(std::string& detail) {
  SyntheticConfig sc;  // desk defaults, smaller user count: catalog is full-size
  sc.users = 200;
  sc.test_users = 100;
  sc.impressions_per_user = 10;
  sc.seed = 13;
  SyntheticData data = gen_dataset(sc);

  ModelConfig mc = ablation_model_config(Variant::Hccm, sc);
  fs::path ckpt = g_dir / "serve_model.ckpt";
  fs::path table_path = g_dir / "serve_table.rept";
  {
    HccmModel<double> trained(mc, 13);
    FeatureMapSource<double> maps(&data.catalog, &trained.fixed());
    TrainConfig tc = ablation_train_config(Variant::Hccm, 13);
    tc.epochs = 1;
    Trainer<double> trainer(trained, tc);
    trainer.fit(data.train, data.test, maps);
    save_checkpoint(trained, ckpt.string());
  }
  HccmModel<double> model = load_checkpoint<double>(ckpt.string());
  FeatureMapSource<double> maps(&data.catalog, &model.fixed());
  RepresentationTable::build(model, data.catalog, maps).save(table_path.string());
  RepresentationTable table = RepresentationTable::load(table_path.string());
  ServePredictor<double> predictor(model, table);

  // 10,000 requests without a single convolution.
  Rng rng(99);
  uint64_t convs_before = OpCounters::conv2d();
  std::vector<Sample> requests;
  requests.reserve(10000);
  for (int i = 0; i < 10000; ++i) {
    Sample req = data.test[rng.next_below(data.test.size())];
    req.label = -1;
    requests.push_back(std::move(req));
  }
  std::vector<double> served;
  served.reserve(requests.size());
  for (const auto& req : requests) served.push_back(predictor.predict(req).yhat);
  uint64_t convs = OpCounters::conv2d() - convs_before;

  // The first 1,000 compared against the full forward pass.
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    double full = model.forward(requests[static_cast<size_t>(i)], maps).scalar_value();
    worst = std::max(worst, std::abs(full - served[static_cast<size_t>(i)]));
  }
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "max |serve - full| %.3e over 1000 requests, %llu convs in 10000 requests",
                worst, static_cast<unsigned long long>(convs));
  detail = buf;
  return worst <= 1e-6 && convs == 0;
}

bool auc_oracle(std::string& detail) {
  auto pairwise = [](std::span<const double> scores, std::span<const int> labels) {
    uint64_t num2 = 0, p = 0, n = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
      if (labels[i] == 1) {
        ++p;
        for (size_t j = 0; j < scores.size(); ++j) {
          if (labels[j] == 1) continue;
          if (scores[i] > scores[j]) {
            num2 += 2;
          } else if (scores[i] == scores[j]) {
            num2 += 1;
          }
        }
      } else {
        ++n;
      }
    }
    return static_cast<double>(num2) / (2.0 * static_cast<double>(p) * static_cast<double>(n));
  };

  std::vector<double> hand{0.8, 0.7, 0.6, 0.5};
  std::vector<int> hand_labels{1, 0, 1, 0};
  if (auc(hand, hand_labels) != 0.75) {
    detail = "hand case failed";
    return false;
  }

  Rng rng(515);
  int exact = 0;
  for (int trial = 0; trial < 200; ++trial) {
    // Log-uniform sizes up to 10,000, coarse scores to force ties.
    int n = static_cast<int>(std::exp(rng.next_uniform(std::log(8.0), std::log(10000.0))));
    int levels = static_cast<int>(rng.next_range(2, 50));
    std::vector<double> scores(static_cast<size_t>(n));
    std::vector<int> labels(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      scores[static_cast<size_t>(i)] =
          static_cast<double>(rng.next_below(static_cast<uint64_t>(levels))) / levels;
      labels[static_cast<size_t>(i)] = rng.next_bernoulli(0.3) ? 1 : 0;
    }
    labels[0] = 1;
    labels[static_cast<size_t>(n - 1)] = 0;
    if (auc(scores, labels) == pairwise(scores, labels)) ++exact;
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "hand case 0.75 exact; %d/200 random instances exact", exact);
  detail = buf;
  return exact == 200;
}

bool attention_set_invariance(std::string& detail) {
  SyntheticConfig sc;
  sc.users = 100;
  sc.test_users = 20;
  sc.impressions_per_user = 5;
  sc.seed = 17;
  SyntheticData data = gen_dataset(sc);
  ModelConfig mc = ablation_model_config(Variant::Hccm, sc);
  HccmModel<double> model(mc, 17);
  FeatureMapSource<double> maps(&data.catalog, &model.fixed());

  Rng rng(18);
  double worst = 0.0;
  int used = 0;
  for (int trial = 0; used < 100; ++trial) {
    Sample s = data.train[rng.next_below(data.train.size())];
    if (s.behaviors.size() < 2) continue;
    ++used;
    double base = model.forward(s, maps).scalar_value();
    for (size_t i = s.behaviors.size(); i > 1; --i) {
      std::swap(s.behaviors[i - 1], s.behaviors[rng.next_below(i)]);
    }
    double permuted = model.forward(s, maps).scalar_value();
    worst = std::max(worst, std::abs(base - permuted));
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "max |yhat shift| %.3e over 100 permuted samples", worst);
  detail = buf;
  return worst <= 1e-12;
}

bool negative_downsampling(std::string& detail) {
  Dataset split;
  int total_neg = 0;
  Rng rng(21);
  for (int i = 0; i < 30000; ++i) {
    Sample s;
    s.user_id = static_cast<uint64_t>(i);
    s.label = rng.next_bernoulli(0.3) ? 1 : 0;
    total_neg += (s.label == 0) ? 1 : 0;
    split.push_back(std::move(s));
  }
  Dataset kept = downsample_negatives(split, 0.2, 77);
  int pos_before = static_cast<int>(split.size()) - total_neg;
  int pos_after = 0, neg_after = 0;
  for (const auto& s : kept) (s.label == 1 ? pos_after : neg_after)++;
  double mean = 0.2 * total_neg;
  double sigma = std::sqrt(static_cast<double>(total_neg) * 0.2 * 0.8);
  bool ok = pos_after == pos_before && std::abs(neg_after - mean) <= 5.0 * sigma;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "positives %d/%d kept, negatives %d vs Binomial mean %.0f (5 sigma = %.0f)",
                pos_after, pos_before, neg_after, mean, 5.0 * sigma);
  detail = buf;
  return ok;
}

// ---------------------------------------------------------------------------
// Determinism through the real CLI.

int run_cli(const std::string& args) {
  std::string cmd = g_cli + " " + args;
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

bool file_equal(const fs::path& a, const fs::path& b) {
  return read_file_bytes(a.string()) == read_file_bytes(b.string());
}

bool determinism(std::string& detail) {
  fs::path dir = g_dir / "determinism";
  fs::create_directories(dir);
  std::ofstream cfg(dir / "cfg.json");
  cfg << R"({
    "seed": 33,
    "data": {"users": 80, "test_users": 20, "impressions_per_user": 8, "categories": 4,
             "images_per_category": 6, "image_w": 8, "image_h": 8,
             "behavior_min": 2, "behavior_max": 4, "negative_sample_rate": 0.9},
    "model": {"fixed_channels": [6, 8], "trainable_channels": [8, 16],
              "user_table": 64, "item_table": 32, "pic_table": 32, "context_table": 16},
    "train": {"variant": "HCCM", "batch_size": 16, "epochs": 2, "hidden": [16, 8],
              "truncate": 5}
  })";
  cfg.close();
  std::string c = " --config " + (dir / "cfg.json").string();

  for (const char* run : {"a", "b"}) {
    fs::path rd = dir / run;
    fs::create_directories(rd);
    std::string out = " > " + (rd / "stdout.txt").string() + " 2>/dev/null";
    if (run_cli("gen-data" + c + " --out " + (rd / "data").string() + out) != 0) {
      detail = "gen-data failed";
      return false;
    }
    if (run_cli("precompute" + c + " --catalog " + (rd / "data/catalog.bin").string() +
                " --out " + (rd / "cache.fmc").string() + out) != 0) {
      detail = "precompute failed";
      return false;
    }
    if (run_cli("train" + c + " --data " + (rd / "data").string() + " --cache " +
                (rd / "cache.fmc").string() + " --out " + (rd / "model.ckpt").string() +
                " --report " + (rd / "report.json").string() + " > " +
                (rd / "train_stdout.txt").string() + " 2>/dev/null") != 0) {
      detail = "train failed";
      return false;
    }
    if (run_cli("export-table" + c + " --model " + (rd / "model.ckpt").string() + " --catalog " +
                (rd / "data/catalog.bin").string() + " --out " + (rd / "table.rept").string() +
                out) != 0) {
      detail = "export-table failed";
      return false;
    }
    {
      std::ifstream in(rd / "data/test.jsonl");
      std::ofstream req(rd / "req.jsonl");
      std::string line;
      int n = 0;
      while (std::getline(in, line) && n < 20) {
        req << line << "\n";
        ++n;
      }
    }
    if (run_cli("serve --model " + (rd / "model.ckpt").string() + " --table " +
                (rd / "table.rept").string() + " --replay " + (rd / "req.jsonl").string() +
                " > " + (rd / "serve_stdout.txt").string() + " 2>/dev/null") != 0) {
      detail = "serve failed";
      return false;
    }
    if (run_cli("ablation" + c + " --report " + (rd / "ablation.json").string() + " > " +
                (rd / "ablation_stdout.txt").string() + " 2>/dev/null") != 0) {
      detail = "ablation failed";
      return false;
    }
  }
  const char* files[] = {"data/train.jsonl", "data/test.jsonl", "data/catalog.bin",
                         "cache.fmc",        "model.ckpt",      "report.json",
                         "table.rept",       "serve_stdout.txt", "ablation.json",
                         "ablation_stdout.txt", "train_stdout.txt", "stdout.txt"};
  for (const char* f : files) {
    if (!file_equal(g_dir / "determinism/a" / f, g_dir / "determinism/b" / f)) {
      detail = std::string("artifact differs between reruns: ") + f;
      return false;
    }
  }
  detail = "12 artifacts byte-identical across reruns (datasets, cache, checkpoint, table, reports, replay output)";
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: acceptance <path-to-hccm-binary>\n");
    return 2;
  }
  g_cli = argv[1];
  g_dir = fs::temp_directory_path() / "hccm_acceptance";
  fs::remove_all(g_dir);
  fs::create_directories(g_dir);

  struct Criterion {
    const char* name;
    std::function<bool(std::string&)> run;
  };
  const Criterion criteria[] = {
      {"ablation-ordering", ablation_ordering},
      {"gradient-integrity", gradient_integrity},
      {"cache-equivalence", cache_equivalence},
      {"serving-equivalence", serving_equivalence},
      {"auc-oracle", auc_oracle},
      {"attention-set-invariance", attention_set_invariance},
      {"negative-downsampling", negative_downsampling},
      {"determinism", determinism},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = criterion.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    std::printf("[%s] %s — %s (%.1fs)\n", ok ? "PASS" : "FAIL", criterion.name, detail.c_str(),
                elapsed_since(t0));
    std::fflush(stdout);
    failures += ok ? 0 : 1;
  }
  fs::remove_all(g_dir);
  return failures;
}
