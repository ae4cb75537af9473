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

#include "hccm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hccm/errors.hpp"
#include "hccm/hash.hpp"

namespace hccm {

namespace {

constexpr uint64_t kImageStream = 0x1111;
constexpr uint64_t kUserStream = 0x2222;
constexpr uint64_t kImpressionStream = 0x3333;
constexpr uint64_t kDownsampleStream = 0x4444;

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

void SyntheticConfig::validate() const {
  if (categories < 2) throw ConfigError("data.categories: need at least 2 categories");
  if (users < 2) throw ConfigError("data.users: need at least 2 users");
  if (test_users < 1 || test_users >= users) {
    throw ConfigError("data.test_users: must be in [1, users)");
  }
  if (impressions_per_user < 1) throw ConfigError("data.impressions_per_user: must be positive");
  if (images_per_category < 1) throw ConfigError("data.images_per_category: must be positive");
  if (image_w < 2 || image_h < 2) throw ConfigError("data.image_w/h: images must be at least 2x2");
  if (behavior_min < 0 || behavior_max < behavior_min) {
    throw ConfigError("data.behavior_min/max: invalid behavior length range");
  }
  if (noise < 0.0 || noise > 1.0) throw ConfigError("data.noise: must be in [0, 1]");
  if (alpha < 0.0) throw ConfigError("data.alpha: must be >= 0");
  if (beta < 0.0) throw ConfigError("data.beta: must be >= 0");
}

ImageF gen_image(int category, uint64_t style_seed, const SyntheticConfig& cfg) {
  if (category < 0 || category >= cfg.categories) {
    throw ConfigError("gen_image: category out of range");
  }
  Rng rng(style_seed);
  const int w = cfg.image_w, h = cfg.image_h;
  // Orientation and frequency are the category signature; hue and phase
  // are per-image style. The phase range is bounded so same-category
  // images stay positively correlated after mean-centering.
  const double theta = M_PI * static_cast<double>(category) / cfg.categories;
  const double cycles = 2.0 + static_cast<double>(category % 3);
  const double freq = 2.0 * M_PI * cycles / std::max(w, h);
  const double phase = rng.next_uniform(-M_PI / 4.0, M_PI / 4.0);
  double gain[3];
  for (double& g : gain) g = rng.next_uniform(0.25, 1.0);

  ImageF img;
  img.w = w;
  img.h = h;
  img.c = 3;
  img.pix.resize(static_cast<size_t>(img.size()));
  const double cx = std::cos(theta), cy = std::sin(theta);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) {
      double base = 0.5 + 0.45 * std::sin(freq * (cx * x + cy * y) + phase);
      for (int ch = 0; ch < 3; ++ch) {
        double v = gain[ch] * base + cfg.noise * rng.next_uniform(-0.5, 0.5);
        img.at(x, y, ch) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return img;
}

std::vector<double> image_grid(const ImageF& img) {
  const int g = std::min({8, img.w, img.h});
  const int bw = img.w / g, bh = img.h / g;
  // Per-channel block averages, centered by the overall mean: spatial
  // structure and relative channel balance both survive, global
  // brightness does not.
  std::vector<double> grid(static_cast<size_t>(g) * g * img.c, 0.0);
  for (int gx = 0; gx < g; ++gx) {
    for (int gy = 0; gy < g; ++gy) {
      for (int ch = 0; ch < img.c; ++ch) {
        double acc = 0.0;
        for (int x = gx * bw; x < (gx + 1) * bw; ++x) {
          for (int y = gy * bh; y < (gy + 1) * bh; ++y) acc += img.at(x, y, ch);
        }
        grid[(static_cast<size_t>(gx) * g + gy) * img.c + ch] = acc / (bw * bh);
      }
    }
  }
  double mean = 0.0;
  for (double v : grid) mean += v;
  mean /= static_cast<double>(grid.size());
  for (double& v : grid) v -= mean;
  return grid;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  double denom = std::sqrt(na) * std::sqrt(nb);
  return denom > 0.0 ? dot / denom : 0.0;
}

CatalogGrids::CatalogGrids(const ImageCatalog& catalog) {
  ids_.reserve(catalog.size());
  grids_.reserve(catalog.size());
  for (size_t i = 0; i < catalog.size(); ++i) {
    ids_.push_back(catalog.at(i).id);
    grids_.push_back(image_grid(catalog.at(i).image));
  }
}

const std::vector<double>& CatalogGrids::grid(uint64_t pic) const {
  auto it = std::lower_bound(ids_.begin(), ids_.end(), pic);
  if (it == ids_.end() || *it != pic) {
    throw CacheMissError("pic id " + std::to_string(pic) + " not in catalog");
  }
  return grids_[static_cast<size_t>(it - ids_.begin())];
}

double visual_similarity(const CatalogGrids& grids, const Sample& s) {
  if (s.behaviors.empty()) return 0.0;
  const auto& cand = grids.grid(s.cand_pic);
  std::vector<double> mean(cand.size(), 0.0);
  for (const auto& b : s.behaviors) {
    const auto& g = grids.grid(b.pic);
    for (size_t i = 0; i < mean.size(); ++i) mean[i] += g[i];
  }
  for (double& v : mean) v /= static_cast<double>(s.behaviors.size());
  return cosine_similarity(cand, mean);
}

double category_share(const Sample& s) {
  if (s.behaviors.empty()) return 0.0;
  int match = 0;
  for (const auto& b : s.behaviors) match += (b.cat == s.cand_cat) ? 1 : 0;
  return static_cast<double>(match) / static_cast<double>(s.behaviors.size());
}

SyntheticData gen_dataset(const SyntheticConfig& cfg) {
  cfg.validate();
  SyntheticData out;

  for (int cat = 0; cat < cfg.categories; ++cat) {
    for (int i = 0; i < cfg.images_per_category; ++i) {
      uint64_t pic = static_cast<uint64_t>(cat) * cfg.images_per_category + i;
      CatalogEntry e;
      e.id = pic;
      e.category = static_cast<uint16_t>(cat);
      e.image = gen_image(cat, derive_seed(cfg.seed, kImageStream ^ (pic * 2654435761ULL)), cfg);
      out.catalog.add(std::move(e));
    }
  }
  CatalogGrids grids(out.catalog);

  const int train_users = cfg.users - cfg.test_users;
  const uint64_t total_pics = static_cast<uint64_t>(cfg.total_pics());
  for (int u = 0; u < cfg.users; ++u) {
    Rng user_rng(cfg.seed, kUserStream ^ static_cast<uint64_t>(u));
    const int primary = static_cast<int>(user_rng.next_below(cfg.categories));
    const int secondary =
        (primary + 1 + static_cast<int>(user_rng.next_below(cfg.categories - 1))) % cfg.categories;

    for (int t = 0; t < cfg.impressions_per_user; ++t) {
      Rng rng(cfg.seed, kImpressionStream ^ mix64((static_cast<uint64_t>(u) << 20) | t));
      Sample s;
      s.user_id = static_cast<uint64_t>(u);
      s.context_ids = {rng.next_below(24), rng.next_below(7)};
      const int n_beh = static_cast<int>(rng.next_range(cfg.behavior_min, cfg.behavior_max));
      for (int b = 0; b < n_beh; ++b) {
        double roll = rng.next_double();
        int cat;
        if (roll < 0.65) {
          cat = primary;
        } else if (roll < 0.90) {
          cat = secondary;
        } else {
          cat = static_cast<int>(rng.next_below(cfg.categories));
        }
        uint64_t pic = static_cast<uint64_t>(cat) * cfg.images_per_category +
                       rng.next_below(cfg.images_per_category);
        s.behaviors.push_back({pic, static_cast<uint16_t>(cat)});
      }
      s.cand_pic = rng.next_below(total_pics);
      s.cand_cat = out.catalog.entry(s.cand_pic).category;
      s.item_id = s.cand_pic;

      double logit = cfg.bias + cfg.alpha * visual_similarity(grids, s) +
                     cfg.beta * category_share(s);
      s.label = rng.next_bernoulli(stable_sigmoid(logit)) ? 1 : 0;
      (u < train_users ? out.train : out.test).push_back(std::move(s));
    }
  }
  return out;
}

Dataset downsample_negatives(const Dataset& split, double rate, uint64_t seed) {
  if (!(rate > 0.0) || rate > 1.0) {
    throw ConfigError("downsample_negatives: rate must be in (0, 1]");
  }
  Rng rng(seed, kDownsampleStream);
  Dataset kept;
  kept.reserve(split.size());
  for (const auto& s : split) {
    if (s.label == 1 || rng.next_bernoulli(rate)) kept.push_back(s);
  }
  return kept;
}

}  // namespace hccm
