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
// Synthetic impression log with a planted visual-preference signal.
//
// Every image is a striped pattern whose orientation and frequency come
// from its category and whose hue/phase come from a per-image style seed.
// Each user prefers a small category mixture; behaviors are drawn from it
// and the click label is Bernoulli of
//
//   sigmoid(bias + alpha * visual_similarity + beta * category_share)
//
// where visual_similarity is the cosine between the candidate's
// down-sampled pixel grid and the mean grid of the behavior images. The
// visual term is computable from pixels but invisible to id embeddings,
// which is what separates the model variants.

#ifndef HCCM_SYNTH_HPP_
#define HCCM_SYNTH_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "hccm/data.hpp"

namespace hccm {

struct SyntheticConfig {
  int users = 2000;
  int test_users = 334;  // the last test_users user ids form the test split
  int impressions_per_user = 30;
  int categories = 8;
  int images_per_category = 40;
  int image_w = 32;
  int image_h = 32;
  int behavior_min = 3;
  int behavior_max = 10;
  double noise = 0.1;   // style-noise level in [0, 1]
  double alpha = 6.0;   // visual-preference strength, >= 0
  double beta = 0.5;    // category-match weight, >= 0
  double bias = -1.5;   // click-model intercept
  uint64_t seed = 42;

  void validate() const;
  int total_pics() const { return categories * images_per_category; }
};

struct SyntheticData {
  Dataset train;
  Dataset test;
  ImageCatalog catalog;
};

// Deterministic striped pattern for (category, style_seed). All pixels in
// [0,1]; at zero noise distinct categories are linearly separable from
// pixel statistics.
ImageF gen_image(int category, uint64_t style_seed, const SyntheticConfig& cfg);

// Catalog + disjoint-user train/test splits, a pure function of cfg.
SyntheticData gen_dataset(const SyntheticConfig& cfg);

// Keeps every positive; keeps each negative independently with
// probability rate; preserves order.
Dataset downsample_negatives(const Dataset& split, double rate, uint64_t seed);

// --- click-model ground truth, shared with the test oracles ---

// Down-sampled mean-centered grayscale grid used by the planted signal.
std::vector<double> image_grid(const ImageF& img);
double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Precomputed grids for every catalog image.
class CatalogGrids {
 public:
  explicit CatalogGrids(const ImageCatalog& catalog);
  const std::vector<double>& grid(uint64_t pic) const;

 private:
  std::vector<uint64_t> ids_;
  std::vector<std::vector<double>> grids_;
};

// cosine(candidate grid, mean of behavior grids); 0 when no behaviors.
double visual_similarity(const CatalogGrids& grids, const Sample& s);
// Fraction of behaviors whose category matches the candidate's.
double category_share(const Sample& s);

}  // namespace hccm

#endif  // HCCM_SYNTH_HPP_
