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
// Impression samples, the image catalog, and their on-disk formats:
// samples as JSON lines, the catalog as a binary "IMGC" file.

#ifndef HCCM_DATA_HPP_
#define HCCM_DATA_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace hccm {

struct BehaviorItem {
  uint64_t pic = 0;
  uint16_t cat = 0;
  bool operator==(const BehaviorItem&) const = default;
};

// One impression. label is 0/1, or -1 for an unlabeled predict request.
struct Sample {
  uint64_t user_id = 0;
  std::vector<uint64_t> context_ids;
  uint64_t item_id = 0;
  uint64_t cand_pic = 0;
  uint16_t cand_cat = 0;
  std::vector<BehaviorItem> behaviors;  // oldest first; truncation keeps the tail
  int label = -1;
  bool operator==(const Sample&) const = default;
};

using Dataset = std::vector<Sample>;

// Pixel block in [0,1], laid out [w, h, c] row-major with channels fastest.
struct ImageF {
  int w = 0, h = 0, c = 0;
  std::vector<float> pix;
  int64_t size() const { return static_cast<int64_t>(w) * h * c; }
  float at(int x, int y, int ch) const {
    return pix[(static_cast<size_t>(x) * h + y) * c + ch];
  }
  float& at(int x, int y, int ch) {
    return pix[(static_cast<size_t>(x) * h + y) * c + ch];
  }
};

// Frozen-stack activation block, always 32-bit (see FixedCnn).
struct FeatureMapF {
  int w = 0, h = 0, c = 0;
  std::vector<float> v;
  int64_t size() const { return static_cast<int64_t>(w) * h * c; }
};

struct CatalogEntry {
  uint64_t id = 0;
  uint16_t category = 0;
  ImageF image;
};

// pic id -> (image, category), kept sorted by id.
class ImageCatalog {
 public:
  void add(CatalogEntry entry);
  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const CatalogEntry& at(size_t index) const { return entries_[index]; }
  bool contains(uint64_t pic) const;
  // Throws CacheMissError when the pic id is unknown.
  const CatalogEntry& entry(uint64_t pic) const;

  void save(const std::string& path) const;
  static ImageCatalog load(const std::string& path);

 private:
  std::vector<CatalogEntry> entries_;  // sorted by id
};

// JSON-lines dataset files.
std::string sample_to_json_line(const Sample& s, bool with_label = true);
Sample sample_from_json_line(const std::string& line);
void write_jsonl(const std::string& path, const Dataset& data);
Dataset read_jsonl(const std::string& path);

}  // namespace hccm

#endif  // HCCM_DATA_HPP_
