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
// Precomputed fixed-CNN feature maps keyed by pic id, so training never
// re-executes the frozen stack. Loaded whole into memory; immutable after
// load and freely shared across threads.

#ifndef HCCM_FEATURE_CACHE_HPP_
#define HCCM_FEATURE_CACHE_HPP_

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "hccm/data.hpp"
#include "hccm/errors.hpp"
#include "hccm/fixed_cnn.hpp"
#include "hccm/io.hpp"
#include "hccm/tensor.hpp"

namespace hccm {

class FeatureMapCache {
 public:
  // One entry per catalog image, in pic-id order.
  static FeatureMapCache build(const ImageCatalog& catalog, const FixedCnn& cnn) {
    if (catalog.empty()) throw ConfigError("feature cache: catalog is empty");
    FeatureMapCache cache;
    cache.fixed_checksum_ = cnn.checksum();
    for (size_t i = 0; i < catalog.size(); ++i) {
      FeatureMapF map = cnn.forward(catalog.at(i).image);
      if (i == 0) {
        cache.w_ = map.w;
        cache.h_ = map.h;
        cache.c_ = map.c;
      } else if (map.w != cache.w_ || map.h != cache.h_ || map.c != cache.c_) {
        throw ShapeError("feature cache: inconsistent map extents across catalog");
      }
      cache.ids_.push_back(catalog.at(i).id);
      cache.maps_.push_back(std::move(map));
    }
    return cache;
  }

  void save(const std::string& path) const {
    BinaryWriter w;
    w.magic("FMC1");
    w.u32(1);  // version
    w.u32(static_cast<uint32_t>(w_));
    w.u32(static_cast<uint32_t>(h_));
    w.u32(static_cast<uint32_t>(c_));
    w.u64(ids_.size());
    w.u64(fixed_checksum_);
    for (size_t i = 0; i < ids_.size(); ++i) {
      w.u64(ids_[i]);
      w.f32_array(maps_[i].v.data(), maps_[i].v.size());
    }
    atomic_write_file(path, w.bytes());
  }

  static FeatureMapCache load(const std::string& path) {
    auto bytes = read_file_bytes(path);
    BinaryReader r(bytes);
    r.expect_magic("FMC1", "feature cache " + path);
    uint32_t version = r.u32();
    if (version != 1) throw IoError("feature cache " + path + ": unsupported version");
    FeatureMapCache cache;
    cache.w_ = static_cast<int>(r.u32());
    cache.h_ = static_cast<int>(r.u32());
    cache.c_ = static_cast<int>(r.u32());
    uint64_t count = r.u64();
    cache.fixed_checksum_ = r.u64();
    int64_t map_len = static_cast<int64_t>(cache.w_) * cache.h_ * cache.c_;
    for (uint64_t i = 0; i < count; ++i) {
      uint64_t id = r.u64();
      if (!cache.ids_.empty() && cache.ids_.back() >= id) {
        throw IoError("feature cache " + path + ": ids not strictly increasing");
      }
      FeatureMapF map;
      map.w = cache.w_;
      map.h = cache.h_;
      map.c = cache.c_;
      map.v.resize(static_cast<size_t>(map_len));
      r.f32_array(map.v.data(), map.v.size());
      cache.ids_.push_back(id);
      cache.maps_.push_back(std::move(map));
    }
    if (!r.at_end()) throw IoError("feature cache " + path + ": trailing bytes");
    return cache;
  }

  // Rejects entries produced by different frozen parameters.
  void verify(const FixedCnn& cnn) const {
    if (cnn.checksum() != fixed_checksum_) {
      throw StaleCacheError("feature cache was built from different fixed-CNN parameters");
    }
  }

  bool contains(uint64_t pic) const {
    auto it = std::lower_bound(ids_.begin(), ids_.end(), pic);
    return it != ids_.end() && *it == pic;
  }

  const FeatureMapF& lookup(uint64_t pic) const {
    auto it = std::lower_bound(ids_.begin(), ids_.end(), pic);
    if (it == ids_.end() || *it != pic) {
      throw CacheMissError("pic id " + std::to_string(pic) + " not in feature cache");
    }
    return maps_[static_cast<size_t>(it - ids_.begin())];
  }

  size_t size() const { return ids_.size(); }
  int map_w() const { return w_; }
  int map_h() const { return h_; }
  int map_c() const { return c_; }
  uint64_t fixed_checksum() const { return fixed_checksum_; }

 private:
  int w_ = 0, h_ = 0, c_ = 0;
  uint64_t fixed_checksum_ = 0;
  std::vector<uint64_t> ids_;  // sorted
  std::vector<FeatureMapF> maps_;
};

// Hands frozen feature maps to the model, either by reading the
// precomputed cache or by running the fixed stack on catalog images.
// Both produce identical 32-bit values; only the cost differs.
template <typename S>
class FeatureMapSource {
 public:
  FeatureMapSource(const ImageCatalog* catalog, const FixedCnn* cnn)
      : catalog_(catalog), cnn_(cnn) {}
  explicit FeatureMapSource(const FeatureMapCache* cache) : cache_(cache) {}

  bool cached() const { return cache_ != nullptr; }

  Tensor<S> map_for(uint64_t pic) const {
    if (cache_ != nullptr) {
      const FeatureMapF& m = cache_->lookup(pic);
      return Tensor<S>::from_floats({m.w, m.h, m.c}, m.v.data());
    }
    FeatureMapF m = cnn_->forward(catalog_->entry(pic).image);
    return Tensor<S>::from_floats({m.w, m.h, m.c}, m.v.data());
  }

 private:
  const ImageCatalog* catalog_ = nullptr;
  const FixedCnn* cnn_ = nullptr;
  const FeatureMapCache* cache_ = nullptr;
};

}  // namespace hccm

#endif  // HCCM_FEATURE_CACHE_HPP_
