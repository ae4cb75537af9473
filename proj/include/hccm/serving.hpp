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
// Lookup-table serving. The whole per-image visual path (frozen stack,
// channel attention, prior fusion, trainable stack, pooling) is a function
// of the image and its catalog category alone, so it is exported once per
// pic id. At request time only embeddings, attention, and the head MLP
// run; no convolution executes.
//
// Table file: "REPT" magic, version, dv, count, exporting-model checksum,
// then the pic-id index, then count * dv raw 32-bit floats in id order.

#ifndef HCCM_SERVING_HPP_
#define HCCM_SERVING_HPP_

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hccm/checkpoint.hpp"
#include "hccm/model.hpp"

namespace hccm {

class RepresentationTable {
 public:
  template <typename S>
  static RepresentationTable build(const HccmModel<S>& model, const ImageCatalog& catalog,
                                   const FeatureMapSource<S>& maps) {
    if (model.variant() == Variant::Din) {
      throw UnsupportedVariantError("DIN has no visual path to export");
    }
    if (catalog.empty()) throw ConfigError("export: catalog is empty");
    RepresentationTable table;
    table.dv_ = model.config().visual_dim();
    table.model_checksum_ = hccm::model_checksum(model);
    for (size_t i = 0; i < catalog.size(); ++i) {
      const CatalogEntry& e = catalog.at(i);
      Tensor<S> v = model.visual_vector(e.id, e.category, maps);
      table.ids_.push_back(e.id);
      for (int k = 0; k < table.dv_; ++k) {
        table.values_.push_back(static_cast<float>(v.value_at(k)));
      }
    }
    return table;
  }

  void save(const std::string& path) const {
    atomic_write_file(path, serialize());
  }

  static RepresentationTable load(const std::string& path) {
    auto bytes = read_file_bytes(path);
    BinaryReader r(bytes);
    r.expect_magic("REPT", "representation table " + path);
    uint32_t version = r.u32();
    if (version != 1) throw IoError("representation table " + path + ": unsupported version");
    RepresentationTable table;
    table.dv_ = static_cast<int>(r.u32());
    uint64_t count = r.u64();
    table.model_checksum_ = r.u64();
    table.ids_.resize(count);
    for (auto& id : table.ids_) id = r.u64();
    if (!std::is_sorted(table.ids_.begin(), table.ids_.end())) {
      throw IoError("representation table " + path + ": ids not sorted");
    }
    table.values_.resize(count * static_cast<uint64_t>(table.dv_));
    r.f32_array(table.values_.data(), table.values_.size());
    if (!r.at_end()) throw IoError("representation table " + path + ": trailing bytes");
    return table;
  }

  std::span<const float> lookup(uint64_t pic) const {
    auto it = std::lower_bound(ids_.begin(), ids_.end(), pic);
    if (it == ids_.end() || *it != pic) {
      throw TableMissError("pic id " + std::to_string(pic) + " not in representation table");
    }
    size_t idx = static_cast<size_t>(it - ids_.begin());
    return {values_.data() + idx * static_cast<size_t>(dv_), static_cast<size_t>(dv_)};
  }

  int dv() const { return dv_; }
  size_t size() const { return ids_.size(); }
  uint64_t model_checksum() const { return model_checksum_; }
  // Identifies the table content itself (reported in predict responses).
  uint64_t content_checksum() const {
    auto bytes = serialize();
    return fnv1a64(bytes.data(), bytes.size());
  }

 private:
  std::vector<uint8_t> serialize() const {
    BinaryWriter w;
    w.magic("REPT");
    w.u32(1);
    w.u32(static_cast<uint32_t>(dv_));
    w.u64(ids_.size());
    w.u64(model_checksum_);
    for (uint64_t id : ids_) w.u64(id);
    w.f32_array(values_.data(), values_.size());
    return w.bytes();
  }

  int dv_ = 0;
  uint64_t model_checksum_ = 0;
  std::vector<uint64_t> ids_;   // sorted
  std::vector<float> values_;   // size() * dv_
};

struct PredictResponse {
  double yhat = 0.0;
  uint64_t model_checksum = 0;
  uint64_t table_checksum = 0;
};

// Answers prediction requests from the table. Rejects a table exported
// from a different checkpoint at construction.
template <typename S>
class ServePredictor {
 public:
  ServePredictor(const HccmModel<S>& model, const RepresentationTable& table)
      : model_(model), table_(table) {
    model_checksum_ = hccm::model_checksum(model);
    if (model_checksum_ != table.model_checksum()) {
      throw StaleCacheError("representation table was exported from a different checkpoint");
    }
    if (table.dv() != model.config().visual_dim()) {
      throw ShapeError("representation table dv does not match the model");
    }
    table_checksum_ = table.content_checksum();
  }

  PredictResponse predict(const Sample& request) const {
    Tensor<S> yhat = model_.forward_visual(request, [this](uint64_t pic, uint16_t) {
      std::span<const float> v = table_.lookup(pic);
      return Tensor<S>::from_floats({static_cast<int>(v.size())}, v.data());
    });
    return {static_cast<double>(yhat.scalar_value()), model_checksum_, table_checksum_};
  }

 private:
  const HccmModel<S>& model_;
  const RepresentationTable& table_;
  uint64_t model_checksum_ = 0;
  uint64_t table_checksum_ = 0;
};

}  // namespace hccm

#endif  // HCCM_SERVING_HPP_
