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
// Binary model checkpoint: "HCCM" magic, a header carrying the variant and
// every extent hyperparameter, then parameter blocks in declaration order
// as 32-bit little-endian floats. The model checksum is FNV-1a over the
// block region and binds representation tables to their checkpoint.

#ifndef HCCM_CHECKPOINT_HPP_
#define HCCM_CHECKPOINT_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "hccm/io.hpp"
#include "hccm/model.hpp"

namespace hccm {

namespace detail {

template <typename S>
void write_block(BinaryWriter& w, const Tensor<S>& t) {
  w.u32(static_cast<uint32_t>(t.size()));
  for (int64_t i = 0; i < t.size(); ++i) w.f32(static_cast<float>(t.values()[i]));
}

template <typename S>
void read_block(BinaryReader& r, Tensor<S>& t, const char* what) {
  uint32_t n = r.u32();
  if (static_cast<int64_t>(n) != t.size()) {
    throw IoError(std::string("checkpoint: block size mismatch for ") + what);
  }
  for (int64_t i = 0; i < t.size(); ++i) t.values()[i] = static_cast<S>(r.f32());
}

}  // namespace detail

struct SerializedCheckpoint {
  std::vector<uint8_t> bytes;
  size_t block_offset = 0;  // first byte after the header
  uint64_t checksum() const { return fnv1a64(bytes.data() + block_offset,
                                             bytes.size() - block_offset); }
};

template <typename S>
SerializedCheckpoint serialize_checkpoint(const HccmModel<S>& model) {
  const ModelConfig& cfg = model.config();
  BinaryWriter w;
  w.magic("HCCM");
  w.u32(1);  // version
  w.u8(static_cast<uint8_t>(cfg.variant));
  w.u32(static_cast<uint32_t>(cfg.image_w));
  w.u32(static_cast<uint32_t>(cfg.image_h));
  w.u32(static_cast<uint32_t>(cfg.image_c));
  w.u32(static_cast<uint32_t>(cfg.fixed_kernel));
  w.u32(static_cast<uint32_t>(cfg.fixed_channels.size()));
  for (int c : cfg.fixed_channels) w.u32(static_cast<uint32_t>(c));
  w.u32(static_cast<uint32_t>(cfg.trainable_kernel));
  w.u32(static_cast<uint32_t>(cfg.trainable_channels.size()));
  for (int c : cfg.trainable_channels) w.u32(static_cast<uint32_t>(c));
  w.u32(static_cast<uint32_t>(cfg.embed_dim));
  w.u32(static_cast<uint32_t>(cfg.categories));
  w.u32(static_cast<uint32_t>(cfg.user_table));
  w.u32(static_cast<uint32_t>(cfg.item_table));
  w.u32(static_cast<uint32_t>(cfg.pic_table));
  w.u32(static_cast<uint32_t>(cfg.category_table));
  w.u32(static_cast<uint32_t>(cfg.context_table));
  w.u32(static_cast<uint32_t>(cfg.num_context));
  w.u32(static_cast<uint32_t>(cfg.attn_reduction));
  w.u32(static_cast<uint32_t>(cfg.hidden.size()));
  for (int hdim : cfg.hidden) w.u32(static_cast<uint32_t>(hdim));
  w.u32(static_cast<uint32_t>(cfg.truncate));

  w.u64(model.embedding("user").hash_seed);
  for (const auto& ctx : model.context_embeddings()) w.u64(ctx.hash_seed);
  w.u64(model.embedding("item").hash_seed);
  w.u64(model.embedding("pic").hash_seed);
  w.u64(model.embedding("cat").hash_seed);

  SerializedCheckpoint out;
  out.block_offset = w.size();

  for (const auto& layer : model.fixed().layers()) {
    detail::write_block(w, layer.kernel);
    detail::write_block(w, layer.bias);
  }
  for (const auto& p : model.trainable_params()) detail::write_block(w, p.tensor);

  out.bytes = w.bytes();
  return out;
}

template <typename S>
void save_checkpoint(const HccmModel<S>& model, const std::string& path) {
  atomic_write_file(path, serialize_checkpoint(model).bytes);
}

template <typename S>
uint64_t model_checksum(const HccmModel<S>& model) {
  return serialize_checkpoint(model).checksum();
}

template <typename S>
HccmModel<S> load_checkpoint(const std::string& path, uint64_t* checksum_out = nullptr) {
  auto bytes = read_file_bytes(path);
  BinaryReader r(bytes);
  r.expect_magic("HCCM", "checkpoint " + path);
  uint32_t version = r.u32();
  if (version != 1) throw IoError("checkpoint " + path + ": unsupported version");

  ModelConfig cfg;
  cfg.variant = static_cast<Variant>(r.u8());
  if (static_cast<uint8_t>(cfg.variant) > 3) {
    throw IoError("checkpoint " + path + ": bad variant byte");
  }
  cfg.image_w = static_cast<int>(r.u32());
  cfg.image_h = static_cast<int>(r.u32());
  cfg.image_c = static_cast<int>(r.u32());
  cfg.fixed_kernel = static_cast<int>(r.u32());
  cfg.fixed_channels.assign(r.u32(), 0);
  for (auto& c : cfg.fixed_channels) c = static_cast<int>(r.u32());
  cfg.trainable_kernel = static_cast<int>(r.u32());
  cfg.trainable_channels.assign(r.u32(), 0);
  for (auto& c : cfg.trainable_channels) c = static_cast<int>(r.u32());
  cfg.embed_dim = static_cast<int>(r.u32());
  cfg.categories = static_cast<int>(r.u32());
  cfg.user_table = static_cast<int>(r.u32());
  cfg.item_table = static_cast<int>(r.u32());
  cfg.pic_table = static_cast<int>(r.u32());
  cfg.category_table = static_cast<int>(r.u32());
  cfg.context_table = static_cast<int>(r.u32());
  cfg.num_context = static_cast<int>(r.u32());
  cfg.attn_reduction = static_cast<int>(r.u32());
  cfg.hidden.assign(r.u32(), 0);
  for (auto& hdim : cfg.hidden) hdim = static_cast<int>(r.u32());
  cfg.truncate = static_cast<int>(r.u32());

  HccmModel<S> model(cfg, /*seed=*/0);
  model.embedding("user").hash_seed = r.u64();
  for (auto& ctx : model.context_embeddings()) ctx.hash_seed = r.u64();
  model.embedding("item").hash_seed = r.u64();
  model.embedding("pic").hash_seed = r.u64();
  model.embedding("cat").hash_seed = r.u64();

  if (checksum_out != nullptr) {
    *checksum_out = fnv1a64(bytes.data() + r.pos(), bytes.size() - r.pos());
  }
  for (auto& layer : model.fixed().layers()) {
    detail::read_block(r, layer.kernel, "fixed kernel");
    detail::read_block(r, layer.bias, "fixed bias");
  }
  for (auto& p : model.trainable_params()) {
    Tensor<S> t = p.tensor;  // shared handle; reading fills the model's storage
    detail::read_block(r, t, p.name.c_str());
  }
  if (!r.at_end()) throw IoError("checkpoint " + path + ": trailing bytes");
  return model;
}

}  // namespace hccm

#endif  // HCCM_CHECKPOINT_HPP_
