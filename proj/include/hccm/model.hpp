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
// The CTR model ladder:
//
//   DIN           id/category features only, behaviors aggregated by
//                 attention against the candidate embedding
//   DIN+FixedCNN  adds per-image visual vectors pooled from the frozen
//                 stack (two-stage baseline: no trainable visual params)
//   HCM           adds the trainable CNN behind a channel-attention gate
//                 computed from pooled features
//   HCCM          adds the learnable category prior, both inside the gate
//                 and as an extra channel concatenated to the gated map
//
// The non-visual path is identical across variants; variants differ only
// in how the per-image visual vector is produced.

#ifndef HCCM_MODEL_HPP_
#define HCCM_MODEL_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hccm/data.hpp"
#include "hccm/feature_cache.hpp"
#include "hccm/fixed_cnn.hpp"
#include "hccm/nn.hpp"
#include "hccm/tensor.hpp"

namespace hccm {

enum class Variant : uint8_t { Din = 0, DinFixedCnn = 1, Hcm = 2, Hccm = 3 };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Din:
      return "DIN";
    case Variant::DinFixedCnn:
      return "DIN+FixedCNN";
    case Variant::Hcm:
      return "HCM";
    case Variant::Hccm:
      return "HCCM";
  }
  throw ContractError("unknown variant");
}

inline Variant parse_variant(const std::string& name) {
  for (Variant v : {Variant::Din, Variant::DinFixedCnn, Variant::Hcm, Variant::Hccm}) {
    if (name == variant_name(v)) return v;
  }
  throw ConfigError("unknown variant '" + name +
                    "' (expected DIN, DIN+FixedCNN, HCM, or HCCM)");
}

struct ModelConfig {
  Variant variant = Variant::Hccm;
  int image_w = 32, image_h = 32, image_c = 3;
  std::vector<int> fixed_channels{8, 12, 16};    // stride-2 stages
  int fixed_kernel = 3;
  std::vector<int> trainable_channels{16, 32};   // stride-1 same-padding stages
  int trainable_kernel = 3;
  int embed_dim = 8;
  int categories = 8;
  // Small id tables are deliberate at desk scale: heavy bucket sharing
  // keeps pic/item embeddings from memorizing per-image appearance, which
  // only the visual path should provide.
  int user_table = 64;
  int item_table = 64;
  int pic_table = 64;
  int category_table = 8;
  int context_table = 64;
  int num_context = 2;
  int attn_reduction = 4;
  std::vector<int> hidden{400, 160, 80};
  int truncate = 10;

  int map_w() const {
    int w = image_w;
    for (size_t i = 0; i < fixed_channels.size(); ++i) w = (w + 1) / 2;
    return w;
  }
  int map_h() const {
    int h = image_h;
    for (size_t i = 0; i < fixed_channels.size(); ++i) h = (h + 1) / 2;
    return h;
  }
  int map_c() const { return fixed_channels.empty() ? 0 : fixed_channels.back(); }
  int prior_len() const { return map_w() * map_h(); }
  int dv() const { return trainable_channels.empty() ? 0 : trainable_channels.back(); }

  // Channels entering the trainable stack: the gated map, plus the
  // reshaped prior as one extra channel for HCCM.
  int trainable_in() const { return map_c() + (variant == Variant::Hccm ? 1 : 0); }
  // Shared attention MLP input: pooled channels, plus the prior for HCCM.
  int attn_in() const { return map_c() + (variant == Variant::Hccm ? prior_len() : 0); }
  int attn_bottleneck() const { return std::max(map_c() / attn_reduction, 4); }

  // user + contexts + item + candidate pic/cat embeddings, plus the
  // aggregated behavior (pic, cat) pair.
  int nonvisual_dim() const { return embed_dim * (6 + num_context); }
  int visual_dim() const {
    switch (variant) {
      case Variant::Din:
        return 0;
      case Variant::DinFixedCnn:
        return map_c();
      case Variant::Hcm:
      case Variant::Hccm:
        return dv();
    }
    throw ContractError("unknown variant");
  }
  int head_in() const { return nonvisual_dim() + visual_dim(); }

  void validate() const {
    if (image_w < 1 || image_h < 1 || image_c < 1) throw ConfigError("model: bad image extents");
    if (embed_dim < 1) throw ConfigError("model.embed_dim: must be positive");
    if (categories < 1) throw ConfigError("model.categories: must be positive");
    if (num_context < 0) throw ConfigError("model.num_context: must be >= 0");
    if (truncate < 0) throw ConfigError("model.truncate: must be >= 0");
    if (attn_reduction < 1) throw ConfigError("model.attn_reduction: must be positive");
    if (fixed_kernel < 1 || trainable_kernel < 1) throw ConfigError("model: bad kernel size");
    if (variant != Variant::Din) {
      if (fixed_channels.empty()) throw ConfigError("model.fixed_channels: required");
      if (map_w() < 1 || map_h() < 1) throw ConfigError("model: fixed stack exhausts the image");
    }
    if (variant == Variant::Hcm || variant == Variant::Hccm) {
      if (trainable_channels.empty()) throw ConfigError("model.trainable_channels: required");
    }
    for (int hdim : hidden) {
      if (hdim < 1) throw ConfigError("model.hidden: dims must be positive");
    }
  }
};

template <typename S>
struct NamedParam {
  std::string name;
  Tensor<S> tensor;
};

// Per-batch memo of pooled visual vectors keyed by (pic, category). Reusing
// the graph node makes gradients of repeated pics accumulate through one
// shared subgraph instead of recomputing the tower.
template <typename S>
using VisualMemo = std::unordered_map<uint64_t, Tensor<S>>;

template <typename S>
class HccmModel {
 public:
  HccmModel(ModelConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    fixed_ = FixedCnn::init(cfg_.image_c, cfg_.fixed_channels, cfg_.fixed_kernel,
                            derive_seed(seed, kFixedStream));
    // Near-zero embedding init: rows the trainer never touches (disjoint
    // test users, rare buckets) stay essentially neutral at evaluation
    // time, while the scale stays large enough to keep the relu stack and
    // its gradients alive.
    auto make_table = [&](int size, uint64_t stream) {
      Rng rng(seed, stream);
      return EmbeddingTable<S>::init(size, cfg_.embed_dim, derive_seed(seed, stream ^ kHashSalt),
                                     rng, 0.01);
    };
    user_emb_ = make_table(cfg_.user_table, 10);
    for (int i = 0; i < cfg_.num_context; ++i) {
      ctx_emb_.push_back(make_table(cfg_.context_table, 11 + static_cast<uint64_t>(i)));
    }
    item_emb_ = make_table(cfg_.item_table, 40);
    pic_emb_ = make_table(cfg_.pic_table, 41);
    cat_emb_ = make_table(cfg_.category_table, 42);

    if (has_trainable_cnn()) {
      Rng rng(seed, 50);
      const std::vector<Activation> acts{Activation::Relu, Activation::None};
      attn_mlp_ = Mlp<S>::init(cfg_.attn_in(),
                               std::vector<int>{cfg_.attn_bottleneck(), cfg_.map_c()}, acts, rng);
      Rng conv_rng(seed, 51);
      int cin = cfg_.trainable_in();
      for (int cout : cfg_.trainable_channels) {
        int k = cfg_.trainable_kernel;
        double stddev = std::sqrt(2.0 / (static_cast<double>(k) * k * cin));
        ArrayX<S> kv(static_cast<int64_t>(k) * k * cin * cout);
        for (int64_t i = 0; i < kv.size(); ++i) {
          kv[i] = static_cast<S>(conv_rng.next_gaussian() * stddev);
        }
        ConvLayer layer;
        layer.kernel = Tensor<S>::from({k, k, cin, cout}, std::move(kv)).set_requires_grad(true);
        layer.bias = Tensor<S>::zeros({cout}).set_requires_grad(true);
        trainable_.push_back(std::move(layer));
        cin = cout;
      }
    }
    if (cfg_.variant == Variant::Hccm) {
      // Zero-init: HCCM starts as HCM plus a dead prior channel.
      prior_table_ =
          Tensor<S>::zeros({cfg_.categories, cfg_.prior_len()}).set_requires_grad(true);
    }
    {
      Rng rng(seed, 60);
      std::vector<int> dims = cfg_.hidden;
      dims.push_back(1);
      std::vector<Activation> acts(cfg_.hidden.size(), Activation::Relu);
      acts.push_back(Activation::None);
      head_ = Mlp<S>::init(cfg_.head_in(), dims, acts, rng);
    }
  }

  const ModelConfig& config() const { return cfg_; }
  Variant variant() const { return cfg_.variant; }
  const FixedCnn& fixed() const { return fixed_; }
  FixedCnn& fixed() { return fixed_; }
  bool has_trainable_cnn() const {
    return cfg_.variant == Variant::Hcm || cfg_.variant == Variant::Hccm;
  }

  // Frozen feature map for one image, widened from the 32-bit stack.
  Tensor<S> fixed_map(const ImageF& img) const {
    if (img.w != cfg_.image_w || img.h != cfg_.image_h || img.c != cfg_.image_c) {
      throw ShapeError("fixed_map: image extents do not match the configured input");
    }
    FeatureMapF m = fixed_.forward(img);
    return Tensor<S>::from_floats({m.w, m.h, m.c}, m.v.data());
  }

  Tensor<S> prior_vector(uint16_t cat) const {
    if (cfg_.variant != Variant::Hccm) throw ContractError("prior_vector: HCCM only");
    return row(prior_table_, static_cast<int>(cat));
  }

  // M = sigmoid(MLP([AvgP(F), v]) + MLP([MaxP(F), v])); the same MLP
  // instance serves both pooling branches and both user/item paths.
  // Without a prior (HCM) the pooled vector alone feeds the MLP.
  Tensor<S> channel_attention(const Tensor<S>& fmap, const Tensor<S>* prior) const {
    if (!has_trainable_cnn()) throw ContractError("channel_attention: HCM/HCCM only");
    if (prior != nullptr && prior->dim(0) != cfg_.prior_len()) {
      throw ShapeError("channel_attention: prior length " + std::to_string(prior->dim(0)) +
                       " != w*h = " + std::to_string(cfg_.prior_len()));
    }
    Tensor<S> pooled_avg = global_pool(Pool::Avg, fmap);
    Tensor<S> pooled_max = global_pool(Pool::Max, fmap);
    Tensor<S> in_avg = prior ? concat<S>({pooled_avg, *prior}, 0) : pooled_avg;
    Tensor<S> in_max = prior ? concat<S>({pooled_max, *prior}, 0) : pooled_max;
    return sigmoid(add(attn_mlp_.forward(in_avg), attn_mlp_.forward(in_max)));
  }

  // Gates the map by M and appends the prior, reshaped row-major to one
  // [w x h] channel.
  Tensor<S> fuse_prior(const Tensor<S>& fmap, const Tensor<S>& gate,
                       const Tensor<S>& prior) const {
    Tensor<S> gated = channel_scale(fmap, gate);
    Tensor<S> prior_channel = reshape(prior, {fmap.dim(0), fmap.dim(1), 1});
    return concat<S>({gated, prior_channel}, 2);
  }

  // Trainable stack then global average pooling to a dv-vector.
  Tensor<S> trainable_cnn_forward(const Tensor<S>& fused) const {
    if (!has_trainable_cnn()) throw ContractError("trainable_cnn_forward: HCM/HCCM only");
    if (fused.rank() != 3 || fused.dim(2) != cfg_.trainable_in()) {
      throw ShapeError("trainable_cnn_forward: expected " +
                       std::to_string(cfg_.trainable_in()) + " input channels, got " +
                       shape_str(fused.shape()));
    }
    Tensor<S> h = fused;
    for (const auto& layer : trainable_) {
      h = relu(channel_bias(conv2d(h, layer.kernel, 1, Padding::Same), layer.bias));
    }
    return global_pool(Pool::Avg, h);
  }

  // Final pooled visual vector for one (pic, category).
  Tensor<S> visual_vector(uint64_t pic, uint16_t cat, const FeatureMapSource<S>& maps) const {
    switch (cfg_.variant) {
      case Variant::Din:
        throw UnsupportedVariantError("DIN has no visual path");
      case Variant::DinFixedCnn:
        return global_pool(Pool::Avg, maps.map_for(pic));
      case Variant::Hcm: {
        Tensor<S> f = maps.map_for(pic);
        Tensor<S> gate = channel_attention(f, nullptr);
        return trainable_cnn_forward(channel_scale(f, gate));
      }
      case Variant::Hccm: {
        Tensor<S> f = maps.map_for(pic);
        Tensor<S> v = prior_vector(cat);
        Tensor<S> gate = channel_attention(f, &v);
        return trainable_cnn_forward(fuse_prior(f, gate, v));
      }
    }
    throw ContractError("unknown variant");
  }

  // Attention aggregation of behavior vectors with the candidate vector as
  // the query; an empty behavior set degrades to the zero vector.
  Tensor<S> aggregate(std::span<const Tensor<S>> user_vecs, const Tensor<S>& item_vec) const {
    if (user_vecs.empty()) return Tensor<S>::zeros({item_vec.dim(0)});
    Tensor<S> rows = stack_rows(user_vecs);
    return attention(item_vec, rows, rows);
  }

  void validate_sample(const Sample& s) const {
    if (static_cast<int>(s.context_ids.size()) != cfg_.num_context) {
      throw ConfigError("sample: expected " + std::to_string(cfg_.num_context) +
                        " context ids, got " + std::to_string(s.context_ids.size()));
    }
    if (cfg_.variant == Variant::Hccm) {
      if (static_cast<int>(s.cand_cat) >= cfg_.categories) {
        throw ConfigError("sample: candidate category " + std::to_string(s.cand_cat) +
                          " out of range for " + std::to_string(cfg_.categories) + " categories");
      }
      for (const auto& b : s.behaviors) {
        if (static_cast<int>(b.cat) >= cfg_.categories) {
          throw ConfigError("sample: behavior category out of range");
        }
      }
    }
  }

  // Full forward pass. `memo`, when given, shares the visual tower of
  // repeated (pic, category) pairs within one taped pass.
  Tensor<S> forward(const Sample& s, const FeatureMapSource<S>& maps,
                    VisualMemo<S>* memo = nullptr) const {
    return forward_visual(s, [&](uint64_t pic, uint16_t cat) {
      if (memo == nullptr) return visual_vector(pic, cat, maps);
      uint64_t key = (pic << 16) | cat;
      auto it = memo->find(key);
      if (it != memo->end()) return it->second;
      Tensor<S> v = visual_vector(pic, cat, maps);
      memo->emplace(key, v);
      return v;
    });
  }

  // Shared assembly used by both the training path and the table-serving
  // path: the two may differ only in where visual vectors come from.
  Tensor<S> forward_visual(const Sample& s,
                           const std::function<Tensor<S>(uint64_t, uint16_t)>& visual) const {
    validate_sample(s);
    std::span<const BehaviorItem> behaviors(s.behaviors);
    if (static_cast<int>(behaviors.size()) > cfg_.truncate) {
      behaviors = behaviors.subspan(behaviors.size() - static_cast<size_t>(cfg_.truncate));
    }

    Tensor<S> cand_pic_e = pic_emb_.embed(s.cand_pic);
    Tensor<S> cand_cat_e = cat_emb_.embed(s.cand_cat);

    std::vector<Tensor<S>> parts;
    parts.push_back(user_emb_.embed(s.user_id));
    for (int i = 0; i < cfg_.num_context; ++i) {
      parts.push_back(ctx_emb_[static_cast<size_t>(i)].embed(s.context_ids[static_cast<size_t>(i)]));
    }
    parts.push_back(item_emb_.embed(s.item_id));
    parts.push_back(cand_pic_e);
    parts.push_back(cand_cat_e);

    // Behavior aggregation in id space (all variants).
    if (behaviors.empty()) {
      parts.push_back(Tensor<S>::zeros({2 * cfg_.embed_dim}));
    } else {
      std::vector<Tensor<S>> rows;
      rows.reserve(behaviors.size());
      for (const auto& b : behaviors) {
        rows.push_back(concat<S>({pic_emb_.embed(b.pic), cat_emb_.embed(b.cat)}, 0));
      }
      parts.push_back(aggregate(rows, concat<S>({cand_pic_e, cand_cat_e}, 0)));
    }

    // Visual path (variant-dependent).
    if (cfg_.variant != Variant::Din) {
      Tensor<S> item_vec = visual(s.cand_pic, s.cand_cat);
      if (behaviors.empty()) {
        parts.push_back(Tensor<S>::zeros({cfg_.visual_dim()}));
      } else {
        std::vector<Tensor<S>> rows;
        rows.reserve(behaviors.size());
        for (const auto& b : behaviors) rows.push_back(visual(b.pic, b.cat));
        parts.push_back(aggregate(rows, item_vec));
      }
    }

    Tensor<S> x = concat(std::span<const Tensor<S>>(parts), 0);
    Tensor<S> yhat = sigmoid(head_.forward(x));
    S y = yhat.value_at(0);
    if (!(y > S(0) && y < S(1))) {
      throw NumericError("forward: yhat left (0,1); parameters have diverged");
    }
    return yhat;
  }

  // Trainable parameters in checkpoint block order. Frozen fixed-CNN
  // parameters are intentionally absent: they must never see an update.
  std::vector<NamedParam<S>> trainable_params() const {
    std::vector<NamedParam<S>> out;
    if (has_trainable_cnn()) {
      for (size_t i = 0; i < trainable_.size(); ++i) {
        out.push_back({"trainable_cnn." + std::to_string(i) + ".kernel", trainable_[i].kernel});
        out.push_back({"trainable_cnn." + std::to_string(i) + ".bias", trainable_[i].bias});
      }
      for (size_t i = 0; i < attn_mlp_.layers.size(); ++i) {
        out.push_back({"attn_mlp." + std::to_string(i) + ".weight", attn_mlp_.layers[i].weight});
        out.push_back({"attn_mlp." + std::to_string(i) + ".bias", attn_mlp_.layers[i].bias});
      }
    }
    if (cfg_.variant == Variant::Hccm) {
      out.push_back({"prior_table", prior_table_});
    }
    for (size_t i = 0; i < head_.layers.size(); ++i) {
      out.push_back({"head." + std::to_string(i) + ".weight", head_.layers[i].weight});
      out.push_back({"head." + std::to_string(i) + ".bias", head_.layers[i].bias});
    }
    out.push_back({"embed.user", user_emb_.weights});
    for (size_t i = 0; i < ctx_emb_.size(); ++i) {
      out.push_back({"embed.ctx" + std::to_string(i), ctx_emb_[i].weights});
    }
    out.push_back({"embed.item", item_emb_.weights});
    out.push_back({"embed.pic", pic_emb_.weights});
    out.push_back({"embed.cat", cat_emb_.weights});
    return out;
  }

  struct ConvLayer {
    Tensor<S> kernel;
    Tensor<S> bias;
  };

  // Mutable access for checkpoint loading and weight-surgery tests.
  std::vector<ConvLayer>& trainable_layers() { return trainable_; }
  const std::vector<ConvLayer>& trainable_layers() const { return trainable_; }
  Mlp<S>& attn_mlp() { return attn_mlp_; }
  const Mlp<S>& attn_mlp() const { return attn_mlp_; }
  Mlp<S>& head() { return head_; }
  Tensor<S>& prior_table() { return prior_table_; }
  const Tensor<S>& prior_table() const { return prior_table_; }
  EmbeddingTable<S>& embedding(const std::string& which) {
    return const_cast<EmbeddingTable<S>&>(std::as_const(*this).embedding(which));
  }
  const EmbeddingTable<S>& embedding(const std::string& which) const {
    if (which == "user") return user_emb_;
    if (which == "item") return item_emb_;
    if (which == "pic") return pic_emb_;
    if (which == "cat") return cat_emb_;
    throw ContractError("unknown embedding " + which);
  }
  std::vector<EmbeddingTable<S>>& context_embeddings() { return ctx_emb_; }
  const std::vector<EmbeddingTable<S>>& context_embeddings() const { return ctx_emb_; }

 private:
  static constexpr uint64_t kFixedStream = 7001;
  static constexpr uint64_t kHashSalt = 0x9157;

  ModelConfig cfg_;
  FixedCnn fixed_;
  EmbeddingTable<S> user_emb_, item_emb_, pic_emb_, cat_emb_;
  std::vector<EmbeddingTable<S>> ctx_emb_;
  Mlp<S> attn_mlp_;
  Tensor<S> prior_table_;
  std::vector<ConvLayer> trainable_;
  Mlp<S> head_;
};

}  // namespace hccm

#endif  // HCCM_MODEL_HPP_
