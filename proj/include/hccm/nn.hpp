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
// Reusable parameterized layers: hashed embedding tables, MLPs, and
// scaled dot-product attention.

#ifndef HCCM_NN_HPP_
#define HCCM_NN_HPP_

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hccm/hash.hpp"
#include "hccm/tensor.hpp"

namespace hccm {

// Hashed embedding: any 64-bit id maps to a row of a power-of-two table.
// Collisions share a row, as production hashtable embeddings do.
template <typename S>
struct EmbeddingTable {
  int table_size = 0;
  int dim = 0;
  uint64_t hash_seed = 0;
  Tensor<S> weights;  // [table_size x dim]

  static EmbeddingTable init(int table_size, int dim, uint64_t hash_seed, Rng& rng,
                             double stddev = 0.05) {
    if (table_size <= 0 || (table_size & (table_size - 1)) != 0) {
      throw ConfigError("embedding table size must be a positive power of two, got " +
                        std::to_string(table_size));
    }
    if (dim <= 0) throw ConfigError("embedding dim must be positive");
    EmbeddingTable t;
    t.table_size = table_size;
    t.dim = dim;
    t.hash_seed = hash_seed;
    ArrayX<S> w(static_cast<int64_t>(table_size) * dim);
    for (int64_t i = 0; i < w.size(); ++i) w[i] = static_cast<S>(rng.next_gaussian() * stddev);
    t.weights = Tensor<S>::from({table_size, dim}, std::move(w));
    t.weights.set_requires_grad(true);
    return t;
  }

  int bucket(uint64_t id) const {
    return static_cast<int>(mix64(id ^ hash_seed) & static_cast<uint64_t>(table_size - 1));
  }

  Tensor<S> embed(uint64_t id) const { return row(weights, bucket(id)); }
};

enum class Activation { None, Relu, Sigmoid };

template <typename S>
Tensor<S> activate(Activation act, const Tensor<S>& x) {
  switch (act) {
    case Activation::Relu:
      return relu(x);
    case Activation::Sigmoid:
      return sigmoid(x);
    case Activation::None:
      return x;
  }
  throw ContractError("unknown activation");
}

// Chain of affine layers with per-layer activations, on rank-1 inputs.
template <typename S>
struct Mlp {
  struct Layer {
    Tensor<S> weight;  // [out x in]
    Tensor<S> bias;    // [out]
    Activation act = Activation::None;
  };
  std::vector<Layer> layers;

  // He-style fan-in initialization; biases start at zero.
  static Mlp init(int in_dim, std::span<const int> dims, std::span<const Activation> acts,
                  Rng& rng) {
    if (dims.size() != acts.size()) throw ConfigError("mlp: dims/acts length mismatch");
    Mlp m;
    int fan_in = in_dim;
    for (size_t l = 0; l < dims.size(); ++l) {
      int out = dims[l];
      if (out <= 0 || fan_in <= 0) throw ConfigError("mlp: layer dims must be positive");
      double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
      ArrayX<S> w(static_cast<int64_t>(out) * fan_in);
      for (int64_t i = 0; i < w.size(); ++i) w[i] = static_cast<S>(rng.next_gaussian() * stddev);
      Layer layer;
      layer.weight = Tensor<S>::from({out, fan_in}, std::move(w)).set_requires_grad(true);
      layer.bias = Tensor<S>::zeros({out}).set_requires_grad(true);
      layer.act = acts[l];
      m.layers.push_back(std::move(layer));
      fan_in = out;
    }
    return m;
  }

  int in_dim() const { return layers.empty() ? 0 : layers.front().weight.dim(1); }
  int out_dim() const { return layers.empty() ? 0 : layers.back().weight.dim(0); }

  Tensor<S> forward(const Tensor<S>& x) const {
    if (x.rank() != 1 || x.dim(0) != in_dim()) {
      throw ShapeError("mlp: input " + shape_str(x.shape()) + " does not match first layer in=" +
                       std::to_string(in_dim()));
    }
    Tensor<S> h = x;
    for (const auto& layer : layers) {
      h = add(matvec(layer.weight, h), layer.bias);
      h = activate(layer.act, h);
    }
    return h;
  }
};

// Scaled dot-product attention with a single head and no projections:
// weights = softmax(keys . query / sqrt(d)) over unmasked rows, output is
// the weighted sum of value rows. Rows are a set; no positional encoding.
template <typename S>
Tensor<S> attention(const Tensor<S>& query, const Tensor<S>& keys, const Tensor<S>& values,
                    const std::vector<uint8_t>& mask = {}) {
  if (query.rank() != 1 || keys.rank() != 2 || values.rank() != 2) {
    throw ShapeError("attention: expected query [d], keys [n x d], values [n x dv]");
  }
  if (keys.dim(1) != query.dim(0)) throw ShapeError("attention: key dim != query dim");
  if (values.dim(0) != keys.dim(0)) throw ShapeError("attention: value rows != key rows");
  S inv_sqrt_d = S(1) / static_cast<S>(std::sqrt(static_cast<double>(query.dim(0))));
  Tensor<S> scores = scale(matvec(keys, query), inv_sqrt_d);
  Tensor<S> weights = softmax(scores, mask);
  return vecmat(weights, values);
}

}  // namespace hccm

#endif  // HCCM_NN_HPP_
