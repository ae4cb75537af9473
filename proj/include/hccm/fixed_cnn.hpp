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

#ifndef HCCM_FIXED_CNN_HPP_
#define HCCM_FIXED_CNN_HPP_

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "hccm/data.hpp"
#include "hccm/hash.hpp"
#include "hccm/io.hpp"
#include "hccm/tensor.hpp"

namespace hccm {

// Frozen shallow feature extractor: a stack of stride-2 same-padding conv
// stages with relu, standing in for pretrained shallow layers. Weights are
// drawn once from a seeded initializer and never receive gradients.
//
// The stack always evaluates in 32-bit regardless of the training scalar,
// matching its 32-bit on-disk parameterization. Stored feature maps
// therefore reload bit-exactly, and cached vs on-the-fly training paths
// agree to the last bit even in 64-bit mode.
class FixedCnn {
 public:
  struct Layer {
    Tensor<float> kernel;  // [k, k, cin, cout]
    Tensor<float> bias;    // [cout]
  };

  FixedCnn() = default;

  static FixedCnn init(int in_channels, std::span<const int> channels, int kernel,
                       uint64_t seed) {
    FixedCnn cnn;
    Rng rng(seed);
    int cin = in_channels;
    for (int cout : channels) {
      double stddev = std::sqrt(2.0 / (static_cast<double>(kernel) * kernel * cin));
      ArrayX<float> w(static_cast<int64_t>(kernel) * kernel * cin * cout);
      for (int64_t i = 0; i < w.size(); ++i) {
        w[i] = static_cast<float>(rng.next_gaussian() * stddev);
      }
      Layer layer;
      layer.kernel = Tensor<float>::from({kernel, kernel, cin, cout}, std::move(w));
      layer.bias = Tensor<float>::zeros({cout});
      cnn.layers_.push_back(std::move(layer));
      cin = cout;
    }
    cnn.calibrate(in_channels, rng);
    return cnn;
  }

  FeatureMapF forward(const ImageF& img) const {
    Tensor<float> h = Tensor<float>::from(
        {img.w, img.h, img.c}, std::vector<float>(img.pix.begin(), img.pix.end()));
    for (const auto& layer : layers_) {
      h = relu(channel_bias(conv2d(h, layer.kernel, 2, Padding::Same), layer.bias));
    }
    FeatureMapF out;
    out.w = h.dim(0);
    out.h = h.dim(1);
    out.c = h.dim(2);
    out.v.assign(h.values().data(), h.values().data() + h.size());
    return out;
  }

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  bool empty() const { return layers_.empty(); }
  int out_channels() const { return layers_.empty() ? 0 : layers_.back().kernel.dim(3); }

  // Checksum over the serialized frozen parameters; binds cache files to
  // the exact weights that produced them.
  uint64_t checksum() const {
    BinaryWriter w;
    for (const auto& layer : layers_) {
      w.f32_array(layer.kernel.values().data(), static_cast<size_t>(layer.kernel.size()));
      w.f32_array(layer.bias.values().data(), static_cast<size_t>(layer.bias.size()));
    }
    return fnv1a64(w.bytes().data(), w.size());
  }

 private:
  // Rescales the last layer so feature maps come out at unit RMS on probe
  // noise, the way a properly normalized pretrained extractor would. With
  // tiny activations the attention dot-products collapse toward a uniform
  // softmax and the visual path goes silent.
  void calibrate(int in_channels, Rng& rng) {
    double sum_sq = 0.0;
    int64_t count = 0;
    for (int probe = 0; probe < 8; ++probe) {
      ImageF img;
      img.w = 16;
      img.h = 16;
      img.c = in_channels;
      img.pix.resize(static_cast<size_t>(img.size()));
      for (auto& p : img.pix) p = static_cast<float>(rng.next_double());
      FeatureMapF out = forward(img);
      for (float v : out.v) sum_sq += static_cast<double>(v) * v;
      count += static_cast<int64_t>(out.v.size());
    }
    double rms = std::sqrt(sum_sq / static_cast<double>(count));
    if (rms > 0) {
      layers_.back().kernel.values() *= static_cast<float>(1.0 / rms);
    }
  }

  std::vector<Layer> layers_;
};

}  // namespace hccm

#endif  // HCCM_FIXED_CNN_HPP_
