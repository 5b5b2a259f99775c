// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "scd/core/types.hpp"
#include "scd/net/conv.hpp"

namespace scd::net {

enum class BackboneFamily { tiny, external };
enum class WeightTying { untied, tied };
enum class EncoderBranch { a, b };

std::string_view to_string(BackboneFamily f);
std::string_view to_string(WeightTying t);
BackboneFamily backbone_family_from_string(std::string_view s);
WeightTying weight_tying_from_string(std::string_view s);

struct LayerSpec {
  std::string name;
  int out_channels = 0;
  int stride = 1;
};

/// Encoder layer stack plus the tap: features are the output of layer
/// `tap_layer` (1-based). Every layer is 3x3 conv + ReLU.
struct BackboneSpec {
  BackboneFamily family = BackboneFamily::tiny;
  int input_channels = 3;
  std::vector<LayerSpec> layers;
  int tap_layer = 0;

  /// Four stages of (3x3 stride 1, 3x3 stride 2) with widths 16/32/64/128.
  static BackboneSpec tiny(int tap_layer = 8);

  int total_layers() const { return static_cast<int>(layers.size()); }
  /// Product of strides up to and including the tap.
  int tap_stride() const;
  int tap_channels() const;
  void validate() const;
};

template <typename Scalar>
struct FeatureTensor {
  Tensor<Scalar> values;
  int stride = 1;
};

/// Channel-axis concatenation; `a` occupies the first channels.
template <typename Scalar>
FeatureTensor<Scalar> fuse(const FeatureTensor<Scalar>& a, const FeatureTensor<Scalar>& b) {
  if (a.values.height != b.values.height || a.values.width != b.values.width || a.stride != b.stride)
    throw ShapeError("fuse: feature maps " + shape_string(a.values) + " and " + shape_string(b.values) +
                     " differ spatially");
  FeatureTensor<Scalar> out;
  out.stride = a.stride;
  out.values = Tensor<Scalar>(a.values.channels() + b.values.channels(), a.values.height, a.values.width);
  out.values.data.topRows(a.values.channels()) = a.values.data;
  out.values.data.bottomRows(b.values.channels()) = b.values.data;
  return out;
}

template <typename Scalar>
struct Encoder {
  std::vector<Conv2d<Scalar>> layers;
};

/// Per-parameter gradient buffers, aligned with ChangeModel::parameters().
template <typename Scalar>
struct ParamGrad {
  Matrix<Scalar> weight;
  Vector<Scalar> bias;
};
template <typename Scalar>
using Gradients = std::vector<ParamGrad<Scalar>>;

/// Activations kept by forward_train for the backward pass.
template <typename Scalar>
struct ForwardTrace {
  std::vector<Tensor<Scalar>> enc_a;  // enc_a[0] is the normalized input, enc_a[i + 1] the output of layer i
  std::vector<Tensor<Scalar>> enc_b;
  std::vector<Tensor<Scalar>> dec;  // dec[0] is the fused map, dec[j + 1] the output of block j
};

/// Two encoders (F1, F2), channel concatenation, upsampling decoder with a
/// logistic head.
template <typename Scalar>
class ChangeModel {
public:
  static constexpr double kProbClamp = 1e-7;

  ChangeModel() = default;
  ChangeModel(const ChangeModel& other);
  ChangeModel& operator=(const ChangeModel& other);
  ChangeModel(ChangeModel&&) noexcept = default;
  ChangeModel& operator=(ChangeModel&&) noexcept = default;

  /// He-initialized model; both encoders start from identical weights.
  /// Empty `decoder_widths` selects default_decoder_widths().
  static ChangeModel create(const BackboneSpec& spec, WeightTying tying, std::uint64_t seed,
                            std::vector<int> decoder_widths = {});

  /// Output channels of each upsampling block for a given tap stride:
  /// 64/32/16/8 for stride 16, the narrowest block last.
  static std::vector<int> default_decoder_widths(int tap_stride);

  const BackboneSpec& spec() const { return spec_; }
  WeightTying weight_tying() const { return tying_; }
  int trainable_tail_k() const { return tail_k_; }
  const std::vector<int>& decoder_widths() const { return decoder_widths_; }
  bool encoders_shared() const { return encoder_a_ == encoder_b_; }

  const Encoder<Scalar>& encoder(EncoderBranch branch) const {
    return branch == EncoderBranch::a ? *encoder_a_ : *encoder_b_;
  }

  FeatureTensor<Scalar> extract_features(const Raster& image, EncoderBranch branch) const;
  Plane<Scalar> decode_logits(const FeatureTensor<Scalar>& fused) const;
  ProbabilityMask<Scalar> decode(const FeatureTensor<Scalar>& fused) const;
  ProbabilityMask<Scalar> forward(const ImagePair& pair) const;

  /// Marks the last k encoder layers before the tap trainable and freezes
  /// the rest; the decoder is always trainable.
  void set_trainable_tail(int k);

  /// Distinct parameter sets in a fixed order: encoder a, encoder b (when
  /// untied), decoder blocks, head.
  std::vector<Conv2d<Scalar>*> parameters();
  std::vector<const Conv2d<Scalar>*> parameters() const;
  Eigen::Index parameter_count() const;

  Gradients<Scalar> zero_gradients() const;

  /// Forward pass that records activations; returns pre-logistic logits.
  Plane<Scalar> forward_train(const ImagePair& pair, ForwardTrace<Scalar>& trace) const;

  /// Accumulates d loss / d parameters into `grads` given d loss / d logits.
  /// Frozen layers receive no gradient.
  void backward(const ForwardTrace<Scalar>& trace, const Plane<Scalar>& dlogits, Gradients<Scalar>& grads) const;

  // Used by checkpoint loading and weight import.
  struct Parts {
    BackboneSpec spec;
    WeightTying tying = WeightTying::untied;
    int trainable_tail_k = 0;
    std::vector<int> decoder_widths;
  };
  static ChangeModel from_parts(const Parts& parts);
  Encoder<Scalar>& mutable_encoder(EncoderBranch branch) {
    return branch == EncoderBranch::a ? *encoder_a_ : *encoder_b_;
  }

private:
  void check_divisible(const Raster& image) const;
  Tensor<Scalar> encode(const Encoder<Scalar>& enc, const Raster& image, std::vector<Tensor<Scalar>>* trace) const;
  Plane<Scalar> decode_impl(const Tensor<Scalar>& fused, std::vector<Tensor<Scalar>>* trace) const;
  void encoder_backward(const Encoder<Scalar>& enc, const std::vector<Tensor<Scalar>>& acts, Tensor<Scalar> grad,
                        Gradients<Scalar>& grads, std::size_t slot_offset) const;
  std::size_t decoder_slot() const;

  BackboneSpec spec_;
  WeightTying tying_ = WeightTying::untied;
  int tail_k_ = 0;
  std::vector<int> decoder_widths_;
  std::shared_ptr<Encoder<Scalar>> encoder_a_;
  std::shared_ptr<Encoder<Scalar>> encoder_b_;
  std::vector<Conv2d<Scalar>> blocks_;
  Conv2d<Scalar> head_;
};

template <typename Scalar>
ChangeModel<Scalar> set_trainable_tail(ChangeModel<Scalar> model, int k) {
  model.set_trainable_tail(k);
  return model;
}

/// SHA-256 over the raw bytes of both encoders' parameters.
template <typename Scalar>
std::string encoder_hash(const ChangeModel<Scalar>& model);

/// SHA-256 over all parameter bytes.
template <typename Scalar>
std::string parameter_hash(const ChangeModel<Scalar>& model);

extern template class ChangeModel<float>;
extern template class ChangeModel<double>;

} // namespace scd::net
