// SPDX-License-Identifier: Apache-2.0

#include "scd/net/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>

#include "scd/core/hash.hpp"
#include "scd/objective/loss.hpp"

namespace scd::net {

std::string_view to_string(BackboneFamily f) { return f == BackboneFamily::tiny ? "tiny" : "external"; }

std::string_view to_string(WeightTying t) { return t == WeightTying::tied ? "tied" : "untied"; }

BackboneFamily backbone_family_from_string(std::string_view s) {
  if (s == "tiny") return BackboneFamily::tiny;
  if (s == "external") return BackboneFamily::external;
  throw ConfigError("unknown backbone family '" + std::string(s) + "'");
}

WeightTying weight_tying_from_string(std::string_view s) {
  if (s == "tied" || s == "true") return WeightTying::tied;
  if (s == "untied" || s == "false") return WeightTying::untied;
  throw ConfigError("unknown weight tying '" + std::string(s) + "'");
}

BackboneSpec BackboneSpec::tiny(int tap_layer) {
  BackboneSpec spec;
  spec.family = BackboneFamily::tiny;
  int idx = 0;
  for (int width : {16, 32, 64, 128}) {
    spec.layers.push_back({"conv" + std::to_string(idx++), width, 1});
    spec.layers.push_back({"conv" + std::to_string(idx++), width, 2});
  }
  spec.tap_layer = tap_layer;
  return spec;
}

int BackboneSpec::tap_stride() const {
  int stride = 1;
  for (int i = 0; i < tap_layer && i < total_layers(); ++i) stride *= layers[static_cast<std::size_t>(i)].stride;
  return stride;
}

int BackboneSpec::tap_channels() const { return layers.at(static_cast<std::size_t>(tap_layer - 1)).out_channels; }

void BackboneSpec::validate() const {
  if (layers.empty()) throw ConfigError("backbone has no layers");
  if (tap_layer < 1 || tap_layer > total_layers())
    throw ConfigError("tap_layer " + std::to_string(tap_layer) + " outside [1, " + std::to_string(total_layers()) + "]");
  if (input_channels < 1) throw ConfigError("backbone input_channels must be >= 1");
  for (const auto& l : layers) {
    if (l.out_channels < 1) throw ConfigError("layer " + l.name + " has no output channels");
    if (l.stride != 1 && l.stride != 2) throw ConfigError("layer " + l.name + " stride must be 1 or 2");
  }
}

template <typename Scalar>
ChangeModel<Scalar>::ChangeModel(const ChangeModel& other)
    : spec_(other.spec_),
      tying_(other.tying_),
      tail_k_(other.tail_k_),
      decoder_widths_(other.decoder_widths_),
      blocks_(other.blocks_),
      head_(other.head_) {
  if (other.encoder_a_) encoder_a_ = std::make_shared<Encoder<Scalar>>(*other.encoder_a_);
  if (other.encoder_b_)
    encoder_b_ = other.encoders_shared() ? encoder_a_ : std::make_shared<Encoder<Scalar>>(*other.encoder_b_);
}

template <typename Scalar>
ChangeModel<Scalar>& ChangeModel<Scalar>::operator=(const ChangeModel& other) {
  if (this != &other) *this = ChangeModel(other);
  return *this;
}

template <typename Scalar>
std::vector<int> ChangeModel<Scalar>::default_decoder_widths(int tap_stride) {
  std::vector<int> widths;
  const int blocks = std::countr_zero(static_cast<unsigned>(tap_stride));
  for (int j = 0; j < blocks; ++j) widths.push_back(std::min(64, 8 << (blocks - 1 - j)));
  return widths;
}

template <typename Scalar>
ChangeModel<Scalar> ChangeModel<Scalar>::from_parts(const Parts& parts) {
  parts.spec.validate();
  const int stride = parts.spec.tap_stride();
  if (!std::has_single_bit(static_cast<unsigned>(stride)))
    throw ConfigError("tap stride " + std::to_string(stride) + " is not a power of 2");

  ChangeModel m;
  m.spec_ = parts.spec;
  m.tying_ = parts.tying;
  m.decoder_widths_ = parts.decoder_widths.empty() ? default_decoder_widths(stride) : parts.decoder_widths;
  if (static_cast<int>(m.decoder_widths_.size()) != std::countr_zero(static_cast<unsigned>(stride)))
    throw ConfigError("decoder needs one width per x2 upsampling block");

  Encoder<Scalar> enc;
  int in = parts.spec.input_channels;
  for (int i = 0; i < parts.spec.tap_layer; ++i) {
    const LayerSpec& l = parts.spec.layers[static_cast<std::size_t>(i)];
    Conv2d<Scalar> conv;
    conv.name = l.name;
    conv.in_channels = in;
    conv.out_channels = l.out_channels;
    conv.kernel = 3;
    conv.stride = l.stride;
    conv.weight = Matrix<Scalar>::Zero(l.out_channels, in * 9);
    conv.bias = Vector<Scalar>::Zero(l.out_channels);
    enc.layers.push_back(std::move(conv));
    in = l.out_channels;
  }
  m.encoder_a_ = std::make_shared<Encoder<Scalar>>(enc);
  m.encoder_b_ = parts.tying == WeightTying::tied ? m.encoder_a_ : std::make_shared<Encoder<Scalar>>(enc);

  in = 2 * parts.spec.tap_channels();
  for (std::size_t j = 0; j < m.decoder_widths_.size(); ++j) {
    Conv2d<Scalar> conv;
    conv.name = "up" + std::to_string(j);
    conv.in_channels = in;
    conv.out_channels = m.decoder_widths_[j];
    conv.kernel = 3;
    conv.stride = 1;
    conv.weight = Matrix<Scalar>::Zero(conv.out_channels, in * 9);
    conv.bias = Vector<Scalar>::Zero(conv.out_channels);
    m.blocks_.push_back(std::move(conv));
    in = m.decoder_widths_[j];
  }
  m.head_.name = "head";
  m.head_.in_channels = in;
  m.head_.out_channels = 1;
  m.head_.kernel = 1;
  m.head_.stride = 1;
  m.head_.weight = Matrix<Scalar>::Zero(1, in);
  m.head_.bias = Vector<Scalar>::Zero(1);

  m.set_trainable_tail(parts.trainable_tail_k);
  return m;
}

template <typename Scalar>
ChangeModel<Scalar> ChangeModel<Scalar>::create(const BackboneSpec& spec, WeightTying tying, std::uint64_t seed,
                                                std::vector<int> decoder_widths) {
  Parts parts{spec, tying, spec.tap_layer, std::move(decoder_widths)};
  ChangeModel m = from_parts(parts);

  std::mt19937_64 rng(seed);
  auto he_init = [&rng](Conv2d<Scalar>& conv) {
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(conv.weight.cols())));
    for (Eigen::Index i = 0; i < conv.weight.size(); ++i) conv.weight.data()[i] = static_cast<Scalar>(normal(rng));
    conv.bias.setZero();
  };
  for (auto& conv : m.encoder_a_->layers) he_init(conv);
  if (!m.encoders_shared()) *m.encoder_b_ = *m.encoder_a_;
  for (auto& conv : m.blocks_) he_init(conv);
  he_init(m.head_);
  return m;
}

template <typename Scalar>
void ChangeModel<Scalar>::set_trainable_tail(int k) {
  if (k < 0 || k > spec_.tap_layer)
    throw ConfigError("trainable tail k=" + std::to_string(k) + " outside [0, " + std::to_string(spec_.tap_layer) + "]");
  tail_k_ = k;
  for (auto* enc : {encoder_a_.get(), encoder_b_.get()})
    for (int i = 0; i < static_cast<int>(enc->layers.size()); ++i)
      enc->layers[static_cast<std::size_t>(i)].trainable = i >= spec_.tap_layer - k;
  for (auto& conv : blocks_) conv.trainable = true;
  head_.trainable = true;
}

template <typename Scalar>
std::vector<Conv2d<Scalar>*> ChangeModel<Scalar>::parameters() {
  std::vector<Conv2d<Scalar>*> out;
  for (auto& l : encoder_a_->layers) out.push_back(&l);
  if (!encoders_shared())
    for (auto& l : encoder_b_->layers) out.push_back(&l);
  for (auto& l : blocks_) out.push_back(&l);
  out.push_back(&head_);
  return out;
}

template <typename Scalar>
std::vector<const Conv2d<Scalar>*> ChangeModel<Scalar>::parameters() const {
  auto mut = const_cast<ChangeModel*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

template <typename Scalar>
Eigen::Index ChangeModel<Scalar>::parameter_count() const {
  Eigen::Index n = 0;
  for (const auto* p : parameters()) n += p->parameter_count();
  return n;
}

template <typename Scalar>
Gradients<Scalar> ChangeModel<Scalar>::zero_gradients() const {
  Gradients<Scalar> grads;
  for (const auto* p : parameters())
    grads.push_back({Matrix<Scalar>::Zero(p->weight.rows(), p->weight.cols()), Vector<Scalar>::Zero(p->bias.size())});
  return grads;
}

template <typename Scalar>
std::size_t ChangeModel<Scalar>::decoder_slot() const {
  return encoder_a_->layers.size() * (encoders_shared() ? 1 : 2);
}

template <typename Scalar>
void ChangeModel<Scalar>::check_divisible(const Raster& image) const {
  const int s = spec_.tap_stride();
  if (image.height % s != 0 || image.width % s != 0 || image.height == 0 || image.width == 0)
    throw ShapeError("image " + shape_string(image) + " is not divisible by the tap stride " + std::to_string(s));
  if (image.channels() != spec_.input_channels)
    throw ShapeError("image has " + std::to_string(image.channels()) + " channels, backbone expects " +
                     std::to_string(spec_.input_channels));
}

template <typename Scalar>
Tensor<Scalar> ChangeModel<Scalar>::encode(const Encoder<Scalar>& enc, const Raster& image,
                                           std::vector<Tensor<Scalar>>* trace) const {
  check_divisible(image);
  // Each image is standardized by its own mean and spread, which cancels
  // any global contrast scale and brightness offset. The floor keeps
  // near-constant images from amplifying noise.
  Tensor<Scalar> x = image.template cast<Scalar>();
  const Scalar mean = x.data.mean();
  x.data.array() -= mean;
  const Scalar spread = std::sqrt(x.data.squaredNorm() / Scalar(x.data.size()));
  x.data /= std::max(spread, Scalar(0.02));
  if (trace) trace->push_back(x);
  for (const auto& conv : enc.layers) {
    x = conv_forward(conv, x);
    relu_inplace(x);
    if (trace) trace->push_back(x);
  }
  return x;
}

template <typename Scalar>
FeatureTensor<Scalar> ChangeModel<Scalar>::extract_features(const Raster& image, EncoderBranch branch) const {
  return {encode(encoder(branch), image, nullptr), spec_.tap_stride()};
}

template <typename Scalar>
Plane<Scalar> ChangeModel<Scalar>::decode_impl(const Tensor<Scalar>& fused, std::vector<Tensor<Scalar>>* trace) const {
  if (fused.channels() != 2 * spec_.tap_channels())
    throw ShapeError("decoder expects " + std::to_string(2 * spec_.tap_channels()) + " fused channels, got " +
                     std::to_string(fused.channels()));
  Tensor<Scalar> x = fused;
  if (trace) trace->push_back(x);
  for (const auto& conv : blocks_) {
    x = conv_forward(conv, upsample2(x));
    relu_inplace(x);
    if (trace) trace->push_back(x);
  }
  Tensor<Scalar> logits = conv_forward(head_, x);
  return logits.plane(0);
}

template <typename Scalar>
Plane<Scalar> ChangeModel<Scalar>::decode_logits(const FeatureTensor<Scalar>& fused) const {
  if (!std::has_single_bit(static_cast<unsigned>(fused.stride)))
    throw ConfigError("decode: stride " + std::to_string(fused.stride) + " is not a power of 2");
  if (fused.stride != spec_.tap_stride())
    throw ShapeError("decode: feature stride " + std::to_string(fused.stride) + " does not match the tap stride " +
                     std::to_string(spec_.tap_stride()));
  return decode_impl(fused.values, nullptr);
}

template <typename Scalar>
ProbabilityMask<Scalar> ChangeModel<Scalar>::decode(const FeatureTensor<Scalar>& fused) const {
  const Scalar lo = static_cast<Scalar>(kProbClamp);
  return objective::sigmoid(decode_logits(fused)).max(lo).min(Scalar(1) - lo);
}

template <typename Scalar>
ProbabilityMask<Scalar> ChangeModel<Scalar>::forward(const ImagePair& pair) const {
  if (!pair.t0.same_shape(pair.t1)) throw ShapeError("forward: t0 and t1 shapes differ");
  return decode(fuse(extract_features(pair.t0, EncoderBranch::a), extract_features(pair.t1, EncoderBranch::b)));
}

template <typename Scalar>
Plane<Scalar> ChangeModel<Scalar>::forward_train(const ImagePair& pair, ForwardTrace<Scalar>& trace) const {
  if (!pair.t0.same_shape(pair.t1)) throw ShapeError("forward: t0 and t1 shapes differ");
  trace = {};
  const Tensor<Scalar> fa = encode(*encoder_a_, pair.t0, &trace.enc_a);
  const Tensor<Scalar> fb = encode(*encoder_b_, pair.t1, &trace.enc_b);
  const int stride = spec_.tap_stride();
  return decode_impl(fuse(FeatureTensor<Scalar>{fa, stride}, FeatureTensor<Scalar>{fb, stride}).values, &trace.dec);
}

namespace {

template <typename Scalar>
void accumulate(const Conv2d<Scalar>& conv, const Matrix<Scalar>& dy, const Matrix<Scalar>& col, ParamGrad<Scalar>& g) {
  g.weight.noalias() += dy * col.transpose();
  g.bias += dy.rowwise().sum();
  (void)conv;
}

// Gradient w.r.t. the conv input, given the gradient of its pre-activation.
template <typename Scalar>
Tensor<Scalar> input_grad(const Conv2d<Scalar>& conv, const Matrix<Scalar>& dy, const Tensor<Scalar>& input) {
  Matrix<Scalar> dcol = conv.weight.transpose() * dy;
  if (conv.kernel == 1 && conv.stride == 1) {
    Tensor<Scalar> out;
    out.height = input.height;
    out.width = input.width;
    out.data = std::move(dcol);
    return out;
  }
  return col2im(dcol, input.channels(), input.height, input.width, conv.kernel, conv.stride);
}

} // namespace

template <typename Scalar>
void ChangeModel<Scalar>::encoder_backward(const Encoder<Scalar>& enc, const std::vector<Tensor<Scalar>>& acts,
                                           Tensor<Scalar> grad, Gradients<Scalar>& grads,
                                           std::size_t slot_offset) const {
  const int n = static_cast<int>(enc.layers.size());
  int first_trainable = n;
  for (int i = 0; i < n; ++i)
    if (enc.layers[static_cast<std::size_t>(i)].trainable) {
      first_trainable = i;
      break;
    }
  for (int i = n - 1; i >= first_trainable; --i) {
    const auto& conv = enc.layers[static_cast<std::size_t>(i)];
    const Tensor<Scalar>& out = acts[static_cast<std::size_t>(i + 1)];
    const Tensor<Scalar>& in = acts[static_cast<std::size_t>(i)];
    Matrix<Scalar> dy = (out.data.array() > Scalar(0)).select(grad.data, Scalar(0));
    if (conv.trainable) {
      const Matrix<Scalar> col = im2col(in, conv.kernel, conv.stride);
      accumulate(conv, dy, col, grads[slot_offset + static_cast<std::size_t>(i)]);
    }
    if (i > first_trainable) grad = input_grad(conv, dy, in);
  }
}

template <typename Scalar>
void ChangeModel<Scalar>::backward(const ForwardTrace<Scalar>& trace, const Plane<Scalar>& dlogits,
                                   Gradients<Scalar>& grads) const {
  const std::size_t dslot = decoder_slot();
  if (grads.size() != dslot + blocks_.size() + 1) throw ShapeError("gradient buffers do not match the model");

  const Tensor<Scalar>& head_in = trace.dec.back();
  Matrix<Scalar> dy = Eigen::Map<const Matrix<Scalar>>(dlogits.data(), 1, dlogits.size());
  accumulate(head_, dy, head_in.data, grads[dslot + blocks_.size()]);
  Tensor<Scalar> grad = input_grad(head_, dy, head_in);

  for (int j = static_cast<int>(blocks_.size()) - 1; j >= 0; --j) {
    const auto& conv = blocks_[static_cast<std::size_t>(j)];
    const Tensor<Scalar>& out = trace.dec[static_cast<std::size_t>(j + 1)];
    const Tensor<Scalar> up = upsample2(trace.dec[static_cast<std::size_t>(j)]);
    dy = (out.data.array() > Scalar(0)).select(grad.data, Scalar(0));
    const Matrix<Scalar> col = im2col(up, conv.kernel, conv.stride);
    accumulate(conv, dy, col, grads[dslot + static_cast<std::size_t>(j)]);
    grad = upsample2_backward(input_grad(conv, dy, up));
  }

  const bool any_trainable = std::any_of(encoder_a_->layers.begin(), encoder_a_->layers.end(),
                                         [](const auto& l) { return l.trainable; });
  if (!any_trainable) return;

  const int ca = spec_.tap_channels();
  Tensor<Scalar> ga(ca, grad.height, grad.width);
  Tensor<Scalar> gb(ca, grad.height, grad.width);
  ga.data = grad.data.topRows(ca);
  gb.data = grad.data.bottomRows(ca);
  encoder_backward(*encoder_a_, trace.enc_a, std::move(ga), grads, 0);
  encoder_backward(*encoder_b_, trace.enc_b, std::move(gb), grads, encoders_shared() ? 0 : encoder_a_->layers.size());
}

template <typename Scalar>
std::string encoder_hash(const ChangeModel<Scalar>& model) {
  Sha256 sha;
  for (auto branch : {EncoderBranch::a, EncoderBranch::b})
    for (const auto& l : model.encoder(branch).layers) sha.update(l.weight).update(l.bias);
  return sha.hex();
}

template <typename Scalar>
std::string parameter_hash(const ChangeModel<Scalar>& model) {
  Sha256 sha;
  for (const auto* p : model.parameters()) sha.update(p->weight).update(p->bias);
  return sha.hex();
}

template class ChangeModel<float>;
template class ChangeModel<double>;
template std::string encoder_hash(const ChangeModel<float>&);
template std::string encoder_hash(const ChangeModel<double>&);
template std::string parameter_hash(const ChangeModel<float>&);
template std::string parameter_hash(const ChangeModel<double>&);

} // namespace scd::net
