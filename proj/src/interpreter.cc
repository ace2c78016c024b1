// Copyright 2026 The lmactd Authors.
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

#include "lmactd/interpreter.h"

#include <cmath>

#include "lmactd/checkpoint.h"
#include "lmactd/error.h"

namespace lmactd {
namespace F = torch::nn::functional;

int64_t InterpreterConfig::LatentFrames(int64_t num_samples) const {
  if (num_samples < kernel_size) return 0;
  return (num_samples - kernel_size) / Stride() + 1;
}

void InterpreterConfig::Validate() const {
  LMACTD_CHECK(alpha >= 0.0 && alpha <= 1.0, InvalidArgument,
               "alpha must lie in [0, 1], got " + std::to_string(alpha));
  LMACTD_CHECK(kernel_size >= 2 && kernel_size % 2 == 0, InvalidArgument,
               "encoder kernel must be even and >= 2");
  LMACTD_CHECK(latent_channels >= 1 && unet_width >= 1, InvalidArgument, "bad interpreter widths");
  LMACTD_CHECK(masknet.chunk_size >= 2 && masknet.chunk_size % 2 == 0, InvalidArgument,
               "chunk size must be even");
  LMACTD_CHECK(masknet.num_blocks >= 1 && masknet.num_heads >= 1 &&
                   masknet.width % masknet.num_heads == 0,
               InvalidArgument, "masknet width must be divisible by the head count");
}

nlohmann::json InterpreterConfig::ToJson() const {
  return {{"latent_channels", latent_channels},
          {"kernel_size", kernel_size},
          {"alpha", alpha},
          {"unet_width", unet_width},
          {"masknet",
           {{"width", masknet.width},
            {"chunk_size", masknet.chunk_size},
            {"num_blocks", masknet.num_blocks},
            {"num_heads", masknet.num_heads},
            {"ffn_width", masknet.ffn_width}}}};
}

InterpreterConfig InterpreterConfig::FromJson(const nlohmann::json& j) {
  InterpreterConfig c;
  c.latent_channels = j.at("latent_channels");
  c.kernel_size = j.at("kernel_size");
  c.alpha = j.at("alpha");
  c.unet_width = j.at("unet_width");
  const auto& m = j.at("masknet");
  c.masknet.width = m.at("width");
  c.masknet.chunk_size = m.at("chunk_size");
  c.masknet.num_blocks = m.at("num_blocks");
  c.masknet.num_heads = m.at("num_heads");
  c.masknet.ffn_width = m.at("ffn_width");
  return c;
}

TransformerLayerImpl::TransformerLayerImpl(int width, int heads, int ffn_width) : heads_(heads) {
  norm1_ = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({width})));
  norm2_ = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({width})));
  qkv_ = register_module("qkv", torch::nn::Linear(width, 3 * width));
  out_ = register_module("out", torch::nn::Linear(width, width));
  ff1_ = register_module("ff1", torch::nn::Linear(width, ffn_width));
  ff2_ = register_module("ff2", torch::nn::Linear(ffn_width, width));
}

torch::Tensor TransformerLayerImpl::forward(const torch::Tensor& x) {
  const int64_t n = x.size(0), s = x.size(1), e = x.size(2);
  auto qkv = qkv_(norm1_(x)).view({n, s, 3, heads_, e / heads_}).permute({2, 0, 3, 1, 4});
  auto attn = at::scaled_dot_product_attention(qkv[0], qkv[1], qkv[2]);
  auto y = x + out_(attn.transpose(1, 2).reshape({n, s, e}));
  return y + ff2_(torch::relu(ff1_(norm2_(y))));
}

namespace {

torch::Tensor SinusoidalPositions(int64_t length, int64_t width, const torch::TensorOptions& opts) {
  auto pos = torch::arange(length, opts).unsqueeze(1);
  auto div = torch::exp(torch::arange(0, width, 2, opts) * (-std::log(10000.0) / width));
  auto pe = torch::zeros({length, width}, opts);
  pe.index_put_({torch::indexing::Slice(), torch::indexing::Slice(0, torch::indexing::None, 2)},
                torch::sin(pos * div));
  pe.index_put_({torch::indexing::Slice(), torch::indexing::Slice(1, torch::indexing::None, 2)},
                torch::cos(pos * div.narrow(0, 0, width / 2)));
  return pe;
}

}  // namespace

MaskNetImpl::MaskNetImpl(int latent_channels, const MaskNetConfig& cfg) : cfg_(cfg) {
  norm_ = register_module("norm", torch::nn::GroupNorm(1, latent_channels));
  in_proj_ = register_module("in_proj", torch::nn::Conv1d(latent_channels, cfg.width, 1));
  for (int b = 0; b < cfg.num_blocks; ++b) {
    intra_.push_back(register_module("intra" + std::to_string(b),
                                     TransformerLayer(cfg.width, cfg.num_heads, cfg.ffn_width)));
    inter_.push_back(register_module("inter" + std::to_string(b),
                                     TransformerLayer(cfg.width, cfg.num_heads, cfg.ffn_width)));
    const auto ln = torch::nn::LayerNormOptions({cfg.width});
    intra_norm_.push_back(register_module("intra_norm" + std::to_string(b), torch::nn::LayerNorm(ln)));
    inter_norm_.push_back(register_module("inter_norm" + std::to_string(b), torch::nn::LayerNorm(ln)));
  }
  prelu_ = register_module("prelu", torch::nn::PReLU());
  out_proj_ = register_module("out_proj", torch::nn::Conv1d(cfg.width, latent_channels, 1));
}

torch::Tensor MaskNetImpl::forward(const torch::Tensor& fused) {
  const int64_t B = fused.size(0), K = fused.size(1), T = fused.size(2);
  const int64_t S = cfg_.chunk_size, P = S / 2, N = cfg_.width;
  auto x = in_proj_(norm_(fused));  // [B, N, T]

  // Half-overlapping chunks; pad so every sample is covered twice.
  const int64_t rem = (P + T + P - S) % P;
  const int64_t right = P + (rem == 0 ? 0 : P - rem);
  const int64_t total = P + T + right;
  x = F::pad(x, F::PadFuncOptions({P, right}));
  auto chunks = x.unfold(2, S, P).permute({0, 2, 3, 1}).contiguous();  // [B, nc, S, N]
  const int64_t nc = chunks.size(1);
  const auto opts = fused.options();
  const auto pe_intra = SinusoidalPositions(S, N, opts);
  const auto pe_inter = SinusoidalPositions(nc, N, opts);

  for (std::size_t b = 0; b < intra_.size(); ++b) {
    auto y = intra_[b](chunks.view({B * nc, S, N}) + pe_intra).view({B, nc, S, N});
    chunks = chunks + intra_norm_[b](y);
    auto z = chunks.transpose(1, 2).reshape({B * S, nc, N}) + pe_inter;
    z = inter_norm_[b](inter_[b](z)).view({B, S, nc, N}).transpose(1, 2);
    chunks = chunks + z;
  }
  // [B, nc, S, N] -> [B, N, nc * S] -> [B, K, nc, S]
  auto y = prelu_(chunks.permute({0, 3, 1, 2}).reshape({B, N, nc * S}));
  y = out_proj_(y).view({B, K, nc, S});
  auto cols = y.permute({0, 1, 3, 2}).reshape({B, K * S, nc});
  auto ola = F::fold(cols, F::FoldFuncOptions({1, total}, {1, S}).stride({1, P}));
  return torch::relu(ola.view({B, K, total}).narrow(2, P, T));
}

UnetDecoderImpl::UnetDecoderImpl(const std::vector<int>& tap_channels, int shallow_freq, int width,
                                 int latent_channels, bool zero_init_output) {
  for (std::size_t i = 0; i < tap_channels.size(); ++i) {
    proj_.push_back(register_module("proj" + std::to_string(i),
                                    torch::nn::Conv2d(torch::nn::Conv2dOptions(tap_channels[i], width, 1))));
  }
  for (std::size_t i = 0; i + 1 < tap_channels.size(); ++i) {
    up2d_.push_back(register_module(
        "up2d" + std::to_string(i),
        torch::nn::ConvTranspose2d(torch::nn::ConvTranspose2dOptions(width, width, 4).stride(2).padding(1))));
  }
  freq_weights_ = register_parameter("freq_weights", torch::full({shallow_freq}, 1.0 / shallow_freq));
  up1_ = register_module("up1", torch::nn::ConvTranspose1d(
                                    torch::nn::ConvTranspose1dOptions(width, width, 8).stride(4).padding(2)));
  up2_ = register_module("up2", torch::nn::ConvTranspose1d(
                                    torch::nn::ConvTranspose1dOptions(width, width, 8).stride(4).padding(2)));
  out_ = register_module("out", torch::nn::Conv1d(width, latent_channels, 1));
  if (zero_init_output) {
    torch::NoGradGuard g;
    out_->weight.zero_();
    out_->bias.zero_();
  }
}

torch::Tensor UnetDecoderImpl::forward(const RepresentationSet& h, int64_t latent_frames) {
  LMACTD_CHECK(h.maps.size() == proj_.size(), InvalidArgument,
               "UNet expects " + std::to_string(proj_.size()) + " representations");
  auto z = proj_.back()(h.maps.back());
  for (int i = static_cast<int>(proj_.size()) - 2; i >= 0; --i) {
    z = up2d_[i](z);
    const auto& skip = h.maps[i];
    if (z.size(2) != skip.size(2) || z.size(3) != skip.size(3)) {
      z = F::interpolate(z, F::InterpolateFuncOptions()
                                .size(std::vector<int64_t>{skip.size(2), skip.size(3)})
                                .mode(torch::kBilinear)
                                .align_corners(false));
    }
    z = torch::relu(z + proj_[i](skip));
  }
  LMACTD_CHECK(z.size(2) == freq_weights_.size(0), InvalidArgument,
               "UNet frequency axis does not match the classifier configuration");
  auto seq = torch::einsum("bcft,f->bct", {z, freq_weights_});
  seq = torch::relu(up1_(seq));
  seq = torch::relu(up2_(seq));
  seq = F::interpolate(seq, F::InterpolateFuncOptions()
                                .size(std::vector<int64_t>{latent_frames})
                                .mode(torch::kLinear)
                                .align_corners(false));
  return out_(seq);
}

InterpreterNetImpl::InterpreterNetImpl(const InterpreterConfig& cfg, const ClassifierConfig& clf_cfg) {
  cfg.Validate();
  encoder = register_module(
      "encoder", torch::nn::Conv1d(
                     torch::nn::Conv1dOptions(1, cfg.latent_channels, cfg.kernel_size).stride(cfg.Stride()).bias(false)));
  decoder = register_module(
      "decoder", torch::nn::ConvTranspose1d(torch::nn::ConvTranspose1dOptions(cfg.latent_channels, 1, cfg.kernel_size)
                                                .stride(cfg.Stride())
                                                .bias(false)));
  unet = register_module("unet", UnetDecoder(clf_cfg.widths, clf_cfg.mel.num_mels / 2, cfg.unet_width,
                                             cfg.latent_channels, cfg.zero_init_unet_output));
  masknet = register_module("masknet", MaskNet(cfg.latent_channels, cfg.masknet));
}

Interpreter::Interpreter(InterpreterConfig cfg, const Classifier& paired)
    : cfg_(std::move(cfg)), classifier_hash_(paired.ParameterHash()), net_(cfg_, paired.config()) {
  auto dtype = paired.net()->parameters().front().scalar_type();
  net_->to(dtype);
}

void Interpreter::set_alpha(double alpha) {
  LMACTD_CHECK(alpha >= 0.0 && alpha <= 1.0, InvalidArgument, "alpha must lie in [0, 1]");
  cfg_.alpha = alpha;
}

torch::Tensor Interpreter::TdEncode(const torch::Tensor& wave) const {
  LMACTD_CHECK(wave.size(-1) >= cfg_.kernel_size, InvalidArgument,
               "signal too short for the encoder: " + std::to_string(wave.size(-1)) + " < " +
                   std::to_string(cfg_.kernel_size) + " samples");
  auto w = wave.dim() == 1 ? wave.unsqueeze(0) : wave;
  return torch::relu(net_->encoder(w.unsqueeze(1)));
}

torch::Tensor Interpreter::UnetDecode(const RepresentationSet& h, int64_t num_samples) const {
  const int64_t frames = cfg_.LatentFrames(num_samples);
  auto out = net_->unet(h, frames);
  // Resampling to `frames` makes this unreachable; kept as a contract check.
  LMACTD_CHECK(out.size(1) == cfg_.latent_channels && out.size(2) == frames, Error,
               "internal error: UNet output shape does not match the encoder grid");
  return out;
}

torch::Tensor Interpreter::Fuse(const torch::Tensor& decoded, const torch::Tensor& encoded) const {
  LMACTD_CHECK(decoded.sizes() == encoded.sizes(), InvalidArgument,
               "fusion needs H_d and H_e of equal shape");
  if (cfg_.alpha == 1.0) return decoded;
  if (cfg_.alpha == 0.0) return encoded;
  return cfg_.alpha * decoded + (1.0 - cfg_.alpha) * encoded;
}

torch::Tensor Interpreter::EstimateMask(const torch::Tensor& decoded, const torch::Tensor& encoded) const {
  return net_->masknet(Fuse(decoded, encoded));
}

torch::Tensor Interpreter::Decode(const torch::Tensor& latent, int64_t num_samples) const {
  auto y = net_->decoder(latent).squeeze(1);
  if (y.size(-1) >= num_samples) return y.narrow(-1, 0, num_samples);
  return F::pad(y, F::PadFuncOptions({0, num_samples - y.size(-1)}));
}

std::pair<torch::Tensor, torch::Tensor> Interpreter::Synthesize(const torch::Tensor& mask,
                                                                const torch::Tensor& encoded,
                                                                int64_t num_samples) const {
  LMACTD_CHECK(mask.sizes() == encoded.sizes(), InvalidArgument,
               "synthesis needs M and H_e of equal shape");
  return {Decode(mask * encoded, num_samples), Decode((1.0 - mask) * encoded, num_samples)};
}

InterpreterOutputs Interpreter::Forward(const RepresentationSet& taps, const torch::Tensor& wave) const {
  auto w = wave.dim() == 1 ? wave.unsqueeze(0) : wave;
  const int64_t T = w.size(-1);
  InterpreterOutputs o;
  o.encoded = TdEncode(w);
  o.decoded = UnetDecode(taps, T);
  o.fused = Fuse(o.decoded, o.encoded);
  o.mask = net_->masknet(o.fused);
  std::tie(o.explanation, o.complement) = Synthesize(o.mask, o.encoded, T);
  return o;
}

InterpreterOutputs Interpreter::Forward(const Classifier& clf, const torch::Tensor& wave) const {
  RepresentationSet taps;
  clf.LogitsAndTaps(wave, &taps);
  return Forward(taps, wave);
}

std::string Interpreter::Serialize() const { return SerializeState(*net_); }

void Interpreter::Save(const std::filesystem::path& stem, const nlohmann::json& extra) const {
  nlohmann::json side = extra.is_object() ? extra : nlohmann::json::object();
  side["kind"] = "interpreter";
  side["config"] = cfg_.ToJson();
  side["classifier_hash"] = classifier_hash_;
  side["architecture_hash"] = ArchitectureHash(*net_, cfg_.ToJson());
  side["parameter_hash"] = ParameterHash(*net_);
  WriteFileBytes(BlobPath(stem), Serialize());
  WriteJsonFile(SidecarPath(stem), side);
}

Interpreter Interpreter::Load(const std::filesystem::path& stem, const Classifier& paired) {
  LMACTD_CHECK(std::filesystem::exists(SidecarPath(stem)), CheckpointError,
               "missing checkpoint " + SidecarPath(stem).string());
  LMACTD_CHECK(std::filesystem::exists(BlobPath(stem)), CheckpointError,
               "missing checkpoint " + BlobPath(stem).string());
  const auto side = ReadJsonFile(SidecarPath(stem));
  LMACTD_CHECK(side.value("kind", "") == "interpreter", CheckpointError,
               SidecarPath(stem).string() + " is not an interpreter checkpoint");
  const std::string want = side.at("classifier_hash");
  LMACTD_CHECK(want == paired.ParameterHash(), CheckpointError,
               "interpreter " + stem.string() + " was trained against classifier " + want.substr(0, 12) +
                   ", not " + paired.ParameterHash().substr(0, 12));
  Interpreter itp(InterpreterConfig::FromJson(side.at("config")), paired);
  LMACTD_CHECK(ArchitectureHash(*itp.net_, itp.cfg_.ToJson()) == side.at("architecture_hash").get<std::string>(),
               CheckpointError, "architecture hash mismatch for " + stem.string());
  DeserializeState(*itp.net_, ReadFileBytes(BlobPath(stem)));
  LMACTD_CHECK(ParameterHash(*itp.net_) == side.at("parameter_hash").get<std::string>(), CheckpointError,
               "parameter hash mismatch for " + stem.string());
  itp.SetTraining(false);
  return itp;
}

ExplanationResult BundleExplanation(const Classifier& clf, const Waveform& wave,
                                    const torch::Tensor& explanation, const torch::Tensor& complement) {
  torch::NoGradGuard no_grad;
  const auto dtype = clf.net()->parameters().front().scalar_type();
  auto i = explanation.detach().to(dtype).view({1, -1});
  auto i_out = complement.detach().to(dtype).view({1, -1});
  ExplanationResult r;
  r.input = wave;
  r.explanation = Waveform::FromTensor(i[0], wave.sample_rate);
  r.complement = Waveform::FromTensor(i_out[0], wave.sample_rate);
  r.probs_x = ToProbabilities(clf.Logits(wave.ToTensor().to(dtype).unsqueeze(0))[0]);
  r.probs_i = ToProbabilities(clf.Logits(i)[0]);
  r.probs_iout = ToProbabilities(clf.Logits(i_out)[0]);
  r.saliency = MagnitudeStft(i[0].to(torch::kFloat64), RegularizerStftConfig());
  r.predicted_class = r.probs_x.Argmax();
  return r;
}

ExplanationResult Explain(const Classifier& clf, const Interpreter& itp, const Waveform& wave) {
  clf.CheckInput(wave);
  torch::NoGradGuard no_grad;
  const auto dtype = clf.net()->parameters().front().scalar_type();
  auto out = itp.Forward(clf, wave.ToTensor().to(dtype).unsqueeze(0));
  return BundleExplanation(clf, wave, out.explanation, out.complement);
}

}  // namespace lmactd
