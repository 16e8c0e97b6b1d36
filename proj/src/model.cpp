// Copyright 2026 The tda Authors
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

#include "tda/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "tda/ctc.hpp"
#include "tda/error.hpp"
#include "tda/ops.hpp"

namespace tda {

using nlohmann::json;

namespace {

constexpr double kNormEps = 1e-5;

std::string layer_prefix(std::size_t layer) { return "layers." + std::to_string(layer) + "."; }

void require_positive(std::size_t v, const char* what) {
  if (v == 0) throw Error(ErrorCode::InvalidConfig, std::string(what) + " must be >= 1");
}

}  // namespace

// ---------------------------------------------------------------------------
// ModelConfig

void ModelConfig::validate() const {
  if (conv_layers.empty()) throw Error(ErrorCode::InvalidConfig, "need at least one conv layer");
  require_positive(norm_groups, "norm_groups");
  for (const ConvLayerSpec& c : conv_layers) {
    require_positive(c.channels, "conv channels");
    require_positive(c.kernel, "conv kernel");
    require_positive(c.stride, "conv stride");
    if (c.kernel < c.stride) throw Error(ErrorCode::InvalidConfig, "conv kernel shorter than its stride");
    if (c.channels % norm_groups != 0) {
      throw Error(ErrorCode::InvalidConfig, "conv channels " + std::to_string(c.channels) +
                                                " not divisible by norm_groups " +
                                                std::to_string(norm_groups));
    }
  }
  require_positive(d_model, "d_model");
  require_positive(n_layers, "n_layers");
  require_positive(n_heads, "n_heads");
  require_positive(d_ff, "d_ff");
  require_positive(pretrain_clusters, "pretrain_clusters");
  if (d_model % n_heads != 0) {
    throw Error(ErrorCode::InvalidConfig, "d_model must be divisible by n_heads");
  }
  if (vocab_size < 2) throw Error(ErrorCode::InvalidConfig, "vocab_size must count blank plus one symbol");
}

std::size_t ModelConfig::downsample() const {
  std::size_t p = 1;
  for (const ConvLayerSpec& c : conv_layers) p *= c.stride;
  return p;
}

std::size_t ModelConfig::frames_for(std::size_t samples) const {
  std::size_t len = samples;
  for (const ConvLayerSpec& c : conv_layers) len /= c.stride;
  return len;
}

std::size_t ModelConfig::min_samples() const {
  return downsample();
}

json ModelConfig::to_json() const {
  json layers = json::array();
  for (const ConvLayerSpec& c : conv_layers) {
    layers.push_back({{"channels", c.channels}, {"kernel", c.kernel}, {"stride", c.stride}});
  }
  return {{"conv_layers", layers},     {"norm_groups", norm_groups},
          {"d_model", d_model},        {"n_layers", n_layers},
          {"n_heads", n_heads},        {"d_ff", d_ff},
          {"rel_bias_max_dist", rel_bias_max_dist}, {"vocab_size", vocab_size},
          {"pretrain_clusters", pretrain_clusters}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "model config must be an object");
  ModelConfig cfg;
  auto get = [&](const std::string& key, std::size_t& field) {
    if (!j.contains(key)) return;
    const json& v = j.at(key);
    if (!v.is_number_unsigned()) {
      throw Error(ErrorCode::InvalidConfig, "model." + key + " must be a non-negative integer");
    }
    field = v.get<std::size_t>();
  };
  for (const auto& [key, value] : j.items()) {
    static const char* known[] = {"conv_layers", "norm_groups", "d_model",
                                  "n_layers",    "n_heads",     "d_ff",
                                  "rel_bias_max_dist", "vocab_size", "pretrain_clusters"};
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
      throw Error(ErrorCode::InvalidConfig, "unknown key model." + key);
    }
  }
  if (j.contains("conv_layers")) {
    cfg.conv_layers.clear();
    for (const json& layer : j.at("conv_layers")) {
      ConvLayerSpec c;
      try {
        c.channels = layer.at("channels").get<std::size_t>();
        c.kernel = layer.at("kernel").get<std::size_t>();
        c.stride = layer.at("stride").get<std::size_t>();
      } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("model.conv_layers: ") + e.what());
      }
      if (layer.size() != 3) throw Error(ErrorCode::InvalidConfig, "model.conv_layers: unknown key");
      cfg.conv_layers.push_back(c);
    }
  }
  get("norm_groups", cfg.norm_groups);
  get("d_model", cfg.d_model);
  get("n_layers", cfg.n_layers);
  get("n_heads", cfg.n_heads);
  get("d_ff", cfg.d_ff);
  get("rel_bias_max_dist", cfg.rel_bias_max_dist);
  get("vocab_size", cfg.vocab_size);
  get("pretrain_clusters", cfg.pretrain_clusters);
  return cfg;
}

// ---------------------------------------------------------------------------
// ModelParams

template <typename T>
Tensor<T>& ModelParams<T>::at(const std::string& name) {
  const auto it = tensors.find(name);
  if (it == tensors.end()) throw Error(ErrorCode::ShapeMismatchOnLoad, "no parameter " + name);
  return it->second;
}

template <typename T>
const Tensor<T>& ModelParams<T>::at(const std::string& name) const {
  const auto it = tensors.find(name);
  if (it == tensors.end()) throw Error(ErrorCode::ShapeMismatchOnLoad, "no parameter " + name);
  return it->second;
}

template <typename T>
std::size_t ModelParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors) n += t.size();
  return n;
}

template <typename T>
void ModelParams<T>::set_requires_grad(bool value) {
  for (auto& [name, t] : tensors) t.set_requires_grad(value);
}

template <typename T>
void ModelParams<T>::zero_grad() {
  for (auto& [name, t] : tensors) t.zero_grad();
}

template <typename T>
ModelParams<T> ModelParams<T>::clone() const {
  ModelParams out;
  for (const auto& [name, t] : tensors) {
    out.tensors.emplace(name, Tensor<T>(t.shape(), std::vector<T>(t.data().begin(), t.data().end()),
                                        t.requires_grad()));
  }
  return out;
}

template <typename T>
bool ModelParams<T>::all_finite() const {
  for (const auto& [name, t] : tensors) {
    for (T v : t.data()) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& params) {
  ModelParams<To> out;
  for (const auto& [name, t] : params.tensors) {
    std::vector<To> data(t.data().begin(), t.data().end());
    out.tensors.emplace(name, Tensor<To>(t.shape(), std::move(data), t.requires_grad()));
  }
  return out;
}

std::map<std::string, Shape> expected_shapes(const ModelConfig& cfg) {
  std::map<std::string, Shape> s;
  std::size_t in_ch = 1;
  for (std::size_t i = 0; i < cfg.conv_layers.size(); ++i) {
    const ConvLayerSpec& c = cfg.conv_layers[i];
    const std::string p = "conv." + std::to_string(i) + ".";
    s[p + "weight"] = {c.channels, in_ch, c.kernel};
    s[p + "bias"] = {c.channels};
    s[p + "norm.gamma"] = {c.channels};
    s[p + "norm.beta"] = {c.channels};
    in_ch = c.channels;
  }
  const std::size_t d = cfg.d_model;
  s["proj.weight"] = {in_ch, d};
  s["proj.bias"] = {d};
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string p = layer_prefix(l);
    for (const char* w : {"wq", "wk", "wv", "wo"}) s[p + "attn." + w] = {d, d};
    // No key bias: a per-key constant cancels inside the row softmax.
    for (const char* b : {"bq", "bv", "bo"}) s[p + "attn." + b] = {d};
    for (const char* n : {"norm1", "norm2"}) {
      s[p + n + ".gamma"] = {d};
      s[p + n + ".beta"] = {d};
    }
    s[p + "ffn.w1"] = {d, cfg.d_ff};
    s[p + "ffn.b1"] = {cfg.d_ff};
    s[p + "ffn.w2"] = {cfg.d_ff, d};
    s[p + "ffn.b2"] = {d};
  }
  s["rel_bias.table"] = {cfg.n_heads, 2 * cfg.rel_bias_max_dist + 1};
  s["rel_bias.gate"] = {cfg.n_heads};
  s["ctc_head.weight"] = {d, cfg.vocab_size};
  s["ctc_head.bias"] = {cfg.vocab_size};
  s["pretrain_head.weight"] = {d, cfg.pretrain_clusters};
  s["pretrain_head.bias"] = {cfg.pretrain_clusters};
  s["mask_embedding"] = {d};
  return s;
}

template <typename T>
void check_params(const ModelParams<T>& params, const ModelConfig& cfg) {
  const auto shapes = expected_shapes(cfg);
  if (shapes.size() != params.tensors.size()) {
    throw Error(ErrorCode::ShapeMismatchOnLoad, "expected " + std::to_string(shapes.size()) +
                                                    " parameters, found " +
                                                    std::to_string(params.tensors.size()));
  }
  for (const auto& [name, shape] : shapes) {
    const auto it = params.tensors.find(name);
    if (it == params.tensors.end()) throw Error(ErrorCode::ShapeMismatchOnLoad, "missing " + name);
    if (it->second.shape() != shape) {
      throw Error(ErrorCode::ShapeMismatchOnLoad, name + " is " + shape_str(it->second.shape()) +
                                                      ", config implies " + shape_str(shape));
    }
  }
}

namespace {

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Fan-based Glorot bound. Conv weights [out, in, k]; dense weights [in, out].
double glorot_bound(const Shape& shape) {
  double fan_in, fan_out;
  if (shape.size() == 3) {
    fan_in = static_cast<double>(shape[1] * shape[2]);
    fan_out = static_cast<double>(shape[0] * shape[2]);
  } else if (shape.size() == 2) {
    fan_in = static_cast<double>(shape[0]);
    fan_out = static_cast<double>(shape[1]);
  } else {
    fan_in = 1.0;
    fan_out = static_cast<double>(shape[0]);
  }
  return std::sqrt(6.0 / (fan_in + fan_out));
}

template <typename T>
Tensor<T> init_tensor(const std::string& name, const Shape& shape, std::uint64_t base_seed) {
  const bool zero = ends_with(name, "bias") || ends_with(name, ".beta") || name.starts_with("rel_bias.") ||
                    (name.find(".attn.b") != std::string::npos) || ends_with(name, ".b1") ||
                    ends_with(name, ".b2");
  if (ends_with(name, ".gamma")) return Tensor<T>::full(shape, T(1), true);
  if (zero) return Tensor<T>::zeros(shape, true);
  Rng rng(derive_seed(base_seed, "init", name));
  const double bound = glorot_bound(shape);
  std::vector<T> data(numel(shape));
  for (T& v : data) v = static_cast<T>(rng.uniform(-bound, bound));
  return Tensor<T>(shape, std::move(data), true);
}

}  // namespace

template <typename T>
ModelParams<T> init_params(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::uint64_t base = rng.next_u64();
  ModelParams<T> params;
  for (const auto& [name, shape] : expected_shapes(cfg)) {
    params.tensors.emplace(name, init_tensor<T>(name, shape, base));
  }
  return params;
}

template <typename T>
void reinit_ctc_head(ModelParams<T>& params, const ModelConfig& cfg, Rng& rng) {
  const auto shapes = expected_shapes(cfg);
  const std::uint64_t base = rng.next_u64();
  for (const char* name : {"ctc_head.weight", "ctc_head.bias"}) {
    params.tensors.insert_or_assign(name, init_tensor<T>(name, shapes.at(name), base));
  }
}

// ---------------------------------------------------------------------------
// Forward pass

template <typename T>
Tensor<T> cnn_encode(const Tensor<T>& waveform, const ModelParams<T>& params, const ModelConfig& cfg) {
  if (waveform.rank() != 2 || waveform.dim(0) != 1) {
    throw Error(ErrorCode::ShapeMismatch, "waveform must be [1 x L], got " + shape_str(waveform.shape()));
  }
  if (cfg.frames_for(waveform.dim(1)) == 0) {
    throw Error(ErrorCode::InputTooShort, std::to_string(waveform.dim(1)) + " samples, need at least " +
                                              std::to_string(cfg.min_samples()));
  }
  Tensor<T> h = waveform;
  for (std::size_t i = 0; i < cfg.conv_layers.size(); ++i) {
    const std::string p = "conv." + std::to_string(i) + ".";
    const ConvLayerSpec& c = cfg.conv_layers[i];
    // Right zero-padding of kernel - stride makes each layer emit floor(L / stride) steps.
    if (c.kernel > c.stride) h = concat_cols<T>({h, Tensor<T>::zeros({h.dim(0), c.kernel - c.stride})});
    h = conv1d(h, params.at(p + "weight"), params.at(p + "bias"), c.stride);
    h = group_norm(h, cfg.norm_groups, params.at(p + "norm.gamma"), params.at(p + "norm.beta"),
                   static_cast<T>(kNormEps));
    h = gelu(h);
  }
  return linear(transpose(h), params.at("proj.weight"), params.at("proj.bias"));
}

template <typename T>
Tensor<T> rel_pos_bias(std::size_t frames, const ModelParams<T>& params, const ModelConfig& cfg) {
  const Tensor<T>& table = params.at("rel_bias.table");
  const Tensor<T>& gate = params.at("rel_bias.gate");
  const std::size_t heads = cfg.n_heads;
  const std::size_t D = cfg.rel_bias_max_dist;
  const std::size_t width = 2 * D + 1;
  if (table.shape() != Shape{heads, width} || gate.shape() != Shape{heads}) {
    throw Error(ErrorCode::ShapeMismatch, "rel-bias parameters do not match the config");
  }
  const std::size_t T2 = frames * frames;
  auto slot = [=](std::size_t i, std::size_t j) {
    const auto rel = static_cast<long long>(j) - static_cast<long long>(i);
    const auto d = static_cast<long long>(D);
    return static_cast<std::size_t>(std::clamp(rel, -d, d) + d);
  };
  std::vector<T> sig(heads);
  for (std::size_t h = 0; h < heads; ++h) sig[h] = T(1) / (T(1) + std::exp(-gate.data()[h]));
  std::vector<T> out(heads * T2);
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < frames; ++i) {
      for (std::size_t j = 0; j < frames; ++j) {
        out[h * T2 + i * frames + j] = sig[h] * table.data()[h * width + slot(i, j)];
      }
    }
  }
  auto pt = table.node();
  auto pg = gate.node();
  return Tensor<T>::from_op(
      {heads, frames, frames}, std::move(out), {table, gate},
      [pt, pg, sig, heads, frames, width, T2, slot](detail::Node<T>& o) {
        auto gt = pt->grad_buffer();
        auto gg = pg->grad_buffer();
        for (std::size_t h = 0; h < heads; ++h) {
          T dsig = 0;
          for (std::size_t i = 0; i < frames; ++i) {
            for (std::size_t j = 0; j < frames; ++j) {
              const T g = o.grad[h * T2 + i * frames + j];
              const std::size_t s = slot(i, j);
              gt[h * width + s] += g * sig[h];
              dsig += g * pt->data[h * width + s];
            }
          }
          gg[h] += dsig * sig[h] * (T(1) - sig[h]);
        }
      });
}

template <typename T>
Tensor<T> attention_with_bias(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                              const Tensor<T>& bias, std::size_t n_heads) {
  if (q.rank() != 2 || q.shape() != k.shape() || q.shape() != v.shape()) {
    throw Error(ErrorCode::ShapeMismatch, "attention: Q " + shape_str(q.shape()) + ", K " +
                                              shape_str(k.shape()) + ", V " + shape_str(v.shape()));
  }
  const std::size_t frames = q.dim(0), d = q.dim(1);
  if (n_heads == 0 || d % n_heads != 0) {
    throw Error(ErrorCode::ShapeMismatch, "attention: width " + std::to_string(d) +
                                              " not divisible into " + std::to_string(n_heads) + " heads");
  }
  if (bias.defined() && bias.shape() != Shape{n_heads, frames, frames}) {
    throw Error(ErrorCode::ShapeMismatch, "attention: bias " + shape_str(bias.shape()));
  }
  const std::size_t dk = d / n_heads;
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dk));
  std::vector<Tensor<T>> heads;
  heads.reserve(n_heads);
  for (std::size_t h = 0; h < n_heads; ++h) {
    const Tensor<T> qh = slice_cols(q, h * dk, dk);
    const Tensor<T> kh = slice_cols(k, h * dk, dk);
    const Tensor<T> vh = slice_cols(v, h * dk, dk);
    Tensor<T> logits = matmul(qh, transpose(kh));
    if (bias.defined()) logits = add(logits, select(bias, h));
    heads.push_back(matmul(softmax_lastdim(scale(logits, inv_sqrt)), vh));
  }
  return n_heads == 1 ? heads[0] : concat_cols(heads);
}

template <typename T>
Tensor<T> self_attention(const Tensor<T>& x, const ModelParams<T>& params, std::size_t layer,
                         const Tensor<T>& bias, const ModelConfig& cfg) {
  const std::string p = layer_prefix(layer) + "attn.";
  const Tensor<T> q = linear(x, params.at(p + "wq"), params.at(p + "bq"));
  const Tensor<T> k = matmul(x, params.at(p + "wk"));
  const Tensor<T> v = linear(x, params.at(p + "wv"), params.at(p + "bv"));
  return linear(attention_with_bias(q, k, v, bias, cfg.n_heads), params.at(p + "wo"), params.at(p + "bo"));
}

template <typename T>
Tensor<T> transformer_forward(const Tensor<T>& z, const ModelParams<T>& params, const ModelConfig& cfg) {
  if (z.rank() != 2 || z.dim(1) != cfg.d_model) {
    throw Error(ErrorCode::ShapeMismatch, "transformer input " + shape_str(z.shape()));
  }
  const Tensor<T> bias = rel_pos_bias(z.dim(0), params, cfg);
  const T eps = static_cast<T>(kNormEps);
  Tensor<T> x = z;
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string p = layer_prefix(l);
    x = layer_norm(add(x, self_attention(x, params, l, bias, cfg)), params.at(p + "norm1.gamma"),
                   params.at(p + "norm1.beta"), eps);
    const Tensor<T> hidden = gelu(linear(x, params.at(p + "ffn.w1"), params.at(p + "ffn.b1")));
    const Tensor<T> ffn = linear(hidden, params.at(p + "ffn.w2"), params.at(p + "ffn.b2"));
    x = layer_norm(add(x, ffn), params.at(p + "norm2.gamma"), params.at(p + "norm2.beta"), eps);
  }
  return x;
}

template <typename T>
Tensor<T> ctc_head(const Tensor<T>& c, const ModelParams<T>& params) {
  return log_softmax_lastdim(linear(c, params.at("ctc_head.weight"), params.at("ctc_head.bias")));
}

template <typename T>
Tensor<T> pretrain_head(const Tensor<T>& c, const ModelParams<T>& params) {
  return log_softmax_lastdim(linear(c, params.at("pretrain_head.weight"), params.at("pretrain_head.bias")));
}

template <typename T>
Tensor<T> waveform_tensor(const std::vector<float>& samples) {
  if (samples.empty()) throw Error(ErrorCode::InputTooShort, "empty waveform");
  return Tensor<T>({1, samples.size()}, std::vector<T>(samples.begin(), samples.end()));
}

template <typename T>
Tensor<T> forward_log_probs(const std::vector<float>& samples, const ModelParams<T>& params,
                            const ModelConfig& cfg) {
  const Tensor<T> z = cnn_encode(waveform_tensor<T>(samples), params, cfg);
  return ctc_head(transformer_forward(z, params, cfg), params);
}

std::string transcribe(const std::vector<float>& samples, const ModelParams<float>& params,
                       const ModelConfig& cfg, const Vocabulary& vocab) {
  if (samples.size() < cfg.min_samples()) return "";
  return greedy_decode(forward_log_probs(samples, params, cfg), vocab);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[4] = {'T', 'D', 'A', '1'};

void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_le(std::string_view in, std::size_t at, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

}  // namespace

std::string encode_checkpoint(const ModelParams<float>& params, const ModelConfig& cfg,
                              const Vocabulary& vocab) {
  check_params(params, cfg);
  if (!params.all_finite()) throw Error(ErrorCode::NonFiniteLoss, "refusing to save non-finite parameters");
  json entries = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : params.tensors) {
    entries.push_back({{"name", name}, {"shape", t.shape()}, {"dtype", "f32"}, {"byte_offset", offset}});
    offset += t.size() * 4;
  }
  const json header = {{"model_config", cfg.to_json()}, {"params", entries}, {"vocab", vocab.to_strings()}};
  const std::string text = header.dump();

  std::string out(kMagic, 4);
  put_le(out, kCheckpointVersion, 4);
  put_le(out, text.size(), 8);
  out += text;
  out.reserve(out.size() + offset);
  for (const auto& [name, t] : params.tensors) {
    for (float v : t.data()) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      put_le(out, bits, 4);
    }
  }
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < 4 || bytes.substr(0, 4) != std::string_view(kMagic, 4)) {
    throw Error(ErrorCode::BadMagic, "not a TDA1 checkpoint");
  }
  if (bytes.size() < 16) throw Error(ErrorCode::CorruptCheckpoint, "truncated preamble");
  const auto version = static_cast<std::uint32_t>(get_le(bytes, 4, 4));
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::VersionMismatch, "format version " + std::to_string(version) + ", expected " +
                                                std::to_string(kCheckpointVersion));
  }
  const std::uint64_t header_len = get_le(bytes, 8, 8);
  if (header_len > bytes.size() - 16) throw Error(ErrorCode::CorruptCheckpoint, "header runs past end of file");
  json header;
  Checkpoint ck;
  try {
    header = json::parse(bytes.substr(16, header_len));
    ck.config = ModelConfig::from_json(header.at("model_config"));
    ck.vocab = Vocabulary::from_strings(header.at("vocab").get<std::vector<std::string>>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptCheckpoint, std::string("header: ") + e.what());
  }
  ck.config.validate();
  if (ck.vocab.size() != ck.config.vocab_size) {
    throw Error(ErrorCode::ShapeMismatchOnLoad, "vocabulary has " + std::to_string(ck.vocab.size()) +
                                                    " symbols, config says " +
                                                    std::to_string(ck.config.vocab_size));
  }
  const auto shapes = expected_shapes(ck.config);
  const std::string_view payload = bytes.substr(16 + header_len);
  std::uint64_t expected_offset = 0;
  const json& entries = header.at("params");
  if (!entries.is_array() || entries.size() != shapes.size()) {
    throw Error(ErrorCode::ShapeMismatchOnLoad, "parameter list does not match the config");
  }
  for (const json& e : entries) {
    std::string name;
    Shape shape;
    std::uint64_t offset;
    try {
      name = e.at("name").get<std::string>();
      shape = e.at("shape").get<Shape>();
      offset = e.at("byte_offset").get<std::uint64_t>();
      if (e.at("dtype").get<std::string>() != "f32") throw Error(ErrorCode::CorruptCheckpoint, name + ": dtype");
    } catch (const json::exception& ex) {
      throw Error(ErrorCode::CorruptCheckpoint, std::string("param entry: ") + ex.what());
    }
    const auto it = shapes.find(name);
    if (it == shapes.end()) throw Error(ErrorCode::ShapeMismatchOnLoad, "unexpected parameter " + name);
    if (it->second != shape) {
      throw Error(ErrorCode::ShapeMismatchOnLoad, name + " header shape " + shape_str(shape) +
                                                      ", config implies " + shape_str(it->second));
    }
    if (offset != expected_offset) {
      throw Error(ErrorCode::CorruptCheckpoint, name + ": offsets must be contiguous in header order");
    }
    const std::size_t n = numel(shape);
    if (offset + n * 4 > payload.size()) {
      throw Error(ErrorCode::ShapeMismatchOnLoad, name + " runs past the end of the payload");
    }
    std::vector<float> data(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto bits = static_cast<std::uint32_t>(get_le(payload, offset + 4 * i, 4));
      std::memcpy(&data[i], &bits, 4);
    }
    ck.params.tensors.emplace(name, Tensor<float>(shape, std::move(data), true));
    expected_offset += n * 4;
  }
  if (expected_offset != payload.size()) {
    throw Error(ErrorCode::ShapeMismatchOnLoad, "payload has " + std::to_string(payload.size()) +
                                                    " bytes, header accounts for " +
                                                    std::to_string(expected_offset));
  }
  check_params(ck.params, ck.config);
  return ck;
}

void save_checkpoint(const ModelParams<float>& params, const ModelConfig& cfg, const Vocabulary& vocab,
                     const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(params, cfg, vocab);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot rename into " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

#define TDA_INSTANTIATE_MODEL(T)                                                                   \
  template struct ModelParams<T>;                                                                  \
  template void check_params<T>(const ModelParams<T>&, const ModelConfig&);                       \
  template ModelParams<T> init_params<T>(const ModelConfig&, Rng&);                                \
  template void reinit_ctc_head<T>(ModelParams<T>&, const ModelConfig&, Rng&);                     \
  template Tensor<T> cnn_encode<T>(const Tensor<T>&, const ModelParams<T>&, const ModelConfig&);   \
  template Tensor<T> rel_pos_bias<T>(std::size_t, const ModelParams<T>&, const ModelConfig&);      \
  template Tensor<T> attention_with_bias<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,  \
                                            const Tensor<T>&, std::size_t);                        \
  template Tensor<T> self_attention<T>(const Tensor<T>&, const ModelParams<T>&, std::size_t,       \
                                       const Tensor<T>&, const ModelConfig&);                      \
  template Tensor<T> transformer_forward<T>(const Tensor<T>&, const ModelParams<T>&,               \
                                            const ModelConfig&);                                   \
  template Tensor<T> ctc_head<T>(const Tensor<T>&, const ModelParams<T>&);                         \
  template Tensor<T> pretrain_head<T>(const Tensor<T>&, const ModelParams<T>&);                    \
  template Tensor<T> waveform_tensor<T>(const std::vector<float>&);                                \
  template Tensor<T> forward_log_probs<T>(const std::vector<float>&, const ModelParams<T>&,        \
                                          const ModelConfig&);

TDA_INSTANTIATE_MODEL(float)
TDA_INSTANTIATE_MODEL(double)

template ModelParams<double> cast_params<double, float>(const ModelParams<float>&);
template ModelParams<float> cast_params<float, double>(const ModelParams<double>&);

}  // namespace tda
