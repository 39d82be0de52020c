#include "vlcap/decoder.hpp"

#include <cmath>
#include <limits>

#include "vlcap/errors.hpp"

namespace vlcap {

void DecoderConfig::validate() const {
  if (n_layers == 0 || n_heads == 0 || d_model == 0 || d_ff == 0 || max_video_len == 0 ||
      max_text_len == 0 || vocab_size == 0 || memory_slots == 0) {
    throw ConfigError("decoder: all extents must be >= 1");
  }
  if (d_model % n_heads != 0) {
    throw ConfigError("decoder: d_model " + std::to_string(d_model) + " not divisible by " +
                      std::to_string(n_heads) + " heads");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("decoder: dropout must be in [0, 1)");
}

MemoryState MemoryState::zeros(const DecoderConfig& cfg) {
  MemoryState m;
  for (std::size_t l = 0; l < cfg.n_layers; ++l)
    m.layers.push_back(Tensor::zeros({cfg.memory_slots, cfg.d_model}));
  return m;
}

MemoryState MemoryState::detached() const {
  MemoryState m;
  for (const auto& t : layers) m.layers.push_back(t.detach());
  return m;
}

double sinusoid_position(std::size_t position, std::size_t channel, std::size_t width) {
  const double exponent =
      static_cast<double>(2 * (channel / 2)) / static_cast<double>(width);
  const double angle = static_cast<double>(position) / std::pow(10000.0, exponent);
  return channel % 2 == 0 ? std::sin(angle) : std::cos(angle);
}

std::vector<bool> unified_visibility(const UnifiedInput& input) {
  const auto s = input.length();
  const auto lv = input.video_len;
  std::vector<bool> visible(s * s, false);
  for (std::size_t q = 0; q < s; ++q)
    for (std::size_t k = 0; k < s; ++k) {
      if (!input.valid[k]) continue;
      const bool key_video = k < lv;
      visible[q * s + k] = q < lv ? key_video : (key_video || k <= q);
    }
  return visible;
}

namespace {

// [rows x (slots + S)] with the memory columns always visible.
Tensor with_memory_columns(std::size_t slots, std::size_t rows, std::size_t s,
                           const std::vector<bool>& visible_rows) {
  std::vector<bool> v(rows * (slots + s));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t m = 0; m < slots; ++m) v[r * (slots + s) + m] = true;
    for (std::size_t k = 0; k < s; ++k) v[r * (slots + s) + slots + k] = visible_rows[r * s + k];
  }
  return make_attention_mask(rows, slots + s, v);
}

}  // namespace

MemoryUpdater::MemoryUpdater(ParameterStore& store, const std::string& name,
                             const DecoderConfig& cfg, Rng& rng)
    : attn_(store, name + ".attn", cfg.d_model, cfg.n_heads, rng) {
  const double sd = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
  const auto d = cfg.d_model;
  w_mr_ = store.normal(name + ".w_mr", {d, d}, sd, rng);
  w_ur_ = store.normal(name + ".w_ur", {d, d}, sd, rng);
  b_r_ = store.constant(name + ".b_r", {d}, 0.0);
  w_mz_ = store.normal(name + ".w_mz", {d, d}, sd, rng);
  w_uz_ = store.normal(name + ".w_uz", {d, d}, sd, rng);
  b_z_ = store.constant(name + ".b_z", {d}, 0.0);
}

MemoryUpdate MemoryUpdater::update(const Tensor& memory, const Tensor& hbar,
                                   const std::vector<bool>& valid) const {
  if (memory.rank() != 2 || hbar.rank() != 2 || memory.dim(1) != hbar.dim(1)) {
    throw DimensionError("memory_update: memory " + shape_str(memory.shape()) + " vs hidden " +
                         shape_str(hbar.shape()));
  }
  if (valid.size() != hbar.dim(0)) {
    throw DimensionError("memory_update: " + std::to_string(valid.size()) +
                         " validity flags for hidden " + shape_str(hbar.shape()));
  }
  const auto slots = memory.dim(0);
  const auto s = hbar.dim(0);
  std::vector<bool> rows(slots * s);
  for (std::size_t r = 0; r < slots; ++r)
    for (std::size_t k = 0; k < s; ++k) rows[r * s + k] = valid[k];
  const auto keys = concat({memory, hbar}, 0);
  const auto u = attn_(memory, keys, with_memory_columns(slots, slots, s, rows));

  const auto r = tanh(add(add(matmul(memory, w_mr_), matmul(u, w_ur_)), b_r_));
  auto z_pre = add(add(matmul(memory, w_mz_), matmul(u, w_uz_)), b_z_);
  if (override_ != GateOverride::kNone) {
    const double inf = std::numeric_limits<double>::infinity();
    z_pre = Tensor::full(z_pre.shape(), override_ == GateOverride::kRetain ? inf : -inf);
  }
  const auto z = sigmoid(z_pre);
  const auto one_minus_z = add_scalar(neg(z), 1.0);
  const auto next = add(mul(one_minus_z, r), mul(z, memory));
  return {next, r, z};
}

DecoderLayer::DecoderLayer(ParameterStore& store, const std::string& name,
                           const DecoderConfig& cfg, Rng& rng)
    : self_attn_(store, name + ".self_attn", cfg.d_model, cfg.n_heads, rng),
      norm1_(store, name + ".norm1", cfg.d_model),
      memory_attn_(store, name + ".memory_attn", cfg.d_model, cfg.n_heads, rng),
      ffn_(store, name + ".ffn", cfg.d_model, cfg.d_ff, cfg.d_model, rng),
      norm2_(store, name + ".norm2", cfg.d_model),
      updater_(store, name + ".memory", cfg, rng),
      dropout_(cfg.dropout) {}

LayerOutput DecoderLayer::forward(const Tensor& input, const Tensor& memory,
                                  const Tensor& self_mask, const Tensor& memory_mask,
                                  bool training, Rng* rng,
                                  std::vector<Tensor>* attention_weights) const {
  std::vector<Tensor> w_self, w_mem;
  auto* ws = attention_weights ? &w_self : nullptr;
  auto* wm = attention_weights ? &w_mem : nullptr;
  const auto attended = self_attn_(input, input, self_mask, ws);
  const auto hbar = norm1_(add(input, dropout(attended, dropout_, training, rng)));
  const auto keys = concat({memory, hbar}, 0);
  const auto augmented = memory_attn_(hbar, keys, memory_mask, wm);
  const auto encoded = ffn_(augmented);
  const auto hidden = norm2_(add(hbar, dropout(encoded, dropout_, training, rng)));
  if (attention_weights) {
    attention_weights->insert(attention_weights->end(), w_self.begin(), w_self.end());
    attention_weights->insert(attention_weights->end(), w_mem.begin(), w_mem.end());
  }
  return {hidden, hbar};
}

Decoder::Decoder(ParameterStore& store, const DecoderConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  const auto d = cfg_.d_model;
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  token_embedding_ = store.normal("decoder.token_embedding", {cfg_.vocab_size, d}, sd, rng);
  type_embedding_ = store.normal("decoder.type_embedding", {2, d}, sd, rng);
  const auto positions = cfg_.max_video_len + cfg_.max_text_len;
  std::vector<double> table(positions * d);
  for (std::size_t p = 0; p < positions; ++p)
    for (std::size_t c = 0; c < d; ++c) table[p * d + c] = sinusoid_position(p, c, d);
  position_table_ = Tensor({positions, d}, std::move(table));
  for (std::size_t l = 0; l < cfg_.n_layers; ++l)
    layers_.emplace_back(store, "decoder.layer" + std::to_string(l), cfg_, rng);
  if (!cfg_.tie_embeddings)
    out_weight_ = store.normal("decoder.output.weight", {d, cfg_.vocab_size}, sd, rng);
  out_bias_ = store.constant("decoder.output.bias", {cfg_.vocab_size}, 0.0);
}

Tensor Decoder::output_weight() const {
  return cfg_.tie_embeddings ? transpose(token_embedding_) : out_weight_;
}

UnifiedInput Decoder::build_unified_input(const Tensor& vl, std::span<const TokenId> tokens,
                                          std::size_t real_video_len, bool training,
                                          Rng* rng) const {
  const auto d = cfg_.d_model;
  if (vl.rank() != 2 || vl.dim(1) != d) {
    throw DimensionError("build_unified_input: VL feature " + shape_str(vl.shape()) +
                         " for d_model " + std::to_string(d));
  }
  const auto lv = vl.dim(0);
  const auto t = tokens.size();
  if (lv == 0) throw DimensionError("build_unified_input: event has no snippets");
  if (lv > cfg_.max_video_len) {
    throw OverlengthError("build_unified_input: " + std::to_string(lv) +
                          " video positions exceed max_video_len " +
                          std::to_string(cfg_.max_video_len));
  }
  if (t == 0 || t > cfg_.max_text_len) {
    throw OverlengthError("build_unified_input: " + std::to_string(t) +
                          " text tokens outside [1, max_text_len " +
                          std::to_string(cfg_.max_text_len) + "]");
  }
  const auto real = std::min(real_video_len, lv);

  std::vector<std::size_t> ids(t);
  for (std::size_t j = 0; j < t; ++j) {
    if (tokens[j] < 0 || static_cast<std::size_t>(tokens[j]) >= cfg_.vocab_size) {
      throw DimensionError("build_unified_input: token id " + std::to_string(tokens[j]) +
                           " outside vocabulary of " + std::to_string(cfg_.vocab_size));
    }
    ids[j] = static_cast<std::size_t>(tokens[j]);
  }
  const auto text_tok =
      scale(gather_rows(token_embedding_, ids), std::sqrt(static_cast<double>(d)));
  const auto video_part = add(add(vl, slice(position_table_, 0, 0, lv)),
                              slice(type_embedding_, 0, 0, 1));
  const auto text_part =
      add(add(text_tok, slice(position_table_, 0, cfg_.max_video_len, cfg_.max_video_len + t)),
          slice(type_embedding_, 0, 1, 2));

  UnifiedInput in;
  in.hidden = dropout(concat({video_part, text_part}, 0), cfg_.dropout, training, rng);
  in.video_len = lv;
  in.text_len = t;
  in.valid.assign(lv + t, true);
  for (std::size_t i = real; i < lv; ++i) in.valid[i] = false;
  for (std::size_t j = 0; j < t; ++j) in.valid[lv + j] = tokens[j] != kPad;
  return in;
}

DecoderOutput Decoder::forward(const UnifiedInput& input, const MemoryState& memory,
                               bool training, Rng* rng,
                               std::vector<Tensor>* attention_weights) const {
  if (memory.layers.size() != cfg_.n_layers) {
    throw DimensionError("decoder: memory has " + std::to_string(memory.layers.size()) +
                         " layers, model has " + std::to_string(cfg_.n_layers));
  }
  const auto s = input.length();
  const auto visible = unified_visibility(input);
  const auto self_mask = make_attention_mask(s, s, visible);
  const auto memory_mask = with_memory_columns(cfg_.memory_slots, s, s, visible);

  DecoderOutput out;
  auto h = input.hidden;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    auto lo = layers_[l].forward(h, memory.layers[l], self_mask, memory_mask, training, rng,
                                 attention_weights);
    out.hbar.push_back(lo.hbar);
    h = lo.hidden;
  }
  out.hidden = h;
  const auto text = slice(h, 0, input.video_len, s);
  out.logits = add(matmul(text, output_weight()), out_bias_);
  return out;
}

MemoryState Decoder::update_memory(const MemoryState& memory, const DecoderOutput& out,
                                   const UnifiedInput& input) const {
  MemoryState next;
  for (std::size_t l = 0; l < layers_.size(); ++l)
    next.layers.push_back(
        layers_[l].updater().update(memory.layers[l], out.hbar[l], input.valid).memory);
  return next;
}

StepResult Decoder::decode_step(const MemoryState& memory, const Tensor& vl,
                                std::span<const TokenId> prefix) const {
  if (prefix.empty() || prefix.front() != kBos) {
    throw ContractError("decode_step: prefix must begin with BOS");
  }
  const auto in = build_unified_input(vl, prefix);
  auto out = forward(in, memory, false, nullptr);
  const auto v = cfg_.vocab_size;
  const auto last = out.logits.data().subspan((prefix.size() - 1) * v, v);
  return {std::vector<double>(last.begin(), last.end()), std::move(out.hbar)};
}

std::vector<std::vector<TokenId>> Decoder::generate_paragraph(const std::vector<Tensor>& events,
                                                              std::size_t max_len) const {
  if (events.empty()) throw ContractError("generate_paragraph: no events");
  NoGradGuard no_grad;
  const auto limit = std::min(max_len, cfg_.max_text_len - 1);
  std::vector<std::vector<TokenId>> sentences;
  auto memory = MemoryState::zeros(cfg_);
  for (const auto& vl : events) {
    if (reset_memory_) memory = MemoryState::zeros(cfg_);
    std::vector<TokenId> prefix{kBos};
    while (prefix.size() - 1 < limit) {
      const auto step = decode_step(memory, vl, prefix);
      std::size_t best = 0;
      for (std::size_t i = 1; i < step.logits.size(); ++i)
        if (step.logits[i] > step.logits[best]) best = i;
      if (static_cast<TokenId>(best) == kEos) break;
      prefix.push_back(static_cast<TokenId>(best));
    }
    const auto in = build_unified_input(vl, prefix);
    const auto out = forward(in, memory, false, nullptr);
    memory = update_memory(memory, out, in);
    sentences.emplace_back(prefix.begin() + 1, prefix.end());
  }
  return sentences;
}

}  // namespace vlcap
