#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vlcap/nn.hpp"
#include "vlcap/special_tokens.hpp"

namespace vlcap {

struct DecoderConfig {
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t d_model = 32;
  std::size_t d_ff = 64;
  std::size_t max_video_len = 12;
  std::size_t max_text_len = 20;  // includes BOS
  std::size_t vocab_size = 0;
  std::size_t memory_slots = 2;
  double dropout = 0.1;
  bool tie_embeddings = false;

  void validate() const;
};

// Per-layer memory M^l, each [memory_slots x d_model]. Zero at the first
// event of every video.
struct MemoryState {
  std::vector<Tensor> layers;

  static MemoryState zeros(const DecoderConfig& cfg);
  MemoryState detached() const;
};

// H^0 = [F^VL ; F^text]: video rows first, then text rows.
struct UnifiedInput {
  Tensor hidden;            // [(L + T) x d_model]
  std::size_t video_len = 0;
  std::size_t text_len = 0;
  std::vector<bool> valid;  // false at padded positions

  std::size_t length() const { return video_len + text_len; }
};

// Sinusoidal position code: sin on even channels, cos on odd.
double sinusoid_position(std::size_t position, std::size_t channel, std::size_t width);

// Unified attention visibility, row-major [S x S]: video rows see all valid
// video positions; text row j sees valid video positions and valid text
// positions <= j.
std::vector<bool> unified_visibility(const UnifiedInput& input);

// Test hook for the retain gate Z: force its pre-activation to +inf (Z = 1)
// or -inf (Z = 0).
enum class GateOverride { kNone, kRetain, kReplace };

struct MemoryUpdate {
  Tensor memory;     // M_t
  Tensor candidate;  // R_t
  Tensor gate;       // Z_t
};

// U = MultiHeadAtt(Q = M_prev, K = V = [M_prev; H_bar])
// R = tanh(M_prev W_mr + U W_ur + b_r)
// Z = sigmoid(M_prev W_mz + U W_uz + b_z)
// M = (1 - Z) * R + Z * M_prev
class MemoryUpdater {
 public:
  MemoryUpdater() = default;
  MemoryUpdater(ParameterStore& store, const std::string& name, const DecoderConfig& cfg,
                Rng& rng);

  MemoryUpdate update(const Tensor& memory, const Tensor& hbar,
                      const std::vector<bool>& valid) const;

  void set_gate_override(GateOverride o) { override_ = o; }
  const MultiHeadAttention& attention() const { return attn_; }

 private:
  MultiHeadAttention attn_;
  Tensor w_mr_, w_ur_, b_r_, w_mz_, w_uz_, b_z_;
  GateOverride override_ = GateOverride::kNone;
};

struct LayerOutput {
  Tensor hidden;  // H^l
  Tensor hbar;    // intermediate state fed to the memory update
};

class DecoderLayer {
 public:
  DecoderLayer() = default;
  DecoderLayer(ParameterStore& store, const std::string& name, const DecoderConfig& cfg,
               Rng& rng);

  // self_mask: [S x S]; memory_mask: [S x (slots + S)].
  LayerOutput forward(const Tensor& input, const Tensor& memory, const Tensor& self_mask,
                      const Tensor& memory_mask, bool training, Rng* rng,
                      std::vector<Tensor>* attention_weights = nullptr) const;

  MemoryUpdater& updater() { return updater_; }
  const MemoryUpdater& updater() const { return updater_; }
  const MultiHeadAttention& self_attention() const { return self_attn_; }

 private:
  MultiHeadAttention self_attn_;
  LayerNorm norm1_;
  MultiHeadAttention memory_attn_;
  FeedForward ffn_;
  LayerNorm norm2_;
  MemoryUpdater updater_;
  double dropout_ = 0.0;
};

struct DecoderOutput {
  Tensor logits;             // [T x vocab]
  Tensor hidden;             // final layer, [S x d_model]
  std::vector<Tensor> hbar;  // one per layer
};

struct StepResult {
  std::vector<double> logits;  // vocab_size entries at the last text position
  std::vector<Tensor> hbar;
};

class Decoder {
 public:
  Decoder() = default;
  Decoder(ParameterStore& store, const DecoderConfig& cfg, Rng& rng);

  // vl: [L x d_model]. Rows past real_video_len (when given) are padding.
  // Throws OverlengthError when L or the token count exceed the limits.
  UnifiedInput build_unified_input(const Tensor& vl, std::span<const TokenId> tokens,
                                   std::size_t real_video_len = static_cast<std::size_t>(-1),
                                   bool training = false, Rng* rng = nullptr) const;

  DecoderOutput forward(const UnifiedInput& input, const MemoryState& memory, bool training,
                        Rng* rng, std::vector<Tensor>* attention_weights = nullptr) const;

  // One memory_update per layer from that layer's H_bar.
  MemoryState update_memory(const MemoryState& memory, const DecoderOutput& out,
                            const UnifiedInput& input) const;

  StepResult decode_step(const MemoryState& memory, const Tensor& vl,
                         std::span<const TokenId> prefix) const;

  // Greedy decoding, one sentence per event, memory carried across events.
  // Sentences exclude BOS/EOS.
  std::vector<std::vector<TokenId>> generate_paragraph(const std::vector<Tensor>& events,
                                                       std::size_t max_len) const;

  const DecoderConfig& config() const { return cfg_; }
  std::vector<DecoderLayer>& layers() { return layers_; }
  const std::vector<DecoderLayer>& layers() const { return layers_; }

  // Test hook: zero the memory before every event.
  void set_reset_memory_between_events(bool on) { reset_memory_ = on; }

 private:
  Tensor output_weight() const;

  DecoderConfig cfg_;
  Tensor token_embedding_;  // [vocab x d_model]
  Tensor type_embedding_;   // [2 x d_model]: video, text
  Tensor position_table_;   // [max_video_len + max_text_len x d_model], constant
  std::vector<DecoderLayer> layers_;
  Tensor out_weight_;  // [d_model x vocab], absent when tied
  Tensor out_bias_;    // [vocab]
  bool reset_memory_ = false;
};

}  // namespace vlcap
