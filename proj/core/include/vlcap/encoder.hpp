#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vlcap/nn.hpp"

namespace vlcap {

struct EncoderConfig {
  std::size_t backbone_dim = 32;   // d_v, channels of the per-snippet spatial grid
  std::size_t frame_dim = 32;      // d_img, middle-frame visual feature
  std::size_t word_dim = 32;       // d_w, learned word features
  std::size_t joint_dim = 32;      // d_e, shared vision/text embedding space
  std::size_t vision_hidden = 64;  // hidden width of the channel MLP
  std::size_t model_dim = 32;      // d_model
  std::size_t top_k = 8;

  void validate() const;
};

// Inputs for one event: L snippets.
struct SnippetFeatures {
  Tensor backbone_map;  // [L x P x d_v]
  Tensor frame_embed;   // [L x d_img]

  std::size_t snippets() const { return backbone_map.dim(0); }
};

// Result of ranking the vocabulary against one frame.
struct TopK {
  std::vector<std::size_t> indices;  // into VocabularyEmbedding::tokens
  std::vector<double> scores;        // cosine, descending
  Tensor score_tensor;               // [k], differentiable
  Tensor features;                   // [k x d_e], unit-norm word embeddings

  // Candidates handed to the adaptive attention: each embedding scaled by
  // its cosine score, so the frame projection stays in the gradient path.
  Tensor weighted_features() const { return scale_rows(features, score_tensor); }
};

// Learned stand-ins for the word feature transformer and the two joint
// projections: w^e = normalize(word_feats * text_proj),
// I^e = normalize(frame * img_proj).
struct VocabularyEmbedding {
  std::vector<std::string> tokens;
  Tensor word_feats;  // [N x d_w]
  Tensor text_proj;   // [d_w x d_e]
  Tensor img_proj;    // [d_img x d_e]

  std::size_t size() const { return tokens.size(); }
  Tensor projected_words() const;  // [N x d_e], rows unit-norm
};

// average pool over spatial positions, then linear -> relu -> linear.
class VisionModality {
 public:
  VisionModality() = default;
  VisionModality(ParameterStore& store, const EncoderConfig& cfg, Rng& rng);

  Tensor operator()(const Tensor& backbone_map) const;  // -> [L x d_model]

  const FeedForward& mlp() const { return mlp_; }

 private:
  FeedForward mlp_;
  std::size_t backbone_dim_ = 0;
};

class LanguageModality {
 public:
  LanguageModality() = default;
  LanguageModality(ParameterStore& store, const EncoderConfig& cfg,
                   std::vector<std::string> tokens, Rng& rng);

  // frame_embed: [d_img] or [1 x d_img]. Ties keep the lower vocabulary index.
  TopK language_frame_embedding(const Tensor& frame_embed, std::size_t k) const;

  // Same ranking against precomputed projections; frame_row is [1 x d_e]
  // unit-norm, words is projected_words().
  static TopK rank(const Tensor& words, const Tensor& frame_row, std::size_t k);

  const VocabularyEmbedding& vocabulary() const { return vocab_; }

 private:
  VocabularyEmbedding vocab_;
};

// Single learned query q: score_j = q . c_j / sqrt(d_e), softmax over the k
// candidates, weighted sum, linear projection to d_model.
class AdaptiveAttention {
 public:
  struct Result {
    Tensor output;   // [1 x d_model]
    Tensor weights;  // [k x 1]
  };

  AdaptiveAttention() = default;
  AdaptiveAttention(ParameterStore& store, const EncoderConfig& cfg, Rng& rng);

  Result operator()(const Tensor& candidates) const;

  const Tensor& query() const { return query_; }
  const Linear& projection() const { return proj_; }

 private:
  Tensor query_;  // [d_e x 1]
  Linear proj_;
  std::size_t joint_dim_ = 0;
};

// Per snippet: self-attention over the pair [f_v; f_l], then the mean of the
// two outputs. All snippets run as one 2L-token sequence with a
// block-diagonal mask.
class FusionAttention {
 public:
  FusionAttention() = default;
  FusionAttention(ParameterStore& store, const EncoderConfig& cfg, Rng& rng);

  Tensor operator()(const Tensor& vision, const Tensor& language) const;

  // Test hook: replace the attention by identity, giving (f_v + f_l) / 2.
  void set_identity_attention(bool on) { identity_ = on; }
  const MultiHeadAttention& attention() const { return attn_; }

 private:
  MultiHeadAttention attn_;
  bool identity_ = false;
};

class Encoder {
 public:
  Encoder() = default;
  Encoder(ParameterStore& store, const EncoderConfig& cfg, std::vector<std::string> tokens,
          Rng& rng);

  // F^VL for one event: [L x d_model].
  Tensor encode_event(const SnippetFeatures& snippets) const;

  // Language branch alone: one AAM output per snippet, [L x d_model].
  Tensor language_features(const Tensor& frame_embed) const;

  const EncoderConfig& config() const { return cfg_; }
  const VisionModality& vision() const { return vision_; }
  const LanguageModality& language() const { return language_; }
  const AdaptiveAttention& adaptive_attention() const { return aam_; }
  FusionAttention& fusion() { return fusion_; }
  const FusionAttention& fusion() const { return fusion_; }

 private:
  EncoderConfig cfg_;
  VisionModality vision_;
  LanguageModality language_;
  AdaptiveAttention aam_;
  FusionAttention fusion_;
};

}  // namespace vlcap
