#include "vlcap/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "vlcap/errors.hpp"

namespace vlcap {

void EncoderConfig::validate() const {
  if (backbone_dim == 0 || frame_dim == 0 || word_dim == 0 || joint_dim == 0 ||
      vision_hidden == 0 || model_dim == 0 || top_k == 0) {
    throw ConfigError("encoder: all extents must be >= 1");
  }
}

Tensor VocabularyEmbedding::projected_words() const {
  return l2_normalize(matmul(word_feats, text_proj));
}

VisionModality::VisionModality(ParameterStore& store, const EncoderConfig& cfg, Rng& rng)
    : mlp_(store, "encoder.vision", cfg.backbone_dim, cfg.vision_hidden, cfg.model_dim, rng),
      backbone_dim_(cfg.backbone_dim) {}

Tensor VisionModality::operator()(const Tensor& backbone_map) const {
  if (backbone_map.rank() != 3 || backbone_map.dim(2) != backbone_dim_) {
    throw DimensionError("vision_modality: expected [L x P x " + std::to_string(backbone_dim_) +
                         "], got " + shape_str(backbone_map.shape()));
  }
  if (backbone_map.dim(0) == 0 || backbone_map.dim(1) == 0) {
    throw DimensionError("vision_modality: empty map " + shape_str(backbone_map.shape()));
  }
  return mlp_(mean(backbone_map, 1));
}

LanguageModality::LanguageModality(ParameterStore& store, const EncoderConfig& cfg,
                                   std::vector<std::string> tokens, Rng& rng) {
  std::unordered_set<std::string> seen;
  for (const auto& t : tokens)
    if (!seen.insert(t).second) throw ContractError("vocabulary embedding: duplicate token " + t);
  if (tokens.empty()) throw ContractError("vocabulary embedding: no tokens");
  if (cfg.top_k > tokens.size()) {
    throw ConfigError("encoder: top_k " + std::to_string(cfg.top_k) + " exceeds vocabulary of " +
                      std::to_string(tokens.size()) + " words");
  }
  const auto n = tokens.size();
  vocab_.tokens = std::move(tokens);
  vocab_.word_feats = store.normal("encoder.language.word_feats", {n, cfg.word_dim}, 1.0, rng);
  vocab_.text_proj = store.normal("encoder.language.text_proj", {cfg.word_dim, cfg.joint_dim},
                                  1.0 / std::sqrt(static_cast<double>(cfg.word_dim)), rng);
  vocab_.img_proj = store.normal("encoder.language.img_proj", {cfg.frame_dim, cfg.joint_dim},
                                 1.0 / std::sqrt(static_cast<double>(cfg.frame_dim)), rng);
}

TopK LanguageModality::rank(const Tensor& words, const Tensor& frame_row, std::size_t k) {
  const auto n = words.dim(0);
  if (k < 1 || k > n) {
    throw ContractError("language_frame_embedding: k = " + std::to_string(k) +
                        " outside [1, " + std::to_string(n) + "]");
  }
  const auto cos = matmul(words, transpose(frame_row));  // [N x 1]
  auto c = cos.data();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return c[a] > c[b] || (c[a] == c[b] && a < b);
                    });
  order.resize(k);
  TopK out;
  out.indices = order;
  out.scores.reserve(k);
  for (auto i : order) out.scores.push_back(c[i]);
  out.score_tensor = reshape(gather_rows(cos, order), {k});
  out.features = gather_rows(words, order);
  return out;
}

TopK LanguageModality::language_frame_embedding(const Tensor& frame_embed,
                                                std::size_t k) const {
  const auto d_img = vocab_.img_proj.dim(0);
  if (frame_embed.numel() != d_img) {
    throw DimensionError("language_frame_embedding: frame " + shape_str(frame_embed.shape()) +
                         " vs projection " + shape_str(vocab_.img_proj.shape()));
  }
  const auto frame = l2_normalize(matmul(reshape(frame_embed, {1, d_img}), vocab_.img_proj));
  return rank(vocab_.projected_words(), frame, k);
}

AdaptiveAttention::AdaptiveAttention(ParameterStore& store, const EncoderConfig& cfg, Rng& rng)
    : joint_dim_(cfg.joint_dim) {
  query_ = store.normal("encoder.aam.query", {cfg.joint_dim, 1},
                        1.0 / std::sqrt(static_cast<double>(cfg.joint_dim)), rng);
  proj_ = Linear(store, "encoder.aam.proj", cfg.joint_dim, cfg.model_dim, rng);
}

AdaptiveAttention::Result AdaptiveAttention::operator()(const Tensor& candidates) const {
  if (candidates.rank() != 2 || candidates.dim(0) == 0 || candidates.dim(1) != joint_dim_) {
    throw DimensionError("adaptive_attention: expected [k x " + std::to_string(joint_dim_) +
                         "], got " + shape_str(candidates.shape()));
  }
  const auto scores =
      scale(matmul(candidates, query_), 1.0 / std::sqrt(static_cast<double>(joint_dim_)));
  auto weights = softmax(scores, 0);  // [k x 1]
  const auto pooled = matmul(transpose(weights), candidates);  // [1 x d_e]
  return {proj_(pooled), weights};
}

FusionAttention::FusionAttention(ParameterStore& store, const EncoderConfig& cfg, Rng& rng)
    : attn_(store, "encoder.fusion", cfg.model_dim, 1, rng) {}

Tensor FusionAttention::operator()(const Tensor& vision, const Tensor& language) const {
  if (vision.shape() != language.shape() || vision.rank() != 2) {
    throw DimensionError("fuse: vision " + shape_str(vision.shape()) + " vs language " +
                         shape_str(language.shape()));
  }
  const auto l = vision.dim(0);
  if (identity_) return scale(add(vision, language), 0.5);
  const auto tokens = concat({vision, language}, 0);  // [2L x d]
  std::vector<bool> visible(4 * l * l);
  for (std::size_t a = 0; a < 2 * l; ++a)
    for (std::size_t b = 0; b < 2 * l; ++b) visible[a * 2 * l + b] = (a % l) == (b % l);
  const auto attended = attn_(tokens, tokens, make_attention_mask(2 * l, 2 * l, visible));
  return scale(add(slice(attended, 0, 0, l), slice(attended, 0, l, 2 * l)), 0.5);
}

Encoder::Encoder(ParameterStore& store, const EncoderConfig& cfg,
                 std::vector<std::string> tokens, Rng& rng)
    : cfg_(cfg) {
  cfg_.validate();
  vision_ = VisionModality(store, cfg_, rng);
  language_ = LanguageModality(store, cfg_, std::move(tokens), rng);
  aam_ = AdaptiveAttention(store, cfg_, rng);
  fusion_ = FusionAttention(store, cfg_, rng);
}

Tensor Encoder::language_features(const Tensor& frame_embed) const {
  if (frame_embed.rank() != 2 || frame_embed.dim(1) != cfg_.frame_dim) {
    throw DimensionError("encoder: frame embeddings expected [L x " +
                         std::to_string(cfg_.frame_dim) + "], got " +
                         shape_str(frame_embed.shape()));
  }
  const auto& vocab = language_.vocabulary();
  const auto words = vocab.projected_words();
  const auto frames = l2_normalize(matmul(frame_embed, vocab.img_proj));  // [L x d_e]
  std::vector<Tensor> rows;
  rows.reserve(frame_embed.dim(0));
  for (std::size_t i = 0; i < frame_embed.dim(0); ++i) {
    const auto top = LanguageModality::rank(words, slice(frames, 0, i, i + 1), cfg_.top_k);
    rows.push_back(aam_(top.weighted_features()).output);
  }
  return concat(rows, 0);
}

Tensor Encoder::encode_event(const SnippetFeatures& snippets) const {
  if (snippets.backbone_map.dim(0) != snippets.frame_embed.dim(0)) {
    throw DimensionError("encode_event: " + shape_str(snippets.backbone_map.shape()) +
                         " backbone map vs " + shape_str(snippets.frame_embed.shape()) +
                         " frame embeddings");
  }
  return fusion_(vision_(snippets.backbone_map), language_features(snippets.frame_embed));
}

}  // namespace vlcap
