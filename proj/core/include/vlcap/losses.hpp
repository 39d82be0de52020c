#pragma once

#include <cmath>
#include <span>
#include <string>

#include "vlcap/nn.hpp"
#include "vlcap/special_tokens.hpp"

namespace vlcap {

struct LossConfig {
  double label_smoothing = 0.1;
  double lambda_vl = 0.1;
  double rho_init = std::log(1.0 / 0.07);

  void validate() const;
};

// Upper bound on exp(rho).
inline constexpr double kMaxLogitScale = 100.0;

// Label-smoothed cross-entropy, mean over positions whose target != PAD.
// The smoothed target puts 1 - eps on the gold token and eps / (V - 1) on
// every other token. logits: [T x V].
Tensor mle_loss(const Tensor& logits, std::span<const TokenId> targets, double smoothing);

// Symmetric InfoNCE over an N x N similarity matrix
// S_ij = min(exp(rho), kMaxLogitScale) * (f_i . g_j): the mean of the
// row-wise and column-wise cross-entropies with diagonal targets.
// Rows of both inputs are expected to be unit-norm. N >= 2.
Tensor vl_loss(const Tensor& event_embeds, const Tensor& caption_embeds, const Tensor& rho);

Tensor total_loss(const Tensor& mle, const Tensor& vl, const LossConfig& cfg);

// Embedding-mean caption encoder producing f^T: mean of token embeddings,
// linear projection to d_e, unit norm.
class CaptionEncoder {
 public:
  CaptionEncoder() = default;
  CaptionEncoder(ParameterStore& store, std::size_t vocab_size, std::size_t embed_dim,
                 std::size_t joint_dim, Rng& rng);

  Tensor encode(std::span<const TokenId> tokens) const;  // -> [1 x d_e]

 private:
  Tensor table_;
  Linear proj_;
};

}  // namespace vlcap
