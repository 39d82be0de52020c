#include "vlcap/losses.hpp"

#include <vector>

#include "vlcap/errors.hpp"

namespace vlcap {

void LossConfig::validate() const {
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) {
    throw ConfigError("loss: label_smoothing must be in [0, 1)");
  }
  if (!(lambda_vl >= 0.0)) throw ConfigError("loss: lambda_vl must be >= 0");
  if (!std::isfinite(rho_init)) throw ConfigError("loss: rho_init must be finite");
}

Tensor mle_loss(const Tensor& logits, std::span<const TokenId> targets, double smoothing) {
  if (logits.rank() != 2 || logits.dim(0) != targets.size()) {
    throw DimensionError("mle_loss: logits " + shape_str(logits.shape()) + " for " +
                         std::to_string(targets.size()) + " targets");
  }
  const auto t = logits.dim(0);
  const auto v = logits.dim(1);
  if (v < 2) throw DimensionError("mle_loss: vocabulary must have at least 2 entries");
  const double off = smoothing / static_cast<double>(v - 1);
  std::vector<double> dist(t * v, 0.0);
  std::size_t counted = 0;
  for (std::size_t i = 0; i < t; ++i) {
    if (targets[i] == kPad) continue;
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= v) {
      throw DimensionError("mle_loss: target " + std::to_string(targets[i]) +
                           " outside vocabulary of " + std::to_string(v));
    }
    ++counted;
    for (std::size_t j = 0; j < v; ++j) dist[i * v + j] = off;
    dist[i * v + static_cast<std::size_t>(targets[i])] = 1.0 - smoothing;
  }
  if (counted == 0) throw ContractError("mle_loss: every position is masked");
  const auto logp = log_softmax(logits, 1);
  return scale(sum(mul(logp, Tensor({t, v}, std::move(dist)))),
               -1.0 / static_cast<double>(counted));
}

Tensor vl_loss(const Tensor& event_embeds, const Tensor& caption_embeds, const Tensor& rho) {
  if (event_embeds.rank() != 2 || event_embeds.shape() != caption_embeds.shape()) {
    throw DimensionError("vl_loss: event embeddings " + shape_str(event_embeds.shape()) +
                         " vs caption embeddings " + shape_str(caption_embeds.shape()));
  }
  const auto n = event_embeds.dim(0);
  if (n < 2) throw ContractError("vl_loss: need N >= 2 pairs, got " + std::to_string(n));
  if (rho.numel() != 1) throw DimensionError("vl_loss: rho must be a scalar");

  const auto logit_scale = clamp_max(exp(rho), kMaxLogitScale);
  const auto sim = mul(matmul(event_embeds, transpose(caption_embeds)), logit_scale);
  std::vector<double> eye(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) eye[i * n + i] = 1.0;
  const Tensor diag({n, n}, std::move(eye));
  const auto rows = sum(mul(log_softmax(sim, 1), diag));
  const auto cols = sum(mul(log_softmax(sim, 0), diag));
  return scale(add(rows, cols), -0.5 / static_cast<double>(n));
}

Tensor total_loss(const Tensor& mle, const Tensor& vl, const LossConfig& cfg) {
  if (cfg.lambda_vl == 0.0 || !vl.defined()) return mle;
  return add(mle, scale(vl, cfg.lambda_vl));
}

CaptionEncoder::CaptionEncoder(ParameterStore& store, std::size_t vocab_size,
                               std::size_t embed_dim, std::size_t joint_dim, Rng& rng) {
  table_ = store.normal("caption.embedding", {vocab_size, embed_dim}, 1.0, rng);
  proj_ = Linear(store, "caption.proj", embed_dim, joint_dim, rng);
}

Tensor CaptionEncoder::encode(std::span<const TokenId> tokens) const {
  std::vector<std::size_t> ids;
  for (auto t : tokens) {
    if (t == kPad) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= table_.dim(0)) {
      throw DimensionError("caption_encode: token id " + std::to_string(t) +
                           " outside vocabulary of " + std::to_string(table_.dim(0)));
    }
    ids.push_back(static_cast<std::size_t>(t));
  }
  if (ids.empty()) throw ContractError("caption_encode: empty caption");
  return l2_normalize(proj_(reshape(mean(gather_rows(table_, ids), 0), {1, table_.dim(1)})));
}

}  // namespace vlcap
