#include "vlcap/model.hpp"

#include <algorithm>
#include <string>

#include "vlcap/errors.hpp"

namespace vlcap {

namespace {

Tensor snippet_tensor(std::span<const double> flat, Shape shape) {
  return Tensor(std::move(shape), std::vector<double>(flat.begin(), flat.end()));
}

}  // namespace

void ModelConfig::validate() const {
  encoder.validate();
  auto d = decoder;
  d.vocab_size = std::max<std::size_t>(d.vocab_size, 1);  // filled in from the vocabulary
  d.validate();
  if (encoder.model_dim != decoder.d_model) {
    throw ConfigError("encoder model_dim " + std::to_string(encoder.model_dim) +
                      " != decoder d_model " + std::to_string(decoder.d_model));
  }
  if (caption_dim == 0) throw ConfigError("caption_dim must be positive");
  if (!std::isfinite(rho_init)) throw ConfigError("rho_init must be finite");
}

VLCapModel::VLCapModel(const ModelConfig& cfg, const Vocabulary& vocab) : cfg_(cfg) {
  cfg_.decoder.vocab_size = vocab.size();
  cfg_.validate();
  cfg_.decoder.validate();
  Rng rng(cfg_.seed);
  encoder_ = Encoder(store_, cfg_.encoder, vocab.content_words(), rng);
  decoder_ = Decoder(store_, cfg_.decoder, rng);
  caption_ = CaptionEncoder(store_, vocab.size(), cfg_.caption_dim, cfg_.encoder.joint_dim, rng);
  event_proj_ = Linear(store_, "event_proj", cfg_.decoder.d_model, cfg_.encoder.joint_dim, rng);
  rho_ = store_.constant("rho", {1}, cfg_.rho_init);
}

Tensor VLCapModel::encode(const PaddedEvent& e) const {
  const auto real = e.real_video_len;
  const auto grid = e.positions * e.backbone_dim;
  SnippetFeatures f{
      snippet_tensor(std::span(e.snippet_feats).first(real * grid),
                     {real, e.positions, e.backbone_dim}),
      snippet_tensor(std::span(e.frame_embeds).first(real * e.frame_dim), {real, e.frame_dim})};
  auto vl = encoder_.encode_event(f);
  if (e.video_len == real) return vl;
  return concat({vl, Tensor::zeros({e.video_len - real, cfg_.decoder.d_model})}, 0);
}

Tensor VLCapModel::encode(const EventSample& e) const {
  SnippetFeatures f{
      snippet_tensor(e.snippet_feats, {e.snippets, e.positions, e.backbone_dim}),
      snippet_tensor(e.frame_embeds, {e.snippets, e.frame_dim})};
  return encoder_.encode_event(f);
}

VLCapModel::EventResult VLCapModel::forward_event(const PaddedEvent& e,
                                                  const MemoryState& memory, bool training,
                                                  Rng* rng) const {
  EventResult r;
  r.input = decoder_.build_unified_input(encode(e), e.input_tokens, e.real_video_len, training,
                                         rng);
  r.output = decoder_.forward(r.input, memory, training, rng);
  // f_i: mean of the final layer's real video rows.
  const auto pooled = mean(slice(r.output.hidden, 0, 0, e.real_video_len), 0);
  r.event_embedding =
      l2_normalize(event_proj_(reshape(pooled, {1, cfg_.decoder.d_model})));
  r.memory = decoder_.update_memory(memory, r.output, r.input);
  return r;
}

VLCapModel::Losses VLCapModel::batch_loss(const Batch& batch, const LossConfig& loss,
                                          bool training, Rng* rng) const {
  std::vector<Tensor> logits, events, captions;
  std::vector<TokenId> targets;
  for (const auto& stream : batch.streams) {
    auto memory = MemoryState::zeros(cfg_.decoder);
    for (const auto& e : stream.events) {
      auto r = forward_event(e, memory, training, rng);
      logits.push_back(r.output.logits);
      targets.insert(targets.end(), e.target_tokens.begin(), e.target_tokens.end());
      events.push_back(r.event_embedding);
      captions.push_back(caption_.encode(e.caption_tokens));
      memory = std::move(r.memory);
    }
  }
  if (logits.empty()) throw ContractError("batch_loss: empty batch");
  Losses out;
  out.mle = mle_loss(concat(logits, 0), targets, loss.label_smoothing);
  if (events.size() >= 2)
    out.vl = vl_loss(concat(events, 0), concat(captions, 0), rho_);
  out.total = total_loss(out.mle, out.vl, loss);
  return out;
}

std::vector<std::vector<TokenId>> VLCapModel::generate(const VideoRecord& video,
                                                       std::size_t max_len) const {
  NoGradGuard no_grad;
  std::vector<Tensor> vl;
  for (const auto& e : video.events) vl.push_back(encode(e));
  return decoder_.generate_paragraph(vl, max_len);
}

}  // namespace vlcap
