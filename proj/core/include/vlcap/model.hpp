#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "vlcap/data.hpp"
#include "vlcap/decoder.hpp"
#include "vlcap/encoder.hpp"
#include "vlcap/losses.hpp"

namespace vlcap {

struct ModelConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;       // vocab_size is taken from the vocabulary
  std::size_t caption_dim = 32;  // embedding width of the caption encoder
  double rho_init = std::log(1.0 / 0.07);
  std::uint64_t seed = 0;      // parameter initialization

  void validate() const;
};

// Encoder, memory decoder, caption encoder, temperature and the event
// embedding head, registered on one parameter store.
class VLCapModel {
 public:
  struct EventResult {
    UnifiedInput input;
    DecoderOutput output;
    Tensor event_embedding;  // [1 x d_e], unit norm
    MemoryState memory;      // state after this event
  };

  struct Losses {
    Tensor mle;
    Tensor vl;  // undefined when the batch has fewer than 2 events
    Tensor total;
  };

  VLCapModel(const ModelConfig& cfg, const Vocabulary& vocab);

  VLCapModel(const VLCapModel&) = delete;
  VLCapModel& operator=(const VLCapModel&) = delete;

  // F^VL for the real snippets, zero rows for padding: [video_len x d_model].
  Tensor encode(const PaddedEvent& event) const;
  Tensor encode(const EventSample& event) const;

  EventResult forward_event(const PaddedEvent& event, const MemoryState& memory, bool training,
                            Rng* rng) const;

  // Memory flows through each stream's events in order; gradients flow
  // through the memory as well.
  Losses batch_loss(const Batch& batch, const LossConfig& loss, bool training, Rng* rng) const;

  // Greedy paragraph for one video, one sentence per event.
  std::vector<std::vector<TokenId>> generate(const VideoRecord& video,
                                             std::size_t max_len) const;

  const ModelConfig& config() const { return cfg_; }
  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }
  Encoder& encoder() { return encoder_; }
  const Encoder& encoder() const { return encoder_; }
  Decoder& decoder() { return decoder_; }
  const Decoder& decoder() const { return decoder_; }
  const CaptionEncoder& caption_encoder() const { return caption_; }
  const Tensor& rho() const { return rho_; }

 private:
  ModelConfig cfg_;
  ParameterStore store_;
  Encoder encoder_;
  Decoder decoder_;
  CaptionEncoder caption_;
  Linear event_proj_;
  Tensor rho_;
};

}  // namespace vlcap
