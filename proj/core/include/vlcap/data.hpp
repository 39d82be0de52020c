#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vlcap/special_tokens.hpp"

namespace vlcap {

struct EventSample {
  double start = 0.0;
  double end = 0.0;
  std::string caption;
  std::size_t snippets = 0;      // L
  std::size_t positions = 0;     // P
  std::size_t backbone_dim = 0;  // d_v
  std::size_t frame_dim = 0;     // d_img
  std::vector<double> snippet_feats;  // L x P x d_v, row-major
  std::vector<double> frame_embeds;   // L x d_img, row-major

  bool operator==(const EventSample&) const = default;
};

struct VideoRecord {
  std::string video_id;
  std::vector<EventSample> events;  // ordered by start

  bool operator==(const VideoRecord&) const = default;
};

// One JSON object per line:
// {"video_id": str, "events": [{"start": float, "end": float, "caption": str,
//   "snippet_feats": [[[float]]], "frame_embeds": [[float]]}]}
// Blank lines are skipped. Errors carry the 1-based line number.
std::vector<VideoRecord> read_jsonl(std::istream& in);
std::vector<VideoRecord> load_jsonl(const std::string& path);
void write_jsonl(std::ostream& out, const std::vector<VideoRecord>& records);
void write_jsonl(const std::string& path, const std::vector<VideoRecord>& records);

// {"video_id": str, "sentences": [str]} per line.
struct Prediction {
  std::string video_id;
  std::vector<std::string> sentences;

  bool operator==(const Prediction&) const = default;
};
std::vector<Prediction> load_predictions(const std::string& path);
void write_predictions(std::ostream& out, const std::vector<Prediction>& predictions);
void write_predictions(const std::string& path, const std::vector<Prediction>& predictions);

// Word-bank sizes for the caption grammar
// "a <subject> <verb> the <object> [in the <place>]".
struct VocabSpec {
  std::size_t subjects = 8;
  std::size_t verbs = 8;
  std::size_t objects = 8;
  std::size_t places = 6;
};

struct SynthOptions {
  std::uint64_t seed = 0;
  std::size_t n_videos = 100;
  double events_per_video_mean = 3.65;
  VocabSpec vocab;
  std::size_t positions = 4;
  std::size_t backbone_dim = 32;
  std::size_t frame_dim = 32;
  std::size_t min_snippets = 2;
  std::size_t max_snippets = 12;
  double noise = 0.1;
};

// "anet" (3.65 events per video) or "youcook" (7.7).
SynthOptions synth_profile(std::string_view name);

// Pure function of its options. Features are the caption's bag-of-words
// vector times a fixed random planting matrix plus Gaussian noise, so the
// features determine the caption.
std::vector<VideoRecord> synth_corpus(const SynthOptions& options);

struct CorpusSplit {
  std::vector<VideoRecord> train, val, test;
};
// Contiguous 80/10/10 split in record order.
CorpusSplit split_corpus(const std::vector<VideoRecord>& records);

class Vocabulary {
 public:
  Vocabulary();

  // Words with count >= min_count, ordered by count desc then lexicographic,
  // after the reserved PAD/BOS/EOS/UNK entries.
  static Vocabulary build(const std::vector<VideoRecord>& records, std::size_t min_count);
  static Vocabulary from_words(const std::vector<std::string>& content_words);

  std::size_t size() const { return words_.size(); }
  TokenId id(const std::string& word) const;
  const std::string& word(TokenId id) const;
  std::vector<TokenId> encode(const std::vector<std::string>& tokens) const;
  std::vector<TokenId> encode_caption(std::string_view caption) const;
  // Drops reserved ids.
  std::vector<std::string> decode(std::span<const TokenId> ids) const;
  std::string decode_sentence(std::span<const TokenId> ids) const;

  const std::vector<std::string>& words() const { return words_; }
  std::vector<std::string> content_words() const;

  bool operator==(const Vocabulary& other) const { return words_ == other.words_; }

 private:
  void add(const std::string& word);

  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> index_;
};

struct MaxLens {
  std::size_t video = 12;
  std::size_t text = 20;  // input length including BOS
};

// One event, right-padded to the batch extents. Teacher forcing:
// input = [BOS, w1..wn, PAD...], target = [w1..wn, EOS, PAD...].
struct PaddedEvent {
  std::size_t video_len = 0;
  std::size_t real_video_len = 0;
  std::size_t text_len = 0;
  std::size_t real_text_len = 0;
  std::size_t positions = 0;
  std::size_t backbone_dim = 0;
  std::size_t frame_dim = 0;
  std::vector<double> snippet_feats;  // video_len x P x d_v
  std::vector<double> frame_embeds;   // video_len x d_img
  std::vector<bool> video_mask;
  std::vector<TokenId> input_tokens;
  std::vector<TokenId> target_tokens;
  std::vector<bool> text_mask;
  std::vector<TokenId> caption_tokens;  // w1..wn
};

// All events of one video, in order; the unit a memory state flows through.
struct Stream {
  std::string video_id;
  std::vector<PaddedEvent> events;
};

struct Batch {
  std::vector<Stream> streams;
  std::size_t video_len = 0;
  std::size_t text_len = 0;

  std::size_t event_count() const;
};

PaddedEvent pad_event(const EventSample& event, const Vocabulary& vocab, std::size_t video_len,
                      std::size_t text_len, const MaxLens& limits);

// Groups whole videos, batch_size per batch, in record order. Throws
// OverlengthError naming the video and event when one exceeds `limits`.
std::vector<Batch> make_batches(const std::vector<VideoRecord>& records,
                                const Vocabulary& vocab, std::size_t batch_size,
                                const MaxLens& limits);

}  // namespace vlcap
