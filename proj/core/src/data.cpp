#include "vlcap/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "vlcap/errors.hpp"
#include "vlcap/metrics.hpp"
#include "vlcap/rng.hpp"

namespace vlcap {

using nlohmann::json;

namespace {

double finite_number(const json& j, const std::string& what, std::size_t line) {
  if (!j.is_number()) throw ParseError(what + " must be a number", line);
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ParseError(what + " is not finite", line);
  return v;
}

const json& field(const json& obj, const char* key, const std::string& where, std::size_t line) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + ": missing field '" + key + "'", line);
  return *it;
}

EventSample parse_event(const json& j, const std::string& where, std::size_t line) {
  if (!j.is_object()) throw ParseError(where + " must be an object", line);
  EventSample e;
  e.start = finite_number(field(j, "start", where, line), where + ".start", line);
  e.end = finite_number(field(j, "end", where, line), where + ".end", line);
  if (!(e.start < e.end)) throw ParseError(where + ": start must precede end", line);
  const auto& cap = field(j, "caption", where, line);
  if (!cap.is_string()) throw ParseError(where + ".caption must be a string", line);
  e.caption = cap.get<std::string>();

  const auto& sf = field(j, "snippet_feats", where, line);
  if (!sf.is_array() || sf.empty()) {
    throw ParseError(where + ".snippet_feats must be a non-empty [L][P][d_v] array", line);
  }
  e.snippets = sf.size();
  for (std::size_t l = 0; l < sf.size(); ++l) {
    const auto& grid = sf[l];
    const auto at = where + ".snippet_feats[" + std::to_string(l) + "]";
    if (!grid.is_array() || grid.empty()) throw ParseError(at + " must be a non-empty array", line);
    if (l == 0) e.positions = grid.size();
    if (grid.size() != e.positions) throw ParseError(at + " has a ragged position count", line);
    for (std::size_t p = 0; p < grid.size(); ++p) {
      const auto& vec = grid[p];
      const auto at_p = at + "[" + std::to_string(p) + "]";
      if (!vec.is_array() || vec.empty()) throw ParseError(at_p + " must be a non-empty array", line);
      if (l == 0 && p == 0) e.backbone_dim = vec.size();
      if (vec.size() != e.backbone_dim) throw ParseError(at_p + " has a ragged width", line);
      for (std::size_t c = 0; c < vec.size(); ++c)
        e.snippet_feats.push_back(finite_number(vec[c], at_p + "[" + std::to_string(c) + "]", line));
    }
  }

  const auto& fe = field(j, "frame_embeds", where, line);
  if (!fe.is_array() || fe.size() != e.snippets) {
    throw ParseError(where + ".frame_embeds must have one row per snippet (" +
                         std::to_string(e.snippets) + ")",
                     line);
  }
  for (std::size_t l = 0; l < fe.size(); ++l) {
    const auto& row = fe[l];
    const auto at = where + ".frame_embeds[" + std::to_string(l) + "]";
    if (!row.is_array() || row.empty()) throw ParseError(at + " must be a non-empty array", line);
    if (l == 0) e.frame_dim = row.size();
    if (row.size() != e.frame_dim) throw ParseError(at + " has a ragged width", line);
    for (std::size_t c = 0; c < row.size(); ++c)
      e.frame_embeds.push_back(finite_number(row[c], at + "[" + std::to_string(c) + "]", line));
  }
  return e;
}

VideoRecord parse_record(const std::string& text, std::size_t line) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& err) {
    throw ParseError(std::string("malformed JSON: ") + err.what(), line);
  }
  if (!j.is_object()) throw ParseError("record must be a JSON object", line);
  VideoRecord r;
  const auto& id = field(j, "video_id", "record", line);
  if (!id.is_string()) throw ParseError("video_id must be a string", line);
  r.video_id = id.get<std::string>();
  const auto& events = field(j, "events", "record", line);
  if (!events.is_array() || events.empty()) {
    throw ParseError("events must be a non-empty array", line);
  }
  for (std::size_t i = 0; i < events.size(); ++i) {
    r.events.push_back(parse_event(events[i], "events[" + std::to_string(i) + "]", line));
    if (i > 0 && r.events[i].start < r.events[i - 1].start) {
      throw ParseError("events must be ordered by start time", line);
    }
  }
  return r;
}

json event_to_json(const EventSample& e) {
  json feats = json::array();
  for (std::size_t l = 0; l < e.snippets; ++l) {
    json grid = json::array();
    for (std::size_t p = 0; p < e.positions; ++p) {
      const auto off = (l * e.positions + p) * e.backbone_dim;
      grid.push_back(std::vector<double>(e.snippet_feats.begin() + static_cast<std::ptrdiff_t>(off),
                                         e.snippet_feats.begin() +
                                             static_cast<std::ptrdiff_t>(off + e.backbone_dim)));
    }
    feats.push_back(std::move(grid));
  }
  json frames = json::array();
  for (std::size_t l = 0; l < e.snippets; ++l) {
    const auto off = l * e.frame_dim;
    frames.push_back(std::vector<double>(
        e.frame_embeds.begin() + static_cast<std::ptrdiff_t>(off),
        e.frame_embeds.begin() + static_cast<std::ptrdiff_t>(off + e.frame_dim)));
  }
  return json{{"start", e.start},
              {"end", e.end},
              {"caption", e.caption},
              {"snippet_feats", std::move(feats)},
              {"frame_embeds", std::move(frames)}};
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path, 0);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  return out;
}

// Caption grammar banks. Subject, verb, object and place banks are
// disjoint, so a bag of words pins down the sentence.
const std::vector<std::string> kSubjects = {"man",    "woman",  "boy",   "girl",  "chef",
                                            "dog",    "player", "child", "worker", "dancer",
                                            "farmer", "singer"};
const std::vector<std::string> kVerbs = {"cuts",   "holds",  "throws", "washes", "lifts",
                                         "paints", "opens",  "pushes", "kicks",  "carries",
                                         "stirs",  "drops"};
const std::vector<std::string> kObjects = {"ball",   "knife", "bowl",  "box",    "rope",
                                           "board",  "bottle", "bag",  "pan",    "chair",
                                           "guitar", "towel"};
const std::vector<std::string> kPlaces = {"kitchen", "park", "field", "room",
                                          "yard",    "street", "gym", "garden"};
const std::vector<std::string> kGlue = {"a", "the", "in"};

constexpr std::uint64_t kPlantingSeed = 0x5eedf00dULL;

}  // namespace

std::vector<VideoRecord> read_jsonl(std::istream& in) {
  std::vector<VideoRecord> records;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); }))
      continue;
    records.push_back(parse_record(text, line));
  }
  return records;
}

std::vector<VideoRecord> load_jsonl(const std::string& path) {
  auto in = open_in(path);
  return read_jsonl(in);
}

void write_jsonl(std::ostream& out, const std::vector<VideoRecord>& records) {
  for (const auto& r : records) {
    json events = json::array();
    for (const auto& e : r.events) events.push_back(event_to_json(e));
    out << json{{"video_id", r.video_id}, {"events", std::move(events)}}.dump() << '\n';
  }
}

void write_jsonl(const std::string& path, const std::vector<VideoRecord>& records) {
  auto out = open_out(path);
  write_jsonl(out, records);
}

std::vector<Prediction> load_predictions(const std::string& path) {
  auto in = open_in(path);
  std::vector<Prediction> preds;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& err) {
      throw ParseError(std::string("malformed JSON: ") + err.what(), line);
    }
    Prediction p;
    const auto& id = field(j, "video_id", "prediction", line);
    const auto& sents = field(j, "sentences", "prediction", line);
    if (!id.is_string() || !sents.is_array()) {
      throw ParseError("prediction needs a string video_id and a sentences array", line);
    }
    p.video_id = id.get<std::string>();
    for (const auto& s : sents) {
      if (!s.is_string()) throw ParseError("sentences must be strings", line);
      p.sentences.push_back(s.get<std::string>());
    }
    preds.push_back(std::move(p));
  }
  return preds;
}

void write_predictions(std::ostream& out, const std::vector<Prediction>& predictions) {
  for (const auto& p : predictions)
    out << json{{"video_id", p.video_id}, {"sentences", p.sentences}}.dump() << '\n';
}

void write_predictions(const std::string& path, const std::vector<Prediction>& predictions) {
  auto out = open_out(path);
  write_predictions(out, predictions);
}

SynthOptions synth_profile(std::string_view name) {
  SynthOptions o;
  if (name == "anet") {
    o.events_per_video_mean = 3.65;
  } else if (name == "youcook") {
    o.events_per_video_mean = 7.7;
  } else {
    throw ConfigError("unknown synthetic profile '" + std::string(name) +
                      "' (expected anet or youcook)");
  }
  return o;
}

std::vector<VideoRecord> synth_corpus(const SynthOptions& o) {
  const auto& vs = o.vocab;
  if (vs.subjects == 0 || vs.verbs == 0 || vs.objects == 0 || vs.subjects > kSubjects.size() ||
      vs.verbs > kVerbs.size() || vs.objects > kObjects.size() || vs.places > kPlaces.size()) {
    throw ConfigError("synth_corpus: vocab spec outside the available word banks");
  }
  if (o.events_per_video_mean < 1.0) throw ConfigError("synth_corpus: mean events must be >= 1");
  if (o.min_snippets == 0 || o.min_snippets > o.max_snippets) {
    throw ConfigError("synth_corpus: invalid snippet range");
  }

  // Word slots of the bag-of-words vector, fixed regardless of spec.
  std::map<std::string, std::size_t> slot;
  for (const auto* bank : {&kGlue, &kSubjects, &kVerbs, &kObjects, &kPlaces})
    for (const auto& w : *bank) slot.emplace(w, slot.size());
  const auto n_slots = slot.size();

  // The planting maps do not depend on the corpus seed, so corpora drawn
  // with different seeds share one feature/caption relation.
  Rng plant(kPlantingSeed);
  std::vector<double> to_backbone(n_slots * o.backbone_dim), to_frame(n_slots * o.frame_dim);
  for (auto& v : to_backbone) v = plant.normal();
  for (auto& v : to_frame) v = plant.normal();

  Rng rng(o.seed);
  std::vector<VideoRecord> corpus;
  corpus.reserve(o.n_videos);
  for (std::size_t vi = 0; vi < o.n_videos; ++vi) {
    VideoRecord video;
    video.video_id = "synth_" + std::to_string(o.seed) + "_" + std::to_string(vi);
    const auto n_events =
        1 + static_cast<std::size_t>(rng.poisson(o.events_per_video_mean - 1.0));
    double clock = 0.0;
    for (std::size_t ei = 0; ei < n_events; ++ei) {
      EventSample e;
      e.start = clock + rng.uniform(0.0, 5.0);
      e.end = e.start + rng.uniform(5.0, 30.0);
      clock = e.start;

      std::vector<std::string> words{"a"};
      words.push_back(kSubjects[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(vs.subjects) - 1))]);
      words.push_back(kVerbs[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(vs.verbs) - 1))]);
      words.push_back("the");
      words.push_back(kObjects[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(vs.objects) - 1))]);
      if (vs.places > 0 && rng.uniform() < 0.5) {
        words.push_back("in");
        words.push_back("the");
        words.push_back(kPlaces[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(vs.places) - 1))]);
      }
      for (const auto& w : words) {
        if (!e.caption.empty()) e.caption += ' ';
        e.caption += w;
      }

      std::vector<double> bow(n_slots, 0.0);
      for (const auto& w : words) bow[slot.at(w)] += 1.0;

      e.snippets = static_cast<std::size_t>(rng.uniform_int(
          static_cast<std::int64_t>(o.min_snippets), static_cast<std::int64_t>(o.max_snippets)));
      e.positions = o.positions;
      e.backbone_dim = o.backbone_dim;
      e.frame_dim = o.frame_dim;
      std::vector<double> base_v(o.backbone_dim, 0.0), base_f(o.frame_dim, 0.0);
      for (std::size_t s = 0; s < n_slots; ++s) {
        if (bow[s] == 0.0) continue;
        for (std::size_t c = 0; c < o.backbone_dim; ++c)
          base_v[c] += bow[s] * to_backbone[s * o.backbone_dim + c];
        for (std::size_t c = 0; c < o.frame_dim; ++c)
          base_f[c] += bow[s] * to_frame[s * o.frame_dim + c];
      }
      for (std::size_t l = 0; l < e.snippets; ++l) {
        for (std::size_t p = 0; p < e.positions; ++p)
          for (std::size_t c = 0; c < o.backbone_dim; ++c)
            e.snippet_feats.push_back(base_v[c] + o.noise * rng.normal());
        for (std::size_t c = 0; c < o.frame_dim; ++c)
          e.frame_embeds.push_back(base_f[c] + o.noise * rng.normal());
      }
      video.events.push_back(std::move(e));
    }
    corpus.push_back(std::move(video));
  }
  return corpus;
}

CorpusSplit split_corpus(const std::vector<VideoRecord>& records) {
  const auto n = records.size();
  const auto n_train = n * 8 / 10;
  const auto n_val = n / 10;
  CorpusSplit s;
  s.train.assign(records.begin(), records.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(records.begin() + static_cast<std::ptrdiff_t>(n_train),
               records.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(records.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), records.end());
  return s;
}

Vocabulary::Vocabulary() {
  for (const char* w : {"<pad>", "<bos>", "<eos>", "<unk>"}) add(w);
}

void Vocabulary::add(const std::string& word) {
  if (index_.contains(word)) throw ContractError("vocabulary: duplicate word " + word);
  index_.emplace(word, static_cast<TokenId>(words_.size()));
  words_.push_back(word);
}

Vocabulary Vocabulary::build(const std::vector<VideoRecord>& records, std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  std::size_t captions = 0;
  for (const auto& r : records)
    for (const auto& e : r.events) {
      ++captions;
      for (auto& t : tokenize(e.caption)) ++counts[t];
    }
  if (captions == 0) throw ContractError("build_vocab: no captions");
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [w, c] : counts)
    if (c >= min_count) kept.emplace_back(w, c);
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  for (const auto& [w, _] : kept) v.add(w);
  return v;
}

Vocabulary Vocabulary::from_words(const std::vector<std::string>& content_words) {
  Vocabulary v;
  for (const auto& w : content_words) v.add(w);
  return v;
}

TokenId Vocabulary::id(const std::string& word) const {
  const auto it = index_.find(word);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::word(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= words_.size()) {
    throw DimensionError("vocabulary: id " + std::to_string(id) + " out of range");
  }
  return words_[static_cast<std::size_t>(id)];
}

std::vector<TokenId> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::vector<TokenId> Vocabulary::encode_caption(std::string_view caption) const {
  return encode(tokenize(caption));
}

std::vector<std::string> Vocabulary::decode(std::span<const TokenId> ids) const {
  std::vector<std::string> out;
  for (auto i : ids)
    if (i >= kNumReserved) out.push_back(word(i));
  return out;
}

std::string Vocabulary::decode_sentence(std::span<const TokenId> ids) const {
  std::string s;
  for (const auto& w : decode(ids)) {
    if (!s.empty()) s += ' ';
    s += w;
  }
  return s;
}

std::vector<std::string> Vocabulary::content_words() const {
  return {words_.begin() + kNumReserved, words_.end()};
}

std::size_t Batch::event_count() const {
  std::size_t n = 0;
  for (const auto& s : streams) n += s.events.size();
  return n;
}

PaddedEvent pad_event(const EventSample& e, const Vocabulary& vocab, std::size_t video_len,
                      std::size_t text_len, const MaxLens& limits) {
  const auto words = vocab.encode_caption(e.caption);
  const auto real_text = words.size() + 1;
  if (e.snippets > limits.video || e.snippets > video_len) {
    throw OverlengthError("event has " + std::to_string(e.snippets) +
                          " snippets, limit is " + std::to_string(std::min(limits.video, video_len)));
  }
  if (real_text > limits.text || real_text > text_len) {
    throw OverlengthError("caption needs " + std::to_string(real_text) +
                          " text positions, limit is " +
                          std::to_string(std::min(limits.text, text_len)));
  }
  PaddedEvent p;
  p.video_len = video_len;
  p.real_video_len = e.snippets;
  p.text_len = text_len;
  p.real_text_len = real_text;
  p.positions = e.positions;
  p.backbone_dim = e.backbone_dim;
  p.frame_dim = e.frame_dim;
  p.snippet_feats = e.snippet_feats;
  p.snippet_feats.resize(video_len * e.positions * e.backbone_dim, 0.0);
  p.frame_embeds = e.frame_embeds;
  p.frame_embeds.resize(video_len * e.frame_dim, 0.0);
  p.video_mask.assign(video_len, false);
  std::fill_n(p.video_mask.begin(), e.snippets, true);
  p.input_tokens.assign(text_len, kPad);
  p.target_tokens.assign(text_len, kPad);
  p.text_mask.assign(text_len, false);
  p.input_tokens[0] = kBos;
  for (std::size_t j = 0; j < words.size(); ++j) {
    p.input_tokens[j + 1] = words[j];
    p.target_tokens[j] = words[j];
  }
  p.target_tokens[words.size()] = kEos;
  std::fill_n(p.text_mask.begin(), real_text, true);
  p.caption_tokens = words;
  return p;
}

std::vector<Batch> make_batches(const std::vector<VideoRecord>& records,
                                const Vocabulary& vocab, std::size_t batch_size,
                                const MaxLens& limits) {
  if (batch_size == 0) throw ConfigError("make_batches: batch_size must be >= 1");
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < records.size(); start += batch_size) {
    const auto stop = std::min(records.size(), start + batch_size);
    Batch b;
    for (std::size_t i = start; i < stop; ++i)
      for (std::size_t k = 0; k < records[i].events.size(); ++k) {
        const auto& e = records[i].events[k];
        const auto text = vocab.encode_caption(e.caption).size() + 1;
        if (e.snippets > limits.video || text > limits.text) {
          throw OverlengthError("video " + records[i].video_id + " event " + std::to_string(k) +
                                ": " + std::to_string(e.snippets) + " snippets / " +
                                std::to_string(text) + " text positions exceed limits " +
                                std::to_string(limits.video) + " / " +
                                std::to_string(limits.text));
        }
        b.video_len = std::max(b.video_len, e.snippets);
        b.text_len = std::max(b.text_len, text);
      }
    for (std::size_t i = start; i < stop; ++i) {
      Stream s;
      s.video_id = records[i].video_id;
      for (const auto& e : records[i].events)
        s.events.push_back(pad_event(e, vocab, b.video_len, b.text_len, limits));
      b.streams.push_back(std::move(s));
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

}  // namespace vlcap
