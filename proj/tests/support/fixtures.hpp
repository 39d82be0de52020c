#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "vlcap/config.hpp"
#include "vlcap/data.hpp"
#include "vlcap/model.hpp"

namespace vlcap::test {

// Small features and a narrow grammar; trains in well under a second per step.
inline SynthOptions tiny_synth(std::uint64_t seed, std::size_t videos) {
  SynthOptions o;
  o.seed = seed;
  o.n_videos = videos;
  o.events_per_video_mean = 2.5;
  o.vocab = {4, 4, 4, 2};
  o.positions = 2;
  o.backbone_dim = 8;
  o.frame_dim = 8;
  o.min_snippets = 2;
  o.max_snippets = 5;
  return o;
}

inline ModelConfig tiny_model(std::uint64_t seed = 0) {
  ModelConfig m;
  m.seed = seed;
  m.encoder = {.backbone_dim = 8,
               .frame_dim = 8,
               .word_dim = 8,
               .joint_dim = 8,
               .vision_hidden = 16,
               .model_dim = 16,
               .top_k = 4};
  m.decoder.n_layers = 1;
  m.decoder.n_heads = 2;
  m.decoder.d_model = 16;
  m.decoder.d_ff = 32;
  m.decoder.max_video_len = 6;
  m.decoder.max_text_len = 10;
  m.decoder.dropout = 0.0;
  m.caption_dim = 8;
  return m;
}

inline MaxLens limits_of(const ModelConfig& m) {
  return {m.decoder.max_video_len, m.decoder.max_text_len};
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("vlcap_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace vlcap::test
