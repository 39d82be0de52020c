#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "vlcap/data.hpp"
#include "vlcap/losses.hpp"
#include "vlcap/model.hpp"

namespace vlcap {

struct TrainConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;  // decoupled; matrices only
  std::size_t warmup_epochs = 5;
  std::size_t epochs = 50;
  std::size_t batch_size = 4;
  double grad_clip = 1.0;  // global L2 norm; 0 disables
  std::uint64_t seed = 0;  // shuffling and dropout
  std::size_t max_steps = 0;  // 0: no cap
  std::size_t eval_every = 1;  // epochs; 0 disables validation
  std::size_t max_gen_len = 19;

  void validate() const;
};

// Either `corpus` (split 80/10/10, train and val parts used) or explicit
// `train`/`val` files.
struct DataConfig {
  std::string corpus;
  std::string train;
  std::string val;
  std::size_t min_count = 1;

  void validate() const;
};

// Sequence limits come from the decoder (max_video_len, max_text_len).
struct RunConfig {
  ModelConfig model;
  LossConfig loss;
  TrainConfig train;
  DataConfig data;
  std::string out_dir = "run";

  void validate() const;
};

// Strict: unknown keys and wrong types raise ConfigError. Missing keys keep
// their defaults. Relative data paths resolve against `base_dir`.
RunConfig parse_run_config(std::string_view json_text, const std::string& base_dir = "");
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& cfg);

std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig parse_model_config(std::string_view json_text);

}  // namespace vlcap
