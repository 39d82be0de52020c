#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vlcap/config.hpp"
#include "vlcap/metrics.hpp"
#include "vlcap/model.hpp"

namespace vlcap {

// Linear warmup from 0, then constant: lr * step / warmup_steps while
// step < warmup_steps (step is the 0-based update index).
double scheduled_lr(double lr, std::size_t step, std::size_t warmup_steps);

// Adam with decoupled weight decay. Decay applies to parameters of rank >= 2.
class AdamW {
 public:
  AdamW(std::vector<NamedParameter> params, const TrainConfig& cfg);

  // Throws NumericError naming the first parameter with a non-finite
  // gradient; no parameter is touched in that case.
  void step(double lr);

  std::size_t steps() const { return t_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

 private:
  std::vector<NamedParameter> params_;
  std::vector<std::vector<double>> m_, v_;
  std::vector<bool> decay_;
  double beta1_, beta2_, eps_, weight_decay_;
  std::size_t t_ = 0;
};

// Scales all gradients so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(const std::vector<NamedParameter>& params, double max_norm);

// Throws NumericError naming the parameter if any gradient is NaN or Inf.
void check_finite_grads(const std::vector<NamedParameter>& params);

struct EvalResult {
  MetricReport report;
  std::vector<Prediction> predictions;
};

std::vector<Prediction> generate_predictions(const VLCapModel& model, const Vocabulary& vocab,
                                             const std::vector<VideoRecord>& videos,
                                             std::size_t max_len);

// Greedy paragraphs scored against the groundtruth captions. Needs >= 2
// videos (CIDEr idf).
EvalResult evaluate(const VLCapModel& model, const Vocabulary& vocab,
                    const std::vector<VideoRecord>& videos, std::size_t max_len);

struct TrainSummary {
  std::size_t steps = 0;
  double final_mle = 0.0;
  std::optional<double> best_cider;
  std::string best_checkpoint;
  std::string last_checkpoint;
};

// Optimizes `model` in place. Writes one JSON object per line to `log`
// (one per step, one per validation pass) and, when `checkpoint_dir` is
// non-empty, best.ckpt (highest validation CIDEr) and last.ckpt there.
TrainSummary train_model(VLCapModel& model, const Vocabulary& vocab, const RunConfig& cfg,
                         const std::vector<VideoRecord>& train_set,
                         const std::vector<VideoRecord>& val_set, std::ostream& log,
                         const std::string& checkpoint_dir = "");

// Loads data per cfg.data, builds the vocabulary and model, writes
// out_dir/train_log.jsonl, out_dir/config.json and the checkpoints.
TrainSummary train(const RunConfig& cfg);

}  // namespace vlcap
