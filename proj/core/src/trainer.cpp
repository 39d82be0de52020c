#include "vlcap/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>

#include <json.hpp>

#include "vlcap/checkpoint.hpp"
#include "vlcap/errors.hpp"

namespace vlcap {

using nlohmann::json;

double scheduled_lr(double lr, std::size_t step, std::size_t warmup_steps) {
  if (step >= warmup_steps) return lr;
  return lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
}

AdamW::AdamW(std::vector<NamedParameter> params, const TrainConfig& cfg)
    : params_(std::move(params)),
      beta1_(cfg.beta1),
      beta2_(cfg.beta2),
      eps_(cfg.eps),
      weight_decay_(cfg.weight_decay) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
    decay_.push_back(p.tensor.rank() >= 2);
  }
}

void AdamW::step(double lr) {
  check_finite_grads(params_);
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor p = params_[i].tensor;
    if (!p.has_grad()) continue;
    const auto g = p.grad();
    auto w = p.mutable_data();
    auto& m = m_[i];
    auto& v = v_[i];
    const double decay = decay_[i] ? lr * weight_decay_ : 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * g[k];
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * g[k] * g[k];
      w[k] -= decay * w[k];
      w[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
    }
  }
}

void check_finite_grads(const std::vector<NamedParameter>& params) {
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad())
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter " + p.name);
  }
}

double clip_grad_norm(const std::vector<NamedParameter>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params)
    if (p.tensor.has_grad())
      for (double g : p.tensor.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (const auto& p : params) {
      if (!p.tensor.has_grad()) continue;
      // Gradient buffers of leaves are owned by their nodes.
      for (double& g : p.tensor.node()->grad) g *= factor;
    }
  }
  return norm;
}

std::vector<Prediction> generate_predictions(const VLCapModel& model, const Vocabulary& vocab,
                                             const std::vector<VideoRecord>& videos,
                                             std::size_t max_len) {
  if (vocab.size() != model.config().decoder.vocab_size) {
    throw ConfigError("vocabulary mismatch: " + std::to_string(vocab.size()) +
                      " tokens vs model " + std::to_string(model.config().decoder.vocab_size));
  }
  std::vector<Prediction> out;
  out.reserve(videos.size());
  for (const auto& v : videos) {
    Prediction p{v.video_id, {}};
    for (const auto& ids : model.generate(v, max_len)) p.sentences.push_back(vocab.decode_sentence(ids));
    out.push_back(std::move(p));
  }
  return out;
}

EvalResult evaluate(const VLCapModel& model, const Vocabulary& vocab,
                    const std::vector<VideoRecord>& videos, std::size_t max_len) {
  EvalResult r;
  r.predictions = generate_predictions(model, vocab, videos, max_len);
  std::vector<Paragraph> cands, refs;
  for (std::size_t i = 0; i < videos.size(); ++i) {
    cands.push_back(Paragraph::from_strings(r.predictions[i].sentences));
    std::vector<std::string> gt;
    for (const auto& e : videos[i].events) gt.push_back(e.caption);
    refs.push_back(Paragraph::from_strings(gt));
  }
  r.report = evaluate_corpus(cands, refs);
  return r;
}

namespace {

void check_dims(const std::vector<VideoRecord>& videos, const EncoderConfig& enc,
                const char* which) {
  for (const auto& v : videos)
    for (std::size_t k = 0; k < v.events.size(); ++k) {
      const auto& e = v.events[k];
      if (e.backbone_dim != enc.backbone_dim || e.frame_dim != enc.frame_dim) {
        throw ConfigError(std::string(which) + " video " + v.video_id + " event " +
                          std::to_string(k) + ": feature dims " +
                          std::to_string(e.backbone_dim) + "/" + std::to_string(e.frame_dim) +
                          " do not match encoder backbone_dim/frame_dim " +
                          std::to_string(enc.backbone_dim) + "/" +
                          std::to_string(enc.frame_dim));
      }
    }
}

json optional_value(const Tensor& t) { return t.defined() ? json(t.item()) : json(nullptr); }

}  // namespace

TrainSummary train_model(VLCapModel& model, const Vocabulary& vocab, const RunConfig& cfg,
                         const std::vector<VideoRecord>& train_set,
                         const std::vector<VideoRecord>& val_set, std::ostream& log,
                         const std::string& checkpoint_dir) {
  const auto& tc = cfg.train;
  tc.validate();
  if (train_set.empty()) throw ConfigError("training set is empty");
  const auto& mc = model.config();
  check_dims(train_set, mc.encoder, "train");
  check_dims(val_set, mc.encoder, "val");
  const MaxLens limits{mc.decoder.max_video_len, mc.decoder.max_text_len};
  make_batches(train_set, vocab, tc.batch_size, limits);  // fail fast on overlength events

  const auto per_epoch = (train_set.size() + tc.batch_size - 1) / tc.batch_size;
  const auto warmup_steps = tc.warmup_epochs * per_epoch;
  const auto& params = model.parameters().all();
  AdamW opt(params, tc);
  Rng order_rng(tc.seed);
  Rng dropout_rng(tc.seed ^ 0x9e3779b97f4a7c15ULL);

  const bool save = !checkpoint_dir.empty();
  const auto best_path = (std::filesystem::path(checkpoint_dir) / "best.ckpt").string();
  const auto last_path = (std::filesystem::path(checkpoint_dir) / "last.ckpt").string();

  TrainSummary summary;
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  bool stop = false;
  for (std::size_t epoch = 0; epoch < tc.epochs && !stop; ++epoch) {
    order_rng.shuffle(order);
    std::vector<VideoRecord> shuffled;
    shuffled.reserve(order.size());
    for (auto i : order) shuffled.push_back(train_set[i]);

    for (const auto& batch : make_batches(shuffled, vocab, tc.batch_size, limits)) {
      model.parameters().zero_grad();
      const auto losses = model.batch_loss(batch, cfg.loss, true, &dropout_rng);
      backward(losses.total);
      check_finite_grads(params);
      const double norm = clip_grad_norm(params, tc.grad_clip);
      const double lr = scheduled_lr(tc.lr, summary.steps, warmup_steps);
      opt.step(lr);
      log << json{{"epoch", epoch},
                  {"step", summary.steps},
                  {"lr", lr},
                  {"mle", losses.mle.item()},
                  {"vl", optional_value(losses.vl)},
                  {"total", losses.total.item()},
                  {"exp_rho", std::exp(model.rho().item())},
                  {"grad_norm", norm}}
                 .dump()
          << '\n';
      summary.final_mle = losses.mle.item();
      ++summary.steps;
      if (tc.max_steps != 0 && summary.steps >= tc.max_steps) {
        stop = true;
        break;
      }
    }

    const bool last = stop || epoch + 1 == tc.epochs;
    if (tc.eval_every != 0 && val_set.size() >= 2 && ((epoch + 1) % tc.eval_every == 0 || last)) {
      const auto r = evaluate(model, vocab, val_set, tc.max_gen_len);
      log << json{{"epoch", epoch}, {"step", summary.steps}, {"val", json::parse(r.report.to_json())}}
                 .dump()
          << '\n';
      if (!summary.best_cider || r.report.cider > *summary.best_cider) {
        summary.best_cider = r.report.cider;
        if (save) {
          save_checkpoint(best_path, model, vocab);
          summary.best_checkpoint = best_path;
        }
      }
    }
  }
  log.flush();
  if (save) {
    save_checkpoint(last_path, model, vocab);
    summary.last_checkpoint = last_path;
  }
  return summary;
}

TrainSummary train(const RunConfig& cfg) {
  cfg.validate();
  std::vector<VideoRecord> train_set, val_set;
  if (!cfg.data.corpus.empty()) {
    auto split = split_corpus(load_jsonl(cfg.data.corpus));
    train_set = std::move(split.train);
    val_set = std::move(split.val);
  } else {
    train_set = load_jsonl(cfg.data.train);
    if (!cfg.data.val.empty()) val_set = load_jsonl(cfg.data.val);
  }
  if (train_set.empty()) throw ConfigError("training split is empty");
  const auto vocab = Vocabulary::build(train_set, cfg.data.min_count);
  VLCapModel model(cfg.model, vocab);

  std::filesystem::create_directories(cfg.out_dir);
  {
    std::ofstream out(std::filesystem::path(cfg.out_dir) / "config.json");
    out << run_config_to_json(cfg) << '\n';
  }
  std::ofstream log(std::filesystem::path(cfg.out_dir) / "train_log.jsonl");
  if (!log) throw ConfigError("cannot write log under " + cfg.out_dir);
  return train_model(model, vocab, cfg, train_set, val_set, log, cfg.out_dir);
}

}  // namespace vlcap
