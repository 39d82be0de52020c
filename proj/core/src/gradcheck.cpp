#include "vlcap/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <json.hpp>

#include "vlcap/data.hpp"
#include "vlcap/model.hpp"

namespace vlcap {

std::string GradcheckReport::to_json() const {
  nlohmann::json params = nlohmann::json::array();
  for (const auto& e : entries)
    params.push_back({{"name", e.name},
                      {"size", e.size},
                      {"rel_error", e.rel_error},
                      {"max_abs_diff", e.max_abs_diff},
                      {"grad_norm", e.grad_norm}});
  return nlohmann::json{{"max_rel_error", max_rel_error},
                        {"seconds", seconds},
                        {"params", std::move(params)}}
      .dump();
}

GradcheckReport check_gradients(const std::vector<NamedParameter>& params,
                                const std::function<Tensor()>& loss_fn, double eps) {
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& p : params) Tensor(p.tensor).zero_grad();
  backward(loss_fn());

  GradcheckReport report;
  NoGradGuard no_grad;
  for (const auto& p : params) {
    Tensor t = p.tensor;
    const auto analytic = t.has_grad() ? std::vector<double>(t.grad().begin(), t.grad().end())
                                       : std::vector<double>(t.numel(), 0.0);
    auto w = t.mutable_data();
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0, max_abs = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double orig = w[i];
      w[i] = orig + eps;
      const double up = loss_fn().item();
      w[i] = orig - eps;
      const double down = loss_fn().item();
      w[i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double d = analytic[i] - numeric;
      diff2 += d * d;
      a2 += analytic[i] * analytic[i];
      n2 += numeric * numeric;
      max_abs = std::max(max_abs, std::abs(d));
    }
    GradcheckEntry e;
    e.name = p.name;
    e.size = w.size();
    e.grad_norm = std::sqrt(a2);
    e.max_abs_diff = max_abs;
    const double denom = std::max(std::sqrt(a2), std::sqrt(n2));
    e.rel_error = denom > 0.0 ? std::sqrt(diff2) / denom : 0.0;
    report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
    report.entries.push_back(std::move(e));
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

GradcheckReport model_gradcheck(std::uint64_t seed, double eps) {
  SynthOptions so;
  so.seed = seed;
  so.n_videos = 1;
  so.events_per_video_mean = 1.0;
  so.vocab = {4, 4, 4, 2};
  so.positions = 2;
  so.backbone_dim = 6;
  so.frame_dim = 6;
  so.min_snippets = 2;
  so.max_snippets = 3;
  auto video = synth_corpus(so).front();
  // Three events, so memory gates and the contrastive term both see gradient.
  const auto extra = synth_corpus({.seed = seed + 1,
                                   .n_videos = 2,
                                   .events_per_video_mean = 1.0,
                                   .vocab = so.vocab,
                                   .positions = so.positions,
                                   .backbone_dim = so.backbone_dim,
                                   .frame_dim = so.frame_dim,
                                   .min_snippets = 2,
                                   .max_snippets = 3,
                                   .noise = so.noise});
  for (const auto& v : extra) video.events.push_back(v.events.front());

  const auto vocab = Vocabulary::build({video}, 1);
  ModelConfig mc;
  mc.seed = seed;
  mc.encoder = {.backbone_dim = 6,
                .frame_dim = 6,
                .word_dim = 6,
                .joint_dim = 8,
                .vision_hidden = 12,
                .model_dim = 16,
                .top_k = 3};
  mc.decoder.n_layers = 2;
  mc.decoder.n_heads = 2;
  mc.decoder.d_model = 16;
  mc.decoder.d_ff = 24;
  mc.decoder.max_video_len = 4;
  mc.decoder.max_text_len = 10;
  mc.decoder.memory_slots = 2;
  mc.decoder.dropout = 0.0;
  mc.caption_dim = 8;
  VLCapModel model(mc, vocab);

  const auto batch =
      make_batches({video}, vocab, 1, {mc.decoder.max_video_len, mc.decoder.max_text_len})
          .front();
  const LossConfig lc;
  return check_gradients(model.parameters().all(), [&] {
    return model.batch_loss(batch, lc, false, nullptr).total;
  }, eps);
}

}  // namespace vlcap
