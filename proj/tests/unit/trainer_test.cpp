#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "fixtures.hpp"
#include "vlcap/errors.hpp"
#include "vlcap/trainer.hpp"

namespace vlcap {
namespace {

using nlohmann::json;

TrainConfig adam_cfg(double wd) {
  TrainConfig c;
  c.weight_decay = wd;
  return c;
}

void set_grad(Tensor p, std::vector<double> g) {
  p.zero_grad();
  backward(sum(mul(p, Tensor(p.shape(), std::move(g)))));
}

TEST(AdamW, ZeroGradientWithoutDecayLeavesParameters) {
  ParameterStore store;
  Rng rng(1);
  auto w = store.normal("w", {3, 2}, 1.0, rng);
  auto b = store.normal("b", {2}, 1.0, rng);
  const auto before_w = std::vector<double>(w.data().begin(), w.data().end());
  const auto before_b = std::vector<double>(b.data().begin(), b.data().end());
  AdamW opt(store.all(), adam_cfg(0.0));
  for (int i = 0; i < 3; ++i) {
    set_grad(w, std::vector<double>(6, 0.0));
    set_grad(b, {0.0, 0.0});
    opt.step(0.1);
  }
  EXPECT_EQ(std::vector<double>(w.data().begin(), w.data().end()), before_w);
  EXPECT_EQ(std::vector<double>(b.data().begin(), b.data().end()), before_b);
}

TEST(AdamW, TwoHandSteppedUpdates) {
  ParameterStore store;
  auto vec = store.constant("v", {1}, 1.0);     // no decay
  auto mat = store.constant("m", {1, 1}, 1.0);  // decayed
  AdamW opt(store.all(), adam_cfg(0.01));
  const double lr = 0.1;

  set_grad(vec, {0.5});
  set_grad(mat, {0.5});
  opt.step(lr);
  // First step: m_hat = g, v_hat = g^2.
  const double v1 = 1.0 - lr * 0.5 / (0.5 + 1e-8);
  const double m1 = 1.0 * (1.0 - lr * 0.01) - lr * 0.5 / (0.5 + 1e-8);
  EXPECT_NEAR(vec.item(), v1, 1e-15);
  EXPECT_NEAR(mat.item(), m1, 1e-15);

  set_grad(vec, {-0.2});
  set_grad(mat, {-0.2});
  opt.step(lr);
  // m = 0.9*0.05 - 0.02 = 0.025; v = 0.999*0.00025 + 0.001*0.04 = 0.00028975.
  const double m_hat = 0.025 / (1.0 - 0.81);
  const double v_hat = 0.00028975 / (1.0 - 0.998001);
  const double delta = lr * m_hat / (std::sqrt(v_hat) + 1e-8);
  EXPECT_NEAR(vec.item(), v1 - delta, 1e-12);
  EXPECT_NEAR(mat.item(), m1 * (1.0 - lr * 0.01) - delta, 1e-12);
  EXPECT_EQ(opt.steps(), 2u);
}

TEST(AdamW, NonFiniteGradientNamesParameterAndTouchesNothing) {
  ParameterStore store;
  auto a = store.constant("layer.a", {2}, 1.0);
  auto b = store.constant("layer.b", {2}, 1.0);
  AdamW opt(store.all(), adam_cfg(0.0));
  set_grad(a, {0.1, 0.1});
  set_grad(b, {std::numeric_limits<double>::quiet_NaN(), 0.0});
  try {
    opt.step(0.1);
    FAIL() << "no NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("layer.b"), std::string::npos);
  }
  EXPECT_EQ(a.data()[0], 1.0);
  EXPECT_EQ(opt.steps(), 0u);
}

TEST(Schedule, WarmupStartsAtZeroAndIsMonotone) {
  EXPECT_EQ(scheduled_lr(1e-3, 0, 10), 0.0);
  EXPECT_DOUBLE_EQ(scheduled_lr(1e-3, 5, 10), 5e-4);
  EXPECT_EQ(scheduled_lr(1e-3, 10, 10), 1e-3);
  EXPECT_EQ(scheduled_lr(1e-3, 0, 0), 1e-3);
  double prev = -1.0;
  for (std::size_t s = 0; s < 40; ++s) {
    const double lr = scheduled_lr(1e-3, s, 17);
    EXPECT_GE(lr, prev);
    EXPECT_LE(lr, 1e-3);
    prev = lr;
  }
}

TEST(Clip, ScalesToMaxNorm) {
  ParameterStore store;
  auto a = store.constant("a", {2}, 0.0);
  set_grad(a, {3.0, 4.0});
  EXPECT_DOUBLE_EQ(clip_grad_norm(store.all(), 1.0), 5.0);
  EXPECT_NEAR(a.grad()[0], 0.6, 1e-15);
  EXPECT_NEAR(a.grad()[1], 0.8, 1e-15);
  EXPECT_NEAR(clip_grad_norm(store.all(), 10.0), 1.0, 1e-15);
  EXPECT_NEAR(a.grad()[0], 0.6, 1e-15);
}

RunConfig smoke_config() {
  RunConfig cfg;
  cfg.model = test::tiny_model(2);
  cfg.train.lr = 1e-3;
  cfg.train.warmup_epochs = 1;
  cfg.train.epochs = 3;
  cfg.train.batch_size = 2;
  cfg.train.max_steps = 10;
  cfg.train.max_gen_len = 8;
  cfg.data.corpus = "unused";
  return cfg;
}

TEST(Train, SmokeRunStaysFiniteAndLogsEverySteps) {
  const auto corpus = synth_corpus(test::tiny_synth(21, 12));
  const auto split = split_corpus(corpus);
  const auto vocab = Vocabulary::build(split.train, 1);
  const auto cfg = smoke_config();
  VLCapModel model(cfg.model, vocab);
  std::ostringstream log;
  const auto summary = train_model(model, vocab, cfg, split.train, corpus, log);
  EXPECT_EQ(summary.steps, 10u);
  EXPECT_TRUE(std::isfinite(summary.final_mle));
  ASSERT_TRUE(summary.best_cider.has_value());

  std::istringstream in(log.str());
  std::string line;
  std::size_t steps = 0, evals = 0;
  while (std::getline(in, line)) {
    const auto j = json::parse(line);
    if (j.contains("val")) {
      ++evals;
      EXPECT_GE(j["val"]["cider"].get<double>(), 0.0);
      continue;
    }
    EXPECT_EQ(j["step"].get<std::size_t>(), steps);
    for (const char* k : {"lr", "mle", "total", "exp_rho", "grad_norm"})
      EXPECT_TRUE(std::isfinite(j[k].get<double>())) << k;
    if (steps == 0) EXPECT_EQ(j["lr"].get<double>(), 0.0);
    ++steps;
  }
  EXPECT_EQ(steps, 10u);
  EXPECT_GE(evals, 1u);
  for (const auto& p : model.parameters().all())
    for (double v : p.tensor.data()) ASSERT_TRUE(std::isfinite(v)) << p.name;
}

TEST(Train, SameSeedSameLog) {
  const auto corpus = synth_corpus(test::tiny_synth(22, 8));
  const auto vocab = Vocabulary::build(corpus, 1);
  auto cfg = smoke_config();
  cfg.model.decoder.dropout = 0.2;  // dropout draws must be reproducible too
  auto run = [&] {
    VLCapModel model(cfg.model, vocab);
    std::ostringstream log;
    train_model(model, vocab, cfg, corpus, {}, log);
    return log.str();
  };
  EXPECT_EQ(run(), run());
}

TEST(Train, FailsFastOnBadData) {
  auto corpus = synth_corpus(test::tiny_synth(23, 4));
  const auto vocab = Vocabulary::build(corpus, 1);
  const auto cfg = smoke_config();
  VLCapModel model(cfg.model, vocab);
  std::ostringstream log;

  auto wrong_dims = test::tiny_synth(23, 2);
  wrong_dims.backbone_dim = 5;
  EXPECT_THROW(train_model(model, vocab, cfg, synth_corpus(wrong_dims), {}, log), ConfigError);

  auto too_long = corpus;
  too_long.back().events.back().caption += " the the the the the the the";
  EXPECT_THROW(train_model(model, vocab, cfg, too_long, {}, log), OverlengthError);

  auto bad = cfg;
  bad.train.lr = 0.0;
  EXPECT_THROW(train_model(model, vocab, bad, corpus, {}, log), ConfigError);
  EXPECT_THROW(train_model(model, vocab, cfg, {}, {}, log), ConfigError);
  EXPECT_TRUE(log.str().empty());
}

TEST(Evaluate, NeedsTwoVideos) {
  const auto corpus = synth_corpus(test::tiny_synth(24, 3));
  const auto vocab = Vocabulary::build(corpus, 1);
  VLCapModel model(test::tiny_model(), vocab);
  EXPECT_THROW(evaluate(model, vocab, {corpus[0]}, 8), ContractError);
  const auto r = evaluate(model, vocab, corpus, 8);
  ASSERT_EQ(r.predictions.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i)
    EXPECT_EQ(r.predictions[i].sentences.size(), corpus[i].events.size());
}

}  // namespace
}  // namespace vlcap
