// Acceptance run: one PASS/FAIL line per criterion. Exits nonzero when a
// fatal criterion fails; the end-to-end comparison is reported only.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fixtures.hpp"
#include "vlcap/checkpoint.hpp"
#include "vlcap/data.hpp"
#include "vlcap/gradcheck.hpp"
#include "vlcap/losses.hpp"
#include "vlcap/metrics.hpp"
#include "vlcap/model.hpp"
#include "vlcap/trainer.hpp"

using namespace vlcap;
using nlohmann::json;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

std::vector<double> vals(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome gradients() {
  const auto r = model_gradcheck(0);
  std::string worst;
  double w = -1;
  for (const auto& e : r.entries)
    if (e.rel_error > w) {
      w = e.rel_error;
      worst = e.name;
    }
  return {r.passed(1e-4) && r.seconds < 120.0,
          fmt("%zu tensors, max rel error %.3g (%s), %.1f s", r.entries.size(), r.max_rel_error,
              worst.c_str(), r.seconds)};
}

DecoderConfig small_decoder() {
  DecoderConfig c;
  c.n_layers = 2;
  c.n_heads = 2;
  c.d_model = 16;
  c.d_ff = 32;
  c.max_video_len = 6;
  c.max_text_len = 12;
  c.vocab_size = 30;
  c.dropout = 0.0;
  return c;
}

Tensor random_tensor(Rng& rng, Shape shape) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor(std::move(shape), std::move(v));
}

Outcome gate_identities() {
  ParameterStore store;
  Rng rng(41);
  const auto cfg = small_decoder();
  Decoder dec(store, cfg, rng);
  std::size_t trials = 0, ok = 0;
  for (auto& layer : dec.layers()) {
    auto& upd = layer.updater();
    for (int rep = 0; rep < 10; ++rep) {
      const auto m = random_tensor(rng, {cfg.memory_slots, cfg.d_model});
      const std::size_t s = 3 + static_cast<std::size_t>(rep);
      const auto hbar = random_tensor(rng, {s, cfg.d_model});
      std::vector<bool> valid(s, true);
      valid[s - 1] = rep % 2 == 0;
      upd.set_gate_override(GateOverride::kRetain);
      const auto keep = upd.update(m, hbar, valid);
      upd.set_gate_override(GateOverride::kReplace);
      const auto repl = upd.update(m, hbar, valid);
      upd.set_gate_override(GateOverride::kNone);
      trials += 2;
      ok += vals(keep.memory) == vals(m);
      ok += vals(repl.memory) == vals(repl.candidate);
    }
  }
  return {ok == trials, fmt("%zu/%zu exact (Z=1 keeps M_prev, Z=0 gives R)", ok, trials)};
}

Outcome causality() {
  ParameterStore store;
  Rng rng(42);
  const auto cfg = small_decoder();
  Decoder dec(store, cfg, rng);
  const std::size_t L = 4, T = 10;
  MemoryState mem;
  for (std::size_t l = 0; l < cfg.n_layers; ++l)
    mem.layers.push_back(random_tensor(rng, {cfg.memory_slots, cfg.d_model}));
  const auto vl = random_tensor(rng, {L, cfg.d_model});
  std::vector<TokenId> tokens{kBos};
  for (std::size_t j = 1; j < T; ++j)
    tokens.push_back(static_cast<TokenId>(rng.uniform_int(kNumReserved, 29)));
  const auto base = vals(dec.forward(dec.build_unified_input(vl, tokens), mem, false, nullptr).logits);
  const auto V = cfg.vocab_size;
  double worst = 0.0;
  std::size_t checks = 0;
  for (std::size_t j = 0; j + 1 < T; ++j) {
    for (int rep = 0; rep < 3; ++rep) {
      auto changed = tokens;
      do {
        changed[j + 1] = static_cast<TokenId>(rng.uniform_int(kNumReserved, 29));
      } while (changed[j + 1] == tokens[j + 1]);
      const auto out =
          vals(dec.forward(dec.build_unified_input(vl, changed), mem, false, nullptr).logits);
      for (std::size_t i = 0; i < (j + 1) * V; ++i) worst = std::max(worst, std::abs(out[i] - base[i]));
      ++checks;
    }
  }
  return {worst == 0.0, fmt("%zu perturbations, max |diff| at earlier positions %.3g", checks, worst)};
}

Outcome contrastive() {
  const auto t0 = std::chrono::steady_clock::now();
  // Eight events with distinct captions; their frame features carry the
  // planted caption signal.
  auto opts = synth_profile("anet");
  opts.seed = 13;
  opts.n_videos = 40;
  std::vector<EventSample> events;
  std::vector<std::string> seen;
  for (const auto& v : synth_corpus(opts))
    for (const auto& e : v.events)
      if (events.size() < 8 && std::find(seen.begin(), seen.end(), e.caption) == seen.end()) {
        seen.push_back(e.caption);
        events.push_back(e);
      }
  if (events.size() < 8) return {false, "could not draw 8 distinct captions"};
  std::vector<VideoRecord> recs{{"pairs", events}};
  const auto vocab = Vocabulary::build(recs, 1);

  const std::size_t N = 8, d_in = opts.frame_dim, d_e = 16;
  std::vector<double> feats;
  for (const auto& e : events)
    for (std::size_t c = 0; c < d_in; ++c) {
      double s = 0;
      for (std::size_t l = 0; l < e.snippets; ++l) s += e.frame_embeds[l * d_in + c];
      feats.push_back(s / static_cast<double>(e.snippets));
    }
  const Tensor x({N, d_in}, feats);

  ParameterStore store;
  Rng rng(5);
  Linear proj(store, "proj", d_in, d_e, rng);
  CaptionEncoder cap(store, vocab.size(), 16, d_e, rng);
  auto rho = store.constant("rho", {1}, std::log(1.0 / 0.07));
  auto forward = [&] {
    std::vector<Tensor> g;
    for (const auto& e : events) g.push_back(cap.encode(vocab.encode_caption(e.caption)));
    return std::pair{l2_normalize(proj(x)), concat(g, 0)};
  };
  TrainConfig tc;
  tc.weight_decay = 0.0;
  AdamW opt(store.all(), tc);
  double loss = 0;
  for (int step = 0; step < 300; ++step) {
    store.zero_grad();
    const auto [f, g] = forward();
    const auto l = vl_loss(f, g, rho);
    backward(l);
    loss = l.item();
    opt.step(1e-2);
  }
  NoGradGuard ng;
  const auto [f, g] = forward();
  loss = vl_loss(f, g, rho).item();
  const auto sim = vals(matmul(f, transpose(g)));
  std::size_t diag = 0;
  for (std::size_t i = 0; i < N; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < N; ++j)
      if (sim[i * N + j] > sim[i * N + best]) best = j;
    diag += best == i;
  }
  const double secs = seconds_since(t0);
  const double bound = std::log(8.0) / 4.0;
  return {loss < bound && diag >= 7 && secs < 30.0,
          fmt("loss %.4f (bound %.4f), diagonal argmax %zu/8, %.1f s", loss, bound, diag, secs)};
}

Outcome overfit() {
  const auto t0 = std::chrono::steady_clock::now();
  auto opts = synth_profile("anet");
  opts.seed = 7;
  opts.n_videos = 8;
  std::vector<VideoRecord> videos;
  std::size_t taken = 0;
  for (auto v : synth_corpus(opts)) {
    if (taken == 8) break;
    if (v.events.size() > 8 - taken) v.events.resize(8 - taken);
    taken += v.events.size();
    videos.push_back(std::move(v));
  }
  const auto vocab = Vocabulary::build(videos, 1);

  ModelConfig mc;
  mc.seed = 3;
  mc.decoder.dropout = 0.0;
  VLCapModel model(mc, vocab);
  LossConfig lc;
  lc.label_smoothing = 0.0;
  const auto batch =
      make_batches(videos, vocab, videos.size(), {mc.decoder.max_video_len, mc.decoder.max_text_len})
          .front();
  TrainConfig tc;
  tc.weight_decay = 0.0;
  AdamW opt(model.parameters().all(), tc);
  double mle = 1e9;
  std::size_t steps = 0;
  for (; steps < 500 && mle >= 0.1; ++steps) {
    model.parameters().zero_grad();
    const auto l = model.batch_loss(batch, lc, true, nullptr);
    mle = l.mle.item();
    if (mle < 0.1) break;
    backward(l.total);
    clip_grad_norm(model.parameters().all(), 1.0);
    opt.step(1e-3);
  }
  std::size_t exact = 0;
  for (const auto& v : videos) {
    const auto gen = model.generate(v, mc.decoder.max_text_len - 1);
    for (std::size_t k = 0; k < v.events.size(); ++k)
      exact += gen.at(k) == vocab.encode_caption(v.events[k].caption);
  }
  const double secs = seconds_since(t0);
  return {mle < 0.1 && exact == 8 && vocab.size() <= 60 && secs < 300.0,
          fmt("L_MLE %.4f after %zu steps, %zu/8 captions exact, vocab %zu, %.1f s", mle, steps,
              exact, vocab.size(), secs)};
}

Outcome end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  auto opts = synth_profile("anet");
  opts.seed = 2024;
  opts.n_videos = 200;
  const auto split = split_corpus(synth_corpus(opts));
  const auto vocab = Vocabulary::build(split.train, 1);
  auto run = [&](double lambda) {
    RunConfig cfg;
    cfg.model.seed = 1;
    cfg.loss.lambda_vl = lambda;
    cfg.train.lr = 5e-4;
    cfg.train.epochs = 20;
    cfg.train.warmup_epochs = 2;
    cfg.train.batch_size = 8;
    cfg.train.seed = 1;
    cfg.train.eval_every = 0;
    cfg.data.corpus = "in-memory";
    VLCapModel model(cfg.model, vocab);
    std::ostringstream log;
    train_model(model, vocab, cfg, split.train, split.val, log);
    return evaluate(model, vocab, split.val, cfg.train.max_gen_len).report;
  };
  const auto mle_only = run(0.0);
  const auto joint = run(0.1);
  const bool ok = joint.cider >= mle_only.cider - 0.02 && joint.div2 >= mle_only.div2;
  return {ok, fmt("val CIDEr %.4f vs MLE-only %.4f, Div@2 %.4f vs %.4f, %.0f s", joint.cider,
                  mle_only.cider, joint.div2, mle_only.div2, seconds_since(t0))};
}

Outcome metrics_fixture() {
  std::ifstream in(std::string(VLCAP_TEST_DATA_DIR) + "/metrics_fixture.json");
  if (!in) return {false, "fixture missing"};
  const auto j = json::parse(in);
  std::vector<Paragraph> c, r;
  for (const auto& p : j["candidates"]) c.push_back(Paragraph::from_strings(p.get<std::vector<std::string>>()));
  for (const auto& p : j["references"]) r.push_back(Paragraph::from_strings(p.get<std::vector<std::string>>()));
  const auto& e = j["expected"];
  const auto rep = evaluate_corpus(c, r);
  double worst = 0.0;
  auto check = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };
  check(rep.bleu4, e["bleu4"]);
  check(rep.rouge_l, e["rouge_l"]);
  check(rep.cider, e["cider"]);
  check(rep.div2, e["corpus_div2"]);
  check(rep.rep4, e["corpus_rep4"]);
  check(bleu4(r, r), 1.0);
  check(rouge_l(r, r), 1.0);
  check(cider(r, r), e["self_cider"]);
  const std::vector<Paragraph> other{Paragraph::from_strings({"zebra quartz violin lamp"}),
                                     Paragraph::from_strings({"oboe prism"})};
  const std::vector<Paragraph> pair{r[0], r[1]};
  check(bleu4(other, pair), 0.0);
  check(rouge_l(other, pair), 0.0);
  check(cider(other, pair), 0.0);
  check(*div2(Paragraph::from_strings({"a b a b"})), 2.0 / 3.0);
  check(*rep4(Paragraph::from_strings({"a b c d a b c d"})), 0.2);
  check(bleu4({Paragraph::from_strings({"the cat sat on the mat mat"})},
              {Paragraph::from_strings({"the cat sat on the mat"})}),
        std::pow(6.0 / 7 * 6.0 / 7 * 5.0 / 6 * 4.0 / 5, 0.25));
  return {worst <= 1e-10, fmt("max deviation %.3g over fixture and hand cases", worst)};
}

void write_run_config(const std::string& path, const std::string& corpus, const std::string& out) {
  std::ofstream f(path);
  f << json{{"model", {{"seed", 4}}},
            {"train", {{"epochs", 2}, {"warmup_epochs", 1}, {"lr", 1e-3}, {"seed", 4}}},
            {"data", {{"corpus", corpus}}},
            {"out_dir", out}}
           .dump(2);
}

Outcome determinism() {
  test::TempDir dir("accept_det");
  const std::string cli = VLCAP_CLI_PATH;
  const auto corpus = dir.file("c.jsonl");
  if (std::system((cli + " synth --videos 30 --seed 9 --out " + corpus).c_str()) != 0)
    return {false, "synth failed"};
  std::vector<std::string> logs;
  for (const char* name : {"a", "b"}) {
    const auto cfg = dir.file(std::string(name) + ".json");
    write_run_config(cfg, corpus, dir.file(std::string("run_") + name));
    if (std::system((cli + " train --config " + cfg + " >/dev/null").c_str()) != 0)
      return {false, "train failed"};
    logs.push_back(slurp(dir.file(std::string("run_") + name + "/train_log.jsonl")));
  }
  std::size_t lines = 0;
  for (char ch : logs[0]) lines += ch == '\n';
  return {!logs[0].empty() && logs[0] == logs[1],
          fmt("%zu log lines, %zu bytes, identical: %s", lines, logs[0].size(),
              logs[0] == logs[1] ? "yes" : "no")};
}

Outcome round_trips() {
  test::TempDir dir("accept_rt");
  auto opts = synth_profile("anet");
  opts.seed = 17;
  opts.n_videos = 12;
  const auto corpus = synth_corpus(opts);
  write_jsonl(dir.file("c.jsonl"), corpus);
  const bool jsonl_ok = load_jsonl(dir.file("c.jsonl")) == corpus;

  const auto vocab = Vocabulary::build(corpus, 1);
  RunConfig cfg;
  cfg.train.epochs = 15;
  cfg.train.warmup_epochs = 1;
  cfg.train.lr = 1e-3;
  cfg.data.corpus = "in-memory";
  VLCapModel model(cfg.model, vocab);
  std::ostringstream log;
  train_model(model, vocab, cfg, corpus, {}, log);
  save_checkpoint(dir.file("m.ckpt"), model, vocab);
  const auto loaded = load_checkpoint(dir.file("m.ckpt"));
  const auto a = evaluate(model, vocab, corpus, cfg.train.max_gen_len);
  const auto b = evaluate(*loaded.model, loaded.vocab, corpus, cfg.train.max_gen_len);
  const bool ckpt_ok = a.report == b.report && a.predictions == b.predictions;
  return {jsonl_ok && ckpt_ok, fmt("jsonl %s, checkpoint evaluation %s (CIDEr %.4f)",
                                   jsonl_ok ? "identical" : "differs",
                                   ckpt_ok ? "identical" : "differs", b.report.cider)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
    bool fatal;
  };
  const std::vector<Criterion> criteria{
      {"gradients", gradients, true},
      {"memory-gate-identities", gate_identities, true},
      {"causality", causality, true},
      {"contrastive", contrastive, true},
      {"overfit", overfit, true},
      {"end-to-end-gain", end_to_end, false},
      {"metrics-fixture", metrics_fixture, true},
      {"determinism", determinism, true},
      {"round-trips", round_trips, true},
  };
  int fatal_failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s: %s%s\n", o.passed ? "PASS" : "FAIL", c.name, o.detail.c_str(),
                !o.passed && !c.fatal ? " (logged, not fatal)" : "");
    std::fflush(stdout);
    if (!o.passed && c.fatal) ++fatal_failures;
  }
  return fatal_failures == 0 ? 0 : 1;
}
