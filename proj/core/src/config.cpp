#include "vlcap/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "vlcap/errors.hpp"

namespace vlcap {

using nlohmann::json;

namespace {

// Reads typed fields from one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + " must be a JSON object");
  }

  template <typename T>
  void read(const char* key, T& dst) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer() || (it->is_number_integer() && *it < 0))
          throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError("");
      } else {
        if (!it->is_string()) throw ConfigError("");
      }
      dst = it->get<T>();
    } catch (const std::exception&) {
      throw ConfigError(path_ + "." + key + ": wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [key, _] : j_.items())
      if (!seen_.contains(key)) throw ConfigError(path_ + ": unknown key '" + key + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_model(const json& j, ModelConfig& m) {
  Section s(j, "model");
  if (const auto* e = s.child("encoder")) {
    Section es(*e, "model.encoder");
    auto& c = m.encoder;
    es.read("backbone_dim", c.backbone_dim);
    es.read("frame_dim", c.frame_dim);
    es.read("word_dim", c.word_dim);
    es.read("joint_dim", c.joint_dim);
    es.read("vision_hidden", c.vision_hidden);
    es.read("model_dim", c.model_dim);
    es.read("top_k", c.top_k);
    es.finish();
  }
  if (const auto* d = s.child("decoder")) {
    Section ds(*d, "model.decoder");
    auto& c = m.decoder;
    ds.read("n_layers", c.n_layers);
    ds.read("n_heads", c.n_heads);
    ds.read("d_model", c.d_model);
    ds.read("d_ff", c.d_ff);
    ds.read("max_video_len", c.max_video_len);
    ds.read("max_text_len", c.max_text_len);
    ds.read("vocab_size", c.vocab_size);
    ds.read("memory_slots", c.memory_slots);
    ds.read("dropout", c.dropout);
    ds.read("tie_embeddings", c.tie_embeddings);
    ds.finish();
  }
  s.read("caption_dim", m.caption_dim);
  s.read("rho_init", m.rho_init);
  s.read("seed", m.seed);
  s.finish();
}

json model_json(const ModelConfig& m) {
  const auto& e = m.encoder;
  const auto& d = m.decoder;
  return json{{"encoder",
               {{"backbone_dim", e.backbone_dim},
                {"frame_dim", e.frame_dim},
                {"word_dim", e.word_dim},
                {"joint_dim", e.joint_dim},
                {"vision_hidden", e.vision_hidden},
                {"model_dim", e.model_dim},
                {"top_k", e.top_k}}},
              {"decoder",
               {{"n_layers", d.n_layers},
                {"n_heads", d.n_heads},
                {"d_model", d.d_model},
                {"d_ff", d.d_ff},
                {"max_video_len", d.max_video_len},
                {"max_text_len", d.max_text_len},
                {"vocab_size", d.vocab_size},
                {"memory_slots", d.memory_slots},
                {"dropout", d.dropout},
                {"tie_embeddings", d.tie_embeddings}}},
              {"caption_dim", m.caption_dim},
              {"rho_init", m.rho_init},
              {"seed", m.seed}};
}

json parse_text(std::string_view text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& err) {
    throw ConfigError(std::string(what) + ": malformed JSON: " + err.what());
  }
}

std::string resolve(const std::string& path, const std::string& base) {
  if (path.empty() || base.empty() || std::filesystem::path(path).is_absolute()) return path;
  return (std::filesystem::path(base) / path).string();
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw ConfigError("train.beta1/beta2 must lie in (0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("train.eps must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
  if (epochs == 0) throw ConfigError("train.epochs must be positive");
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (warmup_epochs > epochs) throw ConfigError("train.warmup_epochs must not exceed epochs");
  if (!(grad_clip >= 0.0)) throw ConfigError("train.grad_clip must be >= 0");
  if (max_gen_len == 0) throw ConfigError("train.max_gen_len must be positive");
}

void DataConfig::validate() const {
  if (corpus.empty() && train.empty()) {
    throw ConfigError("data: set either 'corpus' or 'train'");
  }
  if (!corpus.empty() && (!train.empty() || !val.empty())) {
    throw ConfigError("data: 'corpus' excludes 'train'/'val'");
  }
  if (min_count == 0) throw ConfigError("data.min_count must be >= 1");
}

void RunConfig::validate() const {
  model.validate();
  loss.validate();
  train.validate();
  data.validate();
  if (train.max_gen_len >= model.decoder.max_text_len) {
    throw ConfigError("train.max_gen_len must be < decoder max_text_len");
  }
  if (out_dir.empty()) throw ConfigError("out_dir must be set");
}

RunConfig parse_run_config(std::string_view text, const std::string& base_dir) {
  const auto j = parse_text(text, "run config");
  RunConfig cfg;
  Section s(j, "config");
  if (const auto* m = s.child("model")) read_model(*m, cfg.model);
  if (const auto* l = s.child("loss")) {
    Section ls(*l, "loss");
    ls.read("label_smoothing", cfg.loss.label_smoothing);
    ls.read("lambda_vl", cfg.loss.lambda_vl);
    ls.read("rho_init", cfg.loss.rho_init);
    ls.finish();
  }
  cfg.model.rho_init = cfg.loss.rho_init;
  if (const auto* t = s.child("train")) {
    Section ts(*t, "train");
    auto& c = cfg.train;
    ts.read("lr", c.lr);
    ts.read("beta1", c.beta1);
    ts.read("beta2", c.beta2);
    ts.read("eps", c.eps);
    ts.read("weight_decay", c.weight_decay);
    ts.read("warmup_epochs", c.warmup_epochs);
    ts.read("epochs", c.epochs);
    ts.read("batch_size", c.batch_size);
    ts.read("grad_clip", c.grad_clip);
    ts.read("seed", c.seed);
    ts.read("max_steps", c.max_steps);
    ts.read("eval_every", c.eval_every);
    ts.read("max_gen_len", c.max_gen_len);
    ts.finish();
  }
  if (const auto* d = s.child("data")) {
    Section dsec(*d, "data");
    dsec.read("corpus", cfg.data.corpus);
    dsec.read("train", cfg.data.train);
    dsec.read("val", cfg.data.val);
    dsec.read("min_count", cfg.data.min_count);
    dsec.finish();
  }
  s.read("out_dir", cfg.out_dir);
  s.finish();
  cfg.data.corpus = resolve(cfg.data.corpus, base_dir);
  cfg.data.train = resolve(cfg.data.train, base_dir);
  cfg.data.val = resolve(cfg.data.val, base_dir);
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), std::filesystem::path(path).parent_path().string());
}

std::string run_config_to_json(const RunConfig& cfg) {
  const auto& t = cfg.train;
  json j{{"model", model_json(cfg.model)},
         {"loss",
          {{"label_smoothing", cfg.loss.label_smoothing},
           {"lambda_vl", cfg.loss.lambda_vl},
           {"rho_init", cfg.loss.rho_init}}},
         {"train",
          {{"lr", t.lr},
           {"beta1", t.beta1},
           {"beta2", t.beta2},
           {"eps", t.eps},
           {"weight_decay", t.weight_decay},
           {"warmup_epochs", t.warmup_epochs},
           {"epochs", t.epochs},
           {"batch_size", t.batch_size},
           {"grad_clip", t.grad_clip},
           {"seed", t.seed},
           {"max_steps", t.max_steps},
           {"eval_every", t.eval_every},
           {"max_gen_len", t.max_gen_len}}},
         {"data",
          {{"corpus", cfg.data.corpus},
           {"train", cfg.data.train},
           {"val", cfg.data.val},
           {"min_count", cfg.data.min_count}}},
         {"out_dir", cfg.out_dir}};
  return j.dump(2);
}

std::string model_config_to_json(const ModelConfig& cfg) { return model_json(cfg).dump(); }

ModelConfig parse_model_config(std::string_view text) {
  ModelConfig m;
  read_model(parse_text(text, "model config"), m);
  return m;
}

}  // namespace vlcap
