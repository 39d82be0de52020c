// vlcap: train / eval / generate / synth / gradcheck.
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "vlcap/checkpoint.hpp"
#include "vlcap/config.hpp"
#include "vlcap/data.hpp"
#include "vlcap/errors.hpp"
#include "vlcap/gradcheck.hpp"
#include "vlcap/trainer.hpp"

namespace {

using nlohmann::json;

const char* error_kind(const std::exception& e) {
  if (dynamic_cast<const vlcap::ParseError*>(&e)) return "parse_error";
  if (dynamic_cast<const vlcap::ConfigError*>(&e)) return "config_error";
  if (dynamic_cast<const vlcap::OverlengthError*>(&e)) return "overlength_error";
  if (dynamic_cast<const vlcap::NumericError*>(&e)) return "numeric_error";
  if (dynamic_cast<const vlcap::DimensionError*>(&e)) return "dimension_error";
  if (dynamic_cast<const vlcap::ContractError*>(&e)) return "contract_error";
  if (dynamic_cast<const vlcap::DegenerateInputError*>(&e)) return "degenerate_input";
  return "error";
}

int fail(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
  return 1;
}

std::vector<vlcap::VideoRecord> pick_split(std::vector<vlcap::VideoRecord> records,
                                           const std::string& split) {
  if (split == "all") return records;
  auto s = vlcap::split_corpus(records);
  if (split == "train") return s.train;
  if (split == "val") return s.val;
  if (split == "test") return s.test;
  throw vlcap::ConfigError("unknown split '" + split + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Video paragraph captioning: train, evaluate, generate"};
  app.require_subcommand(1);

  std::string config_path, out, checkpoint, data, split = "all", profile = "anet";
  std::optional<std::uint64_t> seed;
  std::size_t videos = 100;
  std::optional<std::size_t> max_len;
  double tolerance = 1e-4;

  auto* train = app.add_subcommand("train", "Train a model from a JSON run config");
  train->add_option("--config", config_path, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  train->add_option("--seed", seed, "Override model and training seeds");
  train->add_option("--out", out, "Override the output directory");

  auto* eval = app.add_subcommand("eval", "Score greedy paragraphs against groundtruth captions");
  eval->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  eval->add_option("--data", data, "Video JSONL")->required()->check(CLI::ExistingFile);
  eval->add_option("--split", split, "all | train | val | test (80/10/10 of --data)");
  eval->add_option("--max-len", max_len, "Token cap per sentence");
  eval->add_option("--out", out, "Also write the JSON report here");

  auto* gen = app.add_subcommand("generate", "Write one predicted paragraph per video");
  gen->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  gen->add_option("--input", data, "Video JSONL")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", out, "Predictions JSONL")->required();
  gen->add_option("--max-len", max_len, "Token cap per sentence");

  auto* synth = app.add_subcommand("synth", "Write a synthetic corpus");
  synth->add_option("--profile", profile, "anet | youcook");
  synth->add_option("--videos", videos, "Number of videos");
  synth->add_option("--seed", seed);
  synth->add_option("--out", out, "Output JSONL")->required();

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every parameter");
  grad->add_option("--seed", seed);
  grad->add_option("--tolerance", tolerance, "Max relative error per parameter");
  grad->add_option("--out", out, "Also write the JSON report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", "usage_error"}, {"message", e.what()}}.dump() << '\n';
    return 2;
  }

  try {
    if (*train) {
      auto cfg = vlcap::load_run_config(config_path);
      if (seed) {
        cfg.model.seed = *seed;
        cfg.train.seed = *seed;
      }
      if (!out.empty()) cfg.out_dir = out;
      const auto s = vlcap::train(cfg);
      json j{{"steps", s.steps}, {"final_mle", s.final_mle}, {"last_checkpoint", s.last_checkpoint}};
      j["best_cider"] = s.best_cider ? json(*s.best_cider) : json(nullptr);
      j["best_checkpoint"] = s.best_checkpoint;
      std::cout << j.dump() << '\n';
    } else if (*eval) {
      const auto loaded = vlcap::load_checkpoint(checkpoint);
      const auto records = pick_split(vlcap::load_jsonl(data), split);
      const auto len = max_len.value_or(loaded.model->config().decoder.max_text_len - 1);
      const auto r = vlcap::evaluate(*loaded.model, loaded.vocab, records, len);
      std::cout << r.report.to_table() << r.report.to_json() << '\n';
      if (!out.empty()) {
        std::ofstream f(out);
        if (!f) throw vlcap::ConfigError("cannot write " + out);
        f << r.report.to_json() << '\n';
      }
    } else if (*gen) {
      const auto loaded = vlcap::load_checkpoint(checkpoint);
      const auto records = vlcap::load_jsonl(data);
      const auto len = max_len.value_or(loaded.model->config().decoder.max_text_len - 1);
      vlcap::write_predictions(
          out, vlcap::generate_predictions(*loaded.model, loaded.vocab, records, len));
    } else if (*synth) {
      auto opts = vlcap::synth_profile(profile);
      opts.n_videos = videos;
      opts.seed = seed.value_or(0);
      vlcap::write_jsonl(out, vlcap::synth_corpus(opts));
    } else if (*grad) {
      const auto r = vlcap::model_gradcheck(seed.value_or(0));
      std::cout << r.to_json() << '\n';
      if (!out.empty()) {
        std::ofstream f(out);
        f << r.to_json() << '\n';
      }
      if (!r.passed(tolerance)) {
        return fail("gradcheck_failed", "max relative error " + std::to_string(r.max_rel_error) +
                                            " >= " + std::to_string(tolerance));
      }
    }
  } catch (const std::exception& e) {
    return fail(error_kind(e), e.what());
  }
  return 0;
}
