#include "vlcap/checkpoint.hpp"

#include <bit>
#include <fstream>

#include <json.hpp>

#include "vlcap/config.hpp"
#include "vlcap/errors.hpp"

namespace vlcap {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace {
constexpr const char* kMagic = "vlcap-ckpt-v1";
}

void save_checkpoint(const std::string& path, const VLCapModel& model, const Vocabulary& vocab) {
  json params = json::array();
  for (const auto& p : model.parameters().all())
    params.push_back(json{{"name", p.name}, {"shape", p.tensor.shape()}});
  const json header{{"model", json::parse(model_config_to_json(model.config()))},
                    {"vocab", vocab.words()},
                    {"params", std::move(params)}};

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint " + path);
  out << kMagic << '\n' << header.dump() << '\n';
  for (const auto& p : model.parameters().all()) {
    const auto d = p.tensor.data();
    out.write(reinterpret_cast<const char*>(d.data()),
              static_cast<std::streamsize>(d.size() * sizeof(double)));
  }
  if (!out) throw ConfigError("short write on checkpoint " + path);
}

LoadedModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint " + path, 0);
  std::string magic, text;
  if (!std::getline(in, magic) || magic != kMagic) {
    throw ParseError(path + ": not a vlcap checkpoint", 1);
  }
  if (!std::getline(in, text)) throw ParseError(path + ": missing header", 2);
  json header;
  try {
    header = json::parse(text);
  } catch (const json::parse_error& err) {
    throw ParseError(path + ": malformed header: " + err.what(), 2);
  }
  if (!header.contains("model") || !header.contains("vocab") || !header.contains("params")) {
    throw ParseError(path + ": header lacks model/vocab/params", 2);
  }

  auto words = header["vocab"].get<std::vector<std::string>>();
  Vocabulary fresh;
  if (words.size() < fresh.size() ||
      !std::equal(fresh.words().begin(), fresh.words().end(), words.begin())) {
    throw ConfigError(path + ": vocabulary lacks the reserved tokens");
  }
  words.erase(words.begin(), words.begin() + static_cast<std::ptrdiff_t>(fresh.size()));
  LoadedModel loaded;
  loaded.vocab = Vocabulary::from_words(words);

  const auto cfg = parse_model_config(header["model"].dump());
  if (cfg.decoder.vocab_size != loaded.vocab.size()) {
    throw ConfigError(path + ": vocabulary mismatch, model expects " +
                      std::to_string(cfg.decoder.vocab_size) + " tokens, file has " +
                      std::to_string(loaded.vocab.size()));
  }
  loaded.model = std::make_unique<VLCapModel>(cfg, loaded.vocab);

  const auto& stored = header["params"];
  const auto& live = loaded.model->parameters().all();
  if (stored.size() != live.size()) {
    throw ConfigError(path + ": " + std::to_string(stored.size()) + " stored parameters, model has " +
                      std::to_string(live.size()));
  }
  for (std::size_t i = 0; i < live.size(); ++i) {
    const auto name = stored[i].at("name").get<std::string>();
    const auto shape = stored[i].at("shape").get<Shape>();
    if (name != live[i].name || shape != live[i].tensor.shape()) {
      throw ConfigError(path + ": parameter " + std::to_string(i) + " is " + name + " " +
                        shape_str(shape) + ", model expects " + live[i].name + " " +
                        shape_str(live[i].tensor.shape()));
    }
    auto dst = Tensor(live[i].tensor).mutable_data();
    in.read(reinterpret_cast<char*>(dst.data()),
            static_cast<std::streamsize>(dst.size() * sizeof(double)));
    if (!in) throw ParseError(path + ": truncated at parameter " + name, 0);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ParseError(path + ": trailing bytes after parameters", 0);
  }
  return loaded;
}

}  // namespace vlcap
