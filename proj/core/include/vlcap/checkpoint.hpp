#pragma once

#include <memory>
#include <string>

#include "vlcap/data.hpp"
#include "vlcap/model.hpp"

namespace vlcap {

// File layout: the line "vlcap-ckpt-v1", one line of JSON (model config,
// vocabulary, parameter names and shapes), then every parameter's values as
// raw little-endian doubles in store order. Values round-trip bit-exactly.
void save_checkpoint(const std::string& path, const VLCapModel& model, const Vocabulary& vocab);

struct LoadedModel {
  Vocabulary vocab;
  std::unique_ptr<VLCapModel> model;
};

// Throws ParseError on a malformed file and ConfigError when the stored
// parameters or vocabulary do not fit the stored configuration.
LoadedModel load_checkpoint(const std::string& path);

}  // namespace vlcap
