#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "onelayer/model.hpp"

namespace onelayer::io {

using nlohmann::json;

json to_json(const numerics::PrecisionConfig& cfg);
/// Accepts {"mode": "double"|"bigfloat", "mantissa_bits": int, "stable_softmax": bool};
/// missing keys take the mode's defaults.
numerics::PrecisionConfig precision_from_json(const json& j);

/// Numbers are decimal strings so big-float values survive a round trip.
json to_json(const model::TransformerSpec& spec);
/// Parses a spec, rounding every number into `cfg`. Throws SpecError on any
/// structural problem.
model::TransformerSpec spec_from_json(const json& j, const numerics::PrecisionConfig& cfg);

json to_json(const model::MlpSpec& mlp);
model::MlpSpec mlp_from_json(const json& j, const numerics::PrecisionConfig& cfg);

model::Word word_from_json(const json& j);

json read_json_file(const std::filesystem::path& path);
/// Writes to a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace onelayer::io
