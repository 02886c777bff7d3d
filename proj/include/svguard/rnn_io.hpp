#pragma once

// Weight files: an 8-byte little-endian header length, a UTF-8 JSON header,
// then the parameters as little-endian float64 in flat-vector order.
//
// Header fields: "format", "spec" {cell, layers, hidden, input, outputs,
// head}, "blocks" (name/offset/shape of each parameter block), "count",
// "seed", and an optional caller-defined "extra" object.

#include <cstdint>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "svguard/rnn_core.hpp"

namespace svguard::rnn {

nlohmann::json spec_to_json(const RnnSpec& spec);
RnnSpec spec_from_json(const nlohmann::json& j);

nlohmann::json standardizer_to_json(const Standardizer& s);
Standardizer standardizer_from_json(const nlohmann::json& j);

struct SavedModel {
  RnnWeights weights;
  std::uint64_t seed = 0;
  nlohmann::json extra = nlohmann::json::object();
};

void save_model(std::ostream& out, const SavedModel& m);
/// Throws std::runtime_error on a truncated or inconsistent file.
SavedModel load_model(std::istream& in);

void save_model_file(const std::string& path, const SavedModel& m);
SavedModel load_model_file(const std::string& path);

}  // namespace svguard::rnn
