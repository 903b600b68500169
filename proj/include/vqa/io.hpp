#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vqa/core.hpp"
#include "vqa/data.hpp"
#include "vqa/grpo.hpp"
#include "vqa/perturb.hpp"

// On-disk formats shared by the CLI and anything that consumes its outputs.
namespace vqa::io {

using Json = nlohmann::json;

// Dataset file: array of {id, frame_ids, features: [[row], ...], mos}.
Json dataset_to_json(const std::vector<VideoSample>& videos);
std::vector<VideoSample> dataset_from_json(const Json& j);

// Oracle sidecar: {w_star, bias, scale: [lo, hi]}.
Json oracle_to_json(const data::Oracle& oracle);
data::Oracle oracle_from_json(const Json& j);

// Model file: {weights, bias, log_std}.
Json policy_to_json(const grpo::PolicyParams& params);
grpo::PolicyParams policy_from_json(const Json& j);

Json spec_to_json(const perturb::PerturbSpec& spec, std::size_t length);
perturb::PerturbSpec spec_from_json(const Json& j);

Json log_row_to_json(const grpo::LogRow& row);

Json read_json_file(const std::filesystem::path& path);
// Writes `text` to path, creating parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& text);

struct Prediction {
  std::string id;
  double pred = 0.0;
  double mos = 0.0;
};

// CSV with header id,pred,mos.
std::vector<Prediction> read_predictions_csv(const std::filesystem::path& path);

// Flat `key = value` file; `#` starts a comment. Throws kData with a line
// number on malformed lines or repeated keys.
std::map<std::string, std::string> read_key_value_file(const std::filesystem::path& path);

}  // namespace vqa::io
