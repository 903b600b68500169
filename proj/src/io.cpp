#include "vqa/io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "vqa/rewards.hpp"

namespace vqa::io {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T field(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) fail(ErrorKind::kData, fmt::format("{}: missing field '{}'", where, key));
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    fail(ErrorKind::kData, fmt::format("{}: field '{}': {}", where, key, e.what()));
  }
}

}  // namespace

Json dataset_to_json(const std::vector<VideoSample>& videos) {
  Json arr = Json::array();
  for (const auto& v : videos) {
    Json rows = Json::array();
    for (std::size_t t = 0; t < v.frames.size(); ++t) {
      const auto r = v.frames.row(t);
      rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    arr.push_back({{"id", v.id}, {"frame_ids", v.frames.frame_ids()}, {"features", rows}, {"mos", v.mos}});
  }
  return arr;
}

std::vector<VideoSample> dataset_from_json(const Json& j) {
  if (!j.is_array()) fail(ErrorKind::kData, "dataset: expected a JSON array of videos");
  std::vector<VideoSample> out;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto where = fmt::format("dataset[{}]", i);
    VideoSample v;
    v.id = field<std::string>(j[i], "id", where);
    auto ids = field<std::vector<std::int64_t>>(j[i], "frame_ids", where);
    const auto rows = field<std::vector<std::vector<double>>>(j[i], "features", where);
    v.mos = field<double>(j[i], "mos", where);
    if (!(v.mos >= kMosMin && v.mos <= kMosMax)) fail(ErrorKind::kData, fmt::format("{}: mos {} outside [1, 5]", where, v.mos));
    try {
      v.frames = FrameSequence(std::move(ids), rows);
    } catch (const Error& e) {
      fail(ErrorKind::kData, fmt::format("{}: {}", where, e.what()));
    }
    if (!seen.insert(v.id).second) fail(ErrorKind::kData, fmt::format("{}: duplicate id '{}'", where, v.id));
    out.push_back(std::move(v));
  }
  return out;
}

Json oracle_to_json(const data::Oracle& oracle) {
  return {{"w_star", oracle.w_star}, {"bias", oracle.bias}, {"scale", {oracle.scale_lo, oracle.scale_hi}}};
}

data::Oracle oracle_from_json(const Json& j) {
  data::Oracle o;
  o.w_star = field<std::vector<double>>(j, "w_star", "oracle");
  o.bias = field<double>(j, "bias", "oracle");
  const auto scale = field<std::vector<double>>(j, "scale", "oracle");
  if (scale.size() != 2) fail(ErrorKind::kData, "oracle: scale must be [lo, hi]");
  o.scale_lo = scale[0];
  o.scale_hi = scale[1];
  return o;
}

Json policy_to_json(const grpo::PolicyParams& params) {
  return {{"weights", params.weights}, {"bias", params.bias}, {"log_std", params.log_std}};
}

grpo::PolicyParams policy_from_json(const Json& j) {
  grpo::PolicyParams p;
  p.weights = field<std::vector<double>>(j, "weights", "model");
  p.bias = field<double>(j, "bias", "model");
  p.log_std = field<double>(j, "log_std", "model");
  return p;
}

Json spec_to_json(const perturb::PerturbSpec& spec, std::size_t length) {
  Json j = {{"mode", perturb::mode_name(spec.mode)}, {"length", length}};
  switch (spec.mode) {
    case perturb::Mode::kGlobalShuffle: j["permutation"] = spec.permutation; break;
    case perturb::Mode::kLocalShuffle:
      j["window"] = spec.window;
      j["window_perms"] = spec.window_perms;
      break;
    case perturb::Mode::kReverse: break;
    case perturb::Mode::kJitter: j["offsets"] = spec.offsets; break;
    case perturb::Mode::kDuplicate:
      j["count"] = spec.count;
      j["dup_frame"] = spec.dup_frame;
      j["insert_pos"] = spec.insert_pos;
      j["drop"] = spec.drop;
      break;
    case perturb::Mode::kRandomDrop:
      j["count"] = spec.count;
      j["drop"] = spec.drop;
      break;
  }
  return j;
}

perturb::PerturbSpec spec_from_json(const Json& j) {
  perturb::PerturbSpec spec;
  const auto name = field<std::string>(j, "mode", "spec");
  const auto mode = perturb::parse_mode(name);
  if (!mode) fail(ErrorKind::kData, fmt::format("spec: unknown mode '{}'", name));
  spec.mode = *mode;
  switch (spec.mode) {
    case perturb::Mode::kGlobalShuffle:
      spec.permutation = field<std::vector<std::size_t>>(j, "permutation", "spec");
      break;
    case perturb::Mode::kLocalShuffle:
      spec.window = field<std::size_t>(j, "window", "spec");
      spec.window_perms = field<std::vector<std::vector<std::size_t>>>(j, "window_perms", "spec");
      break;
    case perturb::Mode::kReverse: break;
    case perturb::Mode::kJitter: spec.offsets = field<std::vector<int>>(j, "offsets", "spec"); break;
    case perturb::Mode::kDuplicate:
      spec.count = field<std::size_t>(j, "count", "spec");
      spec.dup_frame = field<std::size_t>(j, "dup_frame", "spec");
      spec.insert_pos = field<std::size_t>(j, "insert_pos", "spec");
      spec.drop = field<std::vector<std::size_t>>(j, "drop", "spec");
      break;
    case perturb::Mode::kRandomDrop:
      spec.count = field<std::size_t>(j, "count", "spec");
      spec.drop = field<std::vector<std::size_t>>(j, "drop", "spec");
      break;
  }
  return spec;
}

Json log_row_to_json(const grpo::LogRow& row) {
  return {{"step", row.step},
          {"epoch", row.epoch},
          {"mean_total_reward", row.mean_total_reward},
          {"mean_fmt", row.mean_fmt},
          {"mean_reg", row.mean_reg},
          {"mean_rank", row.mean_rank},
          {"mean_temp", row.mean_temp},
          {"mean_kl", row.mean_kl},
          {"objective", row.objective},
          {"probe_srcc", row.probe_srcc}};
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, fmt::format("cannot open {}", path.string()));
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    fail(ErrorKind::kData, fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, fmt::format("cannot write {}", path.string()));
  out << text;
  if (!out) fail(ErrorKind::kIo, fmt::format("write to {} failed", path.string()));
}

std::vector<Prediction> read_predictions_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, fmt::format("cannot open {}", path.string()));
  std::string line;
  if (!std::getline(in, line) || trim(line) != "id,pred,mos") {
    fail(ErrorKind::kData, fmt::format("{}:1: expected header id,pred,mos", path.string()));
  }
  std::vector<Prediction> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    const auto pred = cells.size() == 3 ? rewards::parse_decimal(cells[1]) : std::nullopt;
    const auto mos = cells.size() == 3 ? rewards::parse_decimal(cells[2]) : std::nullopt;
    if (!pred || !mos) fail(ErrorKind::kData, fmt::format("{}:{}: expected id,pred,mos", path.string(), line_no));
    out.push_back({cells[0], *pred, *mos});
  }
  return out;
}

std::map<std::string, std::string> read_key_value_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, fmt::format("cannot open {}", path.string()));
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorKind::kData, fmt::format("{}:{}: expected key = value", path.string(), line_no));
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) fail(ErrorKind::kData, fmt::format("{}:{}: empty key", path.string(), line_no));
    if (!kv.emplace(key, trim(line.substr(eq + 1))).second) {
      fail(ErrorKind::kData, fmt::format("{}:{}: key '{}' repeated", path.string(), line_no, key));
    }
  }
  return kv;
}

}  // namespace vqa::io
