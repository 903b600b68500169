#include "vqa/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "vqa/data.hpp"
#include "vqa/io.hpp"
#include "vqa/metrics.hpp"
#include "vqa/perturb.hpp"
#include "vqa/rewards.hpp"

namespace vqa::cli {
namespace fs = std::filesystem;
namespace {

template <typename T>
T parse_value(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out{};
  in >> out;
  if (in.fail() || !in.eof()) throw UsageError(fmt::format("config: cannot parse {} = '{}'", key, value));
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw UsageError(fmt::format("config: {} expects true/false, got '{}'", key, value));
}

std::vector<std::int64_t> read_frame_ids(const fs::path& path) {
  const auto j = io::read_json_file(path);
  const auto& ids = j.is_object() && j.contains("frame_ids") ? j.at("frame_ids") : j;
  try {
    return ids.get<std::vector<std::int64_t>>();
  } catch (const io::Json::exception&) {
    fail(ErrorKind::kData, fmt::format("{}: expected a frame-id list or {{\"frame_ids\": [...]}}", path.string()));
  }
}

// Reward records sharing one group_id; perturbed-twin rows are kept apart.
struct RecordGroup {
  std::string id;
  std::optional<double> mos;
  std::string pair_id;
  std::vector<std::size_t> raw_lines;
  std::vector<QualityResponse> raw;
  std::vector<QualityResponse> twin;
};

int cmd_synth(const data::SynthSpec& spec, const std::string& out_path, std::string oracle_path, bool force,
              std::ostream& out) {
  if (oracle_path.empty()) oracle_path = fs::path(out_path).replace_extension(".oracle.json").string();
  for (const auto& p : {out_path, oracle_path}) {
    if (fs::exists(p) && !force) fail(ErrorKind::kIo, fmt::format("{} exists; pass --force to overwrite", p));
  }
  const auto ds = data::generate_synthetic(spec);
  io::write_text_file(out_path, io::dataset_to_json(ds.videos).dump() + "\n");
  io::write_text_file(oracle_path, io::oracle_to_json(ds.oracle).dump(2) + "\n");
  out << fmt::format("wrote {} videos to {} (oracle {})\n", ds.videos.size(), out_path, oracle_path);
  return kExitOk;
}

int cmd_train(const std::string& config_path, std::ostream& out, std::ostream& err) {
  std::map<std::string, std::string> kv;
  try {
    kv = io::read_key_value_file(config_path);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  const TrainJob job = parse_train_config(kv);
  const auto dataset = io::dataset_from_json(io::read_json_file(job.dataset));
  std::vector<VideoSample> probe;
  if (!job.probe.empty()) probe = io::dataset_from_json(io::read_json_file(job.probe));

  for (const auto& p : {job.model_out, job.log_out}) {
    if (fs::exists(p)) err << fmt::format("warning: overwriting {} (resume is not supported)\n", p);
  }
  const auto result = grpo::train(dataset, job.config, probe);

  std::string log;
  for (const auto& row : result.log) log += io::log_row_to_json(row).dump() + "\n";
  io::write_text_file(job.log_out, log);
  io::write_text_file(job.model_out, io::policy_to_json(result.params).dump(2) + "\n");
  const auto& last = result.log.back();
  out << fmt::format("trained {} steps; final mean reward {:.4f}, probe srcc {:.4f}; model {}\n", result.log.size(),
                     last.mean_total_reward, last.probe_srcc, job.model_out);
  return kExitOk;
}

int cmd_eval(const std::string& model_path, const std::string& dataset_path, const std::string& csv_path,
             bool zero_coherence, std::ostream& out) {
  io::Json result;
  if (!csv_path.empty()) {
    const auto rows = io::read_predictions_csv(csv_path);
    std::vector<double> pred, mos;
    for (const auto& r : rows) {
      pred.push_back(r.pred);
      mos.push_back(r.mos);
    }
    result = {{"srcc", metrics::srcc(pred, mos)}, {"plcc", metrics::plcc(pred, mos)}, {"n", rows.size()}};
  } else {
    if (model_path.empty() || dataset_path.empty()) throw UsageError("eval needs --model and --dataset, or --csv");
    const auto params = io::policy_from_json(io::read_json_file(model_path));
    const auto dataset = io::dataset_from_json(io::read_json_file(dataset_path));
    const auto r = grpo::evaluate(params, dataset, {zero_coherence});
    result = {{"srcc", r.srcc}, {"plcc", r.plcc}, {"n", r.n}};
  }
  out << result.dump() << "\n";
  return kExitOk;
}

struct PerturbArgs {
  std::string in;
  std::string out;
  std::string spec_out;
  std::string replay;
  std::string mode;
  std::size_t window = 4;
  std::size_t count = 0;
  std::uint64_t seed = 0;
};

int cmd_perturb(const PerturbArgs& a, std::ostream& out) {
  const auto seq = FrameSequence::ids_only(read_frame_ids(a.in));
  perturb::PerturbSpec spec;
  if (!a.replay.empty()) {
    spec = io::spec_from_json(io::read_json_file(a.replay));
  } else {
    const perturb::RandomOptions opts{a.window, a.count};
    if (a.mode.empty()) {
      spec = perturb::apply_random_perturbation(seq, a.seed, opts).second;
    } else {
      const auto mode = perturb::parse_mode(a.mode);
      if (!mode) throw UsageError(fmt::format("unknown mode '{}'", a.mode));
      if (seq.size() < 2) fail(ErrorKind::kData, "perturbation needs at least 2 frames");
      spec = perturb::random_spec(*mode, seq.size(), a.seed, opts);
    }
  }
  const auto result = perturb::apply(seq, spec);
  const io::Json out_json = {{"frame_ids", result.frame_ids()}};
  if (a.out.empty()) {
    out << out_json.dump() << "\n";
  } else {
    io::write_text_file(a.out, out_json.dump() + "\n");
  }
  const auto spec_json = io::spec_to_json(spec, seq.size()).dump();
  if (a.spec_out.empty()) {
    out << spec_json << "\n";
  } else {
    io::write_text_file(a.spec_out, spec_json + "\n");
  }
  return kExitOk;
}

int cmd_reward(const std::string& responses_path, const std::string& labels_path, const HyperParams& hyper,
               const std::string& out_path, std::ostream& out) {
  std::map<std::string, double> labels;
  if (!labels_path.empty()) {
    for (const auto& s : data::load_mos_csv(labels_path)) labels[s.id] = s.mos;
  }
  std::ifstream in(responses_path);
  if (!in) fail(ErrorKind::kIo, fmt::format("cannot open {}", responses_path));
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  const auto scored = score_reward_lines(lines, labels, hyper);
  std::string text;
  for (const auto& l : scored) text += l + "\n";
  if (out_path.empty()) {
    out << text;
  } else {
    io::write_text_file(out_path, text);
  }
  return kExitOk;
}

}  // namespace

TrainJob parse_train_config(const std::map<std::string, std::string>& kv) {
  TrainJob job;
  auto& h = job.config.hyper;
  h.learning_rate = 1e-6;
  for (const auto& [key, value] : kv) {
    if (key == "dataset") job.dataset = value;
    else if (key == "probe") job.probe = value;
    else if (key == "model_out") job.model_out = value;
    else if (key == "log_out") job.log_out = value;
    else if (key == "k_group") h.k_group = parse_value<int>(key, value);
    else if (key == "beta_kl") h.beta_kl = parse_value<double>(key, value);
    else if (key == "clip_eps") h.clip_eps = parse_value<double>(key, value);
    else if (key == "alpha_reg") h.alpha_reg = parse_value<double>(key, value);
    else if (key == "sigma_reg") h.sigma_reg = parse_value<double>(key, value);
    else if (key == "delta_temp") h.delta_temp = parse_value<double>(key, value);
    else if (key == "tau_temp") h.tau_temp = parse_value<double>(key, value);
    else if (key == "eps_stab") h.eps_stab = parse_value<double>(key, value);
    else if (key == "learning_rate") h.learning_rate = parse_value<double>(key, value);
    else if (key == "batch_size") h.batch_size = parse_value<int>(key, value);
    else if (key == "epochs") h.epochs = parse_value<int>(key, value);
    else if (key == "seed") job.config.seed = parse_value<std::uint64_t>(key, value);
    else if (key == "pairing_seed") job.config.pairing_seed = parse_value<std::uint64_t>(key, value);
    else if (key == "perturb_every_step") job.config.perturb_every_step = parse_bool(key, value);
    else if (key == "zero_coherence") job.config.zero_coherence = parse_bool(key, value);
    else if (key == "init_bias") job.config.init_bias = parse_value<double>(key, value);
    else if (key == "init_log_std") job.config.init_log_std = parse_value<double>(key, value);
    else if (key == "init_weight_std") job.config.init_weight_std = parse_value<double>(key, value);
    else throw UsageError(fmt::format("config: unknown key '{}'", key));
  }
  if (job.dataset.empty()) throw UsageError("config: 'dataset' is required");
  if (const char* env = std::getenv("GRPO_VQA_SEED"); env != nullptr && *env != '\0') {
    job.config.seed = parse_value<std::uint64_t>("GRPO_VQA_SEED", env);
  }
  try {
    h.validate();
  } catch (const Error& e) {
    throw UsageError(fmt::format("config: {}", e.what()));
  }
  return job;
}

std::vector<std::string> score_reward_lines(const std::vector<std::string>& lines,
                                            const std::map<std::string, double>& labels, const HyperParams& hyper) {
  hyper.validate();
  std::vector<RecordGroup> groups;
  std::map<std::string, std::size_t> index;

  const auto key_of = [](const io::Json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };

  for (std::size_t n = 0; n < lines.size(); ++n) {
    const auto where = fmt::format("line {}", n + 1);
    if (lines[n].find_first_not_of(" \t\r\n") == std::string::npos) continue;
    io::Json rec;
    try {
      rec = io::Json::parse(lines[n]);
    } catch (const io::Json::parse_error& e) {
      fail(ErrorKind::kData, fmt::format("{}: malformed JSON: {}", where, e.what()));
    }
    if (!rec.is_object() || !rec.contains("response_text") || !rec["response_text"].is_string() ||
        !rec.contains("group_id")) {
      fail(ErrorKind::kData, fmt::format("{}: need string response_text and group_id", where));
    }
    const auto gid = key_of(rec["group_id"]);
    auto [it, inserted] = index.emplace(gid, groups.size());
    if (inserted) groups.push_back({gid, std::nullopt, "", {}, {}, {}});
    auto& g = groups[it->second];

    if (rec.contains("mos") && !rec["mos"].is_null()) {
      if (!rec["mos"].is_number()) fail(ErrorKind::kData, fmt::format("{}: mos must be a number", where));
      const double mos = rec["mos"].get<double>();
      if (g.mos && *g.mos != mos) fail(ErrorKind::kData, fmt::format("{}: conflicting mos for group {}", where, gid));
      g.mos = mos;
    }
    if (rec.contains("pair_id") && !rec["pair_id"].is_null()) {
      const auto pid = key_of(rec["pair_id"]);
      if (!g.pair_id.empty() && g.pair_id != pid) {
        fail(ErrorKind::kData, fmt::format("{}: conflicting pair_id for group {}", where, gid));
      }
      g.pair_id = pid;
    }
    QualityResponse r;
    r.text = rec["response_text"].get<std::string>();
    r.parsed_score = rewards::parse_score(r.text);
    const bool perturbed = rec.contains("perturbed") && rec["perturbed"].is_boolean() && rec["perturbed"].get<bool>();
    if (perturbed) {
      g.twin.push_back(std::move(r));
    } else {
      g.raw_lines.push_back(n);
      g.raw.push_back(std::move(r));
    }
  }

  const auto k = static_cast<std::size_t>(hyper.k_group);
  std::vector<rewards::GroupStats> stats;
  for (auto& g : groups) {
    if (g.raw.size() != k) {
      fail(ErrorKind::kData, fmt::format("group {} has {} responses, expected K = {}", g.id, g.raw.size(), k));
    }
    if (!g.twin.empty() && g.twin.size() != k) {
      fail(ErrorKind::kData,
           fmt::format("group {} has {} perturbed responses, expected K = {}", g.id, g.twin.size(), k));
    }
    if (!g.mos) {
      const auto it = labels.find(g.id);
      if (it == labels.end()) fail(ErrorKind::kData, fmt::format("group {} has no mos", g.id));
      g.mos = it->second;
    }
    if (!(*g.mos >= kMosMin && *g.mos <= kMosMax)) {
      fail(ErrorKind::kData, fmt::format("group {}: mos {} outside [1, 5]", g.id, *g.mos));
    }
    stats.push_back(rewards::GroupStats::from_responses(g.raw));
  }

  std::vector<std::pair<std::size_t, std::string>> out;
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& g = groups[gi];
    const rewards::GroupStats* partner = nullptr;
    double g_partner = *g.mos;
    if (!g.pair_id.empty()) {
      const auto it = index.find(g.pair_id);
      if (it == index.end() || it->second == gi) {
        fail(ErrorKind::kData, fmt::format("group {}: pair_id {} does not name another group", g.id, g.pair_id));
      }
      partner = &stats[it->second];
      g_partner = *groups[it->second].mos;
    }
    const auto scores = rewards::score_group(g.raw, *g.mos, partner, g_partner, hyper);
    double temp = 0.0;
    if (!g.twin.empty()) {
      const auto twin = rewards::score_group(g.twin, *g.mos, partner, g_partner, hyper);
      temp = rewards::temporal_reward(scores.mean_reg(), scores.mean_rank(), twin.mean_reg(), twin.mean_rank(),
                                      hyper.delta_temp, hyper.tau_temp);
    }
    const auto breakdown = rewards::combine(scores, temp);
    for (std::size_t i = 0; i < breakdown.size(); ++i) {
      const auto& b = breakdown[i];
      io::Json j = {{"group_id", g.id}, {"index", i},     {"fmt", b.fmt},   {"reg", b.reg},
                    {"rank", b.rank},   {"temp", b.temp}, {"total", b.total}};
      j["parsed_score"] = g.raw[i].parsed_score ? io::Json(*g.raw[i].parsed_score) : io::Json(nullptr);
      out.emplace_back(g.raw_lines[i], j.dump());
    }
  }
  std::sort(out.begin(), out.end());
  std::vector<std::string> result;
  for (auto& [line, text] : out) result.push_back(std::move(text));
  return result;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"GRPO training and evaluation for synthetic video quality assessment"};
  app.require_subcommand(1);

  data::SynthSpec synth;
  std::string synth_out = "dataset.json";
  std::string synth_oracle;
  bool synth_force = false;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset and its oracle sidecar");
  synth_cmd->add_option("--out", synth_out, "Dataset JSON path");
  synth_cmd->add_option("--oracle", synth_oracle, "Oracle sidecar path (default: <out>.oracle.json)");
  synth_cmd->add_option("--n-videos", synth.n_videos);
  synth_cmd->add_option("--n-frames", synth.n_frames);
  synth_cmd->add_option("--dim", synth.feature_dim, "Feature dimension d");
  synth_cmd->add_option("--noise-std", synth.noise_std, "MOS observation noise");
  synth_cmd->add_option("--coherence-weight", synth.temporal_coherence_weight);
  synth_cmd->add_option("--seed", synth.seed);
  synth_cmd->add_flag("--force", synth_force, "Overwrite existing files");

  std::string train_config;
  auto* train_cmd = app.add_subcommand("train", "Train a policy from a key=value config file");
  train_cmd->add_option("config", train_config, "Config path")->required();

  std::string eval_model, eval_dataset, eval_csv;
  bool eval_zero_coherence = false;
  auto* eval_cmd = app.add_subcommand("eval", "Print SRCC/PLCC as JSON");
  eval_cmd->add_option("--model", eval_model);
  eval_cmd->add_option("--dataset", eval_dataset);
  eval_cmd->add_option("--csv", eval_csv, "CSV with header id,pred,mos");
  eval_cmd->add_flag("--zero-coherence", eval_zero_coherence);

  PerturbArgs pargs;
  auto* perturb_cmd = app.add_subcommand("perturb", "Apply a temporal perturbation to a frame-id list");
  perturb_cmd->add_option("--in", pargs.in, "JSON frame-id list")->required();
  perturb_cmd->add_option("--out", pargs.out, "Perturbed list path (default: stdout)");
  perturb_cmd->add_option("--spec-out", pargs.spec_out, "Materialized spec path (default: stdout)");
  perturb_cmd->add_option("--replay", pargs.replay, "Replay a spec file instead of drawing one");
  perturb_cmd->add_option("--mode", pargs.mode, "global_shuffle|local_shuffle|reverse|jitter|duplicate|random_drop");
  perturb_cmd->add_option("--window", pargs.window);
  perturb_cmd->add_option("--count", pargs.count, "Duplicate/drop count (0: ceil(0.2 T))");
  perturb_cmd->add_option("--seed", pargs.seed);

  std::string reward_in, reward_labels, reward_out;
  HyperParams reward_hyper;
  auto* reward_cmd = app.add_subcommand("reward", "Score a JSONL file of responses");
  reward_cmd->add_option("responses", reward_in, "JSONL records")->required();
  reward_cmd->add_option("--labels", reward_labels, "CSV id,mos[,scale_lo,scale_hi] keyed by group_id");
  reward_cmd->add_option("--out", reward_out, "Output JSONL (default: stdout)");
  reward_cmd->add_option("--k", reward_hyper.k_group, "Responses per group");
  reward_cmd->add_option("--alpha", reward_hyper.alpha_reg);
  reward_cmd->add_option("--sigma", reward_hyper.sigma_reg);
  reward_cmd->add_option("--delta", reward_hyper.delta_temp);
  reward_cmd->add_option("--tau", reward_hyper.tau_temp);
  reward_cmd->add_option("--eps", reward_hyper.eps_stab);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*synth_cmd) return cmd_synth(synth, synth_out, synth_oracle, synth_force, out);
    if (*train_cmd) return cmd_train(train_config, out, err);
    if (*eval_cmd) return cmd_eval(eval_model, eval_dataset, eval_csv, eval_zero_coherence, out);
    if (*perturb_cmd) return cmd_perturb(pargs, out);
    if (*reward_cmd) return cmd_reward(reward_in, reward_labels, reward_hyper, reward_out, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::kNumeric ? kExitNumeric : kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace vqa::cli
