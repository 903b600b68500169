#pragma once

#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "vqa/core.hpp"
#include "vqa/grpo.hpp"

namespace vqa::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

// Bad flags or configuration; maps to kExitUsage.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Runs one subcommand (synth, train, eval, perturb, reward). Never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Training run described by a key=value config file.
struct TrainJob {
  std::string dataset;
  std::string probe;  // optional
  std::string model_out = "model.json";
  std::string log_out = "train_log.jsonl";
  grpo::TrainConfig config;
};

// Unknown keys and unparseable values raise a usage error; GRPO_VQA_SEED, when
// set, replaces `seed`.
TrainJob parse_train_config(const std::map<std::string, std::string>& kv);

// Scores reward records (one JSON object per line) into breakdown lines.
// `labels` maps group_id to MOS for records that omit it.
std::vector<std::string> score_reward_lines(const std::vector<std::string>& lines,
                                            const std::map<std::string, double>& labels, const HyperParams& hyper);

}  // namespace vqa::cli
