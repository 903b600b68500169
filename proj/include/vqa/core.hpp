#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vqa/error.hpp"

namespace vqa {

inline constexpr double kMosMin = 1.0;
inline constexpr double kMosMax = 5.0;

// Ordered frames with one feature row per frame. Rows are stored flat,
// row-major, so a sequence of T frames with dimension d holds T*d values.
class FrameSequence {
 public:
  FrameSequence() = default;
  FrameSequence(std::vector<std::int64_t> frame_ids, std::vector<double> features, std::size_t dim);
  FrameSequence(std::vector<std::int64_t> frame_ids, const std::vector<std::vector<double>>& rows);

  // Frame ids only; every row has dimension zero.
  static FrameSequence ids_only(std::vector<std::int64_t> frame_ids);

  std::size_t size() const noexcept { return frame_ids_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<std::int64_t>& frame_ids() const noexcept { return frame_ids_; }
  const std::vector<double>& features() const noexcept { return features_; }
  std::span<const double> row(std::size_t t) const {
    return {features_.data() + t * dim_, dim_};
  }

  // New sequence whose frame t is this sequence's frame source[t].
  FrameSequence gather(std::span<const std::size_t> source) const;

  bool operator==(const FrameSequence&) const = default;

 private:
  std::vector<std::int64_t> frame_ids_;
  std::vector<double> features_;
  std::size_t dim_ = 0;
};

struct VideoSample {
  std::string id;
  FrameSequence frames;
  double mos = 3.0;
};

struct QualityResponse {
  std::string text;
  std::optional<double> parsed_score;
  double raw_draw = 0.0;
  double log_prob_current = 0.0;
  double log_prob_old = 0.0;
};

struct RewardBreakdown {
  double fmt = 0.0;
  double reg = 0.0;
  double rank = 0.0;
  double temp = 0.0;
  double total = 0.0;
};

struct HyperParams {
  int k_group = 4;
  double beta_kl = 0.04;
  double clip_eps = 0.2;
  double alpha_reg = 0.8;
  double sigma_reg = 0.5;
  double delta_temp = 0.3;
  double tau_temp = 0.5;
  double eps_stab = 1e-8;
  double learning_rate = 1e-6;
  int batch_size = 64;
  int epochs = 3;

  // Throws kInvalidArgument naming the first violated constraint.
  void validate() const;
};

// Linear map of [lo, hi] onto the 1..5 MOS scale.
double normalize_mos(double raw, double lo, double hi);

}  // namespace vqa
