#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "vqa/core.hpp"

namespace vqa::data {

// Synthetic frames carry dim channels: 0 sharpness, 1 noise level,
// 2..dim-2 further static content descriptors, dim-1 motion phase. The motion
// phase advances by kMotionStep per frame, with a per-video alternating judder.
inline constexpr double kMotionStep = 10.0;
inline constexpr double kMaxJudder = 0.3;  // fraction of kMotionStep
inline constexpr double kRawScaleLo = 0.0;
inline constexpr double kRawScaleHi = 100.0;

struct SynthSpec {
  std::size_t n_videos = 512;
  std::size_t n_frames = 24;
  std::size_t feature_dim = 8;
  double noise_std = 0.15;  // observation noise, MOS units
  double temporal_coherence_weight = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Ground-truth quality: raw = w_star . features + bias on [scale_lo, scale_hi],
// then normalized onto 1..5.
struct Oracle {
  std::vector<double> w_star;
  double bias = 0.0;
  double scale_lo = kRawScaleLo;
  double scale_hi = kRawScaleHi;

  double raw_quality(std::span<const double> features) const;
  double mos(std::span<const double> features) const;
};

Oracle make_oracle(std::size_t feature_dim, double temporal_coherence_weight);

struct SynthDataset {
  std::vector<VideoSample> videos;
  Oracle oracle;
};

SynthDataset generate_synthetic(const SynthSpec& spec);

// 2 / (1 + m) - 1, in (-1, 1], where m is the mean adjacent deviation from
// nominal forward motion: || f[t+1] - f[t] - kMotionStep * e_last ||.
double coherence(const FrameSequence& seq);

struct FeatureOptions {
  bool zero_coherence = false;
};

// Per-video descriptor: frame means of channels 0..dim-2, then coherence.
std::vector<double> recompute_features(const FrameSequence& seq, const FeatureOptions& opts = {});

// floor(i * T / N) for i in [0, N).
std::vector<std::size_t> uniform_sample_frames(std::size_t total, std::size_t count);

// Parses `id,mos[,scale_lo,scale_hi]`; frames are left empty.
std::vector<VideoSample> load_mos_csv(const std::filesystem::path& path);

std::pair<std::vector<VideoSample>, std::vector<VideoSample>> split(const std::vector<VideoSample>& dataset,
                                                                    double train_frac, std::uint64_t seed);

}  // namespace vqa::data
