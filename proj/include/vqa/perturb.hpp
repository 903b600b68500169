#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "vqa/core.hpp"

// Temporal degradation operators. All positions and permutations are
// 0-based: perm[i] == j means output frame i is input frame j.
namespace vqa::perturb {

enum class Mode { kGlobalShuffle, kLocalShuffle, kReverse, kJitter, kDuplicate, kRandomDrop };

inline constexpr std::array<Mode, 6> kAllModes = {Mode::kGlobalShuffle, Mode::kLocalShuffle,
                                                  Mode::kReverse,       Mode::kJitter,
                                                  Mode::kDuplicate,     Mode::kRandomDrop};

std::string_view mode_name(Mode mode);
std::optional<Mode> parse_mode(std::string_view name);

// Fully materialized perturbation; replaying it through apply() is exact.
struct PerturbSpec {
  Mode mode = Mode::kReverse;
  std::size_t window = 4;  // LocalShuffle
  std::size_t count = 0;   // Duplicate / RandomDrop n

  std::vector<std::size_t> permutation;               // GlobalShuffle
  std::vector<std::vector<std::size_t>> window_perms;  // LocalShuffle
  std::vector<int> offsets;                            // Jitter
  std::size_t dup_frame = 0;                           // Duplicate k
  std::size_t insert_pos = 0;                          // Duplicate p, in [0, T]
  std::vector<std::size_t> drop;                       // Duplicate / RandomDrop

  bool operator==(const PerturbSpec&) const = default;
};

// Source-index maps: output frame t is input frame result[t].
std::vector<std::size_t> global_shuffle_indices(std::size_t length, std::span<const std::size_t> perm);
std::vector<std::size_t> local_shuffle_indices(std::size_t length, std::size_t window,
                                               std::span<const std::vector<std::size_t>> perms);
std::vector<std::size_t> reverse_indices(std::size_t length);
std::vector<std::size_t> jitter_indices(std::size_t length, std::span<const int> offsets);
std::vector<std::size_t> duplicate_indices(std::size_t length, std::size_t frame, std::size_t count,
                                           std::size_t insert_pos, std::span<const std::size_t> drop);
std::vector<std::size_t> random_drop_indices(std::size_t length, std::span<const std::size_t> drop);
std::vector<std::size_t> source_indices(const PerturbSpec& spec, std::size_t length);

FrameSequence global_shuffle(const FrameSequence& seq, std::span<const std::size_t> perm);
FrameSequence local_shuffle(const FrameSequence& seq, std::size_t window,
                            std::span<const std::vector<std::size_t>> perms);
FrameSequence reverse(const FrameSequence& seq);
FrameSequence jitter(const FrameSequence& seq, std::span<const int> offsets);
FrameSequence duplicate(const FrameSequence& seq, std::size_t frame, std::size_t count,
                        std::size_t insert_pos, std::span<const std::size_t> drop);
FrameSequence random_drop(const FrameSequence& seq, std::span<const std::size_t> drop);
FrameSequence apply(const FrameSequence& seq, const PerturbSpec& spec);

struct RandomOptions {
  std::size_t window = 4;
  // Duplicate / RandomDrop count; 0 selects ceil(0.2 * T), capped at T - 1.
  std::size_t count = 0;
};

std::size_t default_count(std::size_t length);

// Modes whose preconditions hold for a sequence of this length.
std::vector<Mode> applicable_modes(std::size_t length, const RandomOptions& opts = {});

// Draws the randomness for one mode.
PerturbSpec random_spec(Mode mode, std::size_t length, std::uint64_t seed, const RandomOptions& opts = {});

// Uniform choice among applicable modes, then random_spec for it.
std::pair<FrameSequence, PerturbSpec> apply_random_perturbation(const FrameSequence& seq, std::uint64_t seed,
                                                                const RandomOptions& opts = {});

}  // namespace vqa::perturb
