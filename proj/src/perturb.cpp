#include "vqa/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "vqa/rng.hpp"

namespace vqa::perturb {
namespace {

void check_permutation(std::span<const std::size_t> perm, std::size_t n, std::string_view what) {
  require(perm.size() == n, fmt::format("{}: permutation has {} entries, expected {}", what, perm.size(), n));
  std::vector<bool> seen(n, false);
  for (std::size_t v : perm) {
    require(v < n && !seen[v], fmt::format("{}: not a bijection on 0..{}", what, n - 1));
    seen[v] = true;
  }
}

std::vector<bool> drop_mask(std::size_t length, std::span<const std::size_t> drop, std::string_view what) {
  std::vector<bool> mask(length, false);
  for (std::size_t d : drop) {
    require(d < length, fmt::format("{}: drop index {} out of range for {} frames", what, d, length));
    require(!mask[d], fmt::format("{}: drop index {} repeated", what, d));
    mask[d] = true;
  }
  return mask;
}

std::vector<std::size_t> identity(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
  auto v = identity(n);
  std::shuffle(v.begin(), v.end(), rng);
  return v;
}

// n distinct values drawn uniformly from candidates, returned sorted.
std::vector<std::size_t> sample_without_replacement(std::vector<std::size_t> candidates, std::size_t n,
                                                    Rng& rng) {
  std::shuffle(candidates.begin(), candidates.end(), rng);
  candidates.resize(n);
  std::sort(candidates.begin(), candidates.end());
  return candidates;
}

}  // namespace

std::string_view mode_name(Mode mode) {
  switch (mode) {
    case Mode::kGlobalShuffle: return "global_shuffle";
    case Mode::kLocalShuffle: return "local_shuffle";
    case Mode::kReverse: return "reverse";
    case Mode::kJitter: return "jitter";
    case Mode::kDuplicate: return "duplicate";
    case Mode::kRandomDrop: return "random_drop";
  }
  return "unknown";
}

std::optional<Mode> parse_mode(std::string_view name) {
  for (Mode m : kAllModes) {
    if (mode_name(m) == name) return m;
  }
  return std::nullopt;
}

std::vector<std::size_t> global_shuffle_indices(std::size_t length, std::span<const std::size_t> perm) {
  check_permutation(perm, length, "global_shuffle");
  return {perm.begin(), perm.end()};
}

std::vector<std::size_t> local_shuffle_indices(std::size_t length, std::size_t window,
                                               std::span<const std::vector<std::size_t>> perms) {
  require(window >= 2, fmt::format("local_shuffle: window must be >= 2, got {}", window));
  const std::size_t n_windows = length / window;
  require(perms.size() == n_windows,
          fmt::format("local_shuffle: {} window permutations given, {} full windows", perms.size(), n_windows));
  auto out = identity(length);
  for (std::size_t w = 0; w < n_windows; ++w) {
    check_permutation(perms[w], window, "local_shuffle");
    for (std::size_t i = 0; i < window; ++i) out[w * window + i] = w * window + perms[w][i];
  }
  return out;
}

std::vector<std::size_t> reverse_indices(std::size_t length) {
  auto out = identity(length);
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> jitter_indices(std::size_t length, std::span<const int> offsets) {
  require(offsets.size() == length,
          fmt::format("jitter: {} offsets for {} frames", offsets.size(), length));
  std::vector<std::size_t> out(length);
  const auto last = static_cast<std::ptrdiff_t>(length) - 1;
  for (std::size_t t = 0; t < length; ++t) {
    const int d = offsets[t];
    require(d >= -1 && d <= 1, fmt::format("jitter: offset {} at frame {} not in {{-1, 0, +1}}", d, t));
    out[t] = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(t) + d, 0, last));
  }
  return out;
}

std::vector<std::size_t> duplicate_indices(std::size_t length, std::size_t frame, std::size_t count,
                                           std::size_t insert_pos, std::span<const std::size_t> drop) {
  require(frame < length, fmt::format("duplicate: frame {} out of range for {} frames", frame, length));
  require(count >= 1, "duplicate: count must be >= 1");
  require(insert_pos <= length, fmt::format("duplicate: insert position {} beyond {}", insert_pos, length));
  require(drop.size() == count,
          fmt::format("duplicate: {} drop indices for {} inserted copies", drop.size(), count));
  const auto mask = drop_mask(length, drop, "duplicate");
  require(!mask[frame], fmt::format("duplicate: drop set contains the duplicated frame {}", frame));

  std::vector<std::size_t> out;
  out.reserve(length);
  for (std::size_t t = 0; t <= length; ++t) {
    if (t == insert_pos) out.insert(out.end(), count, frame);
    if (t < length && !mask[t]) out.push_back(t);
  }
  return out;
}

std::vector<std::size_t> random_drop_indices(std::size_t length, std::span<const std::size_t> drop) {
  require(drop.size() < length,
          fmt::format("random_drop: dropping {} of {} frames would leave none", drop.size(), length));
  const auto mask = drop_mask(length, drop, "random_drop");
  std::vector<std::size_t> out;
  out.reserve(length - drop.size());
  for (std::size_t t = 0; t < length; ++t) {
    if (!mask[t]) out.push_back(t);
  }
  return out;
}

std::vector<std::size_t> source_indices(const PerturbSpec& spec, std::size_t length) {
  switch (spec.mode) {
    case Mode::kGlobalShuffle: return global_shuffle_indices(length, spec.permutation);
    case Mode::kLocalShuffle: return local_shuffle_indices(length, spec.window, spec.window_perms);
    case Mode::kReverse: return reverse_indices(length);
    case Mode::kJitter: return jitter_indices(length, spec.offsets);
    case Mode::kDuplicate:
      return duplicate_indices(length, spec.dup_frame, spec.count, spec.insert_pos, spec.drop);
    case Mode::kRandomDrop: return random_drop_indices(length, spec.drop);
  }
  fail(ErrorKind::kInvalidArgument, "unknown perturbation mode");
}

FrameSequence global_shuffle(const FrameSequence& seq, std::span<const std::size_t> perm) {
  return seq.gather(global_shuffle_indices(seq.size(), perm));
}

FrameSequence local_shuffle(const FrameSequence& seq, std::size_t window,
                            std::span<const std::vector<std::size_t>> perms) {
  return seq.gather(local_shuffle_indices(seq.size(), window, perms));
}

FrameSequence reverse(const FrameSequence& seq) { return seq.gather(reverse_indices(seq.size())); }

FrameSequence jitter(const FrameSequence& seq, std::span<const int> offsets) {
  return seq.gather(jitter_indices(seq.size(), offsets));
}

FrameSequence duplicate(const FrameSequence& seq, std::size_t frame, std::size_t count, std::size_t insert_pos,
                        std::span<const std::size_t> drop) {
  return seq.gather(duplicate_indices(seq.size(), frame, count, insert_pos, drop));
}

FrameSequence random_drop(const FrameSequence& seq, std::span<const std::size_t> drop) {
  return seq.gather(random_drop_indices(seq.size(), drop));
}

FrameSequence apply(const FrameSequence& seq, const PerturbSpec& spec) {
  return seq.gather(source_indices(spec, seq.size()));
}

std::size_t default_count(std::size_t length) {
  if (length < 2) return 0;
  const auto n = static_cast<std::size_t>(std::ceil(0.2 * static_cast<double>(length)));
  return std::clamp<std::size_t>(n, 1, length - 1);
}

std::vector<Mode> applicable_modes(std::size_t length, const RandomOptions& opts) {
  std::vector<Mode> modes;
  if (length < 2) return modes;
  const std::size_t n = opts.count == 0 ? default_count(length) : opts.count;
  for (Mode m : kAllModes) {
    switch (m) {
      case Mode::kLocalShuffle:
        if (opts.window >= 2 && length >= opts.window) modes.push_back(m);
        break;
      case Mode::kDuplicate:
      case Mode::kRandomDrop:
        if (n >= 1 && n < length) modes.push_back(m);
        break;
      default: modes.push_back(m);
    }
  }
  return modes;
}

PerturbSpec random_spec(Mode mode, std::size_t length, std::uint64_t seed, const RandomOptions& opts) {
  const auto modes = applicable_modes(length, opts);
  require(std::find(modes.begin(), modes.end(), mode) != modes.end(),
          fmt::format("{} is not applicable to a sequence of {} frames", mode_name(mode), length));
  Rng rng = make_rng(seed);
  PerturbSpec spec;
  spec.mode = mode;
  switch (mode) {
    case Mode::kGlobalShuffle:
      spec.permutation = random_permutation(length, rng);
      break;
    case Mode::kLocalShuffle:
      spec.window = opts.window;
      for (std::size_t w = 0; w < length / opts.window; ++w) {
        spec.window_perms.push_back(random_permutation(opts.window, rng));
      }
      break;
    case Mode::kReverse:
      break;
    case Mode::kJitter: {
      std::uniform_int_distribution<int> offset(-1, 1);
      spec.offsets.resize(length);
      for (int& o : spec.offsets) o = offset(rng);
      break;
    }
    case Mode::kDuplicate: {
      spec.count = opts.count == 0 ? default_count(length) : opts.count;
      spec.dup_frame = std::uniform_int_distribution<std::size_t>(0, length - 1)(rng);
      spec.insert_pos = std::uniform_int_distribution<std::size_t>(0, length)(rng);
      std::vector<std::size_t> candidates;
      for (std::size_t t = 0; t < length; ++t) {
        if (t != spec.dup_frame) candidates.push_back(t);
      }
      spec.drop = sample_without_replacement(std::move(candidates), spec.count, rng);
      break;
    }
    case Mode::kRandomDrop:
      spec.count = opts.count == 0 ? default_count(length) : opts.count;
      spec.drop = sample_without_replacement(identity(length), spec.count, rng);
      break;
  }
  return spec;
}

std::pair<FrameSequence, PerturbSpec> apply_random_perturbation(const FrameSequence& seq, std::uint64_t seed,
                                                                const RandomOptions& opts) {
  require(seq.size() >= 2, fmt::format("perturbation needs at least 2 frames, got {}", seq.size()));
  const auto modes = applicable_modes(seq.size(), opts);
  Rng rng = make_rng(seed);
  const Mode mode = modes[std::uniform_int_distribution<std::size_t>(0, modes.size() - 1)(rng)];
  PerturbSpec spec = random_spec(mode, seq.size(), derive_seed(seed, {1}), opts);
  FrameSequence out = apply(seq, spec);
  return {std::move(out), std::move(spec)};
}

}  // namespace vqa::perturb
