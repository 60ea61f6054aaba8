#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace umlr {

// Engine keyed by (seed, stream...). Independent streams for replicates,
// resamples and folds come from distinct stream tuples, so results never
// depend on which thread ran which task.
inline std::mt19937_64 make_engine(std::uint64_t seed, std::initializer_list<std::uint64_t> stream) {
  std::vector<std::uint32_t> words;
  words.reserve(2 * (stream.size() + 1));
  auto push = [&words](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto s : stream) push(s);
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

// Stream tags. Values are part of the reproducibility contract.
namespace stream {
inline constexpr std::uint64_t kCoefficients = 0x636f6566;
inline constexpr std::uint64_t kReplicate = 0x7265706c;
inline constexpr std::uint64_t kBootstrap = 0x626f6f74;
inline constexpr std::uint64_t kFolds = 0x666f6c64;
inline constexpr std::uint64_t kRct = 0x72637421;
}  // namespace stream

}  // namespace umlr
