#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace linksched {

/// Random engine used throughout. Streams are reproducible on a given
/// platform and standard library.
using Rng = std::mt19937_64;

/// Stream tags used to derive independent seed sequences from a master seed.
enum class SeedStream : std::uint64_t {
  kTraining = 1,
  kValidation = 2,
  kCalibrationReference = 3,
  kCalibrationCandidate = 4,
  kEvaluation = 5,
  kAgent = 6,
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, SeedStream stream,
                                 std::uint64_t index) {
  std::uint64_t state = master;
  std::uint64_t a = splitmix64(state);
  state = a ^ (static_cast<std::uint64_t>(stream) * 0xD1B54A32D192ED03ULL);
  std::uint64_t b = splitmix64(state);
  state = b + index * 0x9E3779B97F4A7C15ULL;
  return splitmix64(state);
}

inline std::vector<std::uint64_t> derive_seeds(std::uint64_t master, SeedStream stream,
                                               std::size_t count,
                                               std::uint64_t first_index = 0) {
  std::vector<std::uint64_t> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(derive_seed(master, stream, first_index + i));
  }
  return out;
}

}  // namespace linksched
