#pragma once

#include <cstdint>
#include <random>

namespace rebal {

/// Identifies the random stream of one path: (master_seed, path_index).
struct PathSeed {
    std::uint64_t master = 0;
    std::uint64_t path_index = 0;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Engine for one path. Streams depend only on the seed pair, so results
/// do not change with the number of workers or the order paths are run.
std::mt19937_64 path_engine(PathSeed seed);

} // namespace rebal
