#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>

namespace fbmheat {

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

/// Seed for the RNG stream of chunk `chunk_index` under master seed `seed`.
std::uint64_t chunk_seed(std::uint64_t seed, std::uint64_t chunk_index);

/// RNG for one chunk. Streams depend only on (seed, chunk_index), so output
/// is independent of the thread count.
inline std::mt19937_64 chunk_rng(std::uint64_t seed, std::uint64_t chunk_index) {
  return std::mt19937_64(chunk_seed(seed, chunk_index));
}

/// Default worker count: FBMHEAT_THREADS if set, else hardware concurrency.
unsigned default_threads();

/// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = default).
/// Each index is processed exactly once; callers write into per-index slots
/// and reduce in index order afterwards.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace fbmheat
