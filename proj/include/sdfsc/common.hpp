#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace sdfsc {

/// Errors raised on bad inputs (file parsing, invariant violations).
class ModelError : public std::runtime_error {
public:
  explicit ModelError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Errors raised when an iterative solver fails to converge.
class SolveError : public std::runtime_error {
public:
  explicit SolveError(const std::string& msg) : std::runtime_error(msg) {}
};

// splitmix64; used to derive independent RNG substreams from (seed, id)
// so that sharded generation is schedule-independent.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t id) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (id + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return std::mt19937_64(mix_seed(seed, stream));
}

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Splits [0, count) into contiguous chunks and runs fn(begin, end) on a small
// thread group. Each index must write only its own output slot; results are
// then independent of the worker count. Small batches run inline: the spawn
// cost swamps the work below ~a few hundred items.
inline void parallel_for_chunks(std::size_t count,
                                const std::function<void(std::size_t, std::size_t)>& fn,
                                int threads = 0, std::size_t min_grain = 128) {
  const int nt = resolve_threads(threads);
  if (count == 0) return;
  if (nt <= 1 || count < std::max<std::size_t>(2, min_grain)) {
    fn(0, count);
    return;
  }
  const std::size_t nw = std::min<std::size_t>(nt, count);
  const std::size_t chunk = (count + nw - 1) / nw;
  std::vector<std::thread> pool;
  pool.reserve(nw);
  std::exception_ptr first_error;
  std::mutex err_mutex;
  for (std::size_t w = 0; w < nw; ++w) {
    const std::size_t b = w * chunk;
    const std::size_t e = std::min(count, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&, b, e] {
      try {
        fn(b, e);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace sdfsc
