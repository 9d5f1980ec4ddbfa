#pragma once
// Deterministic parallel map over fixed-size replica chunks. Workers claim
// chunks dynamically, but every partial result lands in a slot keyed by its
// chunk index and is merged in index order afterwards, so accumulated counts
// and floating-point sums are bit-identical for any worker count.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <thread>
#include <vector>

namespace perc {

inline unsigned default_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

// CLI-settable override; 0 means "use hardware concurrency".
inline unsigned& thread_override() {
  static unsigned value = 0;
  return value;
}

inline unsigned worker_count() {
  const unsigned o = thread_override();
  return o != 0 ? o : default_threads();
}

// Chunk size is a fixed constant, never derived from the worker count:
// that is what makes the chunk decomposition (and therefore every merged
// result) independent of the machine.
constexpr std::uint64_t replica_chunk = 1024;

struct ChunkRange {
  std::uint64_t begin = 0;
  std::uint64_t end = 0;
};

inline std::vector<ChunkRange> make_chunks(std::uint64_t n_items,
                                           std::uint64_t chunk_size) {
  std::vector<ChunkRange> out;
  if (n_items == 0) {
    out.push_back({0, 0});
    return out;
  }
  for (std::uint64_t b = 0; b < n_items; b += chunk_size)
    out.push_back({b, std::min(n_items, b + chunk_size)});
  return out;
}

// fn(chunk_index, begin, end) -> Partial; the returned vector is in chunk
// order regardless of which thread computed which chunk.
template <class Partial, class Fn>
std::vector<Partial> map_chunks(std::uint64_t n_items, Fn&& fn,
                                std::uint64_t chunk_size = replica_chunk) {
  const auto chunks = make_chunks(n_items, chunk_size);
  std::vector<Partial> results(chunks.size());
  const std::uint64_t threads =
      std::min<std::uint64_t>(worker_count(), chunks.size());
  if (threads <= 1) {
    for (std::size_t c = 0; c < chunks.size(); ++c)
      results[c] = fn(c, chunks[c].begin, chunks[c].end);
    return results;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= chunks.size()) return;
      results[c] = fn(c, chunks[c].begin, chunks[c].end);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::uint64_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return results;
}

}  // namespace perc
