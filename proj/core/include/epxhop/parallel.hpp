#pragma once

#include <cstddef>
#include <functional>

namespace epxhop {

// Process-wide worker count used by every parallel loop in the library.
// Results never depend on this value: loops write disjoint outputs and all
// reductions run over fixed-size chunks merged in chunk order.
void set_thread_count(std::size_t threads);
std::size_t thread_count() noexcept;

// Calls body(i) for every i in [0, n). Indices are distributed over the
// configured workers; body must only write state owned by index i.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

// Splits [0, n) into ceil(n / chunk) chunks of fixed size and calls
// body(chunk_index, begin, end) for each, in parallel.
void parallel_chunks(std::size_t n, std::size_t chunk,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body);

inline std::size_t chunk_count(std::size_t n, std::size_t chunk) {
  return chunk == 0 ? 0 : (n + chunk - 1) / chunk;
}

}  // namespace epxhop
