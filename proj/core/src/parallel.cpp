#include "epxhop/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace epxhop {
namespace {

std::atomic<std::size_t> g_threads{0};
thread_local bool t_in_worker = false;

std::size_t resolved_threads() {
  std::size_t t = g_threads.load(std::memory_order_relaxed);
  if (t == 0) {
    t = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  }
  return t;
}

}  // namespace

void set_thread_count(std::size_t threads) { g_threads.store(threads, std::memory_order_relaxed); }

std::size_t thread_count() noexcept { return resolved_threads(); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  if (n == 0) return;
  const std::size_t workers = std::min(resolved_threads(), n);
  if (workers <= 1 || t_in_worker) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    t_in_worker = true;
    struct Reset {
      ~Reset() { t_in_worker = false; }
    } reset;
    for (;;) {
      const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n, std::memory_order_relaxed);
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

void parallel_chunks(std::size_t n, std::size_t chunk,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body) {
  const std::size_t chunks = chunk_count(n, chunk);
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t begin = c * chunk;
    body(c, begin, std::min(n, begin + chunk));
  });
}

}  // namespace epxhop
