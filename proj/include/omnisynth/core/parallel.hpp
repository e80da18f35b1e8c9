#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace omnisynth {

// Worker count from OMNISYNTH_THREADS. 0 (or unset on a single core) means
// run inline on the calling thread.
inline unsigned worker_count() {
  if (const char* env = std::getenv("OMNISYNTH_THREADS")) {
    try {
      const long n = std::stol(env);
      return n <= 0 ? 0u : static_cast<unsigned>(n);
    } catch (...) {
      return 0;
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw <= 1 ? 0u : hw;
}

// Runs fn(chunk_index) for every chunk in [0, chunks). Chunks are
// independent, so results do not depend on the worker count.
template <class Fn>
void parallel_chunks(std::size_t chunks, Fn&& fn) {
  const unsigned workers = std::min<std::size_t>(worker_count(), chunks);
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) fn(c);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t c = w; c < chunks; c += workers) {
        try {
          fn(c);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace omnisynth
