#include "conslaw/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace conslaw {

int worker_count() {
  if (const char* s = std::getenv("CONSLAW_THREADS")) {
    const int v = std::atoi(s);
    if (v >= 1) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_chunks(int nchunks, const std::function<void(int)>& fn) {
  const int nw = std::min(worker_count(), nchunks);
  if (nw <= 1) {
    for (int c = 0; c < nchunks; ++c) fn(c);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < nw; ++w)
    pool.emplace_back([&] {
      for (int c = next++; c < nchunks; c = next++) {
        try {
          fn(c);
        } catch (...) {
          std::lock_guard<std::mutex> lk(mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace conslaw
