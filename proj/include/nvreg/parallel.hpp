#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace nvreg {

// Process-wide default worker count; 0 means hardware concurrency.
inline unsigned& default_workers() {
  static unsigned n = 0;
  return n;
}

inline unsigned resolve_workers(unsigned requested) {
  unsigned n = requested ? requested : default_workers();
  if (!n) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

// out[i] = f(i) for i in [0, count). Each item writes only its own slot, so the
// result does not depend on scheduling.
template <class T, class F>
std::vector<T> parallel_map(std::size_t count, F&& f, unsigned workers = 0) {
  std::vector<T> out(count);
  const unsigned n = std::min<std::size_t>(resolve_workers(workers), std::max<std::size_t>(count, 1));
  if (n <= 1) {
    for (std::size_t i = 0; i < count; ++i) out[i] = f(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex m;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        out[i] = f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(m);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < n; ++t) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace nvreg
