#include "shapca/common.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace shapca {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stage) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char ch : stage) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  return splitmix64(global_seed ^ h);
}

namespace parallel {

namespace {
std::atomic<unsigned> g_workers{1};
// Set on pool threads so nested loops run inline instead of oversubscribing.
thread_local bool t_in_pool = false;
}

void set_workers(unsigned n) { g_workers.store(n); }

unsigned workers() {
  unsigned n = g_workers.load();
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const unsigned w = static_cast<unsigned>(std::min<std::size_t>(workers(), n));
  if (w <= 1 || t_in_pool) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(w);
  for (unsigned t = 0; t < w; ++t) {
    pool.emplace_back([&] {
      t_in_pool = true;
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          next.store(n);
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace parallel

}  // namespace shapca
