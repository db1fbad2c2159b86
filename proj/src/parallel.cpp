#include "nlv/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace nlv {

namespace {

int initial_threads() {
  if (const char* env = std::getenv("NLV_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::atomic<int> g_threads{0};
std::atomic<bool> g_deterministic{true};

}  // namespace

int thread_count() {
  int n = g_threads.load();
  if (n == 0) {
    n = initial_threads();
    g_threads.store(n);
  }
  return n;
}

void set_thread_count(int n) { g_threads.store(std::max(1, n)); }

bool deterministic() { return g_deterministic.load(); }
void set_deterministic(bool on) { g_deterministic.store(on); }

int chunk_count(int n) {
  if (n <= 0) return 0;
  const int target = deterministic() ? kDeterministicChunks : thread_count();
  return std::min(n, target);
}

void parallel_chunks(int n, const std::function<void(int, int, int)>& body) {
  const int chunks = chunk_count(n);
  if (chunks == 0) return;
  auto bounds = [n, chunks](int c) { return static_cast<int>(static_cast<long long>(n) * c / chunks); };
  const int workers = std::min(thread_count(), chunks);
  if (workers <= 1) {
    for (int c = 0; c < chunks; ++c) body(c, bounds(c), bounds(c + 1));
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&] {
    for (int c = next++; c < chunks; c = next++) {
      try {
        body(c, bounds(c), bounds(c + 1));
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (int i = 1; i < workers; ++i) pool.emplace_back(run);
  run();
  pool.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace nlv
