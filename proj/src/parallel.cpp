#include "sheetwarp/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace sheetwarp {

namespace {
std::atomic<int> g_threads{1};

int resolve(int threads) {
  if (threads <= 0) threads = g_threads.load();
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return threads;
}
}  // namespace

void set_default_threads(int threads) { g_threads.store(threads < 0 ? 0 : threads); }

int default_threads() { return resolve(0); }

void parallel_for(int n, const std::function<void(int)>& fn, int threads) {
  const int workers = std::min(resolve(threads), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int t = 1; t < workers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

void parallel_bands(int rows, const std::function<void(int, int)>& fn, int threads) {
  const int bands = std::max(1, std::min(resolve(threads), rows));
  parallel_for(
      bands,
      [&](int b) {
        const int r0 = static_cast<int>(static_cast<long long>(rows) * b / bands);
        const int r1 = static_cast<int>(static_cast<long long>(rows) * (b + 1) / bands);
        fn(r0, r1);
      },
      bands);
}

}  // namespace sheetwarp
