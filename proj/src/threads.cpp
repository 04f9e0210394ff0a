#include "dclab/threads.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace dclab {

namespace {

int initial_thread_count() {
  if (const char* env = std::getenv("DCLAB_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

std::atomic<int> g_threads{initial_thread_count()};

}  // namespace

int thread_count() { return g_threads.load(); }

void set_thread_count(int n) { g_threads.store(n > 0 ? n : 1); }

void parallel_for(int begin, int end, const std::function<void(int)>& fn) {
  const int total = end - begin;
  if (total <= 0) return;
  int workers = thread_count();
  if (workers > total) workers = total;
  if (workers <= 1) {
    for (int i = begin; i < end; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const int chunk = (total + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int lo = begin + w * chunk;
    const int hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (int i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace dclab
