#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <string>
#include <vector>

#include "lrq/stats.hpp"

namespace lrq {

/// Worker count from LRQ_WORKERS, falling back to hardware concurrency.
int default_workers();

/// Runs body(i) for i in [0, n) on up to `workers` threads using static
/// chunks. The first exception thrown by any worker is rethrown.
template <class Body>
void parallel_for(std::size_t n, int workers, Body&& body) {
  if (workers <= 0) workers = default_workers();
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex guard;
  std::vector<std::thread> pool;
  pool.reserve(w);
  for (std::size_t k = 0; k < w; ++k) {
    pool.emplace_back([&, k] {
      const std::size_t lo = n * k / w;
      const std::size_t hi = n * (k + 1) / w;
      try {
        for (std::size_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(guard);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

/// Evaluates f(i) into a vector in index order.
template <class T, class F>
std::vector<T> parallel_map(std::size_t n, int workers, F&& f) {
  std::vector<T> out(n);
  parallel_for(n, workers, [&](std::size_t i) { out[i] = f(i); });
  return out;
}

/// Draws sample(i) for i in [0, n) in parallel, then accumulates in index
/// order so the summary is identical for every worker count.
template <class F>
EstimateSummary sample_mean(std::size_t n, int workers, F&& sample, std::string method = {}) {
  const auto values = parallel_map<double>(n, workers, sample);
  return mc_accumulate(values, std::move(method));
}

}  // namespace lrq
