#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace condstable {

/// Worker count used by replicate-parallel estimators. Initialised from the
/// CONDSTABLE_WORKERS environment variable, else hardware_concurrency().
unsigned worker_count();
void set_worker_count(unsigned workers);

/// Replicates are grouped in fixed batches of this size; the batch partition
/// and merge order never depend on the number of workers.
inline constexpr std::size_t kReplicateBatch = 512;

/// Runs fn(replicate_index, acc) for replicate_index in [0, n).
///
/// Each batch accumulates into a fresh copy of `proto`; batches are merged
/// into the result in batch order, so the result is bit-identical for any
/// worker count. Acc must provide merge(const Acc&).
template <class Acc, class Fn>
Acc run_replicates(std::size_t n, const Acc& proto, Fn&& fn, unsigned workers = worker_count()) {
  const std::size_t batches = (n + kReplicateBatch - 1) / kReplicateBatch;
  std::vector<Acc> partial(batches, proto);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&] {
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= batches) return;
      try {
        const std::size_t lo = b * kReplicateBatch;
        const std::size_t hi = std::min(n, lo + kReplicateBatch);
        for (std::size_t i = lo; i < hi; ++i) fn(i, partial[b]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(batches);
        return;
      }
    }
  };

  const unsigned threads =
      static_cast<unsigned>(std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(batches, 1)));
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);

  Acc result = proto;
  for (const Acc& p : partial) result.merge(p);
  return result;
}

}  // namespace condstable
