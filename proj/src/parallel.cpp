#include "condstable/parallel.hpp"

#include <cstdlib>
#include <string>

namespace condstable {

namespace {

unsigned initial_workers() {
  if (const char* env = std::getenv("CONDSTABLE_WORKERS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (...) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::atomic<unsigned>& workers_setting() {
  static std::atomic<unsigned> w{initial_workers()};
  return w;
}

}  // namespace

unsigned worker_count() { return workers_setting().load(); }

void set_worker_count(unsigned workers) { workers_setting().store(std::max(1u, workers)); }

}  // namespace condstable
