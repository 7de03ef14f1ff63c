#pragma once

// Replica-parallel execution. Each replica writes only its own slot, so the
// result vector (and anything folded over it in index order) does not depend
// on the number of threads or on scheduling.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include "kcm/lattice.hpp"

namespace kcm {

class ReplicaError : public Error {
 public:
  ReplicaError(std::uint64_t replica, const std::string& what)
      : Error("replica " + std::to_string(replica) + ": " + what), replica_(replica) {}
  std::uint64_t replica() const { return replica_; }

 private:
  std::uint64_t replica_;
};

/// Thread count from KCM_THREADS, else the hardware concurrency.
inline unsigned thread_count() {
  if (const char* env = std::getenv("KCM_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs task(replica) for replica = 0..count-1 and returns the results in
/// replica order. The failing replica with the smallest index is reported.
template <class Task>
auto run_replicas(std::uint64_t count, Task task, unsigned threads = thread_count())
    -> std::vector<decltype(task(std::uint64_t{}))> {
  using Result = decltype(task(std::uint64_t{}));
  static_assert(!std::is_same_v<Result, bool>, "vector<bool> slots are not independent");
  std::vector<Result> results(count);
  std::atomic<std::uint64_t> next{0};
  std::mutex err_mutex;
  std::uint64_t err_index = count;
  std::string err_what;

  auto worker = [&] {
    for (;;) {
      const std::uint64_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        results[i] = task(i);
      } catch (const std::exception& e) {
        std::lock_guard lock(err_mutex);
        if (i < err_index) {
          err_index = i;
          err_what = e.what();
        }
      }
    }
  };

  threads = static_cast<unsigned>(std::clamp<std::uint64_t>(threads, 1, std::max<std::uint64_t>(count, 1)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (err_index < count) throw ReplicaError(err_index, err_what);
  return results;
}

}  // namespace kcm
