#pragma once

#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace softctl {

/// Fixed-size worker pool for index-range parallelism. parallel_for splits
/// [0, count) into one contiguous chunk per worker; callers write results by
/// index so the outcome never depends on scheduling.
class ThreadPool {
 public:
  explicit ThreadPool(std::size_t workers);
  ~ThreadPool();

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  std::size_t size() const { return workers_.empty() ? 1 : workers_.size(); }

  /// Calls fn(chunk, begin, end) for each chunk and blocks until all finish.
  /// Exceptions thrown by fn are rethrown on the calling thread (first chunk wins).
  void parallel_for(std::size_t count, const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

 private:
  void worker_loop(std::size_t id);

  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  const std::function<void(std::size_t, std::size_t, std::size_t)>* job_ = nullptr;
  std::size_t count_ = 0;
  std::size_t generation_ = 0;
  std::size_t pending_ = 0;
  std::vector<std::exception_ptr> errors_;
  bool stop_ = false;
};

}  // namespace softctl
