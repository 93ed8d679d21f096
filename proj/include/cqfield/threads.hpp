#pragma once

// Minimal persistent worker pool. Ranges are split into one contiguous
// chunk per thread, so every output element is always produced by the
// same loop order regardless of the thread count; results stay
// bit-identical for any --threads value as long as chunks write
// disjoint outputs (which all callers in this library guarantee).

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace cqfield {

class ThreadPool {
 public:
  explicit ThreadPool(int threads) : size_(threads < 1 ? 1 : threads) {
    for (int t = 1; t < size_; ++t) {
      workers_.emplace_back([this, t] { worker_loop(t); });
    }
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  ~ThreadPool() {
    {
      std::unique_lock lk(mu_);
      stop_ = true;
      ++epoch_;
    }
    cv_.notify_all();
    for (auto& w : workers_) w.join();
  }

  int size() const { return size_; }

  // Runs fn(chunk_begin, chunk_end, thread_index) on up to size() threads.
  // The range split depends only on (begin, end, size()).
  void parallel_for(std::int64_t begin, std::int64_t end,
                    const std::function<void(std::int64_t, std::int64_t, int)>& fn) {
    const std::int64_t n = end - begin;
    if (n <= 0) return;
    if (size_ == 1) {
      fn(begin, end, 0);
      return;
    }
    {
      std::unique_lock lk(mu_);
      job_ = &fn;
      job_begin_ = begin;
      job_end_ = end;
      remaining_ = size_ - 1;
      ++epoch_;
    }
    cv_.notify_all();
    run_chunk(fn, begin, end, 0);
    std::unique_lock lk(mu_);
    done_cv_.wait(lk, [this] { return remaining_ == 0; });
    job_ = nullptr;
  }

 private:
  void run_chunk(const std::function<void(std::int64_t, std::int64_t, int)>& fn,
                 std::int64_t begin, std::int64_t end, int t) const {
    const std::int64_t n = end - begin;
    const std::int64_t c0 = begin + n * t / size_;
    const std::int64_t c1 = begin + n * (t + 1) / size_;
    if (c1 > c0) fn(c0, c1, t);
  }

  void worker_loop(int t) {
    std::uint64_t seen = 0;
    for (;;) {
      const std::function<void(std::int64_t, std::int64_t, int)>* job = nullptr;
      std::int64_t begin = 0, end = 0;
      {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return epoch_ != seen; });
        seen = epoch_;
        if (stop_) return;
        job = job_;
        begin = job_begin_;
        end = job_end_;
      }
      if (job) run_chunk(*job, begin, end, t);
      {
        std::unique_lock lk(mu_);
        if (--remaining_ == 0) done_cv_.notify_all();
      }
    }
  }

  int size_;
  std::vector<std::thread> workers_;
  std::mutex mu_;
  std::condition_variable cv_, done_cv_;
  const std::function<void(std::int64_t, std::int64_t, int)>* job_ = nullptr;
  std::int64_t job_begin_ = 0, job_end_ = 0;
  int remaining_ = 0;
  std::uint64_t epoch_ = 0;
  bool stop_ = false;
};

// Convenience: run fn over [begin, end) serially when pool is null.
inline void parallel_for(ThreadPool* pool, std::int64_t begin, std::int64_t end,
                         const std::function<void(std::int64_t, std::int64_t, int)>& fn) {
  if (end <= begin) return;
  if (pool == nullptr || pool->size() == 1) {
    fn(begin, end, 0);
  } else {
    pool->parallel_for(begin, end, fn);
  }
}

} // namespace cqfield
