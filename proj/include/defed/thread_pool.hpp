#pragma once
#include <algorithm>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace defed {

// Minimal persistent pool for data-parallel loops.  Work is split into
// contiguous index ranges with a fixed assignment, and every item writes
// only its own output slot, so results are identical for any worker count.
class ThreadPool {
 public:
  explicit ThreadPool(int n_threads) : n_threads_(n_threads < 1 ? 1 : n_threads) {
    for (int i = 1; i < n_threads_; ++i) {
      workers_.emplace_back([this, i] { worker_loop(i); });
    }
  }

  ~ThreadPool() {
    {
      std::unique_lock<std::mutex> lock(mu_);
      stop_ = true;
      ++epoch_;
    }
    cv_start_.notify_all();
    for (auto& t : workers_) t.join();
  }

  int thread_count() const { return n_threads_; }

  // Runs fn(i) for i in [0, n_items); returns when all items are done.
  void parallel_for(int n_items, const std::function<void(int)>& fn) {
    if (n_items <= 0) return;
    if (n_threads_ == 1 || n_items == 1) {
      for (int i = 0; i < n_items; ++i) fn(i);
      return;
    }
    {
      std::unique_lock<std::mutex> lock(mu_);
      fn_ = &fn;
      n_items_ = n_items;
      pending_ = n_threads_ - 1;
      ++epoch_;
    }
    cv_start_.notify_all();
    run_range(0, n_items, fn);  // chunk 0 on the calling thread
    std::unique_lock<std::mutex> lock(mu_);
    cv_done_.wait(lock, [this] { return pending_ == 0; });
    fn_ = nullptr;
  }

 private:
  void run_range(int chunk, int n_items, const std::function<void(int)>& fn) {
    const int per = (n_items + n_threads_ - 1) / n_threads_;
    const int lo = chunk * per;
    const int hi = std::min(n_items, lo + per);
    for (int i = lo; i < hi; ++i) fn(i);
  }

  void worker_loop(int chunk) {
    uint64_t seen = 0;
    for (;;) {
      const std::function<void(int)>* fn = nullptr;
      int n_items = 0;
      {
        std::unique_lock<std::mutex> lock(mu_);
        cv_start_.wait(lock, [&] { return epoch_ != seen; });
        seen = epoch_;
        if (stop_) return;
        fn = fn_;
        n_items = n_items_;
      }
      if (fn != nullptr) run_range(chunk, n_items, *fn);
      {
        std::unique_lock<std::mutex> lock(mu_);
        if (--pending_ == 0) cv_done_.notify_one();
      }
    }
  }

  const int n_threads_;
  std::vector<std::thread> workers_;
  std::mutex mu_;
  std::condition_variable cv_start_;
  std::condition_variable cv_done_;
  const std::function<void(int)>* fn_ = nullptr;
  int n_items_ = 0;
  int pending_ = 0;
  uint64_t epoch_ = 0;
  bool stop_ = false;
};

}  // namespace defed
