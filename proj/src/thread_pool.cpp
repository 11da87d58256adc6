// Copyright 2026 The dipfuse Authors
// SPDX-License-Identifier: Apache-2.0
#include "dipfuse/thread_pool.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace dipfuse {

namespace {

class Pool {
 public:
  static Pool& instance() {
    static Pool pool;
    return pool;
  }

  int size() const { return size_; }

  void run(int n, const std::function<void(int)>& fn) {
    if (n <= 1 || size_ <= 1 || !gate_.try_lock()) {
      for (int i = 0; i < n; ++i) fn(i);
      return;
    }
    {
      std::lock_guard<std::mutex> lk(mu_);
      fn_ = &fn;
      count_ = n;
      next_.store(0, std::memory_order_relaxed);
      done_.store(0, std::memory_order_relaxed);
      ++generation_;
    }
    cv_.notify_all();
    work(fn, n);
    {
      std::unique_lock<std::mutex> lk(mu_);
      done_cv_.wait(lk, [&] { return done_.load() >= n && active_ == 0; });
      fn_ = nullptr;  // retire the region before a helper can adopt it late
      count_ = 0;
    }
    gate_.unlock();
  }

 private:
  Pool() {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (const char* env = std::getenv("DIPFUSE_THREADS")) {
      const int v = std::atoi(env);
      if (v >= 1) n = v;
    }
    size_ = n < 1 ? 1 : n;
    for (int i = 0; i < size_ - 1; ++i) {
      threads_.emplace_back([this] { helper_loop(); });
    }
  }

  ~Pool() {
    {
      std::lock_guard<std::mutex> lk(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  void helper_loop() {
    uint64_t seen = 0;
    for (;;) {
      const std::function<void(int)>* fn;
      int n;
      {
        std::unique_lock<std::mutex> lk(mu_);
        cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
        if (fn_ == nullptr) continue;  // region finished before we woke
        fn = fn_;
        n = count_;
        ++active_;
      }
      work(*fn, n);
      {
        std::lock_guard<std::mutex> lk(mu_);
        --active_;
      }
      done_cv_.notify_all();
    }
  }

  void work(const std::function<void(int)>& fn, int n) {
    for (;;) {
      const int i = next_.fetch_add(1, std::memory_order_relaxed);
      if (i >= n) break;
      fn(i);
      if (done_.fetch_add(1, std::memory_order_acq_rel) + 1 == n) {
        // Lock so the waiter is either blocked (gets the notify) or has not
        // yet evaluated its predicate (sees the final count).
        { std::lock_guard<std::mutex> lk(mu_); }
        done_cv_.notify_all();
      }
    }
  }

  std::mutex gate_;  // one parallel region at a time
  std::mutex mu_;
  std::condition_variable cv_, done_cv_;
  std::vector<std::thread> threads_;
  const std::function<void(int)>* fn_ = nullptr;
  int count_ = 0;
  int active_ = 0;
  std::atomic<int> next_{0}, done_{0};
  uint64_t generation_ = 0;
  bool stop_ = false;
  int size_ = 1;
};

}  // namespace

void parallel_for(int n, const std::function<void(int)>& fn) {
  Pool::instance().run(n, fn);
}

int worker_count() { return Pool::instance().size(); }

}  // namespace dipfuse
