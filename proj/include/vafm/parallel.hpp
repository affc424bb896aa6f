#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace vafm {

// Fixed-size pool executing indexed loop bodies. Results must not depend on
// which thread runs which index, so bodies take only the index, write to
// disjoint slots, and draw randomness from a per-index stream. Calls must not
// be nested: a body may not invoke parallel_for on the same pool.
class ThreadPool {
public:
  explicit ThreadPool(std::size_t num_threads)
      : num_threads_(num_threads == 0 ? 1 : num_threads) {
    for (std::size_t t = 0; t + 1 < num_threads_; ++t)
      workers_.emplace_back([this] { worker_loop(); });
  }

  ThreadPool(const ThreadPool &) = delete;
  ThreadPool &operator=(const ThreadPool &) = delete;

  ~ThreadPool() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      shutdown_ = true;
    }
    wake_cv_.notify_all();
    for (auto &w : workers_) w.join();
  }

  std::size_t num_threads() const { return num_threads_; }

  // Runs body(i) for i in [0, n), the calling thread participating. Returns
  // once every index has finished; the first exception thrown by any body is
  // rethrown here after the loop drains.
  void parallel_for(std::size_t n, const std::function<void(std::size_t)> &body) {
    if (n == 0) return;
    if (workers_.empty() || n == 1) {
      for (std::size_t i = 0; i < n; ++i) body(i);
      return;
    }
    Job job(n, body);
    {
      std::lock_guard<std::mutex> lock(mu_);
      current_ = &job;
      ++generation_;
    }
    wake_cv_.notify_all();
    drain(job);
    {
      std::unique_lock<std::mutex> lock(mu_);
      done_cv_.wait(lock, [&] { return job.workers_in == 0; });
      current_ = nullptr;
    }
    if (job.error) std::rethrow_exception(job.error);
  }

private:
  struct Job {
    Job(std::size_t n_in, const std::function<void(std::size_t)> &body_in)
        : n(n_in), body(body_in) {}
    std::size_t n;
    const std::function<void(std::size_t)> &body;
    std::atomic<std::size_t> next{0};
    int workers_in = 0;  // guarded by mu_
    std::exception_ptr error;
    std::mutex error_mu;
  };

  void drain(Job &job) {
    for (;;) {
      const std::size_t i = job.next.fetch_add(1, std::memory_order_relaxed);
      if (i >= job.n) return;
      try {
        job.body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(job.error_mu);
        if (!job.error) job.error = std::current_exception();
      }
    }
  }

  // Registration happens under mu_ in the same critical section that reads
  // current_, so the owner cannot retire a job while a worker is attached;
  // after deregistering, the worker never touches the job again.
  void worker_loop() {
    std::uint64_t seen = 0;
    std::unique_lock<std::mutex> lock(mu_);
    for (;;) {
      wake_cv_.wait(lock, [&] { return shutdown_ || generation_ != seen; });
      if (shutdown_) return;
      seen = generation_;
      Job *job = current_;
      if (job == nullptr) continue;
      ++job->workers_in;
      lock.unlock();
      drain(*job);
      lock.lock();
      if (--job->workers_in == 0) done_cv_.notify_all();
    }
  }

  std::vector<std::thread> workers_;
  std::size_t num_threads_;
  std::mutex mu_;
  std::condition_variable wake_cv_;
  std::condition_variable done_cv_;
  Job *current_ = nullptr;
  std::uint64_t generation_ = 0;
  bool shutdown_ = false;
};

}  // namespace vafm
