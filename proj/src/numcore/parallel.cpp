#include "numcore/parallel.hpp"

#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

#include "common/error.hpp"

namespace spwm::numcore {

namespace {

class Pool {
 public:
  explicit Pool(int workers) {
    for (int i = 0; i < workers; ++i) {
      threads_.emplace_back([this, i] { worker_loop(i); });
    }
  }

  ~Pool() {
    {
      std::unique_lock<std::mutex> lk(mu_);
      stop_ = true;
      epoch_++;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  int workers() const { return static_cast<int>(threads_.size()); }

  // Runs fn(i) for i in [0, tasks) across workers plus the calling thread.
  void run(int tasks, const std::function<void(int)>& fn) {
    {
      std::unique_lock<std::mutex> lk(mu_);
      task_ = &fn;
      n_tasks_ = tasks;
      next_task_ = 0;
      pending_ = tasks;
      epoch_++;
    }
    cv_.notify_all();
    // The caller participates too.
    for (;;) {
      int idx;
      {
        std::unique_lock<std::mutex> lk(mu_);
        if (next_task_ >= n_tasks_) break;
        idx = next_task_++;
      }
      fn(idx);
      std::unique_lock<std::mutex> lk(mu_);
      if (--pending_ == 0) done_cv_.notify_all();
    }
    std::unique_lock<std::mutex> lk(mu_);
    done_cv_.wait(lk, [this] { return pending_ == 0; });
    task_ = nullptr;
  }

 private:
  void worker_loop(int) {
    uint64_t seen = 0;
    for (;;) {
      const std::function<void(int)>* task = nullptr;
      {
        std::unique_lock<std::mutex> lk(mu_);
        cv_.wait(lk, [&] { return epoch_ != seen; });
        seen = epoch_;
        if (stop_) return;
        task = task_;
      }
      if (!task) continue;
      for (;;) {
        int idx;
        {
          std::unique_lock<std::mutex> lk(mu_);
          if (task_ != task || next_task_ >= n_tasks_) break;
          idx = next_task_++;
        }
        (*task)(idx);
        std::unique_lock<std::mutex> lk(mu_);
        if (--pending_ == 0) done_cv_.notify_all();
      }
    }
  }

  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable cv_, done_cv_;
  const std::function<void(int)>* task_ = nullptr;
  int n_tasks_ = 0;
  int next_task_ = 0;
  int pending_ = 0;
  uint64_t epoch_ = 0;
  bool stop_ = false;
};

int g_threads = 1;
Pool* g_pool = nullptr;

}  // namespace

void set_threads(int n) {
  SPWM_CHECK(n >= 1, "thread count must be >= 1, got ", n);
  if (n == g_threads) return;
  delete g_pool;
  g_pool = nullptr;
  g_threads = n;
  if (n > 1) g_pool = new Pool(n - 1);  // caller thread is worker 0
}

int thread_count() { return g_threads; }

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
  if (n <= 0) return;
  const int t = g_threads;
  if (t == 1 || n < 2 || !g_pool) {
    fn(0, n);
    return;
  }
  // Fixed partition: chunk boundaries depend only on (n, t).
  const int chunks = static_cast<int>(std::min<int64_t>(t, n));
  const int64_t base = n / chunks, rem = n % chunks;
  g_pool->run(chunks, [&](int c) {
    const int64_t begin = c * base + std::min<int64_t>(c, rem);
    const int64_t end = begin + base + (c < rem ? 1 : 0);
    fn(begin, end);
  });
}

}  // namespace spwm::numcore
