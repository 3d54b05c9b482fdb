#include "vpfd/parallel.hpp"

#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace vpfd::nn {

namespace {

// Persistent workers; the calling thread dispatches, runs chunk 0 itself,
// then waits for the workers' chunks.
class Pool {
 public:
  explicit Pool(int extra_workers) {
    for (int i = 0; i < extra_workers; ++i) {
      threads_.emplace_back([this, i] { worker_loop(i); });
    }
  }

  ~Pool() {
    {
      std::unique_lock<std::mutex> lk(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  int extra() const { return static_cast<int>(threads_.size()); }

  void dispatch(const std::function<void(int)>* task, int n_extra) {
    std::unique_lock<std::mutex> lk(mu_);
    task_ = task;
    pending_ = n_extra;
    remaining_ = n_extra;
    ++generation_;
    lk.unlock();
    cv_.notify_all();
  }

  void wait() {
    std::unique_lock<std::mutex> lk(mu_);
    done_cv_.wait(lk, [this] { return remaining_ == 0; });
    task_ = nullptr;
  }

 private:
  void worker_loop(int idx) {
    uint64_t seen = 0;
    for (;;) {
      const std::function<void(int)>* task = nullptr;
      {
        std::unique_lock<std::mutex> lk(mu_);
        cv_.wait(lk, [&] { return stop_ || (generation_ != seen && idx < pending_); });
        if (stop_) return;
        seen = generation_;
        task = task_;
      }
      (*task)(idx);
      {
        std::unique_lock<std::mutex> lk(mu_);
        if (--remaining_ == 0) done_cv_.notify_all();
      }
    }
  }

  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  const std::function<void(int)>* task_ = nullptr;
  int pending_ = 0;
  int remaining_ = 0;
  uint64_t generation_ = 0;
  bool stop_ = false;
};

int configured_workers() {
  if (const char* env = std::getenv("VPFD_THREADS"); env != nullptr && env[0] != '\0') {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw > 4 ? 4 : hw);
}

Pool& pool() {
  static Pool p(configured_workers() - 1);
  return p;
}

}  // namespace

int worker_count() { return pool().extra() + 1; }

void parallel_n(Index n, const std::function<void(Index, Index, int)>& fn) {
  if (n <= 0) return;
  const Index workers = std::min<Index>(worker_count(), n);
  if (workers <= 1) {
    fn(0, n, 0);
    return;
  }
  const Index chunk = (n + workers - 1) / workers;
  std::function<void(int)> task = [&](int extra_idx) {
    const Index tid = extra_idx + 1;
    const Index begin = chunk * tid;
    const Index end = std::min<Index>(n, begin + chunk);
    if (begin < end) fn(begin, end, static_cast<int>(tid));
  };
  Pool& p = pool();
  p.dispatch(&task, static_cast<int>(workers - 1));
  fn(0, std::min<Index>(n, chunk), 0);
  p.wait();
}

}  // namespace vpfd::nn
