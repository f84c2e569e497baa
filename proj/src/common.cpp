#include "icprl/common.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <mutex>
#include <thread>

namespace icprl {

uint64_t fnv1a(const void* data, size_t n, uint64_t seed) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  uint64_t h = seed;
  for (size_t i = 0; i < n; i++) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

uint64_t fnv1a(const std::string& s, uint64_t seed) { return fnv1a(s.data(), s.size(), seed); }

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

uint64_t derive_seed(uint64_t base, const std::string& tag, uint64_t index) {
  uint64_t h = fnv1a(tag);
  return splitmix64(base ^ splitmix64(h + index * 0x9e3779b97f4a7c15ull));
}

void fail(const std::string& msg) { throw std::runtime_error(msg); }

struct WorkerPool::Impl {
  std::vector<std::thread> threads;
  std::mutex mu;
  std::condition_variable cv_work, cv_done;
  const std::function<void(int)>* fn = nullptr;
  int total = 0;
  uint64_t gen = 0;
  std::atomic<int> next{0};
  std::atomic<int> remaining{0};
  bool stop = false;
  std::exception_ptr error;

  void worker_loop() {
    uint64_t seen = 0;
    for (;;) {
      {
        std::unique_lock<std::mutex> lk(mu);
        cv_work.wait(lk, [&] { return stop || gen != seen; });
        if (stop) return;
        seen = gen;
      }
      for (;;) {
        int i = next.fetch_add(1);
        if (i >= total) break;
        try {
          (*fn)(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(mu);
          if (!error) error = std::current_exception();
        }
        if (remaining.fetch_sub(1) == 1) {
          std::lock_guard<std::mutex> lk(mu);
          cv_done.notify_all();
        }
      }
    }
  }
};

WorkerPool::WorkerPool(int workers) : workers_(workers < 1 ? 1 : workers) {
  impl_ = new Impl();
  if (workers_ > 1) {
    for (int i = 0; i < workers_; i++)
      impl_->threads.emplace_back([this] { impl_->worker_loop(); });
  }
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard<std::mutex> lk(impl_->mu);
    impl_->stop = true;
  }
  impl_->cv_work.notify_all();
  for (auto& t : impl_->threads) t.join();
  delete impl_;
}

void WorkerPool::run(int n, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  if (workers_ == 1) {
    for (int i = 0; i < n; i++) fn(i);
    return;
  }
  {
    std::lock_guard<std::mutex> lk(impl_->mu);
    impl_->fn = &fn;
    impl_->total = n;
    impl_->next.store(0);
    impl_->remaining.store(n);
    impl_->error = nullptr;
    impl_->gen++;
  }
  impl_->cv_work.notify_all();
  {
    std::unique_lock<std::mutex> lk(impl_->mu);
    impl_->cv_done.wait(lk, [&] { return impl_->remaining.load() == 0; });
  }
  std::exception_ptr err;
  {
    std::lock_guard<std::mutex> lk(impl_->mu);
    err = impl_->error;
  }
  if (err) std::rethrow_exception(err);
}

std::string format_double(double v) {
  char buf[40];
  snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

}  // namespace icprl
