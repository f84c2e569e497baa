#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace icprl {

using Rng = std::mt19937_64;

// FNV-1a over raw bytes; used for config hashes and file content hashes.
uint64_t fnv1a(const void* data, size_t n, uint64_t seed = 0xcbf29ce484222325ull);
uint64_t fnv1a(const std::string& s, uint64_t seed = 0xcbf29ce484222325ull);

// SplitMix64 step; used to derive independent seed streams.
uint64_t splitmix64(uint64_t x);

// Derive a child seed from a base seed and a stream tag, so that parallel
// workers draw from independent streams regardless of scheduling order.
uint64_t derive_seed(uint64_t base, const std::string& tag, uint64_t index = 0);

inline Rng make_rng(uint64_t seed) { return Rng(splitmix64(seed ^ 0x9e3779b97f4a7c15ull)); }

[[noreturn]] void fail(const std::string& msg);

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// Fixed-size worker pool. run(n, fn) executes fn(0..n-1), blocking until all
// items finish. Item order of execution is unspecified; callers must write
// results into per-index slots and reduce serially afterward so that results
// do not depend on scheduling.
class WorkerPool {
 public:
  explicit WorkerPool(int workers);
  ~WorkerPool();
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  int size() const { return workers_; }
  void run(int n, const std::function<void(int)>& fn);

 private:
  struct Impl;
  Impl* impl_;
  int workers_;
};

// Exact round-trip decimal formatting for doubles ("%.17g").
std::string format_double(double v);

double now_seconds();

}  // namespace icprl
