#pragma once

#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "icprl/common.hpp"

namespace icprl::cli {

// Flat key=value settings, read from a plain-text config file and layered
// with overrides. File lines are "key = value"; '#' starts a comment; blank
// lines are skipped. Unknown keys are rejected per command before anything
// runs, and every command writes its fully resolved config beside its
// outputs.
struct RunConfig {
  std::map<std::string, std::string> kv;

  static RunConfig from_file(const std::string& path);

  void set(const std::string& key, const std::string& value);
  void merge(const RunConfig& overrides);  // override values win
  bool has(const std::string& key) const { return kv.count(key) != 0; }

  std::string str(const std::string& key, const std::string& fallback) const;
  std::string required(const std::string& key) const;
  long integer(const std::string& key, long fallback) const;
  double real(const std::string& key, double fallback) const;
  bool flag(const std::string& key, bool fallback) const;  // "0" or "1"
  uint64_t seed(const std::string& key, uint64_t fallback) const;

  std::string canonical() const;  // sorted "key = value" lines
  uint64_t hash() const { return fnv1a(canonical()); }
  void check_keys(const std::set<std::string>& allowed, const std::string& command) const;
  void write(const std::string& path) const;
};

// Commands throw std::invalid_argument for usage-class problems (unknown or
// missing keys, incompatible framework/corpus combinations, task-id leakage)
// and std::runtime_error for runtime failures (missing files, training
// aborts). Informational output goes to out.
void run_gen(RunConfig cfg, std::ostream& out);
void run_train(RunConfig cfg, std::ostream& out);
void run_eval(RunConfig cfg, std::ostream& out);
// Chains gen, train, and eval for one named suite with pinned stage seeds,
// then writes a combined report. Override keys: out, workers, seed, smoke.
void run_repro(const std::string& suite, RunConfig overrides, std::ostream& out);

std::vector<std::string> suite_names();

// Default pool size for command-level task parallelism.
int default_workers();

}  // namespace icprl::cli
