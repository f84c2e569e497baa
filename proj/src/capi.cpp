#include "icprl.h"

#include <cstring>
#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>

#include "icprl/cli.hpp"

struct icprl_config {
  icprl::cli::RunConfig cfg;
};

namespace {

thread_local std::string g_last_error;

int guard(const std::function<void()>& fn) {
  g_last_error.clear();
  try {
    fn();
    return ICPRL_OK;
  } catch (const std::invalid_argument& e) {
    g_last_error = e.what();
    return ICPRL_ERR_USAGE;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return ICPRL_ERR_RUNTIME;
  }
}

int usage_error(const std::string& msg) {
  g_last_error = msg;
  return ICPRL_ERR_USAGE;
}

int copy_out(const std::string& s, char* buf, size_t cap) {
  if (buf == nullptr || cap < s.size() + 1)
    return usage_error("buffer too small: need " + std::to_string(s.size() + 1) + " bytes");
  std::memcpy(buf, s.c_str(), s.size() + 1);
  return ICPRL_OK;
}

}  // namespace

extern "C" {

const char* icprl_version(void) { return "0.1.0"; }

icprl_config* icprl_config_new(void) { return new (std::nothrow) icprl_config(); }

void icprl_config_free(icprl_config* cfg) { delete cfg; }

int icprl_config_load_file(icprl_config* cfg, const char* path) {
  if (cfg == nullptr || path == nullptr) return usage_error("icprl_config_load_file: null argument");
  return guard([&] {
    icprl::cli::RunConfig file = icprl::cli::RunConfig::from_file(path);
    cfg->cfg.merge(file);
  });
}

int icprl_config_set(icprl_config* cfg, const char* key, const char* value) {
  if (cfg == nullptr || key == nullptr || value == nullptr)
    return usage_error("icprl_config_set: null argument");
  if (*key == '\0') return usage_error("icprl_config_set: empty key");
  g_last_error.clear();
  cfg->cfg.set(key, value);
  return ICPRL_OK;
}

int icprl_config_get(const icprl_config* cfg, const char* key, char* buf, size_t cap) {
  if (cfg == nullptr || key == nullptr) return usage_error("icprl_config_get: null argument");
  g_last_error.clear();
  if (!cfg->cfg.has(key)) return usage_error("icprl_config_get: key " + std::string(key) + " unset");
  return copy_out(cfg->cfg.kv.at(key), buf, cap);
}

int icprl_gen(const icprl_config* cfg) {
  if (cfg == nullptr) return usage_error("icprl_gen: null config");
  return guard([&] { icprl::cli::run_gen(cfg->cfg, std::cout); });
}

int icprl_train(const icprl_config* cfg) {
  if (cfg == nullptr) return usage_error("icprl_train: null config");
  return guard([&] { icprl::cli::run_train(cfg->cfg, std::cout); });
}

int icprl_eval(const icprl_config* cfg) {
  if (cfg == nullptr) return usage_error("icprl_eval: null config");
  return guard([&] { icprl::cli::run_eval(cfg->cfg, std::cout); });
}

int icprl_repro(const char* suite, const icprl_config* overrides) {
  if (suite == nullptr) return usage_error("icprl_repro: null suite");
  icprl::cli::RunConfig ov;
  if (overrides != nullptr) ov = overrides->cfg;
  return guard([&] { icprl::cli::run_repro(suite, ov, std::cout); });
}

int icprl_suites(char* buf, size_t cap) {
  g_last_error.clear();
  std::string joined;
  for (const std::string& name : icprl::cli::suite_names()) {
    if (!joined.empty()) joined += '\n';
    joined += name;
  }
  return copy_out(joined, buf, cap);
}

const char* icprl_last_error(void) { return g_last_error.c_str(); }

}  // extern "C"
