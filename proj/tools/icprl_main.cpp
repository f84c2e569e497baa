#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "icprl.h"

namespace {

struct CommonOpts {
  std::string config_file;
  std::vector<std::string> sets;
  std::string seed, out, workers, preset;
  bool smoke = false;
};

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

void add_common(CLI::App* sub, CommonOpts& o, bool with_config, bool with_preset,
                bool with_smoke) {
  if (with_config) sub->add_option("--config", o.config_file, "Config file with key = value lines");
  sub->add_option("--set", o.sets, "Override one key (key=value); repeatable")
      ->type_name("KEY=VALUE");
  sub->add_option("--seed", o.seed, "Base seed");
  sub->add_option("--out", o.out, "Output directory");
  sub->add_option("--workers", o.workers, "Worker threads");
  if (with_preset) sub->add_option("--preset", o.preset, "Model preset (sets model_preset)");
  if (with_smoke) sub->add_flag("--smoke", o.smoke, "Tiny sizes for a fast end-to-end check");
}

int apply(icprl_config* cfg, const CommonOpts& o) {
  int rc = ICPRL_OK;
  auto check = [&](int code) {
    if (code != ICPRL_OK && rc == ICPRL_OK) rc = code;
    return code == ICPRL_OK;
  };
  if (!o.config_file.empty() && !check(icprl_config_load_file(cfg, o.config_file.c_str())))
    return rc;
  for (const std::string& kv : o.sets) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: --set needs key=value, got \"%s\"\n", kv.c_str());
      return ICPRL_ERR_USAGE;
    }
    std::string key = trim(kv.substr(0, eq));
    std::string value = trim(kv.substr(eq + 1));
    if (key.empty()) {
      std::fprintf(stderr, "error: --set needs a key before '=' in \"%s\"\n", kv.c_str());
      return ICPRL_ERR_USAGE;
    }
    if (!check(icprl_config_set(cfg, key.c_str(), value.c_str()))) return rc;
  }
  if (!o.seed.empty() && !check(icprl_config_set(cfg, "seed", o.seed.c_str()))) return rc;
  if (!o.out.empty() && !check(icprl_config_set(cfg, "out", o.out.c_str()))) return rc;
  if (!o.workers.empty() && !check(icprl_config_set(cfg, "workers", o.workers.c_str())))
    return rc;
  if (!o.preset.empty() && !check(icprl_config_set(cfg, "model_preset", o.preset.c_str())))
    return rc;
  if (o.smoke && !check(icprl_config_set(cfg, "smoke", "1"))) return rc;
  return rc;
}

int run_command(const CommonOpts& o, int (*fn)(const icprl_config*)) {
  icprl_config* cfg = icprl_config_new();
  int rc = apply(cfg, o);
  if (rc == ICPRL_OK) {
    rc = fn(cfg);
    if (rc != ICPRL_OK) std::fprintf(stderr, "error: %s\n", icprl_last_error());
  } else if (icprl_last_error()[0] != '\0') {
    std::fprintf(stderr, "error: %s\n", icprl_last_error());
  }
  icprl_config_free(cfg);
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string("icprl ") + icprl_version() +
               ": pretraining and in-context evaluation for preference-based RL"};
  app.require_subcommand(1);

  CommonOpts gen_o, train_o, eval_o, repro_o;
  std::string suite;

  CLI::App* sub_gen = app.add_subcommand("gen", "Generate a synthetic preference corpus");
  add_common(sub_gen, gen_o, true, false, false);
  CLI::App* sub_train = app.add_subcommand("train", "Pretrain a framework on a corpus");
  add_common(sub_train, train_o, true, true, false);
  CLI::App* sub_eval = app.add_subcommand("eval", "Evaluate on held-out tasks");
  add_common(sub_eval, eval_o, true, false, false);
  CLI::App* sub_repro = app.add_subcommand("repro", "Replay a pinned end-to-end suite");
  sub_repro->add_option("suite", suite, "Suite name (see list-suites)")->required();
  add_common(sub_repro, repro_o, false, false, true);
  CLI::App* sub_list = app.add_subcommand("list-suites", "List repro suite names");

  CLI11_PARSE(app, argc, argv);

  if (sub_gen->parsed()) return run_command(gen_o, icprl_gen);
  if (sub_train->parsed()) return run_command(train_o, icprl_train);
  if (sub_eval->parsed()) return run_command(eval_o, icprl_eval);
  if (sub_repro->parsed()) {
    icprl_config* cfg = icprl_config_new();
    int rc = apply(cfg, repro_o);
    if (rc == ICPRL_OK) {
      rc = icprl_repro(suite.c_str(), cfg);
      if (rc != ICPRL_OK) std::fprintf(stderr, "error: %s\n", icprl_last_error());
    } else if (icprl_last_error()[0] != '\0') {
      std::fprintf(stderr, "error: %s\n", icprl_last_error());
    }
    icprl_config_free(cfg);
    return rc;
  }
  if (sub_list->parsed()) {
    char buf[256];
    int rc = icprl_suites(buf, sizeof buf);
    if (rc != ICPRL_OK) {
      std::fprintf(stderr, "error: %s\n", icprl_last_error());
      return rc;
    }
    std::printf("%s\n", buf);
    return 0;
  }
  return ICPRL_ERR_USAGE;
}
