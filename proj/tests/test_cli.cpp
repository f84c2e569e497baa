#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "icprl/cli.hpp"
#include "icprl/prefgen.hpp"

using namespace icprl;
using cli::RunConfig;

namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig tiny_gen_cfg(const std::string& out_dir, const std::string& kind = "iprl") {
  RunConfig c;
  c.set("env", "darkroom");
  c.set("kind", kind);
  c.set("grid", "4");
  c.set("horizon", "8");
  c.set("train_tasks", "3");
  c.set("test_tasks", "2");
  c.set("contexts_per_task", "2");
  c.set("queries_per_context", "2");
  c.set("calib_tasks", "3");
  c.set("calib_rollouts", "8");
  c.set("seed", "7");
  c.set("out", out_dir);
  return c;
}

RunConfig tiny_train_cfg(const std::string& corpus, const std::string& out_dir,
                         const std::string& fw = "dp2t") {
  RunConfig c;
  c.set("framework", fw);
  c.set("corpus", corpus);
  c.set("out", out_dir);
  c.set("epochs", "2");
  c.set("batch_size", "4");
  c.set("patience", "8");
  c.set("seed", "3");
  c.set("workers", "1");
  return c;
}

RunConfig tiny_eval_cfg(const std::string& corpus, const std::string& out_dir,
                        const std::string& fw) {
  RunConfig c;
  c.set("framework", fw);
  c.set("corpus", corpus);
  c.set("out", out_dir);
  c.set("seeds", "2");
  c.set("workers", "1");
  return c;
}

int checkpoint_epochs_done(const std::string& dir) {
  std::string text = slurp(dir + "/checkpoint.json");
  size_t at = text.find("\"epochs_done\":");
  REQUIRE(at != std::string::npos);
  return std::atoi(text.c_str() + at + 14);
}

std::ostringstream devnull;

}  // namespace

TEST_CASE("run configs parse files, layer overrides, and reject bad values") {
  std::string path = "/tmp/icprl_test_cli.config";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << "# comment line\n"
      << "\n"
      << "grid = 6   # trailing comment\n"
      << "  env=darkroom\n"
      << "quality = high\n";
  out.close();

  RunConfig cfg = RunConfig::from_file(path);
  CHECK(cfg.integer("grid", 0) == 6);
  CHECK(cfg.str("env", "") == "darkroom");
  CHECK(cfg.str("quality", "") == "high");
  CHECK(cfg.str("missing", "fallback") == "fallback");

  SUBCASE("overrides win and the hash tracks content") {
    uint64_t h0 = cfg.hash();
    RunConfig ov;
    ov.set("grid", "8");
    cfg.merge(ov);
    CHECK(cfg.integer("grid", 0) == 8);
    CHECK(cfg.hash() != h0);
    CHECK(cfg.canonical() == "env = darkroom\ngrid = 8\nquality = high\n");
  }

  SUBCASE("typed getters reject malformed values") {
    cfg.set("grid", "six");
    CHECK_THROWS_AS((void)cfg.integer("grid", 0), std::invalid_argument);
    cfg.set("lr", "fast");
    CHECK_THROWS_AS((void)cfg.real("lr", 0.0), std::invalid_argument);
    cfg.set("argmax", "yes");
    CHECK_THROWS_AS((void)cfg.flag("argmax", false), std::invalid_argument);
    CHECK_THROWS_AS((void)cfg.required("nope"), std::invalid_argument);
    CHECK_THROWS_AS(cfg.check_keys({"grid"}, "gen"), std::invalid_argument);
  }

  SUBCASE("malformed lines are rejected with their line number") {
    std::ofstream bad("/tmp/icprl_test_cli_bad.config", std::ios::binary | std::ios::trunc);
    bad << "grid = 4\nno equals sign here\n";
    bad.close();
    CHECK_THROWS_WITH_AS(RunConfig::from_file("/tmp/icprl_test_cli_bad.config"),
                         doctest::Contains(":2:"), std::invalid_argument);
  }
}

TEST_CASE("gen writes both splits with seed-stable content hashes") {
  std::string root = "/tmp/icprl_test_cli_gen";
  fs::remove_all(root);

  std::ostringstream log;
  cli::run_gen(tiny_gen_cfg(root + "/a/nested"), log);
  cli::run_gen(tiny_gen_cfg(root + "/b"), devnull);

  CHECK(log.str().find("train.corpus") != std::string::npos);
  CHECK(prefgen::corpus_content_hash(root + "/a/nested/train.corpus") ==
        prefgen::corpus_content_hash(root + "/b/train.corpus"));
  CHECK(prefgen::corpus_content_hash(root + "/a/nested/test.corpus") ==
        prefgen::corpus_content_hash(root + "/b/test.corpus"));

  std::string resolved = slurp(root + "/a/nested/gen.config");
  CHECK(resolved.find("grid = 4\n") != std::string::npos);
  CHECK(resolved.find("quality = high\n") != std::string::npos);  // default made explicit

  SUBCASE("a different seed changes the corpus") {
    RunConfig c = tiny_gen_cfg(root + "/c");
    c.set("seed", "8");
    cli::run_gen(c, devnull);
    CHECK(prefgen::corpus_content_hash(root + "/c/train.corpus") !=
          prefgen::corpus_content_hash(root + "/b/train.corpus"));
  }

  SUBCASE("unknown keys are rejected before anything runs") {
    RunConfig c = tiny_gen_cfg(root + "/d");
    c.set("bogus", "1");
    CHECK_THROWS_WITH_AS(cli::run_gen(c, devnull), doctest::Contains("bogus"),
                         std::invalid_argument);
    CHECK(!fs::exists(root + "/d"));
  }

  SUBCASE("the output root falls back to the environment") {
    setenv("ICPRL_OUT_ROOT", (root + "/envroot").c_str(), 1);
    RunConfig c = tiny_gen_cfg("");
    c.kv.erase("out");
    cli::run_gen(c, devnull);
    bool found = false;
    for (const auto& e : fs::directory_iterator(root + "/envroot"))
      found = found || fs::exists(e.path() / "train.corpus");
    CHECK(found);
    unsetenv("ICPRL_OUT_ROOT");
    RunConfig c2 = tiny_gen_cfg("");
    c2.kv.erase("out");
    CHECK_THROWS_AS(cli::run_gen(c2, devnull), std::invalid_argument);
  }
}

TEST_CASE("train writes checkpoints and resume continues the epoch count") {
  std::string root = "/tmp/icprl_test_cli_train";
  fs::remove_all(root);
  cli::run_gen(tiny_gen_cfg(root + "/corpus"), devnull);
  std::string corpus = root + "/corpus/train.corpus";

  SUBCASE("two-stage resume matches a one-stage run's epoch count") {
    RunConfig one = tiny_train_cfg(corpus, root + "/one");
    one.set("epochs", "4");
    cli::run_train(one, devnull);
    CHECK(checkpoint_epochs_done(root + "/one") == 4);

    cli::run_train(tiny_train_cfg(corpus, root + "/stage_a"), devnull);  // epochs=2
    CHECK(checkpoint_epochs_done(root + "/stage_a") == 2);
    RunConfig stage_b = tiny_train_cfg(corpus, root + "/stage_b");
    stage_b.set("epochs", "4");
    stage_b.set("resume", root + "/stage_a");
    std::ostringstream log;
    cli::run_train(stage_b, log);
    CHECK(checkpoint_epochs_done(root + "/stage_b") == 4);
    CHECK(log.str().find("epochs_done=4") != std::string::npos);
    CHECK(fs::exists(root + "/stage_b/policy.bin"));
  }

  SUBCASE("zero requested epochs still writes a loadable checkpoint") {
    RunConfig c = tiny_train_cfg(corpus, root + "/zero");
    c.set("epochs", "0");
    cli::run_train(c, devnull);
    CHECK(checkpoint_epochs_done(root + "/zero") == 0);
    CHECK(fs::exists(root + "/zero/policy.bin"));
  }

  SUBCASE("resume refuses other frameworks and other corpora") {
    cli::run_train(tiny_train_cfg(corpus, root + "/base"), devnull);
    RunConfig wrong_fw = tiny_train_cfg(corpus, root + "/w1", "icpo");
    wrong_fw.set("resume", root + "/base");
    CHECK_THROWS_WITH_AS(cli::run_train(wrong_fw, devnull), doctest::Contains("framework"),
                         std::invalid_argument);

    RunConfig regen = tiny_gen_cfg(root + "/corpus2");
    regen.set("seed", "8");
    cli::run_gen(regen, devnull);
    RunConfig other = tiny_train_cfg(root + "/corpus2/train.corpus", root + "/w2");
    other.set("resume", root + "/base");
    CHECK_THROWS_WITH_AS(cli::run_train(other, devnull), doctest::Contains("different corpus"),
                         std::invalid_argument);

    RunConfig staged = tiny_train_cfg(corpus, root + "/w3", "icrg");
    staged.set("resume", root + "/base");
    CHECK_THROWS_AS(cli::run_train(staged, devnull), std::invalid_argument);
  }

  SUBCASE("a diverging run aborts with a nonzero outcome instead of saving garbage") {
    RunConfig c = tiny_train_cfg(corpus, root + "/nan");
    c.set("lr", "1e250");
    c.set("epochs", "4");
    CHECK_THROWS_WITH_AS(cli::run_train(c, devnull), doctest::Contains("not finite"),
                         std::runtime_error);
    CHECK(!fs::exists(root + "/nan/checkpoint.json"));
  }
}

TEST_CASE("eval enforces compatibility and regenerates reports byte-identically") {
  std::string root = "/tmp/icprl_test_cli_eval";
  fs::remove_all(root);
  cli::run_gen(tiny_gen_cfg(root + "/corpus"), devnull);
  std::string train_corpus = root + "/corpus/train.corpus";
  std::string test_corpus = root + "/corpus/test.corpus";
  cli::run_train(tiny_train_cfg(train_corpus, root + "/ckpt"), devnull);

  SUBCASE("behavioral baseline needs no checkpoint and reports per-task records") {
    std::ostringstream log;
    cli::run_eval(tiny_eval_cfg(test_corpus, root + "/eb", "behavioral"), log);
    CHECK(log.str().find("behavioral") != std::string::npos);
    std::string records = slurp(root + "/eb/records.jsonl");
    CHECK(std::count(records.begin(), records.end(), '\n') == 4);  // 2 tasks x 2 seeds
    CHECK(fs::exists(root + "/eb/summary.tsv"));
    CHECK(fs::exists(root + "/eb/curves.svg"));
    CHECK(fs::exists(root + "/eb/eval_manifest.json"));
  }

  SUBCASE("report regeneration is idempotent") {
    RunConfig e = tiny_eval_cfg(test_corpus, root + "/em", "dp2t");
    e.set("checkpoint", root + "/ckpt");
    cli::run_eval(e, devnull);
    std::string first_records = slurp(root + "/em/records.jsonl");
    std::string first_summary = slurp(root + "/em/summary.tsv");
    std::string first_curves = slurp(root + "/em/curves.svg");
    cli::run_eval(e, devnull);
    CHECK(slurp(root + "/em/records.jsonl") == first_records);
    CHECK(slurp(root + "/em/summary.tsv") == first_summary);
    CHECK(slurp(root + "/em/curves.svg") == first_curves);
  }

  SUBCASE("evaluating on training tasks is refused") {
    RunConfig e = tiny_eval_cfg(train_corpus, root + "/el", "dp2t");
    e.set("checkpoint", root + "/ckpt");
    CHECK_THROWS_WITH_AS(cli::run_eval(e, devnull), doctest::Contains("training manifest"),
                         std::invalid_argument);
  }

  SUBCASE("checkpoint mismatches are refused") {
    RunConfig wrong_fw = tiny_eval_cfg(test_corpus, root + "/e1", "icpo");
    wrong_fw.set("checkpoint", root + "/ckpt");
    CHECK_THROWS_WITH_AS(cli::run_eval(wrong_fw, devnull), doctest::Contains("framework"),
                         std::invalid_argument);

    RunConfig other_gen = tiny_gen_cfg(root + "/corpus5");
    other_gen.set("grid", "5");
    cli::run_gen(other_gen, devnull);
    RunConfig family = tiny_eval_cfg(root + "/corpus5/test.corpus", root + "/e2", "dp2t");
    family.set("checkpoint", root + "/ckpt");
    CHECK_THROWS_WITH_AS(cli::run_eval(family, devnull), doctest::Contains("families"),
                         std::invalid_argument);

    RunConfig missing = tiny_eval_cfg(test_corpus, root + "/e3", "dp2t");
    missing.set("checkpoint", root + "/nonexistent");
    CHECK_THROWS_AS(cli::run_eval(missing, devnull), std::runtime_error);

    RunConfig noisy = tiny_eval_cfg(test_corpus, root + "/e4", "behavioral");
    noisy.set("checkpoint", root + "/ckpt");
    CHECK_THROWS_AS(cli::run_eval(noisy, devnull), std::invalid_argument);

    RunConfig unknown = tiny_eval_cfg(test_corpus, root + "/e5", "novel");
    CHECK_THROWS_AS(cli::run_eval(unknown, devnull), std::invalid_argument);
  }

  SUBCASE("max_tasks trims the task list") {
    RunConfig e = tiny_eval_cfg(test_corpus, root + "/et", "behavioral");
    e.set("max_tasks", "1");
    e.set("seeds", "3");
    cli::run_eval(e, devnull);
    std::string records = slurp(root + "/et/records.jsonl");
    CHECK(std::count(records.begin(), records.end(), '\n') == 3);
  }
}

TEST_CASE("repro suites rerun byte-identically in smoke mode") {
  CHECK(cli::suite_names() ==
        std::vector<std::string>{"darkroom_iprl", "darkroom_tprl", "pointreach_iprl", "dueling"});
  RunConfig bad;
  CHECK_THROWS_AS(cli::run_repro("unknown_suite", bad, devnull), std::invalid_argument);
  RunConfig bad_key;
  bad_key.set("epochs", "1");
  CHECK_THROWS_AS(cli::run_repro("darkroom_iprl", bad_key, devnull), std::invalid_argument);

  for (const std::string& suite : cli::suite_names()) {
    CAPTURE(suite);
    std::string root = "/tmp/icprl_test_cli_repro_" + suite;
    fs::remove_all(root);
    RunConfig ov;
    ov.set("out", root);
    ov.set("smoke", "1");
    ov.set("workers", "1");
    std::ostringstream log;
    cli::run_repro(suite, ov, log);
    CHECK(log.str().find("report at") != std::string::npos);
    std::string first_summary = slurp(root + "/report/summary.tsv");
    std::string first_curves = slurp(root + "/report/curves.svg");
    CHECK(first_summary.find("framework") != std::string::npos);

    fs::remove_all(root);
    cli::run_repro(suite, ov, devnull);
    CHECK(slurp(root + "/report/summary.tsv") == first_summary);
    CHECK(slurp(root + "/report/curves.svg") == first_curves);
  }
}
