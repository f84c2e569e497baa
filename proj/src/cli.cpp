#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "icprl/cli.hpp"
#include "icprl/deploy.hpp"

namespace icprl::cli {

using nlohmann::json;

namespace fs = std::filesystem;

namespace {

constexpr int kArtifactFormatVersion = 1;

// Usage-class problems (bad keys or values, incompatible combinations) throw
// invalid_argument so callers can map them to a distinct exit code; IO and
// training failures stay runtime_error via fail/require.
[[noreturn]] void usage_fail(const std::string& msg) { throw std::invalid_argument(msg); }

void usage_require(bool cond, const std::string& msg) {
  if (!cond) usage_fail(msg);
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string hex16(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
  return std::string(buf);
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out.good()) fail("cli: cannot write " + path);
  out.write(content.data(), (std::streamsize)content.size());
  out.flush();
  if (!out.good()) fail("cli: write failed for " + path);
}

json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) fail("cli: cannot open " + path);
  json j;
  in >> j;
  return j;
}

// The output directory: explicit key, else ICPRL_OUT_ROOT/<name>.
std::string resolve_out(RunConfig& cfg, const std::string& name) {
  if (!cfg.has("out")) {
    const char* root = std::getenv("ICPRL_OUT_ROOT");
    usage_require(root != nullptr && *root != '\0',
                  "cli: set out=<dir> or the ICPRL_OUT_ROOT environment variable");
    cfg.set("out", std::string(root) + "/" + name);
  }
  std::string out = cfg.required("out");
  fs::create_directories(out);
  return out;
}

void fill_default(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (!cfg.has(key)) cfg.set(key, value);
}

std::string fmt_num(long v) { return std::to_string(v); }

std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf);
}

// ---- model config (de)serialization for checkpoint sidecars ----

json model_config_json(const model::ModelConfig& mc) {
  return {{"n_layers", mc.n_layers},   {"d_model", mc.d_model},
          {"n_heads", mc.n_heads},     {"max_seq_len", mc.max_seq_len},
          {"feat_dim", mc.feat_dim},   {"out_dim", mc.out_dim},
          {"head", model::head_kind_name(mc.head)}, {"dropout", mc.dropout}};
}

model::ModelConfig model_config_from_json(const json& j) {
  model::ModelConfig mc;
  mc.n_layers = j.at("n_layers").get<int>();
  mc.d_model = j.at("d_model").get<int>();
  mc.n_heads = j.at("n_heads").get<int>();
  mc.max_seq_len = j.at("max_seq_len").get<int>();
  mc.feat_dim = j.at("feat_dim").get<int>();
  mc.out_dim = j.at("out_dim").get<int>();
  mc.head = model::head_kind_from(j.at("head").get<std::string>());
  mc.dropout = j.at("dropout").get<double>();
  mc.validate();
  return mc;
}

json stats_json(const frameworks::TrainStats& st) {
  return {{"train_loss", st.train_loss}, {"val_loss", st.val_loss}, {"best_epoch", st.best_epoch}};
}

// ---- checkpoints ----

struct Checkpoint {
  json meta;
  std::unique_ptr<model::SeqModel> policy, reward, q, v;
};

std::unique_ptr<model::SeqModel> load_model_if_present(const json& models, const std::string& name,
                                                       const std::string& dir) {
  if (!models.contains(name)) return nullptr;
  auto m = std::make_unique<model::SeqModel>(model_config_from_json(models.at(name)), 0);
  m->load(dir + "/" + name + ".bin");
  return m;
}

Checkpoint load_checkpoint(const std::string& dir) {
  Checkpoint ck;
  ck.meta = read_json(dir + "/checkpoint.json");
  require(ck.meta.at("format_version").get<int>() == kArtifactFormatVersion,
          "cli: unsupported checkpoint format in " + dir);
  const json& models = ck.meta.at("models");
  ck.policy = load_model_if_present(models, "policy", dir);
  ck.reward = load_model_if_present(models, "reward", dir);
  ck.q = load_model_if_present(models, "q", dir);
  ck.v = load_model_if_present(models, "v", dir);
  return ck;
}

// ---- allowed keys per command ----

const std::set<std::string>& gen_keys() {
  static const std::set<std::string> k = {
      "env",  "kind",    "quality", "train_tasks",     "test_tasks",
      "contexts_per_task", "queries_per_context", "grid", "horizon", "arms",
      "dim",  "obs_noise_var", "calib_tasks", "calib_rollouts", "seed", "out"};
  return k;
}

const std::set<std::string>& train_keys() {
  static const std::set<std::string> k = {
      "framework", "corpus", "out",     "model_preset", "value_preset", "beta",
      "lambda",    "scale_preferred",   "gamma",        "eta",          "clip",
      "epochs",    "batch_size", "lr",  "patience",     "seed",         "workers",
      "dropout",   "resume"};
  return k;
}

const std::set<std::string>& eval_keys() {
  static const std::set<std::string> k = {"corpus",  "checkpoint", "framework", "seeds",
                                          "seed",    "argmax",     "warm_start", "max_tasks",
                                          "out",     "workers",    "run_id"};
  return k;
}

const std::set<std::string>& repro_keys() {
  static const std::set<std::string> k = {"out", "workers", "seed", "smoke"};
  return k;
}

}  // namespace

// ---- RunConfig ----

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) fail("cli: cannot open config file " + path);
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    usage_require(eq != std::string::npos,
                  "cli: " + path + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    usage_require(!key.empty(), "cli: " + path + ":" + std::to_string(lineno) + ": empty key");
    cfg.set(key, value);
  }
  return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) { kv[key] = value; }

void RunConfig::merge(const RunConfig& overrides) {
  for (const auto& [k, v] : overrides.kv) kv[k] = v;
}

std::string RunConfig::str(const std::string& key, const std::string& fallback) const {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : it->second;
}

std::string RunConfig::required(const std::string& key) const {
  auto it = kv.find(key);
  if (it == kv.end() || it->second.empty())
    throw std::invalid_argument("cli: missing required key " + key);
  return it->second;
}

long RunConfig::integer(const std::string& key, long fallback) const {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(it->second, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != it->second.size())
    throw std::invalid_argument("cli: key " + key + " needs an integer, got \"" + it->second +
                                "\"");
  return v;
}

double RunConfig::real(const std::string& key, double fallback) const {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(it->second, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != it->second.size())
    throw std::invalid_argument("cli: key " + key + " needs a number, got \"" + it->second + "\"");
  return v;
}

bool RunConfig::flag(const std::string& key, bool fallback) const {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  if (it->second == "0") return false;
  if (it->second == "1") return true;
  throw std::invalid_argument("cli: key " + key + " needs 0 or 1, got \"" + it->second + "\"");
}

uint64_t RunConfig::seed(const std::string& key, uint64_t fallback) const {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  size_t pos = 0;
  uint64_t v = 0;
  try {
    v = std::stoull(it->second, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != it->second.size())
    throw std::invalid_argument("cli: key " + key + " needs an unsigned integer, got \"" +
                                it->second + "\"");
  return v;
}

std::string RunConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : kv) {
    out += k;
    out += " = ";
    out += v;
    out += '\n';
  }
  return out;
}

void RunConfig::check_keys(const std::set<std::string>& allowed, const std::string& command) const {
  for (const auto& [k, v] : kv)
    if (allowed.count(k) == 0)
      throw std::invalid_argument("cli: unknown key \"" + k + "\" for " + command);
}

void RunConfig::write(const std::string& path) const { write_text(path, canonical()); }

int default_workers() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : (int)n;
}

// ---- gen ----

void run_gen(RunConfig cfg, std::ostream& out) {
  cfg.check_keys(gen_keys(), "gen");
  prefgen::GenConfig gc;
  fill_default(cfg, "env", gc.env.empty() ? "darkroom" : gc.env);
  fill_default(cfg, "kind", "iprl");
  fill_default(cfg, "quality", gc.quality);
  fill_default(cfg, "train_tasks", fmt_num(gc.n_train));
  fill_default(cfg, "test_tasks", fmt_num(gc.n_test));
  fill_default(cfg, "contexts_per_task", fmt_num(gc.contexts_per_task));
  fill_default(cfg, "queries_per_context", fmt_num(gc.queries_per_context));
  fill_default(cfg, "grid", fmt_num(gc.grid));
  fill_default(cfg, "horizon", fmt_num(gc.horizon));
  fill_default(cfg, "arms", fmt_num(gc.arms));
  fill_default(cfg, "dim", fmt_num(gc.dim));
  fill_default(cfg, "obs_noise_var", fmt_real(gc.obs_noise_var));
  fill_default(cfg, "calib_tasks", fmt_num(gc.calib_tasks));
  fill_default(cfg, "calib_rollouts", fmt_num(gc.calib_rollouts));
  fill_default(cfg, "seed", fmt_num((long)gc.seed));

  gc.env = cfg.required("env");
  gc.kind = cfg.required("kind");
  gc.quality = cfg.required("quality");
  gc.n_train = (int)cfg.integer("train_tasks", gc.n_train);
  gc.n_test = (int)cfg.integer("test_tasks", gc.n_test);
  gc.contexts_per_task = (int)cfg.integer("contexts_per_task", gc.contexts_per_task);
  gc.queries_per_context = (int)cfg.integer("queries_per_context", gc.queries_per_context);
  gc.grid = (int)cfg.integer("grid", gc.grid);
  gc.horizon = (int)cfg.integer("horizon", gc.horizon);
  gc.arms = (int)cfg.integer("arms", gc.arms);
  gc.dim = (int)cfg.integer("dim", gc.dim);
  gc.obs_noise_var = cfg.real("obs_noise_var", gc.obs_noise_var);
  gc.calib_tasks = (int)cfg.integer("calib_tasks", gc.calib_tasks);
  gc.calib_rollouts = (int)cfg.integer("calib_rollouts", gc.calib_rollouts);
  gc.seed = cfg.seed("seed", gc.seed);

  std::string dir = resolve_out(cfg, "gen-" + hex16(cfg.hash()).substr(8));
  prefgen::GenResult r = prefgen::generate(gc);

  for (const auto* split : {&r.train, &r.test}) {
    std::string path = dir + "/" + split->manifest.split + ".corpus";
    prefgen::save_corpus(path, *split);
    size_t bundles = split->iprl.size() + split->tprl.size() + split->reward.size();
    out << "gen: wrote " << path << " (tasks=" << split->manifest.task_ids.size()
        << ", bundles=" << bundles << ", config=" << hex16(split->manifest.config_hash())
        << ", family=" << hex16(split->manifest.family_hash())
        << ", content=" << hex16(prefgen::corpus_content_hash(path)) << ")\n";
  }
  cfg.write(dir + "/gen.config");
}

// ---- train ----

void run_train(RunConfig cfg, std::ostream& out) {
  cfg.check_keys(train_keys(), "train");
  fill_default(cfg, "model_preset", "desk");
  fill_default(cfg, "value_preset", "desk");
  fill_default(cfg, "beta", "1");
  fill_default(cfg, "lambda", "0.5");
  fill_default(cfg, "scale_preferred", "0");
  fill_default(cfg, "gamma", "0.99");
  fill_default(cfg, "eta", "1");
  fill_default(cfg, "clip", "20");
  fill_default(cfg, "epochs", "20");
  fill_default(cfg, "batch_size", "32");
  fill_default(cfg, "lr", "0.0003");
  fill_default(cfg, "patience", "5");
  fill_default(cfg, "seed", "1");
  fill_default(cfg, "workers", fmt_num(default_workers()));
  fill_default(cfg, "dropout", "0");

  frameworks::FrameworkConfig fc;
  fc.framework = cfg.required("framework");
  fc.model_preset = cfg.required("model_preset");
  fc.value_preset = cfg.required("value_preset");
  fc.icpo.beta = cfg.real("beta", 1.0);
  fc.icpo.lambda = cfg.real("lambda", 0.5);
  fc.icpo.scale_preferred = cfg.flag("scale_preferred", false);
  fc.dit.gamma = cfg.real("gamma", 0.99);
  fc.dit.eta = cfg.real("eta", 1.0);
  fc.dit.clip = cfg.real("clip", 20.0);
  fc.train.epochs = (int)cfg.integer("epochs", 20);
  fc.train.batch_size = (int)cfg.integer("batch_size", 32);
  fc.train.lr = cfg.real("lr", 3e-4);
  fc.train.patience = (int)cfg.integer("patience", 5);
  fc.train.seed = cfg.seed("seed", 1);
  fc.train.workers = (int)cfg.integer("workers", default_workers());
  fc.dropout = cfg.real("dropout", 0.0);

  std::string corpus_path = cfg.required("corpus");
  prefgen::Corpus corpus = prefgen::load_corpus(corpus_path);
  const prefgen::CorpusManifest& man = corpus.manifest;

  int epochs_prior = 0;
  int epochs_requested = fc.train.epochs;
  if (cfg.has("resume")) {
    std::string from = cfg.required("resume");
    usage_require(fc.framework != "icrg",
                  "cli: the staged reward-generation pipeline does not support resume");
    json prev = read_json(from + "/checkpoint.json");
    usage_require(prev.at("framework").get<std::string>() == fc.framework,
                  "cli: resume checkpoint was trained with framework " +
                      prev.at("framework").get<std::string>());
    usage_require(prev.at("corpus").at("config").get<std::string>() == hex16(man.config_hash()),
                  "cli: resume checkpoint was trained on a different corpus");
    epochs_prior = prev.at("epochs_done").get<int>();
    fc.resume_from = from;
    fc.train.epochs = std::max(0, epochs_requested - epochs_prior);
  }

  std::string dir = resolve_out(cfg, "train-" + fc.framework);
  frameworks::TrainedBundle bundle = frameworks::train_framework(corpus, fc);

  json models = json::object();
  json stats = json::object();
  auto save_part = [&](const char* name, const model::SeqModel* m,
                       const frameworks::TrainStats* st) {
    if (m == nullptr) return;
    m->save(dir + "/" + name + ".bin");
    models[name] = model_config_json(m->config());
    if (st != nullptr) stats[name] = stats_json(*st);
  };
  save_part("policy", bundle.policy.get(), &bundle.policy_stats);
  save_part("reward", bundle.reward.get(), &bundle.reward_stats);
  save_part("q", bundle.q.get(), &bundle.value_stats);
  save_part("v", bundle.v.get(), nullptr);  // fitted jointly with q

  int epochs_done = epochs_prior + (int)bundle.policy_stats.train_loss.size();
  json ck = {{"format_version", kArtifactFormatVersion},
             {"framework", fc.framework},
             {"run_config_hash", hex16(cfg.hash())},
             {"seed", fc.train.seed},
             {"epochs_done", epochs_done},
             {"corpus",
              {{"config", hex16(man.config_hash())},
               {"family", hex16(man.family_hash())},
               {"content", hex16(prefgen::corpus_content_hash(corpus_path))},
               {"kind", man.kind},
               {"env", man.env},
               {"quality", man.quality},
               {"split", man.split},
               {"task_ids", man.task_ids}}},
             {"models", models},
             {"stats", stats}};
  write_text(dir + "/checkpoint.json", ck.dump(2) + "\n");
  cfg.write(dir + "/train.config");

  out << "train: " << fc.framework << " on " << man.env << "/" << man.kind << " ("
      << man.task_ids.size() << " tasks), epochs_done=" << epochs_done;
  if (!bundle.policy_stats.train_loss.empty())
    out << ", train_loss=" << format_double(bundle.policy_stats.train_loss.back());
  if (!bundle.policy_stats.val_loss.empty()) {
    double best = *std::min_element(bundle.policy_stats.val_loss.begin(),
                                    bundle.policy_stats.val_loss.end());
    out << ", best_val_loss=" << format_double(best);
  }
  out << "\n" << "train: wrote " << dir << "/checkpoint.json\n";
}

// ---- eval ----

namespace {

// Bundle indexes per task id, in file order.
template <typename Bundles>
std::map<int, std::vector<int>> index_by_task(const Bundles& bs) {
  std::map<int, std::vector<int>> by;
  for (size_t i = 0; i < bs.size(); ++i) by[bs[i].task_id].push_back((int)i);
  return by;
}

const std::vector<int>& task_bundles(const std::map<int, std::vector<int>>& by, int task_id) {
  auto it = by.find(task_id);
  require(it != by.end() && !it->second.empty(),
          "eval: test corpus has no bundles for task " + std::to_string(task_id));
  return it->second;
}

}  // namespace

void run_eval(RunConfig cfg, std::ostream& out) {
  cfg.check_keys(eval_keys(), "eval");
  fill_default(cfg, "seeds", "5");
  fill_default(cfg, "seed", "1");
  fill_default(cfg, "argmax", "0");
  fill_default(cfg, "warm_start", "0");
  fill_default(cfg, "max_tasks", "0");
  fill_default(cfg, "workers", fmt_num(default_workers()));

  std::string fw = cfg.required("framework");
  fill_default(cfg, "run_id", fw);
  std::string run_id = cfg.required("run_id");
  int n_seeds = (int)cfg.integer("seeds", 5);
  usage_require(n_seeds > 0, "eval: seeds must be positive");
  uint64_t base_seed = cfg.seed("seed", 1);
  bool argmax = cfg.flag("argmax", false);
  bool warm_start = cfg.flag("warm_start", false);
  int max_tasks = (int)cfg.integer("max_tasks", 0);
  int workers = (int)cfg.integer("workers", default_workers());
  usage_require(workers > 0, "eval: workers must be positive");

  std::string corpus_path = cfg.required("corpus");
  prefgen::Corpus test = prefgen::load_corpus(corpus_path);
  const prefgen::CorpusManifest& m = test.manifest;

  static const std::set<std::string> known_fw = {"dpt",  "dp2t",    "icpo", "icrg",
                                                 "dts",  "uniform", "behavioral"};
  usage_require(known_fw.count(fw) != 0, "eval: unknown framework " + fw);
  bool baseline = fw == "behavioral" || fw == "uniform" || fw == "dts";
  usage_require(!baseline || !cfg.has("checkpoint"), "eval: " + fw + " takes no checkpoint");
  if (fw == "behavioral")
    usage_require(m.env != "bandit", "eval: use uniform or dts as the dueling baseline");
  if (fw == "uniform" || fw == "dts")
    usage_require(m.env == "bandit", "eval: " + fw + " is a dueling-bandit baseline");
  if (fw == "dpt") usage_require(m.kind == "reward", "eval: dpt conditions on reward contexts");
  if (fw == "dp2t")
    usage_require(m.kind == "iprl" || m.kind == "tprl", "eval: dp2t needs a preference corpus");
  if (fw == "icpo") usage_require(m.kind == "iprl", "eval: icpo needs step-preference contexts");
  if (fw == "icrg")
    usage_require(m.kind == "tprl" && m.env == "darkroom", "eval: icrg needs trajectory pairs");

  Checkpoint ck;
  if (!baseline) {
    std::string ck_dir = cfg.required("checkpoint");
    ck = load_checkpoint(ck_dir);
    usage_require(ck.meta.at("framework").get<std::string>() == fw,
                  "eval: checkpoint was trained with framework " +
                      ck.meta.at("framework").get<std::string>());
    usage_require(ck.meta.at("corpus").at("family").get<std::string>() == hex16(m.family_hash()),
                  "eval: checkpoint and corpus come from different families");
    std::set<int> train_ids(ck.meta.at("corpus").at("task_ids").begin(),
                            ck.meta.at("corpus").at("task_ids").end());
    for (int id : m.task_ids)
      usage_require(train_ids.count(id) == 0,
                    "eval: task " + std::to_string(id) + " appears in the training manifest");
    require(ck.policy != nullptr, "eval: checkpoint has no policy model");
    if (fw == "icrg") require(ck.reward != nullptr, "eval: checkpoint has no reward model");
  }

  int n_tasks = (int)m.task_ids.size();
  if (max_tasks > 0) n_tasks = std::min(n_tasks, max_tasks);
  usage_require(n_tasks > 0, "eval: no test tasks");

  auto iprl_by = index_by_task(test.iprl);
  auto tprl_by = index_by_task(test.tprl);
  auto reward_by = index_by_task(test.reward);
  model::Codec codec = frameworks::codec_for(m);

  auto rollout_spec = [&](int ti, int si) {
    deploy::RolloutSpec rs;
    rs.run_id = run_id;
    rs.framework = fw;
    rs.quality = m.quality;
    rs.task_id = m.task_ids[ti];
    rs.seed = derive_seed(base_seed, "eval",
                          (uint64_t)m.task_ids[ti] * 1000003ull + (uint64_t)si);
    return rs;
  };

  auto eval_one = [&](int ti, int si) -> deploy::MetricsRecord {
    deploy::RolloutSpec rs = rollout_spec(ti, si);
    int task_id = m.task_ids[ti];
    if (m.env == "bandit") {
      envs::BanditTask task = prefgen::manifest_bandit_task(m, ti);
      if (fw == "uniform") {
        deploy::UniformPicker picker(m.arms);
        return deploy_dueling(picker, task, m.horizon, rs);
      }
      if (fw == "dts") {
        baselines::DtsState st = baselines::DtsState::make(m.arms);
        if (warm_start) {
          const auto& bs = task_bundles(iprl_by, task_id);
          baselines::dts_warm_start(st, test.iprl[bs[si % (int)bs.size()]].ctx);
        }
        deploy::DtsPicker picker(std::move(st));
        return deploy_dueling(picker, task, m.horizon, rs);
      }
      IprlContext warm;
      if (warm_start) {
        const auto& bs = task_bundles(iprl_by, task_id);
        warm = test.iprl[bs[si % (int)bs.size()]].ctx;
      }
      deploy::IcpoPicker picker(*ck.policy, m.arms, std::move(warm));
      return deploy_dueling(picker, task, m.horizon, rs);
    }

    if (m.env == "darkroom") {
      envs::DarkRoom task = prefgen::manifest_darkroom(m, ti);
      if (fw == "behavioral") {
        envs::DarkRoomOracle oracle(task);
        double p = m.p;
        deploy::FunctionPolicy policy([&oracle, p](int h, const std::vector<double>& s, Rng& rng) {
          return std::vector<double>{(double)prefgen::mixed_policy_action(oracle, s, h, p, rng)};
        });
        return deploy_iprl(policy, task, rs);
      }
      if (fw == "dpt") {
        const auto& bs = task_bundles(reward_by, task_id);
        deploy::PolicyOnRewardContext policy(*ck.policy, codec,
                                             test.reward[bs[si % (int)bs.size()]].ctx, argmax);
        return deploy_iprl(policy, task, rs);
      }
      if (fw == "icrg") {
        const auto& bs = task_bundles(tprl_by, task_id);
        const TrajPairRecord& pair = test.tprl[bs[si % (int)bs.size()]].pair;
        return deploy_icrg(*ck.reward, *ck.policy, codec, pair, pair.preferred(), task, rs,
                           argmax);
      }
      if (m.kind == "tprl") {  // dp2t on trajectory pairs
        const auto& bs = task_bundles(tprl_by, task_id);
        deploy::PolicyOnTprlContext policy(*ck.policy, codec,
                                           test.tprl[bs[si % (int)bs.size()]].pair, argmax);
        return deploy_iprl(policy, task, rs);
      }
      const auto& bs = task_bundles(iprl_by, task_id);
      deploy::PolicyOnIprlContext policy(*ck.policy, codec,
                                         test.iprl[bs[si % (int)bs.size()]].ctx, argmax);
      return deploy_iprl(policy, task, rs);
    }

    require(m.env == "pointreach", "eval: unknown env " + m.env);
    envs::PointReach task = prefgen::manifest_pointreach(m, ti);
    if (fw == "behavioral") {
      envs::PointController weak{m.weak_gain, m.noise_sd};
      deploy::FunctionPolicy policy(
          [&task, weak](int, const std::vector<double>& obs, Rng& rng) {
            std::vector<double> pos(obs.begin(), obs.begin() + 3);
            return envs::controller_action(task, weak, pos, rng);
          });
      return deploy_iprl(policy, task, rs);
    }
    usage_require(fw == "dp2t" || fw == "icpo", "eval: " + fw + " is not available for pointreach");
    const auto& bs = task_bundles(iprl_by, task_id);
    deploy::PolicyOnIprlContext policy(*ck.policy, codec,
                                       test.iprl[bs[si % (int)bs.size()]].ctx, argmax);
    return deploy_iprl(policy, task, rs);
  };

  std::vector<deploy::MetricsRecord> records((size_t)n_tasks * (size_t)n_seeds);
  WorkerPool(workers).run((int)records.size(), [&](int j) {
    records[j] = eval_one(j / n_seeds, j % n_seeds);
  });

  std::string dir = resolve_out(cfg, "eval-" + fw);
  deploy::save_metrics(records, dir + "/records.jsonl");
  deploy::aggregate_and_report(records, dir);
  cfg.write(dir + "/eval.config");
  json manifest = {{"format_version", kArtifactFormatVersion},
                   {"run_config_hash", hex16(cfg.hash())},
                   {"seed", base_seed},
                   {"corpus_config", hex16(m.config_hash())},
                   {"corpus_family", hex16(m.family_hash())},
                   {"checkpoint", cfg.str("checkpoint", "")},
                   {"records", records.size()}};
  write_text(dir + "/eval_manifest.json", manifest.dump(2) + "\n");

  for (const deploy::GroupSummary& g : deploy::summarize(records)) {
    out << "eval: " << g.env << "/" << g.kind << " " << g.framework;
    if (!g.quality.empty()) out << " quality=" << g.quality;
    out << " records=" << g.records << " mean_total=" << format_double(g.mean_total)
        << " ci95=" << format_double(g.ci95) << "\n";
  }
  out << "eval: wrote " << dir << "/records.jsonl\n";
}

// ---- repro suites ----

namespace {

struct Plan {
  std::vector<std::pair<std::string, RunConfig>> stages;  // command, config
  std::vector<std::string> eval_dirs;                     // inputs to the combined report
};

RunConfig base_gen(const std::string& out_dir, uint64_t seed) {
  RunConfig c;
  c.set("out", out_dir);
  c.set("seed", std::to_string(seed));
  return c;
}

RunConfig base_train(const std::string& fw, const std::string& corpus, const std::string& out_dir,
                     uint64_t seed, int workers) {
  RunConfig c;
  c.set("framework", fw);
  c.set("corpus", corpus);
  c.set("out", out_dir);
  c.set("seed", std::to_string(seed));
  c.set("workers", std::to_string(workers));
  return c;
}

RunConfig base_eval(const std::string& fw, const std::string& corpus, const std::string& out_dir,
                    uint64_t seed, int workers) {
  RunConfig c;
  c.set("framework", fw);
  c.set("corpus", corpus);
  c.set("out", out_dir);
  c.set("seed", std::to_string(seed));
  c.set("workers", std::to_string(workers));
  return c;
}

Plan make_plan(const std::string& suite, const std::string& root, uint64_t base, bool smoke,
               int workers) {
  Plan plan;
  auto gen_seed = [&](uint64_t i) { return derive_seed(base, "gen", i); };
  auto train_seed = [&](uint64_t i) { return derive_seed(base, "train", i); };
  auto eval_seed = [&](uint64_t i) { return derive_seed(base, "eval", i); };
  auto add = [&](const std::string& cmd, RunConfig c) { plan.stages.emplace_back(cmd, std::move(c)); };
  auto add_eval = [&](RunConfig c) {
    plan.eval_dirs.push_back(c.required("out"));
    add("eval", std::move(c));
  };

  if (suite == "darkroom_iprl" || suite == "darkroom_tprl") {
    bool tprl = suite == "darkroom_tprl";
    std::string corpus_dir = root + "/corpus";
    RunConfig g = base_gen(corpus_dir, gen_seed(0));
    g.set("env", "darkroom");
    g.set("kind", tprl ? "tprl" : "iprl");
    g.set("quality", tprl ? "medium" : "high");
    g.set("grid", smoke ? "4" : "6");
    g.set("horizon", smoke ? "8" : "30");
    g.set("train_tasks", smoke ? "4" : "40");
    g.set("test_tasks", smoke ? "2" : "10");
    g.set("contexts_per_task", smoke ? "3" : (tprl ? "200" : "100"));
    g.set("queries_per_context", smoke ? "2" : "4");
    if (smoke) {
      g.set("calib_tasks", "4");
      g.set("calib_rollouts", "10");
    }
    add("gen", g);
    std::string train_corpus = corpus_dir + "/train.corpus";
    std::string test_corpus = corpus_dir + "/test.corpus";
    std::string epochs = smoke ? "2" : (tprl ? "8" : "12");

    std::vector<std::string> fws = tprl ? std::vector<std::string>{"icrg", "dp2t"}
                                        : std::vector<std::string>{"dp2t", "icpo"};
    uint64_t ti = 0;
    for (const std::string& fw : fws) {
      RunConfig t = base_train(fw, train_corpus, root + "/ckpt_" + fw, train_seed(ti++), workers);
      t.set("epochs", epochs);
      if (smoke) t.set("batch_size", "8");
      add("train", t);
    }
    if (!tprl) {
      std::string rdir = root + "/corpus_reward";
      RunConfig gr = g;
      gr.set("kind", "reward");
      gr.set("out", rdir);
      add("gen", gr);
      RunConfig t = base_train("dpt", rdir + "/train.corpus", root + "/ckpt_dpt", train_seed(ti++),
                               workers);
      t.set("epochs", epochs);
      if (smoke) t.set("batch_size", "8");
      add("train", t);
    }

    std::string seeds = smoke ? "2" : "5";
    uint64_t ei = 0;
    {
      RunConfig e = base_eval("behavioral", test_corpus, root + "/eval_behavioral", eval_seed(ei++),
                              workers);
      e.set("seeds", seeds);
      add_eval(e);
    }
    for (const std::string& fw : fws) {
      RunConfig e = base_eval(fw, test_corpus, root + "/eval_" + fw, eval_seed(ei++), workers);
      e.set("checkpoint", root + "/ckpt_" + fw);
      e.set("seeds", seeds);
      add_eval(e);
    }
    if (!tprl) {
      RunConfig e = base_eval("dpt", root + "/corpus_reward/test.corpus", root + "/eval_dpt",
                              eval_seed(ei++), workers);
      e.set("checkpoint", root + "/ckpt_dpt");
      e.set("seeds", seeds);
      add_eval(e);
    }
    return plan;
  }

  if (suite == "pointreach_iprl") {
    std::string corpus_dir = root + "/corpus";
    RunConfig g = base_gen(corpus_dir, gen_seed(0));
    g.set("env", "pointreach");
    g.set("kind", "iprl");
    g.set("quality", "high");
    g.set("horizon", smoke ? "10" : "40");
    g.set("train_tasks", smoke ? "3" : "20");
    g.set("test_tasks", smoke ? "2" : "5");
    g.set("contexts_per_task", smoke ? "2" : "40");
    g.set("queries_per_context", smoke ? "2" : "4");
    if (smoke) {
      g.set("calib_tasks", "3");
      g.set("calib_rollouts", "8");
    }
    add("gen", g);
    std::string epochs = smoke ? "1" : "10";
    uint64_t ti = 0, ei = 0;
    for (const std::string& fw : {"dp2t", "icpo"}) {
      RunConfig t = base_train(fw, corpus_dir + "/train.corpus", root + "/ckpt_" + fw,
                               train_seed(ti++), workers);
      t.set("epochs", epochs);
      if (smoke) t.set("batch_size", "8");
      add("train", t);
    }
    std::string seeds = smoke ? "2" : "5";
    RunConfig eb = base_eval("behavioral", corpus_dir + "/test.corpus", root + "/eval_behavioral",
                             eval_seed(ei++), workers);
    eb.set("seeds", seeds);
    add_eval(eb);
    for (const std::string& fw : {"dp2t", "icpo"}) {
      RunConfig e = base_eval(fw, corpus_dir + "/test.corpus", root + "/eval_" + fw, eval_seed(ei++),
                              workers);
      e.set("checkpoint", root + "/ckpt_" + fw);
      e.set("seeds", seeds);
      add_eval(e);
    }
    return plan;
  }

  if (suite == "dueling") {
    std::string corpus_dir = root + "/corpus";
    RunConfig g = base_gen(corpus_dir, gen_seed(0));
    g.set("env", "bandit");
    g.set("kind", "iprl");
    g.set("arms", smoke ? "4" : "10");
    g.set("dim", smoke ? "3" : "5");
    g.set("obs_noise_var", "0.3");
    g.set("horizon", smoke ? "12" : "200");
    g.set("train_tasks", smoke ? "20" : "5000");
    g.set("test_tasks", smoke ? "3" : "50");
    g.set("contexts_per_task", "1");
    add("gen", g);
    RunConfig t = base_train("icpo", corpus_dir + "/train.corpus", root + "/ckpt_icpo",
                             train_seed(0), workers);
    t.set("epochs", smoke ? "2" : "5");
    t.set("batch_size", smoke ? "8" : "64");
    t.set("patience", "2");
    add("train", t);
    std::string seeds = smoke ? "2" : "5";
    uint64_t ei = 0;
    RunConfig e = base_eval("icpo", corpus_dir + "/test.corpus", root + "/eval_icpo", eval_seed(ei++),
                            workers);
    e.set("checkpoint", root + "/ckpt_icpo");
    e.set("seeds", seeds);
    add_eval(e);
    for (const std::string& fw : {"dts", "uniform"}) {
      RunConfig b = base_eval(fw, corpus_dir + "/test.corpus", root + "/eval_" + fw, eval_seed(ei++),
                              workers);
      b.set("seeds", seeds);
      add_eval(b);
    }
    return plan;
  }

  usage_fail("repro: unknown suite " + suite + " (see list-suites)");
}

uint64_t suite_base_seed(const std::string& suite) {
  if (suite == "darkroom_iprl") return 101;
  if (suite == "darkroom_tprl") return 111;
  if (suite == "pointreach_iprl") return 121;
  if (suite == "dueling") return 131;
  usage_fail("repro: unknown suite " + suite + " (see list-suites)");
}

}  // namespace

std::vector<std::string> suite_names() {
  return {"darkroom_iprl", "darkroom_tprl", "pointreach_iprl", "dueling"};
}

void run_repro(const std::string& suite, RunConfig overrides, std::ostream& out) {
  overrides.check_keys(repro_keys(), "repro");
  uint64_t base = overrides.seed("seed", suite_base_seed(suite));
  bool smoke = overrides.flag("smoke", false);
  int workers = (int)overrides.integer("workers", default_workers());
  std::string root = resolve_out(overrides, suite);

  fill_default(overrides, "seed", std::to_string(base));
  fill_default(overrides, "smoke", smoke ? "1" : "0");
  fill_default(overrides, "workers", std::to_string(workers));

  Plan plan = make_plan(suite, root, base, smoke, workers);
  for (auto& [cmd, cfg] : plan.stages) {
    out << "repro[" << suite << "]: " << cmd << " -> " << cfg.str("out", "") << "\n";
    if (cmd == "gen")
      run_gen(cfg, out);
    else if (cmd == "train")
      run_train(cfg, out);
    else
      run_eval(cfg, out);
  }

  std::vector<deploy::MetricsRecord> all;
  for (const std::string& dir : plan.eval_dirs) {
    std::vector<deploy::MetricsRecord> part = deploy::load_metrics(dir + "/records.jsonl");
    all.insert(all.end(), part.begin(), part.end());
  }
  std::string report = root + "/report";
  deploy::aggregate_and_report(all, report);
  overrides.write(report + "/repro.config");
  json manifest = {{"format_version", kArtifactFormatVersion},
                   {"run_config_hash", hex16(overrides.hash())},
                   {"seed", base},
                   {"suite", suite},
                   {"records", all.size()}};
  write_text(report + "/report_manifest.json", manifest.dump(2) + "\n");
  out << "repro[" << suite << "]: report at " << report << "/summary.tsv\n";
}

}  // namespace icprl::cli
