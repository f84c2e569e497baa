#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "icprl/prefgen.hpp"

namespace icprl::prefgen {

using nlohmann::json;

namespace {

json manifest_json(const CorpusManifest& m) {
  json j;
  j["format_version"] = m.format_version;
  j["kind"] = m.kind;
  j["env"] = m.env;
  j["split"] = m.split;
  j["quality"] = m.quality;
  j["p"] = m.p;
  j["weak_gain"] = m.weak_gain;
  j["strong_gain"] = m.strong_gain;
  j["noise_sd"] = m.noise_sd;
  j["grid"] = m.grid;
  j["horizon"] = m.horizon;
  j["arms"] = m.arms;
  j["dim"] = m.dim;
  j["obs_noise_var"] = m.obs_noise_var;
  j["contexts_per_task"] = m.contexts_per_task;
  j["seed"] = m.seed;
  j["bandit_phi"] = m.bandit_phi;
  return j;
}

CorpusManifest manifest_from_json(const json& j) {
  CorpusManifest m;
  m.format_version = j.at("format_version").get<int>();
  require(m.format_version == kCorpusFormatVersion, "corpus: unsupported format version");
  m.kind = j.at("kind").get<std::string>();
  m.env = j.at("env").get<std::string>();
  m.split = j.at("split").get<std::string>();
  m.quality = j.at("quality").get<std::string>();
  m.p = j.at("p").get<double>();
  m.weak_gain = j.at("weak_gain").get<double>();
  m.strong_gain = j.at("strong_gain").get<double>();
  m.noise_sd = j.at("noise_sd").get<double>();
  m.grid = j.at("grid").get<int>();
  m.horizon = j.at("horizon").get<int>();
  m.arms = j.at("arms").get<int>();
  m.dim = j.at("dim").get<int>();
  m.obs_noise_var = j.at("obs_noise_var").get<double>();
  m.contexts_per_task = j.at("contexts_per_task").get<int>();
  m.seed = j.at("seed").get<uint64_t>();
  m.bandit_phi = j.at("bandit_phi").get<std::vector<double>>();
  return m;
}

int y_to_disk(int y) {
  require(y == 1 || y == -1, "corpus: preference label must be +1 or -1");
  return y > 0 ? 1 : 0;
}

int y_from_disk(const json& j) {
  int y = j.get<int>();
  require(y == 0 || y == 1, "corpus: stored label must be 0 or 1");
  return y == 1 ? 1 : -1;
}

json queries_json(const std::vector<QueryLabel>& qs) {
  json arr = json::array();
  for (const QueryLabel& q : qs) arr.push_back({{"astar", q.astar}, {"h", q.h}, {"s", q.s}});
  return arr;
}

std::vector<QueryLabel> queries_from_json(const json& arr) {
  std::vector<QueryLabel> qs;
  for (const json& j : arr) {
    QueryLabel q;
    q.astar = j.at("astar").get<std::vector<double>>();
    q.h = j.at("h").get<int>();
    q.s = j.at("s").get<std::vector<double>>();
    qs.push_back(std::move(q));
  }
  return qs;
}

json iprl_json(const IprlBundle& b) {
  json recs = json::array();
  for (const StepPrefRecord& r : b.ctx.recs)
    recs.push_back({{"a", r.a}, {"a2", r.a2}, {"s", r.s}, {"y", y_to_disk(r.y)}});
  return {{"ctx", recs}, {"queries", queries_json(b.queries)}, {"task", b.task_id}};
}

json traj_json(const Traj& t) {
  require(t.r.empty(), "corpus: trajectory-preference payloads must not carry rewards");
  require(t.s.size() == t.a.size(), "corpus: trajectory state/action length mismatch");
  return {{"a", t.a}, {"s", t.s}};
}

json tprl_json(const TprlBundle& b) {
  return {{"pair",
           {{"t1", traj_json(b.pair.t1)}, {"t2", traj_json(b.pair.t2)}, {"y", y_to_disk(b.pair.y)}}},
          {"queries", queries_json(b.queries)},
          {"task", b.task_id}};
}

json reward_json(const RewardBundle& b) {
  json recs = json::array();
  for (const Transition& t : b.ctx.recs) {
    json rec = {{"a", t.a}, {"r", t.r}, {"s", t.s}};
    if (b.ctx.has_next) rec["s2"] = t.s2;
    recs.push_back(std::move(rec));
  }
  return {{"ctx", recs}, {"queries", queries_json(b.queries)}, {"task", b.task_id}};
}

IprlBundle iprl_from_json(const json& j) {
  IprlBundle b;
  b.task_id = j.at("task").get<int>();
  for (const json& r : j.at("ctx")) {
    StepPrefRecord rec;
    rec.a = r.at("a").get<std::vector<double>>();
    rec.a2 = r.at("a2").get<std::vector<double>>();
    rec.s = r.at("s").get<std::vector<double>>();
    rec.y = y_from_disk(r.at("y"));
    b.ctx.recs.push_back(std::move(rec));
  }
  b.queries = queries_from_json(j.at("queries"));
  return b;
}

Traj traj_from_json(const json& j) {
  Traj t;
  t.s = j.at("s").get<std::vector<std::vector<double>>>();
  t.a = j.at("a").get<std::vector<std::vector<double>>>();
  return t;
}

TprlBundle tprl_from_json(const json& j) {
  TprlBundle b;
  b.task_id = j.at("task").get<int>();
  const json& p = j.at("pair");
  b.pair.t1 = traj_from_json(p.at("t1"));
  b.pair.t2 = traj_from_json(p.at("t2"));
  b.pair.y = y_from_disk(p.at("y"));
  b.queries = queries_from_json(j.at("queries"));
  return b;
}

RewardBundle reward_from_json(const json& j) {
  RewardBundle b;
  b.task_id = j.at("task").get<int>();
  bool first = true;
  for (const json& r : j.at("ctx")) {
    Transition t;
    t.a = r.at("a").get<std::vector<double>>();
    t.r = r.at("r").get<double>();
    t.s = r.at("s").get<std::vector<double>>();
    bool has_next = r.contains("s2");
    if (has_next) t.s2 = r.at("s2").get<std::vector<double>>();
    if (first) {
      b.ctx.has_next = has_next;
      first = false;
    } else {
      require(has_next == b.ctx.has_next, "corpus: inconsistent transition shapes in context");
    }
    b.ctx.recs.push_back(std::move(t));
  }
  b.queries = queries_from_json(j.at("queries"));
  return b;
}

std::string hash_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
  return std::string(buf);
}

// Splits the file into the hashed prefix (every line but the last) and the
// parsed trailing hash line, verifying the hash.
struct RawCorpus {
  std::string prefix;
  uint64_t hash = 0;
};

RawCorpus read_and_check(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "corpus: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string content = ss.str();
  require(!content.empty() && content.back() == '\n', "corpus: truncated file " + path);
  size_t tail_start = content.rfind('\n', content.size() - 2);
  require(tail_start != std::string::npos, "corpus: missing content hash line in " + path);
  ++tail_start;
  std::string tail = content.substr(tail_start, content.size() - tail_start - 1);
  json tj = json::parse(tail);
  require(tj.contains("content_hash"), "corpus: last line is not a content hash in " + path);
  std::string want = tj.at("content_hash").get<std::string>();
  RawCorpus raw;
  raw.prefix = content.substr(0, tail_start);
  raw.hash = fnv1a(raw.prefix.data(), raw.prefix.size());
  require(hash_hex(raw.hash) == want, "corpus: content hash mismatch in " + path);
  return raw;
}

}  // namespace

std::string CorpusManifest::canonical() const { return manifest_json(*this).dump(); }

uint64_t CorpusManifest::family_hash() const {
  json j;
  j["format_version"] = format_version;
  j["kind"] = kind;
  j["env"] = env;
  j["grid"] = grid;
  j["horizon"] = horizon;
  j["arms"] = arms;
  j["dim"] = dim;
  j["obs_noise_var"] = obs_noise_var;
  j["bandit_phi"] = bandit_phi;
  return fnv1a(j.dump());
}

void save_corpus(const std::string& path, const Corpus& c) {
  const CorpusManifest& m = c.manifest;
  require(m.kind == "iprl" || m.kind == "tprl" || m.kind == "reward",
          "corpus: unknown kind " + m.kind);
  require(m.task_ids.size() == m.task_params.size(), "corpus: task ids/params mismatch");
  require(m.kind == "iprl" || c.iprl.empty(), "corpus: stray step-preference bundles");
  require(m.kind == "tprl" || c.tprl.empty(), "corpus: stray trajectory bundles");
  require(m.kind == "reward" || c.reward.empty(), "corpus: stray reward bundles");

  std::string buf;
  auto push = [&buf](const json& j) {
    buf += j.dump();
    buf += '\n';
  };
  push({{"manifest", manifest_json(m)}});
  for (size_t i = 0; i < m.task_ids.size(); ++i)
    push({{"params", m.task_params[i]}, {"task_def", m.task_ids[i]}});
  for (const IprlBundle& b : c.iprl) push(iprl_json(b));
  for (const TprlBundle& b : c.tprl) push(tprl_json(b));
  for (const RewardBundle& b : c.reward) push(reward_json(b));
  push({{"content_hash", hash_hex(fnv1a(buf.data(), buf.size()))}});

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), "corpus: cannot write " + path);
  out.write(buf.data(), (std::streamsize)buf.size());
  out.flush();
  require(out.good(), "corpus: write failed for " + path);
}

Corpus load_corpus(const std::string& path) {
  RawCorpus raw = read_and_check(path);
  Corpus c;
  bool have_manifest = false;
  std::istringstream lines(raw.prefix);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    if (j.contains("manifest")) {
      require(!have_manifest, "corpus: duplicate manifest in " + path);
      c.manifest = manifest_from_json(j.at("manifest"));
      have_manifest = true;
      continue;
    }
    require(have_manifest, "corpus: record before manifest in " + path);
    if (j.contains("task_def")) {
      c.manifest.task_ids.push_back(j.at("task_def").get<int>());
      c.manifest.task_params.push_back(j.at("params").get<std::vector<double>>());
    } else if (j.contains("pair")) {
      c.tprl.push_back(tprl_from_json(j));
    } else if (j.contains("ctx") && c.manifest.kind == "reward") {
      c.reward.push_back(reward_from_json(j));
    } else if (j.contains("ctx")) {
      c.iprl.push_back(iprl_from_json(j));
    } else {
      fail("corpus: unrecognized record in " + path);
    }
  }
  require(have_manifest, "corpus: no manifest in " + path);
  require(c.manifest.task_ids.size() == c.manifest.task_params.size(),
          "corpus: task ids/params mismatch in " + path);
  return c;
}

uint64_t corpus_content_hash(const std::string& path) { return read_and_check(path).hash; }

envs::DarkRoom manifest_darkroom(const CorpusManifest& m, int task_index) {
  require(m.env == "darkroom", "manifest_darkroom: wrong env " + m.env);
  require(task_index >= 0 && task_index < (int)m.task_params.size(),
          "manifest_darkroom: task index out of range");
  const std::vector<double>& p = m.task_params[task_index];
  require(p.size() == 2, "manifest_darkroom: bad task params");
  envs::DarkRoom t;
  t.grid = m.grid;
  t.horizon = m.horizon;
  t.gx = (int)p[0];
  t.gy = (int)p[1];
  return t;
}

envs::BanditBank manifest_bandit_bank(const CorpusManifest& m) {
  require(m.env == "bandit", "manifest_bandit_bank: wrong env " + m.env);
  require((int)m.bandit_phi.size() == m.arms * m.dim, "manifest_bandit_bank: bad feature table");
  envs::BanditBank bank;
  bank.arms = m.arms;
  bank.dim = m.dim;
  bank.obs_noise_var = m.obs_noise_var;
  bank.phi = m.bandit_phi;
  return bank;
}

envs::BanditTask manifest_bandit_task(const CorpusManifest& m, int task_index) {
  envs::BanditBank bank = manifest_bandit_bank(m);
  require(task_index >= 0 && task_index < (int)m.task_params.size(),
          "manifest_bandit_task: task index out of range");
  const std::vector<double>& theta = m.task_params[task_index];
  require((int)theta.size() == m.dim, "manifest_bandit_task: bad theta");
  envs::BanditTask t;
  t.theta = theta;
  t.r.resize(bank.arms);
  for (int a = 0; a < bank.arms; ++a) {
    double dot = 0.0;
    for (int d = 0; d < bank.dim; ++d) dot += theta[d] * bank.phi[(size_t)a * bank.dim + d];
    t.r[a] = dot;
    if (t.r[a] > t.r[t.best]) t.best = a;
  }
  return t;
}

envs::PointReach manifest_pointreach(const CorpusManifest& m, int task_index) {
  require(m.env == "pointreach", "manifest_pointreach: wrong env " + m.env);
  require(task_index >= 0 && task_index < (int)m.task_params.size(),
          "manifest_pointreach: task index out of range");
  const std::vector<double>& goal = m.task_params[task_index];
  require(goal.size() == 3, "manifest_pointreach: bad goal");
  envs::PointReach t;
  t.horizon = m.horizon;
  t.goal = goal;
  return t;
}

int manifest_task_index(const CorpusManifest& m, int task_id) {
  for (size_t i = 0; i < m.task_ids.size(); ++i)
    if (m.task_ids[i] == task_id) return (int)i;
  fail("corpus: unknown task id " + std::to_string(task_id));
}

}  // namespace icprl::prefgen
