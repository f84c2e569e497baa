#include "icprl/deploy.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace icprl::deploy {

using json = nlohmann::json;
using model::Codec;
using model::HeadKind;
using model::Query;
using model::SeqModel;
using model::TokenSequence;

void MetricsRecord::finalize() {
  if (steps.empty()) {
    mean = 0.0;
    stderr_ = 0.0;
    return;
  }
  baselines::MeanStderr ms = baselines::mc_mean(steps);
  mean = ms.mean;
  stderr_ = ms.stderr_;
}

namespace {

json record_json(const MetricsRecord& r) {
  json j;
  j["run_id"] = r.run_id;
  j["framework"] = r.framework;
  j["env"] = r.env;
  j["kind"] = r.kind;
  j["task"] = r.task_id;
  j["seed"] = r.seed;
  j["quality"] = r.quality;
  j["steps"] = r.steps;
  j["mean"] = r.mean;
  j["stderr"] = r.stderr_;
  return j;
}

MetricsRecord record_from_json(const json& j) {
  MetricsRecord r;
  r.run_id = j.at("run_id").get<std::string>();
  r.framework = j.at("framework").get<std::string>();
  r.env = j.at("env").get<std::string>();
  r.kind = j.at("kind").get<std::string>();
  r.task_id = j.at("task").get<int>();
  r.seed = j.at("seed").get<uint64_t>();
  r.quality = j.at("quality").get<std::string>();
  r.steps = j.at("steps").get<std::vector<double>>();
  double mean = j.at("mean").get<double>();
  double se = j.at("stderr").get<double>();
  r.finalize();
  require(r.mean == mean && r.stderr_ == se,
          "metrics: stored summary does not match the raw per-step values");
  return r;
}

}  // namespace

void save_metrics(const std::vector<MetricsRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "metrics: cannot open " + path);
  for (const MetricsRecord& r : records) out << record_json(r).dump() << "\n";
  require(out.good(), "metrics: write failed for " + path);
}

std::vector<MetricsRecord> load_metrics(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "metrics: cannot open " + path);
  std::vector<MetricsRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(record_from_json(json::parse(line)));
  }
  return out;
}

// ---- conditioned action policies ----

int sample_discrete(const std::vector<double>& logits, bool argmax, Rng& rng) {
  require(!logits.empty(), "sample_discrete: no logits");
  size_t best = 0;
  for (size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = i;
  if (argmax) return (int)best;
  double mx = logits[best], z = 0.0;
  std::vector<double> p(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng) * z;
  double acc = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return (int)i;
  }
  return (int)p.size() - 1;
}

namespace {

std::vector<double> head_to_action(const SeqModel& m, std::vector<double> out, bool argmax,
                                   Rng& rng) {
  if (m.config().head == HeadKind::policy_discrete)
    return {(double)sample_discrete(out, argmax, rng)};
  require(m.config().head == HeadKind::policy_continuous, "deploy: model has no policy head");
  if (!argmax) {
    std::normal_distribution<double> noise(0.0, std::sqrt(frameworks::kGaussVar));
    for (double& v : out) v += noise(rng);
  }
  return out;
}

}  // namespace

PolicyOnIprlContext::PolicyOnIprlContext(const SeqModel& m, Codec codec, IprlContext ctx,
                                         bool argmax)
    : m_(m), codec_(std::move(codec)), ctx_(std::move(ctx)), argmax_(argmax) {}

std::vector<double> PolicyOnIprlContext::act(int, const std::vector<double>& obs,
                                             Rng& rng) const {
  nn::NoGrad ng;
  TokenSequence seq = model::encode_iprl(codec_, ctx_, {{obs, {}}});
  std::vector<double> out = m_.forward(seq, {seq.n_ctx}).value();
  return head_to_action(m_, std::move(out), argmax_, rng);
}

PolicyOnTprlContext::PolicyOnTprlContext(const SeqModel& m, Codec codec, TrajPairRecord pair,
                                         bool argmax)
    : m_(m), codec_(std::move(codec)), pair_(std::move(pair)), argmax_(argmax) {
  require(pair_.t1.r.empty() && pair_.t2.r.empty(),
          "deploy: trajectory-pair context must not carry rewards");
}

std::vector<double> PolicyOnTprlContext::act(int, const std::vector<double>& obs,
                                             Rng& rng) const {
  nn::NoGrad ng;
  TokenSequence seq = model::encode_tprl(codec_, pair_, {{obs, {}}});
  std::vector<double> out = m_.forward(seq, {seq.n_ctx}).value();
  return head_to_action(m_, std::move(out), argmax_, rng);
}

PolicyOnRewardContext::PolicyOnRewardContext(const SeqModel& m, Codec codec, RewardContext ctx,
                                             bool argmax)
    : m_(m), codec_(std::move(codec)), ctx_(std::move(ctx)), argmax_(argmax) {}

std::vector<double> PolicyOnRewardContext::act(int, const std::vector<double>& obs,
                                               Rng& rng) const {
  nn::NoGrad ng;
  TokenSequence seq = model::encode_reward_annotated(codec_, ctx_, {{obs, {}}});
  std::vector<double> out = m_.forward(seq, {seq.n_ctx}).value();
  return head_to_action(m_, std::move(out), argmax_, rng);
}

// ---- episode rollouts ----

namespace {

MetricsRecord base_record(const RolloutSpec& spec, const std::string& env,
                          const std::string& kind) {
  MetricsRecord r;
  r.run_id = spec.run_id;
  r.framework = spec.framework;
  r.env = env;
  r.kind = kind;
  r.task_id = spec.task_id;
  r.seed = spec.seed;
  r.quality = spec.quality;
  return r;
}

}  // namespace

MetricsRecord deploy_iprl(const ActionPolicy& policy, const envs::DarkRoom& task,
                          const RolloutSpec& spec) {
  MetricsRecord rec = base_record(spec, "darkroom", "return");
  Rng rng = make_rng(derive_seed(spec.seed, "deploy"));
  if (task.horizon > 0) {
    std::vector<double> s = task.random_start(rng);
    rec.steps.reserve(task.horizon);
    for (int h = 0; h < task.horizon; ++h) {
      std::vector<double> a = policy.act(h, s, rng);
      require(a.size() == 1, "deploy: grid task expects a single action index");
      envs::StepResult st = task.step(s, (int)std::llround(a[0]));
      rec.steps.push_back(st.r);
      s = std::move(st.s2);
    }
  }
  rec.finalize();
  return rec;
}

MetricsRecord deploy_iprl(const ActionPolicy& policy, const envs::PointReach& task,
                          const RolloutSpec& spec) {
  MetricsRecord rec = base_record(spec, "pointreach", "return");
  Rng rng = make_rng(derive_seed(spec.seed, "deploy"));
  if (task.horizon > 0) {
    std::vector<double> pos = envs::pointreach_start(task, rng);
    rec.steps.reserve(task.horizon);
    for (int h = 0; h < task.horizon; ++h) {
      envs::StepResult st = task.step(pos, policy.act(h, task.observe(pos), rng));
      rec.steps.push_back(st.r);
      pos = std::move(st.s2);
    }
  }
  rec.finalize();
  return rec;
}

MetricsRecord deploy_icrg(const SeqModel& reward_model, const SeqModel& dit_policy,
                          const Codec& codec, const TrajPairRecord& test_pair,
                          const Traj& raw_behavior, const envs::DarkRoom& task,
                          const RolloutSpec& spec, bool argmax, RewardContext* annotated) {
  require(test_pair.t1.len() > 0 && test_pair.t2.len() > 0, "deploy: empty test pair");
  require(raw_behavior.len() > 0, "deploy: empty behavior trajectory");
  require(raw_behavior.r.empty(), "deploy: behavior trajectory must not carry rewards");
  frameworks::RewardLabeler labeler{&reward_model, true};
  std::vector<double> rhat = frameworks::icrg_label_steps(labeler, codec, test_pair, raw_behavior);
  RewardContext ctx;
  ctx.has_next = false;
  for (size_t i = 0; i < raw_behavior.len(); ++i)
    ctx.recs.push_back({raw_behavior.s[i], raw_behavior.a[i], rhat[i], {}});
  if (annotated) *annotated = ctx;
  PolicyOnRewardContext policy(dit_policy, codec, std::move(ctx), argmax);
  return deploy_iprl(policy, task, spec);
}

// ---- dueling deployment ----

UniformPicker::UniformPicker(int arms) : arms_(arms) { require(arms >= 2, "picker: need arms"); }

std::pair<int, int> UniformPicker::pick(Rng& rng) {
  int a = (int)(rng() % arms_);
  int b = (int)(rng() % (arms_ - 1));
  if (b >= a) b++;
  return {a, b};
}

DirichletPicker::DirichletPicker(int arms, double concentration, Rng& rng) {
  require(arms >= 2, "picker: need arms");
  require(concentration > 0.0, "picker: concentration must be positive");
  std::gamma_distribution<double> g(concentration, 1.0);
  weights_.resize(arms);
  double z = 0.0;
  for (double& w : weights_) {
    w = g(rng);
    z += w;
  }
  for (double& w : weights_) w /= z;
}

std::pair<int, int> DirichletPicker::pick(Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&] {
    double u = unit(rng), acc = 0.0;
    for (size_t i = 0; i < weights_.size(); ++i) {
      acc += weights_[i];
      if (u < acc) return (int)i;
    }
    return (int)weights_.size() - 1;
  };
  int a = draw(), b = draw();
  while (b == a) b = draw();
  return {a, b};
}

IcpoPicker::IcpoPicker(const SeqModel& m, int arms, IprlContext warm_start)
    : m_(m), codec_(Codec::bandit(arms)), arms_(arms), ctx_(std::move(warm_start)) {
  require(arms >= 2, "picker: need arms");
  require(m.config().head == HeadKind::policy_discrete && m.config().out_dim == arms,
          "picker: model head does not match the arm count");
}

std::pair<int, int> IcpoPicker::pick(Rng& rng) {
  nn::NoGrad ng;
  TokenSequence seq = model::encode_iprl(codec_, ctx_, {{{}, {}}});
  std::vector<double> logits = m_.forward(seq, {seq.n_ctx}).value();
  int a = sample_discrete(logits, true, rng);
  int b = (int)(rng() % (arms_ - 1));
  if (b >= a) b++;
  return {a, b};
}

void IcpoPicker::observe(int a, int a2, int y) {
  require(a != a2, "picker: identical arms observed");
  ctx_.recs.push_back({{}, {(double)a}, {(double)a2}, y});
}

MetricsRecord deploy_dueling(ArmPicker& picker, const envs::BanditTask& task, int horizon,
                             const RolloutSpec& spec) {
  require(horizon >= 0, "deploy: negative horizon");
  MetricsRecord rec = base_record(spec, "bandit", "regret");
  Rng rng = make_rng(derive_seed(spec.seed, "duel"));
  rec.steps.reserve(horizon);
  for (int h = 0; h < horizon; ++h) {
    auto [a, b] = picker.pick(rng);
    require(a != b, "deploy: picker returned identical arms");
    int y = prefgen::bt_label(task.r[a], task.r[b], rng);
    picker.observe(a, b, y);
    rec.steps.push_back(weak_regret(task, a, b));
  }
  rec.finalize();
  return rec;
}

// ---- aggregation ----

std::vector<GroupSummary> summarize(const std::vector<MetricsRecord>& records) {
  require(!records.empty(), "summarize: no records");
  std::map<std::array<std::string, 4>, std::vector<const MetricsRecord*>> groups;
  for (const MetricsRecord& r : records)
    groups[{r.env, r.kind, r.framework, r.quality}].push_back(&r);

  std::vector<GroupSummary> out;
  for (auto& [key, recs] : groups) {
    GroupSummary g;
    g.env = key[0];
    g.kind = key[1];
    g.framework = key[2];
    g.quality = key[3];
    g.records = (long)recs.size();
    size_t len = recs.front()->steps.size();
    std::vector<double> totals;
    g.mean_curve.assign(len, 0.0);
    for (const MetricsRecord* r : recs) {
      require(r->steps.size() == len, "summarize: mixed horizons in group " + g.env + "/" +
                                          g.kind + "/" + g.framework + "/" + g.quality);
      double acc = 0.0;
      for (size_t i = 0; i < len; ++i) {
        acc += r->steps[i];
        g.mean_curve[i] += acc;
      }
      totals.push_back(acc);
    }
    for (double& v : g.mean_curve) v /= recs.size();
    baselines::MeanStderr ms = baselines::mc_mean(totals);
    g.mean_total = ms.mean;
    g.ci95 = 1.96 * ms.stderr_;
    out.push_back(std::move(g));
  }
  return out;
}

namespace {

std::string fmt(double v, const char* spec = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

const char* kPalette[10] = {"#4363d8", "#e6194b", "#3cb44b", "#f58231", "#911eb4",
                            "#46f0f0", "#f032e6", "#808000", "#008080", "#9a6324"};

std::string svg_curves(const std::vector<GroupSummary>& groups) {
  const double w = 720, h = 420, left = 60, right = 700, top = 20, bottom = 360;
  size_t max_len = 0;
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (const GroupSummary& g : groups) {
    max_len = std::max(max_len, g.mean_curve.size());
    for (double v : g.mean_curve) {
      lo = any ? std::min(lo, v) : v;
      hi = any ? std::max(hi, v) : v;
      any = true;
    }
  }
  if (!any) {
    lo = 0.0;
    hi = 1.0;
  }
  if (hi == lo) hi = lo + 1.0;

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << w << " " << h
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << bottom << "\" x2=\"" << right << "\" y2=\"" << bottom
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << bottom
    << "\" stroke=\"black\"/>\n";
  s << "<text x=\"" << left << "\" y=\"" << bottom + 16 << "\">1</text>\n";
  s << "<text x=\"" << right - 30 << "\" y=\"" << bottom + 16 << "\">" << max_len << "</text>\n";
  s << "<text x=\"4\" y=\"" << bottom << "\">" << fmt(lo, "%.4g") << "</text>\n";
  s << "<text x=\"4\" y=\"" << top + 10 << "\">" << fmt(hi, "%.4g") << "</text>\n";
  s << "<text x=\"" << (left + right) / 2 - 60 << "\" y=\"" << bottom + 32
    << "\">step (cumulative value)</text>\n";

  auto sx = [&](size_t i) {
    return max_len <= 1 ? left : left + (right - left) * (double)i / (double)(max_len - 1);
  };
  auto sy = [&](double v) { return bottom - (bottom - top) * (v - lo) / (hi - lo); };

  int ci = 0;
  double ly = top + 8;
  for (const GroupSummary& g : groups) {
    const char* color = kPalette[ci++ % 10];
    if (!g.mean_curve.empty()) {
      s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (size_t i = 0; i < g.mean_curve.size(); ++i)
        s << fmt(sx(i), "%.2f") << "," << fmt(sy(g.mean_curve[i]), "%.2f") << " ";
      s << "\"/>\n";
    }
    std::string label = g.env + "/" + g.kind + "/" + g.framework;
    if (!g.quality.empty()) label += "/" + g.quality;
    s << "<rect x=\"" << left + 8 << "\" y=\"" << ly - 8 << "\" width=\"10\" height=\"10\" fill=\""
      << color << "\"/>\n";
    s << "<text x=\"" << left + 22 << "\" y=\"" << ly << "\">" << label << " (n=" << g.records
      << ", " << fmt(g.mean_total, "%.4f") << " ± " << fmt(g.ci95, "%.4f") << ")</text>\n";
    ly += 16;
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace

void aggregate_and_report(const std::vector<MetricsRecord>& records, const std::string& out_dir) {
  std::vector<GroupSummary> groups = summarize(records);
  std::filesystem::create_directories(out_dir);

  std::ostringstream tsv;
  tsv << "env\tkind\tframework\tquality\trecords\tmean_total\tci95\n";
  for (const GroupSummary& g : groups)
    tsv << g.env << "\t" << g.kind << "\t" << g.framework << "\t" << g.quality << "\t" << g.records
        << "\t" << fmt(g.mean_total) << "\t" << fmt(g.ci95) << "\n";

  std::ofstream ts(out_dir + "/summary.tsv", std::ios::binary);
  require(ts.good(), "report: cannot write summary.tsv");
  ts << tsv.str();
  std::ofstream sv(out_dir + "/curves.svg", std::ios::binary);
  require(sv.good(), "report: cannot write curves.svg");
  sv << svg_curves(groups);
}

}  // namespace icprl::deploy
