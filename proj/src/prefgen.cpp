#include "icprl/prefgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace icprl::prefgen {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

int uniform_action(int n, Rng& rng) {
  return (int)(rng() % (uint64_t)n);
}

double sum(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0);
}

}  // namespace

int bt_label(double score_a, double score_b, Rng& rng) {
  double p = sigmoid(score_a - score_b);
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  return u < p ? 1 : -1;
}

int mixed_policy_action(const envs::DarkRoomOracle& o, const std::vector<double>& s, int h,
                        double p, Rng& rng) {
  // Both draws happen unconditionally so a fixed seed consumes the stream the
  // same way for every p; calibration then bisects an exactly monotone step
  // function instead of a noisy one.
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  int random_a = uniform_action(envs::DarkRoom::n_actions, rng);
  if (u < p) return o.best_action(h, (int)s[0], (int)s[1]);
  return random_a;
}

IprlContext darkroom_iprl_context(const envs::DarkRoomOracle& o, double p, int len, Rng& rng) {
  require(len > 0, "darkroom_iprl_context: len must be positive");
  const envs::DarkRoom& t = o.task;
  IprlContext ctx;
  ctx.recs.reserve(len);
  std::vector<double> s = t.random_start(rng);
  for (int h = 0; h < len; ++h) {
    int a_mix = mixed_policy_action(o, s, h, p, rng);
    int a_unif = uniform_action(envs::DarkRoom::n_actions, rng);
    while (a_unif == a_mix) a_unif = uniform_action(envs::DarkRoom::n_actions, rng);
    bool mix_first = (rng() & 1ull) != 0;
    int a1 = mix_first ? a_mix : a_unif;
    int a2 = mix_first ? a_unif : a_mix;
    int x = (int)s[0], y = (int)s[1];
    int label = bt_label(o.adv(h, x, y, a1), o.adv(h, x, y, a2), rng);
    StepPrefRecord rec;
    rec.s = s;
    rec.a = {(double)a1};
    rec.a2 = {(double)a2};
    rec.y = label;
    ctx.recs.push_back(rec);
    int preferred = label > 0 ? a1 : a2;
    s = t.step(s, preferred).s2;
  }
  return ctx;
}

Traj darkroom_rollout(const envs::DarkRoomOracle& o, double p, Rng& rng) {
  const envs::DarkRoom& t = o.task;
  Traj tr;
  std::vector<double> s = t.random_start(rng);
  for (int h = 0; h < t.horizon; ++h) {
    int a = mixed_policy_action(o, s, h, p, rng);
    envs::StepResult st = t.step(s, a);
    tr.s.push_back(s);
    tr.a.push_back({(double)a});
    tr.r.push_back(st.r);
    s = st.s2;
  }
  return tr;
}

TrajPairRecord darkroom_tprl_pair(const envs::DarkRoomOracle& o, double p, Rng& rng) {
  TrajPairRecord pair;
  pair.t1 = darkroom_rollout(o, p, rng);
  pair.t2 = darkroom_rollout(o, p, rng);
  pair.y = bt_label(sum(pair.t1.r), sum(pair.t2.r), rng);
  return pair;
}

RewardContext darkroom_reward_context(const envs::DarkRoomOracle& o, double p, int len, Rng& rng) {
  require(len > 0, "darkroom_reward_context: len must be positive");
  const envs::DarkRoom& t = o.task;
  RewardContext ctx;
  ctx.has_next = true;
  std::vector<double> s = t.random_start(rng);
  for (int h = 0; h < len; ++h) {
    int a = mixed_policy_action(o, s, h, p, rng);
    envs::StepResult st = t.step(s, a);
    Transition tr;
    tr.s = s;
    tr.a = {(double)a};
    tr.r = st.r;
    tr.s2 = st.s2;
    ctx.recs.push_back(tr);
    s = st.s2;
  }
  return ctx;
}

namespace {

double darkroom_mean_return(double p, int grid, int horizon, int n_tasks, int rollouts_per_task,
                            uint64_t seed) {
  double total = 0.0;
  int n = 0;
  for (int i = 0; i < n_tasks; ++i) {
    Rng trng = make_rng(derive_seed(seed, "calib_task", (uint64_t)i));
    envs::DarkRoom t;
    t.grid = grid;
    t.horizon = horizon;
    t.gx = (int)(trng() % (uint64_t)grid);
    t.gy = (int)(trng() % (uint64_t)grid);
    envs::DarkRoomOracle o(t);
    for (int j = 0; j < rollouts_per_task; ++j) {
      Rng rr = make_rng(derive_seed(seed, "calib_roll", (uint64_t)i * 1000003ull + (uint64_t)j));
      total += sum(darkroom_rollout(o, p, rr).r);
      ++n;
    }
  }
  return total / n;
}

}  // namespace

double calibrate_darkroom_p(int grid, int horizon, double target_fraction, int n_tasks,
                            int rollouts_per_task, uint64_t seed) {
  require(target_fraction > 0.0 && target_fraction < 1.0,
          "calibrate_darkroom_p: target must be in (0, 1)");
  // Optimal per-episode return is 1 whenever the horizon covers the grid
  // diameter, which holds for every configuration used here.
  require(horizon >= 2 * (grid - 1), "calibrate_darkroom_p: horizon below grid diameter");
  auto f = [&](double p) {
    return darkroom_mean_return(p, grid, horizon, n_tasks, rollouts_per_task, seed);
  };
  if (f(0.0) >= target_fraction) return 0.0;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 40; ++it) {
    double mid = 0.5 * (lo + hi);
    if (f(mid) < target_fraction)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

IprlContext bandit_iprl_context(const envs::BanditTask& t, int arms, int len, Rng& rng) {
  require(arms >= 2, "bandit_iprl_context: need at least two arms");
  require((int)t.r.size() == arms, "bandit_iprl_context: arm count mismatch");
  IprlContext ctx;
  ctx.recs.reserve(len);
  for (int i = 0; i < len; ++i) {
    int a = uniform_action(arms, rng);
    int b = uniform_action(arms, rng);
    while (b == a) b = uniform_action(arms, rng);
    StepPrefRecord rec;
    rec.a = {(double)a};
    rec.a2 = {(double)b};
    rec.y = bt_label(t.r[a], t.r[b], rng);
    ctx.recs.push_back(rec);
  }
  return ctx;
}

double pointreach_adv_proxy(const envs::PointReach& t, const std::vector<double>& pos,
                            const std::vector<double>& a) {
  envs::StepResult st = t.step(pos, a);
  return -t.dist_to_goal(st.s2) + t.dist_to_goal(pos);
}

IprlContext pointreach_iprl_context(const envs::PointReach& t, const envs::PointController& weak,
                                    const envs::PointController& strong, int len, Rng& rng) {
  require(len > 0, "pointreach_iprl_context: len must be positive");
  IprlContext ctx;
  ctx.recs.reserve(len);
  std::vector<double> pos = envs::pointreach_start(t, rng);
  for (int h = 0; h < len; ++h) {
    std::vector<double> a_w = envs::controller_action(t, weak, pos, rng);
    std::vector<double> a_s = envs::controller_action(t, strong, pos, rng);
    bool weak_first = (rng() & 1ull) != 0;
    const std::vector<double>& a1 = weak_first ? a_w : a_s;
    const std::vector<double>& a2 = weak_first ? a_s : a_w;
    int label = bt_label(pointreach_adv_proxy(t, pos, a1), pointreach_adv_proxy(t, pos, a2), rng);
    StepPrefRecord rec;
    rec.s = t.observe(pos);
    rec.a = a1;
    rec.a2 = a2;
    rec.y = label;
    ctx.recs.push_back(rec);
    pos = t.step(pos, label > 0 ? a1 : a2).s2;
  }
  return ctx;
}

double pointreach_mean_return(double gain, double noise_sd, int horizon, int n_tasks,
                              int rollouts_per_task, uint64_t seed) {
  envs::PointController c{gain, noise_sd};
  double total = 0.0;
  int n = 0;
  for (int i = 0; i < n_tasks; ++i) {
    envs::PointReach t = envs::make_pointreach_task(derive_seed(seed, "calib_task", (uint64_t)i),
                                                    horizon);
    for (int j = 0; j < rollouts_per_task; ++j) {
      Rng rr = make_rng(derive_seed(seed, "calib_roll", (uint64_t)i * 1000003ull + (uint64_t)j));
      std::vector<double> pos = envs::pointreach_start(t, rr);
      double ret = 0.0;
      for (int h = 0; h < horizon; ++h) {
        envs::StepResult st = t.step(pos, envs::controller_action(t, c, pos, rr));
        ret += st.r;
        pos = st.s2;
      }
      total += ret;
      ++n;
    }
  }
  return total / n;
}

double calibrate_pointreach_gain(double target_proficiency, double noise_sd, int horizon,
                                 int n_tasks, int rollouts_per_task, uint64_t seed) {
  require(target_proficiency > 0.0 && target_proficiency < 1.0,
          "calibrate_pointreach_gain: target must be in (0, 1)");
  // Proficiency 0 anchors at the zero-gain pure-noise policy, 1 at the
  // noiseless full-gain controller.
  double r_rand = pointreach_mean_return(0.0, noise_sd, horizon, n_tasks, rollouts_per_task, seed);
  double r_opt = pointreach_mean_return(1.0, 0.0, horizon, n_tasks, rollouts_per_task, seed);
  require(r_opt > r_rand, "calibrate_pointreach_gain: degenerate anchors");
  auto prof = [&](double g) {
    double r = pointreach_mean_return(g, noise_sd, horizon, n_tasks, rollouts_per_task, seed);
    return (r - r_rand) / (r_opt - r_rand);
  };
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 40; ++it) {
    double mid = 0.5 * (lo + hi);
    if (prof(mid) < target_proficiency)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double quality_fraction(const std::string& quality) {
  if (quality == "low") return 0.2;
  if (quality == "medium") return 0.4;
  if (quality == "high") return 0.8;
  fail("unknown quality level: " + quality);
}

// ---- generation drivers ----

namespace {

std::vector<QueryLabel> darkroom_queries(const envs::DarkRoomOracle& o,
                                         const std::vector<StepPrefRecord>& recs, int n_queries,
                                         Rng& rng) {
  std::vector<QueryLabel> qs;
  for (int i = 0; i < n_queries; ++i) {
    int h = (int)(rng() % recs.size());
    QueryLabel q;
    q.s = recs[h].s;
    q.h = h;
    q.astar = {(double)o.best_action(h, (int)q.s[0], (int)q.s[1])};
    qs.push_back(q);
  }
  return qs;
}

std::vector<QueryLabel> darkroom_pair_queries(const envs::DarkRoomOracle& o,
                                              const TrajPairRecord& pair, int n_queries, Rng& rng) {
  std::vector<QueryLabel> qs;
  for (int i = 0; i < n_queries; ++i) {
    const Traj& t = (rng() % 2 == 0) ? pair.t1 : pair.t2;
    int h = (int)(rng() % t.len());
    QueryLabel q;
    q.s = t.s[h];
    q.h = h;
    q.astar = {(double)o.best_action(h, (int)q.s[0], (int)q.s[1])};
    qs.push_back(q);
  }
  return qs;
}

std::vector<QueryLabel> darkroom_reward_queries(const envs::DarkRoomOracle& o,
                                                const std::vector<Transition>& recs, int n_queries,
                                                Rng& rng) {
  std::vector<QueryLabel> qs;
  for (int i = 0; i < n_queries; ++i) {
    int h = (int)(rng() % recs.size());
    QueryLabel q;
    q.s = recs[h].s;
    q.h = h;
    q.astar = {(double)o.best_action(h, (int)q.s[0], (int)q.s[1])};
    qs.push_back(q);
  }
  return qs;
}

std::vector<QueryLabel> pointreach_queries(const envs::PointReach& t,
                                           const std::vector<StepPrefRecord>& recs, int n_queries,
                                           Rng& rng) {
  std::vector<QueryLabel> qs;
  for (int i = 0; i < n_queries; ++i) {
    int h = (int)(rng() % recs.size());
    QueryLabel q;
    q.s = recs[h].s;  // observation: pos ++ goal
    q.h = h;
    std::vector<double> toward(3);
    for (int d = 0; d < 3; ++d) toward[d] = t.goal[d] - q.s[d];
    q.astar = t.clamp_action(toward);
    qs.push_back(q);
  }
  return qs;
}

void strip_rewards(TrajPairRecord& pair) {
  pair.t1.r.clear();
  pair.t2.r.clear();
}

Corpus make_split(const CorpusManifest& base, const std::vector<int>& ids,
                  const std::vector<std::vector<double>>& params, const std::string& split) {
  Corpus c;
  c.manifest = base;
  c.manifest.split = split;
  c.manifest.task_ids = ids;
  c.manifest.task_params = params;
  return c;
}

void fill_darkroom(Corpus& c, const GenConfig& cfg, double p) {
  for (size_t i = 0; i < c.manifest.task_ids.size(); ++i) {
    envs::DarkRoom t = manifest_darkroom(c.manifest, (int)i);
    envs::DarkRoomOracle o(t);
    int id = c.manifest.task_ids[i];
    for (int k = 0; k < cfg.contexts_per_task; ++k) {
      Rng rng = make_rng(derive_seed(cfg.seed, "bundle", (uint64_t)id * 1000003ull + (uint64_t)k));
      if (cfg.kind == "iprl") {
        IprlBundle b;
        b.task_id = id;
        b.ctx = darkroom_iprl_context(o, p, cfg.horizon, rng);
        b.queries = darkroom_queries(o, b.ctx.recs, cfg.queries_per_context, rng);
        c.iprl.push_back(std::move(b));
      } else if (cfg.kind == "tprl") {
        TprlBundle b;
        b.task_id = id;
        b.pair = darkroom_tprl_pair(o, p, rng);
        b.queries = darkroom_pair_queries(o, b.pair, cfg.queries_per_context, rng);
        strip_rewards(b.pair);
        c.tprl.push_back(std::move(b));
      } else {
        RewardBundle b;
        b.task_id = id;
        b.ctx = darkroom_reward_context(o, p, cfg.horizon, rng);
        b.queries = darkroom_reward_queries(o, b.ctx.recs, cfg.queries_per_context, rng);
        c.reward.push_back(std::move(b));
      }
    }
  }
}

void fill_bandit(Corpus& c, const GenConfig& cfg) {
  for (size_t i = 0; i < c.manifest.task_ids.size(); ++i) {
    envs::BanditTask t = manifest_bandit_task(c.manifest, (int)i);
    int id = c.manifest.task_ids[i];
    for (int k = 0; k < cfg.contexts_per_task; ++k) {
      Rng rng = make_rng(derive_seed(cfg.seed, "bundle", (uint64_t)id * 1000003ull + (uint64_t)k));
      IprlBundle b;
      b.task_id = id;
      b.ctx = bandit_iprl_context(t, cfg.arms, cfg.horizon, rng);
      c.iprl.push_back(std::move(b));
    }
  }
}

void fill_pointreach(Corpus& c, const GenConfig& cfg) {
  envs::PointController weak{c.manifest.weak_gain, c.manifest.noise_sd};
  envs::PointController strong{c.manifest.strong_gain, c.manifest.noise_sd};
  for (size_t i = 0; i < c.manifest.task_ids.size(); ++i) {
    envs::PointReach t = manifest_pointreach(c.manifest, (int)i);
    int id = c.manifest.task_ids[i];
    for (int k = 0; k < cfg.contexts_per_task; ++k) {
      Rng rng = make_rng(derive_seed(cfg.seed, "bundle", (uint64_t)id * 1000003ull + (uint64_t)k));
      IprlBundle b;
      b.task_id = id;
      b.ctx = pointreach_iprl_context(t, weak, strong, cfg.horizon, rng);
      b.queries = pointreach_queries(t, b.ctx.recs, cfg.queries_per_context, rng);
      c.iprl.push_back(std::move(b));
    }
  }
}

}  // namespace

GenResult generate(const GenConfig& cfg) {
  require(cfg.env == "darkroom" || cfg.env == "bandit" || cfg.env == "pointreach",
          "generate: unknown env " + cfg.env);
  require(cfg.kind == "iprl" || cfg.kind == "tprl" || cfg.kind == "reward",
          "generate: unknown kind " + cfg.kind);
  require(cfg.env == "darkroom" || cfg.kind == "iprl",
          "generate: only darkroom has trajectory and reward corpora");
  require(cfg.n_train > 0 && cfg.n_test > 0, "generate: need both splits");
  require(cfg.contexts_per_task >= 0, "generate: negative contexts_per_task");

  CorpusManifest base;
  base.kind = cfg.kind;
  base.env = cfg.env;
  base.quality = cfg.quality;
  base.horizon = cfg.horizon;
  base.contexts_per_task = cfg.contexts_per_task;
  base.seed = cfg.seed;

  std::vector<int> train_ids(cfg.n_train), test_ids(cfg.n_test);
  for (int i = 0; i < cfg.n_train; ++i) train_ids[i] = i;
  for (int i = 0; i < cfg.n_test; ++i) test_ids[i] = cfg.n_train + i;
  std::vector<std::vector<double>> train_params, test_params;

  if (cfg.env == "darkroom") {
    base.grid = cfg.grid;
    double p = 0.0;
    if (cfg.quality != "uniform") {
      p = calibrate_darkroom_p(cfg.grid, cfg.horizon, quality_fraction(cfg.quality),
                               cfg.calib_tasks, cfg.calib_rollouts, derive_seed(cfg.seed, "calib"));
    }
    base.p = p;
    // Hold out distinct test goals; train goals are drawn with replacement
    // from the remaining cells so any train count is reachable.
    int cells = cfg.grid * cfg.grid;
    require(cfg.n_test < cells, "generate: more test goals than grid cells");
    std::vector<int> all(cells);
    for (int i = 0; i < cells; ++i) all[i] = i;
    Rng srng = make_rng(derive_seed(cfg.seed, "goal_split"));
    std::shuffle(all.begin(), all.end(), srng);
    for (int i = 0; i < cfg.n_test; ++i) {
      int cell = all[i];
      test_params.push_back({(double)(cell / cfg.grid), (double)(cell % cfg.grid)});
    }
    int remaining = cells - cfg.n_test;
    for (int i = 0; i < cfg.n_train; ++i) {
      int cell = all[cfg.n_test + (int)(srng() % (uint64_t)remaining)];
      train_params.push_back({(double)(cell / cfg.grid), (double)(cell % cfg.grid)});
    }
  } else if (cfg.env == "bandit") {
    base.arms = cfg.arms;
    base.dim = cfg.dim;
    base.obs_noise_var = cfg.obs_noise_var;
    base.quality = "uniform";
    envs::BanditBank bank = envs::BanditBank::make(cfg.arms, cfg.dim, derive_seed(cfg.seed, "bank"));
    base.bandit_phi = bank.phi;
    for (int i = 0; i < cfg.n_train + cfg.n_test; ++i) {
      envs::BanditTask t = envs::make_bandit_task(bank, derive_seed(cfg.seed, "task", (uint64_t)i));
      (i < cfg.n_train ? train_params : test_params).push_back(t.theta);
    }
  } else {
    base.noise_sd = 0.02;
    base.quality = "mixed";
    uint64_t cseed = derive_seed(cfg.seed, "calib");
    base.weak_gain = calibrate_pointreach_gain(0.3, base.noise_sd, cfg.horizon, cfg.calib_tasks,
                                               cfg.calib_rollouts, cseed);
    base.strong_gain = calibrate_pointreach_gain(0.8, base.noise_sd, cfg.horizon, cfg.calib_tasks,
                                                 cfg.calib_rollouts, cseed);
    for (int i = 0; i < cfg.n_train + cfg.n_test; ++i) {
      envs::PointReach t =
          envs::make_pointreach_task(derive_seed(cfg.seed, "task", (uint64_t)i), cfg.horizon);
      (i < cfg.n_train ? train_params : test_params).push_back(t.goal);
    }
  }

  GenResult out;
  out.train = make_split(base, train_ids, train_params, "train");
  out.test = make_split(base, test_ids, test_params, "test");
  for (Corpus* c : {&out.train, &out.test}) {
    if (cfg.env == "darkroom")
      fill_darkroom(*c, cfg, base.p);
    else if (cfg.env == "bandit")
      fill_bandit(*c, cfg);
    else
      fill_pointreach(*c, cfg);
  }
  return out;
}

}  // namespace icprl::prefgen
