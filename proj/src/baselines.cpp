#include "icprl/baselines.hpp"

#include <algorithm>
#include <cmath>

namespace icprl::baselines {

DtsState DtsState::make(int arms, double alpha) {
  require(arms >= 2, "dts: need at least two arms");
  require(alpha > 0.5, "dts: alpha must exceed one half");
  DtsState st;
  st.arms = arms;
  st.alpha = alpha;
  st.w.assign(arms, std::vector<long>(arms, 0));
  return st;
}

namespace {

double beta_sample(long wins, long losses, Rng& rng) {
  std::gamma_distribution<double> ga((double)wins + 1.0, 1.0);
  std::gamma_distribution<double> gb((double)losses + 1.0, 1.0);
  double x = ga(rng), y = gb(rng);
  return x / (x + y);
}

// Upper/lower confidence bounds on P(i beats j); uncompared pairs are
// maximally plausible in both directions (x/0 reads as 1).
double ucb(const DtsState& st, int i, int j) {
  long n = st.w[i][j] + st.w[j][i];
  if (n == 0) return 2.0;
  return (double)st.w[i][j] / n + std::sqrt(st.alpha * std::log((double)st.rounds) / n);
}

double lcb(const DtsState& st, int i, int j) {
  long n = st.w[i][j] + st.w[j][i];
  if (n == 0) return 0.0;
  return (double)st.w[i][j] / n - std::sqrt(st.alpha * std::log((double)st.rounds) / n);
}

}  // namespace

std::pair<int, int> dts_select_pair(const DtsState& st, Rng& rng) {
  int k = st.arms;
  require(k >= 2, "dts: uninitialized state");

  // Copeland pruning: arms with the most confidently-winnable matchups.
  std::vector<int> copeland(k, 0);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      if (i != j && ucb(st, i, j) > 0.5) copeland[i]++;
  int top = *std::max_element(copeland.begin(), copeland.end());

  // One posterior sample per unordered pair, voted Copeland-style.
  std::vector<std::vector<double>> theta(k, std::vector<double>(k, 0.5));
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) {
      double t = beta_sample(st.w[i][j], st.w[j][i], rng);
      theta[i][j] = t;
      theta[j][i] = 1.0 - t;
    }
  std::vector<int> best;
  int best_votes = -1;
  for (int i = 0; i < k; ++i) {
    if (copeland[i] != top) continue;
    int votes = 0;
    for (int j = 0; j < k; ++j)
      if (j != i && theta[i][j] > 0.5) votes++;
    if (votes > best_votes) {
      best_votes = votes;
      best.clear();
    }
    if (votes == best_votes) best.push_back(i);
  }
  int a = best[rng() % best.size()];

  // Second arm: strongest fresh posterior sample among plausible beaters of
  // the first (all rivals when nothing is plausible).
  std::vector<double> fresh(k, 0.0);
  for (int i = 0; i < k; ++i)
    if (i != a) fresh[i] = beta_sample(st.w[i][a], st.w[a][i], rng);
  std::vector<int> candidates;
  for (int i = 0; i < k; ++i)
    if (i != a && lcb(st, i, a) <= 0.5) candidates.push_back(i);
  if (candidates.empty())
    for (int i = 0; i < k; ++i)
      if (i != a) candidates.push_back(i);
  int a2 = candidates[0];
  for (int i : candidates)
    if (fresh[i] > fresh[a2]) a2 = i;
  return {a, a2};
}

void dts_update(DtsState& st, int a, int a2, int y) {
  require(a >= 0 && a < st.arms && a2 >= 0 && a2 < st.arms, "dts: arm out of range");
  require(a != a2, "dts: cannot compare an arm with itself");
  if (y > 0)
    st.w[a][a2]++;
  else
    st.w[a2][a]++;
  st.rounds++;
}

void dts_warm_start(DtsState& st, const IprlContext& ctx) {
  for (const StepPrefRecord& rec : ctx.recs) {
    require(rec.a.size() == 1 && rec.a2.size() == 1, "dts: comparisons must be arm indices");
    dts_update(st, (int)rec.a[0], (int)rec.a2[0], rec.y);
  }
}

// ---- tabular control baseline ----

namespace {

inline int qidx(int cells, int h, int cell, int a) { return (h * cells + cell) * 5 + a; }

int cell_of(const envs::DarkRoom& t, const std::vector<double>& s) {
  return t.cell_index((int)std::llround(s[0]), (int)std::llround(s[1]));
}

std::vector<int> argmax_set(const double* qs) {
  double best = *std::max_element(qs, qs + 5);
  std::vector<int> out;
  for (int a = 0; a < 5; ++a)
    if (qs[a] == best) out.push_back(a);
  return out;
}

}  // namespace

int TabularPolicy::action(int h, const std::vector<double>& s, Rng& rng) const {
  require(h >= 0 && h < horizon, "tabular policy: step out of range");
  int cells = grid * grid;
  int cell = (int)std::llround(s[0]) * grid + (int)std::llround(s[1]);
  std::vector<int> ties = argmax_set(&q[qidx(cells, h, cell, 0)]);
  return ties[rng() % ties.size()];
}

double exact_greedy_return(const envs::DarkRoom& task, const std::vector<double>& q) {
  int cells = task.n_cells(), h_max = task.horizon;
  require((int)q.size() == h_max * cells * 5, "exact_greedy_return: table size mismatch");
  // Exact policy evaluation of the uniform-over-ties greedy policy; the goal
  // cell is absorbing with zero reward so its value is zero.
  std::vector<double> next(cells, 0.0), cur(cells, 0.0);
  for (int h = h_max - 1; h >= 0; --h) {
    for (int x = 0; x < task.grid; ++x)
      for (int y = 0; y < task.grid; ++y) {
        int cell = task.cell_index(x, y);
        if (x == task.gx && y == task.gy) {
          cur[cell] = 0.0;
          continue;
        }
        std::vector<int> ties = argmax_set(&q[qidx(cells, h, cell, 0)]);
        double v = 0.0;
        for (int a : ties) {
          envs::StepResult st = task.step({(double)x, (double)y}, a);
          v += st.r + next[cell_of(task, st.s2)];
        }
        cur[cell] = v / ties.size();
      }
    std::swap(cur, next);
  }
  double total = 0.0;
  for (int x = 0; x < task.grid; ++x)
    for (int y = 0; y < task.grid; ++y)
      if (x != task.gx || y != task.gy) total += next[task.cell_index(x, y)];
  return total / (cells - 1);
}

QLearnResult tabular_q_learning(const envs::DarkRoom& task, int episodes, Rng& rng,
                                const QLearnConfig& cfg) {
  require(episodes >= 0, "tabular_q_learning: negative episodes");
  require(cfg.lr > 0.0 && cfg.lr <= 1.0, "tabular_q_learning: lr must be in (0, 1]");
  require(cfg.eps >= 0.0 && cfg.eps <= 1.0, "tabular_q_learning: eps must be in [0, 1]");
  require(cfg.checkpoint_every > 0, "tabular_q_learning: checkpoint interval must be positive");
  int cells = task.n_cells();
  std::vector<double> q((size_t)task.horizon * cells * 5, 0.0);

  QLearnResult res;
  res.policy.grid = task.grid;
  res.policy.horizon = task.horizon;
  double best = -1.0;
  auto checkpoint = [&](int ep) {
    double ret = exact_greedy_return(task, q);
    res.return_curve.push_back(ret);
    res.checkpoint_episodes.push_back(ep);
    if (ret > best) {
      best = ret;
      res.policy.q = q;
    }
  };

  std::uniform_real_distribution<double> coin(0.0, 1.0);
  checkpoint(0);
  for (int ep = 1; ep <= episodes; ++ep) {
    std::vector<double> s = task.random_start(rng);
    for (int h = 0; h < task.horizon; ++h) {
      int cell = cell_of(task, s);
      int a;
      if (coin(rng) < cfg.eps) {
        a = (int)(rng() % 5);
      } else {
        std::vector<int> ties = argmax_set(&q[qidx(cells, h, cell, 0)]);
        a = ties[rng() % ties.size()];
      }
      envs::StepResult st = task.step(s, a);
      double bootstrap = 0.0;
      if (h + 1 < task.horizon) {
        const double* nq = &q[qidx(cells, h + 1, cell_of(task, st.s2), 0)];
        bootstrap = *std::max_element(nq, nq + 5);
      }
      double& slot = q[qidx(cells, h, cell, a)];
      slot += cfg.lr * (st.r + bootstrap - slot);
      s = st.s2;
    }
    if (ep % cfg.checkpoint_every == 0 || ep == episodes) checkpoint(ep);
  }
  return res;
}

// ---- Monte Carlo evaluation ----

MeanStderr mc_mean(const std::vector<double>& xs) {
  require(!xs.empty(), "mc_mean: no samples");
  MeanStderr out;
  out.n = (long)xs.size();
  for (double x : xs) out.mean += x;
  out.mean /= out.n;
  if (out.n > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.stderr_ = std::sqrt(ss / (out.n - 1)) / std::sqrt((double)out.n);
  }
  return out;
}

MeanStderr behavioral_return(const envs::DarkRoom& task, const DarkPolicy& policy, int rollouts,
                             Rng& rng) {
  require(rollouts > 0, "behavioral_return: need rollouts");
  std::vector<double> rets(rollouts, 0.0);
  for (int i = 0; i < rollouts; ++i) {
    std::vector<double> s = task.random_start(rng);
    for (int h = 0; h < task.horizon; ++h) {
      envs::StepResult st = task.step(s, policy(h, s, rng));
      rets[i] += st.r;
      s = st.s2;
    }
  }
  return mc_mean(rets);
}

MeanStderr behavioral_return(const envs::PointReach& task, const PointPolicy& policy, int rollouts,
                             Rng& rng) {
  require(rollouts > 0, "behavioral_return: need rollouts");
  std::vector<double> rets(rollouts, 0.0);
  for (int i = 0; i < rollouts; ++i) {
    std::vector<double> pos = envs::pointreach_start(task, rng);
    for (int h = 0; h < task.horizon; ++h) {
      envs::StepResult st = task.step(pos, policy(h, task.observe(pos), rng));
      rets[i] += st.r;
      pos = st.s2;
    }
  }
  return mc_mean(rets);
}

}  // namespace icprl::baselines
