#include "icprl/envs.hpp"

#include <algorithm>
#include <cmath>

namespace icprl::envs {

namespace {

int clampi(int v, int lo, int hi) { return std::max(lo, std::min(hi, v)); }

void move(int grid, int a, int& x, int& y) {
  switch (a) {
    case 0: y = clampi(y + 1, 0, grid - 1); break;
    case 1: y = clampi(y - 1, 0, grid - 1); break;
    case 2: x = clampi(x - 1, 0, grid - 1); break;
    case 3: x = clampi(x + 1, 0, grid - 1); break;
    case 4: break;
    default: throw std::invalid_argument("darkroom: action must be in [0,5)");
  }
}

}  // namespace

bool DarkRoom::at_goal(const std::vector<double>& s) const {
  return (int)std::llround(s[0]) == gx && (int)std::llround(s[1]) == gy;
}

StepResult DarkRoom::step(const std::vector<double>& s, int a) const {
  require(s.size() == 2, "darkroom: state must be (x, y)");
  int x = (int)std::llround(s[0]), y = (int)std::llround(s[1]);
  require(x >= 0 && x < grid && y >= 0 && y < grid, "darkroom: state off the grid");
  if (x == gx && y == gy) return {{(double)x, (double)y}, 0.0, true};
  move(grid, a, x, y);
  bool entered = x == gx && y == gy;
  return {{(double)x, (double)y}, entered ? 1.0 : 0.0, entered};
}

std::vector<double> DarkRoom::random_start(Rng& rng) const {
  std::uniform_int_distribution<int> cell(0, n_cells() - 2);
  int k = cell(rng);
  if (k >= cell_index(gx, gy)) k++;
  return {(double)(k / grid), (double)(k % grid)};
}

DarkRoomOracle::DarkRoomOracle(const DarkRoom& t) : task(t) {
  const int S = t.n_cells(), H = t.horizon;
  V.assign((size_t)(H + 1) * S, 0.0);
  Q.assign((size_t)H * S * DarkRoom::n_actions, 0.0);
  for (int h = H - 1; h >= 0; h--) {
    for (int x = 0; x < t.grid; x++) {
      for (int y = 0; y < t.grid; y++) {
        int c = t.cell_index(x, y);
        double best = 0.0;
        for (int a = 0; a < DarkRoom::n_actions; a++) {
          StepResult r = t.step({(double)x, (double)y}, a);
          int c2 = t.cell_index((int)r.s2[0], (int)r.s2[1]);
          double qv = r.r + V[(size_t)(h + 1) * S + c2];
          Q[((size_t)h * S + c) * DarkRoom::n_actions + a] = qv;
          best = std::max(best, qv);
        }
        V[(size_t)h * S + c] = best;
      }
    }
  }
}

double DarkRoomOracle::v(int h, int x, int y) const {
  require(h >= 0 && h <= task.horizon, "oracle: step index out of range");
  return V[(size_t)h * task.n_cells() + task.cell_index(x, y)];
}

double DarkRoomOracle::q(int h, int x, int y, int a) const {
  require(h >= 0 && h < task.horizon, "oracle: step index out of range");
  require(a >= 0 && a < DarkRoom::n_actions, "oracle: action out of range");
  return Q[((size_t)h * task.n_cells() + task.cell_index(x, y)) * DarkRoom::n_actions + a];
}

int DarkRoomOracle::best_action(int h, int x, int y) const {
  int best = -1;
  double best_q = 0.0;
  int best_dist = 0;
  for (int a = 0; a < DarkRoom::n_actions; a++) {
    double qa = q(h, x, y, a);
    StepResult r = task.step({(double)x, (double)y}, a);
    int dist = std::abs((int)r.s2[0] - task.gx) + std::abs((int)r.s2[1] - task.gy);
    if (best < 0 || qa > best_q || (qa == best_q && dist < best_dist)) {
      best = a;
      best_q = qa;
      best_dist = dist;
    }
  }
  return best;
}

double darkroom_value_bruteforce(const DarkRoom& t, int h, int x, int y) {
  if (h >= t.horizon || (x == t.gx && y == t.gy)) return 0.0;
  double best = 0.0;
  for (int a = 0; a < DarkRoom::n_actions; a++)
    best = std::max(best, darkroom_q_bruteforce(t, h, x, y, a));
  return best;
}

double darkroom_q_bruteforce(const DarkRoom& t, int h, int x, int y, int a) {
  StepResult r = t.step({(double)x, (double)y}, a);
  return r.r + darkroom_value_bruteforce(t, h + 1, (int)r.s2[0], (int)r.s2[1]);
}

BanditBank BanditBank::make(int arms, int dim, uint64_t seed) {
  require(arms >= 2 && dim >= 1, "bandit: need at least 2 arms and 1 feature dim");
  BanditBank b;
  b.arms = arms;
  b.dim = dim;
  Rng rng = make_rng(derive_seed(seed, "bandit_features"));
  std::normal_distribution<double> g(0.0, 1.0 / std::sqrt((double)dim));
  b.phi.resize((size_t)arms * dim);
  for (double& v : b.phi) v = g(rng);
  return b;
}

BanditTask make_bandit_task(const BanditBank& bank, uint64_t seed) {
  BanditTask t;
  Rng rng = make_rng(derive_seed(seed, "bandit_theta"));
  std::normal_distribution<double> g(0.0, 1.0 / std::sqrt((double)bank.dim));
  t.theta.resize(bank.dim);
  for (double& v : t.theta) v = g(rng);
  t.r.resize(bank.arms);
  for (int a = 0; a < bank.arms; a++) {
    double s = 0.0;
    for (int k = 0; k < bank.dim; k++) s += t.theta[k] * bank.phi[(size_t)a * bank.dim + k];
    t.r[a] = s;
    if (s > t.r[t.best]) t.best = a;
  }
  return t;
}

double bandit_pref_prob(const BanditTask& t, int a, int b) {
  require(a != b, "bandit: preference needs two distinct arms");
  require(a >= 0 && a < (int)t.r.size() && b >= 0 && b < (int)t.r.size(),
          "bandit: arm out of range");
  return 1.0 / (1.0 + std::exp(-(t.r[a] - t.r[b])));
}

double bandit_observe(const BanditTask& t, const BanditBank& bank, int a, Rng& rng) {
  require(a >= 0 && a < (int)t.r.size(), "bandit: arm out of range");
  std::normal_distribution<double> g(t.r[a], std::sqrt(bank.obs_noise_var));
  return g(rng);
}

double bandit_weak_regret(const BanditTask& t, int a, int b) {
  require(a >= 0 && a < (int)t.r.size() && b >= 0 && b < (int)t.r.size(),
          "bandit: arm out of range");
  double star = t.r[t.best];
  return std::min(star - t.r[a], star - t.r[b]);
}

double l2(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() == b.size(), "l2: size mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); i++) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

std::vector<double> PointReach::clamp_action(const std::vector<double>& a) const {
  require(a.size() == 3, "pointreach: action must be in R^3");
  double n = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
  if (n <= max_step) return a;
  double k = max_step / n;
  return {a[0] * k, a[1] * k, a[2] * k};
}

StepResult PointReach::step(const std::vector<double>& pos, const std::vector<double>& a) const {
  require(pos.size() == 3, "pointreach: position must be in R^3");
  std::vector<double> d = clamp_action(a);
  std::vector<double> p2(3);
  for (int i = 0; i < 3; i++) p2[i] = std::clamp(pos[i] + d[i], 0.0, box);
  double r = -dist_to_goal(p2);
  return {std::move(p2), r, false};
}

double PointReach::dist_to_goal(const std::vector<double>& pos) const { return l2(pos, goal); }

std::vector<double> PointReach::observe(const std::vector<double>& pos) const {
  std::vector<double> s = pos;
  s.insert(s.end(), goal.begin(), goal.end());
  return s;
}

PointReach make_pointreach_task(uint64_t seed, int horizon) {
  PointReach t;
  t.horizon = horizon;
  Rng rng = make_rng(derive_seed(seed, "pointreach_goal"));
  std::uniform_real_distribution<double> u(0.0, t.box);
  t.goal = {u(rng), u(rng), u(rng)};
  return t;
}

std::vector<double> pointreach_start(const PointReach& t, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, t.box);
  return {u(rng), u(rng), u(rng)};
}

std::vector<double> controller_action(const PointReach& t, const PointController& c,
                                      const std::vector<double>& pos, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> a(3);
  for (int i = 0; i < 3; i++) {
    a[i] = c.gain * (t.goal[i] - pos[i]);
    if (c.noise_sd > 0.0) a[i] += c.noise_sd * g(rng);
  }
  return t.clamp_action(a);
}

}  // namespace icprl::envs
