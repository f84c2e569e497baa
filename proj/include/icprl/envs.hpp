#pragma once

#include <vector>

#include "icprl/common.hpp"

namespace icprl::envs {

struct StepResult {
  std::vector<double> s2;
  double r = 0.0;
  bool done = false;
};

// Sparse-reward gridworld. Cells are (x, y) with x, y in [0, grid); actions
// are 0 up (y+1), 1 down (y-1), 2 left (x-1), 3 right (x+1), 4 no-op, all
// clamped at walls. Reward 1 is paid exactly on the step that enters the goal
// cell; the goal is absorbing afterward with reward 0, so fixed-length data
// collection can keep stepping past arrival without changing the return.
struct DarkRoom {
  int grid = 10;
  int horizon = 100;
  int gx = 0, gy = 0;
  static constexpr int n_actions = 5;

  int n_cells() const { return grid * grid; }
  int cell_index(int x, int y) const { return x * grid + y; }
  bool at_goal(const std::vector<double>& s) const;
  StepResult step(const std::vector<double>& s, int a) const;
  // Uniform over cells except the goal, so every episode starts unfinished.
  std::vector<double> random_start(Rng& rng) const;
};

// Exact finite-horizon tables from backward induction: V[h][cell] for
// h in 0..H (V[H] = 0) and Q[h][cell][a] for h in 0..H-1, where h counts
// steps already taken.
struct DarkRoomOracle {
  DarkRoom task;
  std::vector<double> V;
  std::vector<double> Q;

  explicit DarkRoomOracle(const DarkRoom& t);
  double v(int h, int x, int y) const;
  double q(int h, int x, int y, int a) const;
  double adv(int h, int x, int y, int a) const { return q(h, x, y, a) - v(h, x, y); }
  // Among maximizers of Q, prefer the action whose next cell is nearest the
  // goal (Manhattan), then the lowest index. Optimal values are frequently
  // tied far from the horizon, and an arbitrary tie-break would make the
  // optimal-action labels uninformative.
  int best_action(int h, int x, int y) const;
};

// Tableless cross-checks: recursive tree search over every action sequence
// of the remaining horizon. Exponential; only for small grids and horizons.
double darkroom_value_bruteforce(const DarkRoom& t, int h, int x, int y);
double darkroom_q_bruteforce(const DarkRoom& t, int h, int x, int y, int a);

// Linear dueling bandits: one shared feature table phi, one theta per task,
// expected reward r(a) = theta . phi(a). Preferences follow a Bradley-Terry
// model on expected rewards; observed scalar rewards (used only by the
// reward-supervised baseline) carry Gaussian noise.
struct BanditBank {
  int arms = 10;
  int dim = 5;
  double obs_noise_var = 0.3;
  std::vector<double> phi;  // arms x dim, row-major

  static BanditBank make(int arms, int dim, uint64_t seed);
};

struct BanditTask {
  std::vector<double> theta;
  std::vector<double> r;
  int best = 0;
};

BanditTask make_bandit_task(const BanditBank& bank, uint64_t seed);
double bandit_pref_prob(const BanditTask& t, int a, int b);  // P(a preferred over b)
double bandit_observe(const BanditTask& t, const BanditBank& bank, int a, Rng& rng);
double bandit_weak_regret(const BanditTask& t, int a, int b);

// Continuous goal-reaching in a unit box. State seen by policies is the
// 6-vector (position, goal); actions are displacements clamped to max_step;
// reward is the negative distance to the goal after moving. Episodes run a
// fixed horizon.
struct PointReach {
  double box = 1.0;
  double max_step = 0.05;
  int horizon = 150;
  std::vector<double> goal;  // R^3

  std::vector<double> clamp_action(const std::vector<double>& a) const;
  StepResult step(const std::vector<double>& pos, const std::vector<double>& a) const;
  double dist_to_goal(const std::vector<double>& pos) const;
  std::vector<double> observe(const std::vector<double>& pos) const;  // pos ++ goal
};

PointReach make_pointreach_task(uint64_t seed, int horizon);
std::vector<double> pointreach_start(const PointReach& t, Rng& rng);

// Proportional controller: a = gain * (goal - pos) + noise_sd * eps, clamped.
// gain 1 / noise 0 moves straight at full step and is optimal for this
// dynamics; lower gains with noise give calibrated suboptimal behavior.
struct PointController {
  double gain = 1.0;
  double noise_sd = 0.0;
};

std::vector<double> controller_action(const PointReach& t, const PointController& c,
                                      const std::vector<double>& pos, Rng& rng);

double l2(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace icprl::envs
