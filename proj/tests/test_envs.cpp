#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <set>

#include "doctest.h"
#include "icprl/envs.hpp"

using namespace icprl;
using namespace icprl::envs;

TEST_CASE("darkroom stepping: entry reward, absorption, wall clamps") {
  DarkRoom t{6, 30, 3, 4};

  StepResult in = t.step({3.0, 3.0}, 0);  // up into the goal
  CHECK(in.s2 == std::vector<double>{3.0, 4.0});
  CHECK(in.r == 1.0);
  CHECK(in.done);

  StepResult still = t.step({2.0, 2.0}, 4);
  CHECK(still.s2 == std::vector<double>{2.0, 2.0});
  CHECK(still.r == 0.0);
  CHECK_FALSE(still.done);

  StepResult wall = t.step({0.0, 0.0}, 2);  // left at the west wall
  CHECK(wall.s2 == std::vector<double>{0.0, 0.0});
  CHECK(wall.r == 0.0);

  StepResult absorbed = t.step({3.0, 4.0}, 3);
  CHECK(absorbed.s2 == std::vector<double>{3.0, 4.0});
  CHECK(absorbed.r == 0.0);
  CHECK(absorbed.done);

  CHECK_THROWS_AS(t.step({2.0, 2.0}, 5), std::invalid_argument);
  CHECK_THROWS_AS(t.step({9.0, 0.0}, 0), std::invalid_argument);
}

TEST_CASE("darkroom starts are uniform over non-goal cells") {
  DarkRoom t{4, 8, 1, 2};
  Rng rng = make_rng(3);
  std::set<std::pair<int, int>> seen;
  for (int i = 0; i < 2000; i++) {
    auto s = t.random_start(rng);
    CHECK_FALSE(t.at_goal(s));
    seen.insert({(int)s[0], (int)s[1]});
  }
  CHECK((int)seen.size() == t.n_cells() - 1);
}

TEST_CASE("dp oracle: closed-form values and goal-adjacent advantages") {
  DarkRoom t{4, 8, 2, 1};
  DarkRoomOracle o(t);

  for (int h = 0; h < t.horizon; h++)
    for (int x = 0; x < t.grid; x++)
      for (int y = 0; y < t.grid; y++) {
        int dist = std::abs(x - t.gx) + std::abs(y - t.gy);
        double want = dist == 0 ? 0.0 : (dist <= t.horizon - h ? 1.0 : 0.0);
        CHECK(o.v(h, x, y) == want);
      }

  // adjacent cell, stepping in: Q = 1 at every h, so A = 1 - V
  CHECK(o.q(0, 2, 0, 0) == 1.0);
  CHECK(o.adv(0, 2, 0, 0) == 1.0 - o.v(0, 2, 0));
  // adjacent with one step left: entering keeps A = 0, any other action
  // forfeits the goal and carries A = -1
  CHECK(o.q(t.horizon - 1, 2, 0, 0) == 1.0);
  CHECK(o.adv(t.horizon - 1, 2, 0, 0) == 0.0);
  CHECK(o.adv(t.horizon - 1, 2, 0, 4) == -1.0);

  // at the goal everything is absorbed
  for (int a = 0; a < 5; a++) CHECK(o.q(3, 2, 1, a) == 0.0);
}

TEST_CASE("dp oracle equals exhaustive tree search on a small task") {
  for (int gi : {0, 5, 8}) {
    DarkRoom t{3, 6, gi / 3, gi % 3};
    DarkRoomOracle o(t);
    for (int x = 0; x < 3; x++)
      for (int y = 0; y < 3; y++)
        for (int h = 0; h <= t.horizon; h++) {
          CHECK(o.v(h, x, y) == darkroom_value_bruteforce(t, h, x, y));
          if (h < t.horizon)
            for (int a = 0; a < 5; a++)
              CHECK(o.q(h, x, y, a) == darkroom_q_bruteforce(t, h, x, y, a));
        }
  }
}

TEST_CASE("optimal action always walks toward the goal") {
  DarkRoom t{6, 30, 4, 1};
  DarkRoomOracle o(t);
  for (int h : {0, 10, 29})
    for (int x = 0; x < 6; x++)
      for (int y = 0; y < 6; y++) {
        if (x == t.gx && y == t.gy) continue;
        int a = o.best_action(h, x, y);
        StepResult r = t.step({(double)x, (double)y}, a);
        int before = std::abs(x - t.gx) + std::abs(y - t.gy);
        int after = std::abs((int)r.s2[0] - t.gx) + std::abs((int)r.s2[1] - t.gy);
        CHECK(after == before - 1);
        CHECK(o.adv(h, x, y, a) == 0.0);
      }
}

TEST_CASE("bandit bank: linear rewards, preference probabilities, noise") {
  BanditBank bank = BanditBank::make(10, 5, 42);
  CHECK(bank.phi.size() == 50);
  BanditTask t = make_bandit_task(bank, 7);
  CHECK(t.r.size() == 10);
  for (int a = 0; a < 10; a++) {
    double dot = 0.0;
    for (int k = 0; k < 5; k++) dot += t.theta[k] * bank.phi[(size_t)a * 5 + k];
    CHECK(t.r[a] == dot);
    CHECK(t.r[a] <= t.r[t.best]);
  }

  BanditTask flat;
  flat.theta = {0.0};
  flat.r = {0.4, 0.4, 1.0};
  flat.best = 2;
  CHECK(bandit_pref_prob(flat, 0, 1) == 0.5);
  CHECK(bandit_pref_prob(flat, 2, 0) == doctest::Approx(1.0 / (1.0 + std::exp(-0.6))).epsilon(1e-15));
  CHECK(bandit_pref_prob(flat, 0, 2) + bandit_pref_prob(flat, 2, 0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(bandit_pref_prob(flat, 1, 1), std::invalid_argument);

  CHECK(bandit_weak_regret(flat, 2, 0) == 0.0);
  CHECK(bandit_weak_regret(flat, 0, 1) == doctest::Approx(0.6));
  CHECK(bandit_weak_regret(flat, 0, 1) == bandit_weak_regret(flat, 1, 0));

  Rng rng = make_rng(9);
  int n = 10000;
  double sum = 0.0;
  for (int i = 0; i < n; i++) sum += bandit_observe(t, bank, 3, rng);
  double se = std::sqrt(bank.obs_noise_var / n);
  CHECK(std::fabs(sum / n - t.r[3]) < 3 * se);

  BanditBank again = BanditBank::make(10, 5, 42);
  CHECK(again.phi == bank.phi);
  CHECK(make_bandit_task(bank, 7).theta == t.theta);
}

TEST_CASE("pointreach: clamping, reward gradient, boundary") {
  PointReach t = make_pointreach_task(11, 150);
  REQUIRE(t.goal.size() == 3);
  for (double g : t.goal) CHECK((g >= 0.0 && g <= 1.0));

  std::vector<double> big = {3.0, 0.0, 0.0};
  auto c = t.clamp_action(big);
  CHECK(c[0] == doctest::Approx(0.05).epsilon(1e-15));
  std::vector<double> small = {0.01, -0.02, 0.03};
  CHECK(t.clamp_action(small) == small);

  std::vector<double> pos = {0.5, 0.5, 0.5};
  StepResult stay = t.step(pos, {0.0, 0.0, 0.0});
  CHECK(stay.s2 == pos);
  CHECK(stay.r == -t.dist_to_goal(pos));
  CHECK_FALSE(stay.done);

  std::vector<double> toward(3);
  for (int i = 0; i < 3; i++) toward[i] = t.goal[i] - pos[i];
  StepResult closer = t.step(pos, toward);
  CHECK(closer.r > stay.r);

  StepResult edge = t.step({0.0, 0.0, 0.0}, {-0.05, 0.0, 0.0});
  CHECK(edge.s2[0] == 0.0);

  auto obs = t.observe(pos);
  REQUIRE(obs.size() == 6);
  CHECK(obs[3] == t.goal[0]);
}

TEST_CASE("optimal controller: monotone rewards, reaches from unit distance") {
  PointReach t = make_pointreach_task(13, 150);
  t.goal = {0.9, 0.9, 0.9};
  PointController opt{1.0, 0.0};
  Rng rng = make_rng(1);

  std::vector<double> pos = {0.9 - 1.0 / std::sqrt(3.0), 0.9 - 1.0 / std::sqrt(3.0),
                             0.9 - 1.0 / std::sqrt(3.0)};
  CHECK(t.dist_to_goal(pos) == doctest::Approx(1.0));
  double prev_r = -1e9;
  int reached_at = -1;
  for (int h = 0; h < 60; h++) {
    StepResult r = t.step(pos, controller_action(t, opt, pos, rng));
    CHECK(r.r >= prev_r);
    prev_r = r.r;
    pos = r.s2;
    if (reached_at < 0 && t.dist_to_goal(pos) <= 0.05) reached_at = h;
  }
  CHECK(reached_at >= 0);
  CHECK(t.dist_to_goal(pos) < 1e-9);

  // noisy low-gain controller stays valid but is slower
  PointController weak{0.2, 0.02};
  std::vector<double> p2 = {0.1, 0.1, 0.1};
  double d0 = t.dist_to_goal(p2);
  for (int h = 0; h < 60; h++) p2 = t.step(p2, controller_action(t, weak, p2, rng)).s2;
  CHECK(t.dist_to_goal(p2) < d0);
}
