#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "icprl/envs.hpp"
#include "icprl/records.hpp"

namespace icprl::baselines {

// Double Thompson sampling state for dueling bandits: a pairwise win-count
// matrix with a symmetric Beta posterior per ordered pair. The first arm comes
// from a Copeland-style vote over posterior samples restricted to arms that
// survive upper-confidence pruning; the second arm is the most plausible
// beater of the first under fresh posterior samples.
struct DtsState {
  int arms = 0;
  double alpha = 0.51;               // confidence width in the pruning bounds
  std::vector<std::vector<long>> w;  // w[i][j] counts i-beats-j observations
  long rounds = 0;                   // total comparisons recorded

  static DtsState make(int arms, double alpha = 0.51);
};

std::pair<int, int> dts_select_pair(const DtsState& st, Rng& rng);

// y > 0 records a beating a2, otherwise a2 beating a. a must differ from a2.
void dts_update(DtsState& st, int a, int a2, int y);

// Seeds the win counts from an observed comparison history.
void dts_warm_start(DtsState& st, const IprlContext& ctx);

// ---- tabular control baseline ----

struct QLearnConfig {
  double lr = 1.0;   // exact for deterministic transitions
  double eps = 0.2;  // exploration rate of the behavior policy
  int checkpoint_every = 25;
};

// Greedy policy over a horizon-indexed tabular Q; ties sample uniformly, so
// an untrained table acts exactly like the uniform-random policy.
struct TabularPolicy {
  int grid = 0, horizon = 0;
  std::vector<double> q;  // (h, cell, action), row-major

  int action(int h, const std::vector<double>& s, Rng& rng) const;
};

struct QLearnResult {
  TabularPolicy policy;               // from the best checkpoint
  std::vector<double> return_curve;   // exact greedy mean return per checkpoint
  std::vector<int> checkpoint_episodes;
};

// Finite-horizon Q-learning with an epsilon-greedy behavior policy. Each
// checkpoint evaluates the current greedy policy exactly (deterministic
// transitions, uniform tie-splitting, mean over all non-goal starts) and the
// best checkpoint's table is returned.
QLearnResult tabular_q_learning(const envs::DarkRoom& task, int episodes, Rng& rng,
                                const QLearnConfig& cfg = {});

// Exact mean return over uniformly random non-goal starts of the greedy
// policy induced by q (uniform over argmax ties).
double exact_greedy_return(const envs::DarkRoom& task, const std::vector<double>& q);

// ---- Monte Carlo evaluation ----

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;  // sample stddev / sqrt(n)
  long n = 0;
};

MeanStderr mc_mean(const std::vector<double>& xs);

using DarkPolicy = std::function<int(int h, const std::vector<double>& s, Rng& rng)>;
using PointPolicy = std::function<std::vector<double>(int h, const std::vector<double>& obs, Rng& rng)>;

MeanStderr behavioral_return(const envs::DarkRoom& task, const DarkPolicy& policy, int rollouts,
                             Rng& rng);
MeanStderr behavioral_return(const envs::PointReach& task, const PointPolicy& policy, int rollouts,
                             Rng& rng);

}  // namespace icprl::baselines
