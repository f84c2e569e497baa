#pragma once

// Plain data carried between the generators, the corpus files, and the model
// input encoders. States and actions are stored in their raw environment
// representation (grid coordinates, arm indices, R^3 vectors); the feature
// codecs expand them for model input.

#include <vector>

namespace icprl {

// One step-level comparison: two candidate actions at a state and the
// preference bit (+1: first action preferred, -1: second preferred).
struct StepPrefRecord {
  std::vector<double> s;
  std::vector<double> a;
  std::vector<double> a2;
  int y = 0;
};

struct IprlContext {
  std::vector<StepPrefRecord> recs;
};

struct Transition {
  std::vector<double> s;
  std::vector<double> a;
  double r = 0.0;
  std::vector<double> s2;
};

// Reward-annotated context; has_next distinguishes full transitions from
// (s, a, r) triples produced by reward relabeling.
struct RewardContext {
  std::vector<Transition> recs;
  bool has_next = true;
};

struct Traj {
  std::vector<std::vector<double>> s;
  std::vector<std::vector<double>> a;
  std::vector<double> r;  // empty when rewards are withheld

  size_t len() const { return s.size(); }
};

// Trajectory comparison with the preference bit (+1: t1 preferred).
struct TrajPairRecord {
  Traj t1, t2;
  int y = 0;

  const Traj& preferred() const { return y >= 0 ? t1 : t2; }
  const Traj& rejected() const { return y >= 0 ? t2 : t1; }
};

}  // namespace icprl
