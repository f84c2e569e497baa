#pragma once

#include <string>
#include <vector>

#include "icprl/envs.hpp"
#include "icprl/records.hpp"

namespace icprl::prefgen {

// Bradley-Terry draw: +1 (first item preferred) with probability
// sigmoid(score_a - score_b), else -1.
int bt_label(double score_a, double score_b, Rng& rng);

// With probability p take the oracle action, else uniform over all actions.
int mixed_policy_action(const envs::DarkRoomOracle& o, const std::vector<double>& s, int h,
                        double p, Rng& rng);

// Sequential step-preference protocol: at each step one proposal comes from
// the mixed-p policy and one from the uniform policy (slot order randomized
// per step, duplicates resampled), the label is a BT draw on optimal
// advantages, and the state follows the preferred action.
IprlContext darkroom_iprl_context(const envs::DarkRoomOracle& o, double p, int len, Rng& rng);

// Fixed-length mixed-policy rollout with true rewards attached (generator and
// evaluator use only; reward fields never reach corpus payloads).
Traj darkroom_rollout(const envs::DarkRoomOracle& o, double p, Rng& rng);

// Two independent mixed-p rollouts labeled by a BT draw on true returns.
TrajPairRecord darkroom_tprl_pair(const envs::DarkRoomOracle& o, double p, Rng& rng);

// Mixed-policy rollout stored as reward-annotated transitions (the
// reward-supervised baseline's context format).
RewardContext darkroom_reward_context(const envs::DarkRoomOracle& o, double p, int len, Rng& rng);

// Bisect p so that the mixed policy's mean return over sampled tasks hits
// target_fraction of the optimal return (which is 1 whenever every cell can
// reach the goal in time). Returns 0 when even the uniform policy exceeds the
// target.
double calibrate_darkroom_p(int grid, int horizon, double target_fraction, int n_tasks,
                            int rollouts_per_task, uint64_t seed);

// Uniformly random distinct arm pairs labeled by the task's BT probabilities;
// no states and no transitions.
IprlContext bandit_iprl_context(const envs::BanditTask& t, int arms, int len, Rng& rng);

// One-step distance improvement of the clamped action; stands in for the
// optimal advantage when labeling continuous step preferences.
double pointreach_adv_proxy(const envs::PointReach& t, const std::vector<double>& pos,
                            const std::vector<double>& a);

// Step-preference protocol with a weak and a strong proportional controller
// as proposers (slot order randomized); transitions follow the preferred
// action.
IprlContext pointreach_iprl_context(const envs::PointReach& t, const envs::PointController& weak,
                                    const envs::PointController& strong, int len, Rng& rng);

// Mean return of a controller over sampled tasks, and the gain whose
// proficiency (return normalized between a uniform-random policy at 0 and the
// full-gain controller at 1) hits the target. Noise is held fixed.
double pointreach_mean_return(double gain, double noise_sd, int horizon, int n_tasks,
                              int rollouts_per_task, uint64_t seed);
double calibrate_pointreach_gain(double target_proficiency, double noise_sd, int horizon,
                                 int n_tasks, int rollouts_per_task, uint64_t seed);

// ---- corpus ----

// A query state with its pretraining action label; h is the context step the
// state was visited at. Label-free frameworks never read astar.
struct QueryLabel {
  std::vector<double> s;
  int h = 0;
  std::vector<double> astar;
};

struct IprlBundle {
  int task_id = 0;
  IprlContext ctx;
  std::vector<QueryLabel> queries;
};

struct TprlBundle {
  int task_id = 0;
  TrajPairRecord pair;
  std::vector<QueryLabel> queries;
};

struct RewardBundle {
  int task_id = 0;
  RewardContext ctx;
  std::vector<QueryLabel> queries;
};

inline constexpr int kCorpusFormatVersion = 1;

// Everything needed to rebuild the tasks and interpret the records: env
// parameters, per-task parameters (goal cell, theta, or goal point), the
// split, and the calibrated behavior-quality knobs.
struct CorpusManifest {
  int format_version = kCorpusFormatVersion;
  std::string kind;     // iprl | tprl | reward
  std::string env;      // darkroom | bandit | pointreach
  std::string split;    // train | test
  std::string quality;  // low | medium | high | uniform
  double p = 0.0;       // mixed-policy parameter (darkroom)
  double weak_gain = 0.0, strong_gain = 0.0, noise_sd = 0.0;  // pointreach
  int grid = 0, horizon = 0, arms = 0, dim = 0;
  double obs_noise_var = 0.0;
  int contexts_per_task = 0;
  uint64_t seed = 0;
  std::vector<int> task_ids;
  std::vector<std::vector<double>> task_params;  // aligned with task_ids
  std::vector<double> bandit_phi;                // shared features, row-major

  std::string canonical() const;
  uint64_t config_hash() const { return fnv1a(canonical()); }
  // Hash of only the structural fields a trained model depends on (env, kind,
  // sizes, bandit features). Split, seed, quality, and behavior knobs are
  // excluded so a checkpoint can be scored on any corpus from the same family.
  uint64_t family_hash() const;
};

struct Corpus {
  CorpusManifest manifest;
  std::vector<IprlBundle> iprl;
  std::vector<TprlBundle> tprl;
  std::vector<RewardBundle> reward;

  int n_bundles() const {
    return (int)(iprl.size() + tprl.size() + reward.size());
  }
};

// Line-delimited JSON: manifest, one line per task definition, one line per
// bundle, then a trailing content-hash line covering every preceding byte.
// Writing asserts that no trajectory-preference payload carries rewards.
void save_corpus(const std::string& path, const Corpus& c);
Corpus load_corpus(const std::string& path);
// The hash recorded in the trailing line (recomputed and verified on load).
uint64_t corpus_content_hash(const std::string& path);

// Rebuild environment objects from a manifest.
envs::DarkRoom manifest_darkroom(const CorpusManifest& m, int task_index);
envs::BanditBank manifest_bandit_bank(const CorpusManifest& m);
envs::BanditTask manifest_bandit_task(const CorpusManifest& m, int task_index);
envs::PointReach manifest_pointreach(const CorpusManifest& m, int task_index);
int manifest_task_index(const CorpusManifest& m, int task_id);

// ---- generation drivers ----

struct GenConfig {
  std::string env;   // darkroom | bandit | pointreach
  std::string kind;  // iprl | tprl | reward
  std::string quality = "high";
  int n_train = 40, n_test = 10;
  int contexts_per_task = 100;  // iprl/reward contexts or tprl pairs
  int queries_per_context = 4;
  int grid = 6, horizon = 30;   // darkroom
  int arms = 10, dim = 5;       // bandit
  double obs_noise_var = 0.3;
  int calib_tasks = 12, calib_rollouts = 60;
  uint64_t seed = 1;
};

// Builds the train and test corpora for one configuration. Test goals are
// distinct held-out cells; train goals are drawn from the remaining cells
// (with replacement when the grid is smaller than the task count).
struct GenResult {
  Corpus train;
  Corpus test;
};
GenResult generate(const GenConfig& cfg);

double quality_fraction(const std::string& quality);  // low .2, medium .4, high .8

}  // namespace icprl::prefgen
