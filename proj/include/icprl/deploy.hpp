#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "icprl/baselines.hpp"
#include "icprl/frameworks.hpp"

namespace icprl::deploy {

// One evaluation episode: per-step values (reward or weak regret) plus a
// summary recomputable from them.
struct MetricsRecord {
  std::string run_id;
  std::string framework;  // dpt | dp2t | icpo | icrg | dts | behavioral | uniform | dirichlet
  std::string env;        // darkroom | bandit | pointreach
  std::string kind;       // return | regret
  int task_id = -1;
  uint64_t seed = 0;
  std::string quality;  // context quality label, empty when not applicable
  std::vector<double> steps;
  double mean = 0.0;
  double stderr_ = 0.0;

  void finalize();  // recomputes mean/stderr from steps
};

void save_metrics(const std::vector<MetricsRecord>& records, const std::string& path);
// Verifies each stored summary against its raw values.
std::vector<MetricsRecord> load_metrics(const std::string& path);

// ---- conditioned action policies ----

// Chooses raw env actions given only the observation; the frozen context a
// model conditions on is fixed at construction, so realized deployment
// rewards can never flow into model inputs.
class ActionPolicy {
 public:
  virtual ~ActionPolicy() = default;
  virtual std::vector<double> act(int h, const std::vector<double>& obs, Rng& rng) const = 0;
};

class FunctionPolicy : public ActionPolicy {
 public:
  using Fn = std::function<std::vector<double>(int, const std::vector<double>&, Rng&)>;
  explicit FunctionPolicy(Fn fn) : fn_(std::move(fn)) {}
  std::vector<double> act(int h, const std::vector<double>& obs, Rng& rng) const override {
    return fn_(h, obs, rng);
  }

 private:
  Fn fn_;
};

// Policy model conditioned on a frozen step-preference context.
class PolicyOnIprlContext : public ActionPolicy {
 public:
  PolicyOnIprlContext(const model::SeqModel& m, model::Codec codec, IprlContext ctx,
                      bool argmax = false);
  std::vector<double> act(int h, const std::vector<double>& obs, Rng& rng) const override;
  const IprlContext& context() const { return ctx_; }

 private:
  const model::SeqModel& m_;
  model::Codec codec_;
  IprlContext ctx_;
  bool argmax_;
};

// Policy model conditioned on a frozen trajectory-preference pair.
class PolicyOnTprlContext : public ActionPolicy {
 public:
  PolicyOnTprlContext(const model::SeqModel& m, model::Codec codec, TrajPairRecord pair,
                      bool argmax = false);
  std::vector<double> act(int h, const std::vector<double>& obs, Rng& rng) const override;
  const TrajPairRecord& context() const { return pair_; }

 private:
  const model::SeqModel& m_;
  model::Codec codec_;
  TrajPairRecord pair_;
  bool argmax_;
};

// Policy model conditioned on a frozen reward-annotated context (behavior
// rewards from a corpus, or model-estimated ones).
class PolicyOnRewardContext : public ActionPolicy {
 public:
  PolicyOnRewardContext(const model::SeqModel& m, model::Codec codec, RewardContext ctx,
                        bool argmax = false);
  std::vector<double> act(int h, const std::vector<double>& obs, Rng& rng) const override;
  const RewardContext& context() const { return ctx_; }

 private:
  const model::SeqModel& m_;
  model::Codec codec_;
  RewardContext ctx_;
  bool argmax_;
};

// Samples a discrete action from logits by inverse CDF (or the lowest-index
// argmax); exposed for the pickers and tests.
int sample_discrete(const std::vector<double>& logits, bool argmax, Rng& rng);

struct RolloutSpec {
  std::string run_id;
  std::string framework;
  std::string quality;
  int task_id = -1;
  uint64_t seed = 1;
};

// Episode rollout with the conditioned policy; true rewards are recorded for
// evaluation only and never reach the policy.
MetricsRecord deploy_iprl(const ActionPolicy& policy, const envs::DarkRoom& task,
                          const RolloutSpec& spec);
MetricsRecord deploy_iprl(const ActionPolicy& policy, const envs::PointReach& task,
                          const RolloutSpec& spec);

// Labels the raw (rewardless) behavior trajectory with the reward model
// conditioned on the test pair, then rolls out the value-pretrained policy
// conditioned on the annotated result. Returns the annotated context through
// *annotated when given.
MetricsRecord deploy_icrg(const model::SeqModel& reward_model, const model::SeqModel& dit_policy,
                          const model::Codec& codec, const TrajPairRecord& test_pair,
                          const Traj& raw_behavior, const envs::DarkRoom& task,
                          const RolloutSpec& spec, bool argmax = false,
                          RewardContext* annotated = nullptr);

// ---- dueling deployment ----

inline double weak_regret(const envs::BanditTask& t, int a, int b) {
  return envs::bandit_weak_regret(t, a, b);
}

// Online pair selection: pick a duel, then learn from the observed preference.
class ArmPicker {
 public:
  virtual ~ArmPicker() = default;
  virtual std::pair<int, int> pick(Rng& rng) = 0;
  virtual void observe(int a, int a2, int y) { (void)a, (void)a2, (void)y; }
};

class UniformPicker : public ArmPicker {
 public:
  explicit UniformPicker(int arms);
  std::pair<int, int> pick(Rng& rng) override;

 private:
  int arms_;
};

// Random behavior with arm weights drawn once from a symmetric Dirichlet.
class DirichletPicker : public ArmPicker {
 public:
  DirichletPicker(int arms, double concentration, Rng& rng);
  std::pair<int, int> pick(Rng& rng) override;
  const std::vector<double>& weights() const { return weights_; }

 private:
  std::vector<double> weights_;
};

class DtsPicker : public ArmPicker {
 public:
  explicit DtsPicker(baselines::DtsState st) : st_(std::move(st)) {}
  std::pair<int, int> pick(Rng& rng) override { return baselines::dts_select_pair(st_, rng); }
  void observe(int a, int a2, int y) override { baselines::dts_update(st_, a, a2, y); }
  const baselines::DtsState& state() const { return st_; }

 private:
  baselines::DtsState st_;
};

// Frozen preference-pretrained model: first arm is the model argmax given the
// comparisons seen so far, second is uniform among the others. Observed
// preferences extend the context; rewards never enter it.
class IcpoPicker : public ArmPicker {
 public:
  IcpoPicker(const model::SeqModel& m, int arms, IprlContext warm_start = {});
  std::pair<int, int> pick(Rng& rng) override;
  void observe(int a, int a2, int y) override;
  const IprlContext& context() const { return ctx_; }

 private:
  const model::SeqModel& m_;
  model::Codec codec_;
  int arms_;
  IprlContext ctx_;
};

// H rounds of duels against the task's preference oracle; per-step weak
// regret recorded.
MetricsRecord deploy_dueling(ArmPicker& picker, const envs::BanditTask& task, int horizon,
                             const RolloutSpec& spec);

// ---- aggregation ----

struct GroupSummary {
  std::string env, kind, framework, quality;
  long records = 0;
  double mean_total = 0.0;  // mean over records of summed per-step values
  double ci95 = 0.0;        // 1.96 * sd / sqrt(n), 0 for a single record
  std::vector<double> mean_curve;  // cumulative, averaged over records
};

std::vector<GroupSummary> summarize(const std::vector<MetricsRecord>& records);

// Writes summary.tsv and curves.svg under out_dir; regeneration from the
// same records is byte-identical.
void aggregate_and_report(const std::vector<MetricsRecord>& records, const std::string& out_dir);

}  // namespace icprl::deploy
