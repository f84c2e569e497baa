#pragma once

#include <memory>
#include <string>
#include <vector>

#include "icprl/adam.hpp"
#include "icprl/model.hpp"
#include "icprl/prefgen.hpp"

namespace icprl::frameworks {

// Gaussian action-density variance for continuous policy heads (training
// log-density and deployment sampling share it). Matches the controller noise
// scale of the continuous environment.
inline constexpr double kGaussVar = 0.0004;

struct IcpoConfig {
  double beta = 1.0;
  // Weight on the non-preferred log-probability term, in (0, 1]. With
  // scale_preferred the weight moves to the preferred term instead and may
  // exceed 1 (ablation mode).
  double lambda = 0.5;
  bool scale_preferred = false;

  void validate() const;
};

struct DitConfig {
  double gamma = 0.99;  // in-trajectory discount for returns-to-go
  double eta = 1.0;     // advantage temperature
  double clip = 20.0;   // upper clip on advantage/eta before exp

  void validate() const;
};

// Weighted negative log-likelihood of target actions at the given readout
// rows; the shared supervised path for the action-labeled objectives and the
// advantage-weighted one (which passes non-unit weights). Discrete heads use
// log-softmax over logits; continuous heads use an isotropic Gaussian around
// the predicted mean with variance gauss_var. The mean divides by the row
// count, not the weight sum.
nn::Tensor label_nll(const model::SeqModel& m, const model::TokenSequence& seq,
                     const std::vector<int>& rows,
                     const std::vector<std::vector<double>>& targets,
                     const std::vector<double>& weights, double gauss_var = kGaussVar);

// Step-preference policy loss, discrete actions:
//   mean over rows of -log sigmoid(beta * (log T(a+|s,D) - lambda log T(a-|s,D)))
// rows index readout tokens (repeats allowed: stateless tasks score every
// record at one shared query token).
nn::Tensor icpo_step_loss(const model::SeqModel& m, const model::TokenSequence& seq,
                          const std::vector<int>& rows, const std::vector<int>& preferred,
                          const std::vector<int>& rejected, const IcpoConfig& cfg);

// Continuous counterpart with squared distances to the predicted mean:
//   mean of -log sigmoid(beta * (lambda_- ||a- - mu||^2 - lambda_+ ||a+ - mu||^2))
// where lambda scales the non-preferred (default) or preferred side.
nn::Tensor icpo_step_loss_continuous(const model::SeqModel& m, const model::TokenSequence& seq,
                                     const std::vector<int>& rows,
                                     const std::vector<std::vector<double>>& preferred,
                                     const std::vector<std::vector<double>>& rejected,
                                     const IcpoConfig& cfg);

// Trajectory-preference loss for the in-context reward model: the model
// scores every step of both trajectories conditioned on the pair itself, and
// the loss is -log sigmoid(sum of preferred step rewards - sum of rejected).
nn::Tensor icrg_pair_loss(const model::SeqModel& reward_model, const model::Codec& codec,
                          const TrajPairRecord& pair);

// Reward model handle whose trained flag gates labeling; labeling an
// untrained model is a sequencing bug, not a numerical one.
struct RewardLabeler {
  const model::SeqModel* reward_model = nullptr;
  bool trained = false;
};

// Estimated reward for each step of target, conditioned on ctx_pair.
std::vector<double> icrg_label_steps(const RewardLabeler& labeler, const model::Codec& codec,
                                     const TrajPairRecord& ctx_pair, const Traj& target);

// G_h = sum_{h'>=h} gamma^(h'-h) r_{h'}.
std::vector<double> returns_to_go(const std::vector<double>& rewards, double gamma);

// Mean over steps of (Q(s_h,a_h|prefix_h) - G_h)^2 + (V(s_h|prefix_h) - G_h)^2.
// The trajectory must carry rewards (true or estimated).
nn::Tensor dit_value_loss(const model::SeqModel& q_model, const model::SeqModel& v_model,
                          const model::Codec& codec, const Traj& traj, const DitConfig& cfg);

// Frozen-model readouts Q - V per step (no gradients).
std::vector<double> dit_advantages(const model::SeqModel& q_model, const model::SeqModel& v_model,
                                   const model::Codec& codec, const Traj& traj);

// Advantage-weighted action NLL: context is the trajectory's own
// reward-annotated triples, queries its states, weights exp(min(A/eta, clip)).
// With all-zero advantages this is bit-identical to the unweighted NLL on the
// same inputs.
nn::Tensor dit_policy_example_loss(const model::SeqModel& policy, const model::Codec& codec,
                                   const Traj& traj, const std::vector<double>& advantages,
                                   const DitConfig& cfg);

// ---- training loop ----

struct TrainConfig {
  int epochs = 20;
  int batch_size = 32;
  double lr = 3e-4;
  int patience = 5;  // early-stop patience in epochs, when a validation set exists
  uint64_t seed = 1;
  int workers = 1;

  void validate() const;
};

struct TrainStats {
  std::vector<double> train_loss;  // per-epoch mean over examples
  std::vector<double> val_loss;
  int best_epoch = -1;             // epoch whose weights were restored, -1 = last
};

// One training example: builds the loss graph on the current parameters. rng
// carries per-(epoch, example) augmentation randomness such as context prefix
// subsampling; validation uses a fixed stream so epochs stay comparable.
class ExampleSet {
 public:
  virtual ~ExampleSet() = default;
  virtual int size() const = 0;
  virtual nn::Tensor loss(int idx, Rng& rng) const = 0;
};

// Mini-batch Adam over the given parameters. Per-example graphs are built in
// parallel workers with gradients collected in private sinks and merged in
// batch order, so results are bit-identical for any worker count. Keeps the
// best validation weights when a validation set is given; aborts with batch
// provenance on a non-finite loss.
TrainStats fit(std::vector<nn::Tensor> params, const ExampleSet& train, const ExampleSet* val,
               const TrainConfig& cfg);

// ---- framework drivers ----

struct FrameworkConfig {
  std::string framework;           // dpt | dp2t | icpo | icrg
  std::string model_preset = "desk";
  std::string value_preset = "desk";  // icrg reward/q/v models
  TrainConfig train;
  IcpoConfig icpo;
  DitConfig dit;
  double dropout = 0.0;
  // Directory holding a policy.bin to continue from (single-model frameworks
  // only); the caller sets train.epochs to the remaining count.
  std::string resume_from;
};

struct TrainedBundle {
  std::unique_ptr<model::SeqModel> policy;
  std::unique_ptr<model::SeqModel> reward;  // icrg stage 1
  std::unique_ptr<model::SeqModel> q, v;    // icrg stage 3a
  TrainStats policy_stats, reward_stats, value_stats;
};

model::Codec codec_for(const prefgen::CorpusManifest& m);
int env_action_dim(const prefgen::CorpusManifest& m);  // discrete count or vector width
bool env_discrete(const prefgen::CorpusManifest& m);

// Trains one framework on its corpus kind (dpt: reward, dp2t/icpo: iprl,
// icrg: tprl). The reward-generation pipeline runs its stages strictly in
// order: reward model, relabeling, value fitting, weighted policy. Validation
// is split off by task id (about a tenth of tasks, at least one when there
// are at least two).
TrainedBundle train_framework(const prefgen::Corpus& corpus, const FrameworkConfig& cfg);

}  // namespace icprl::frameworks
