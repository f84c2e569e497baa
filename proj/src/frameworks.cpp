#include "icprl/frameworks.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace icprl::frameworks {

using model::Codec;
using model::HeadKind;
using model::ModelConfig;
using model::Query;
using model::SeqModel;
using model::TokenSequence;
using nn::Tensor;

void IcpoConfig::validate() const {
  require(beta > 0.0, "icpo: beta must be positive");
  require(lambda > 0.0, "icpo: lambda must be positive");
  if (scale_preferred)
    require(lambda >= 1.0, "icpo: preferred-scaling mode expects lambda >= 1");
  else
    require(lambda <= 1.0, "icpo: lambda must be in (0, 1]");
}

void DitConfig::validate() const {
  require(gamma > 0.0 && gamma <= 1.0, "dit: gamma must be in (0, 1]");
  require(eta > 0.0, "dit: eta must be positive");
  require(clip > 0.0, "dit: clip must be positive");
}

void TrainConfig::validate() const {
  require(epochs >= 0, "train: negative epochs");
  require(batch_size > 0, "train: batch size must be positive");
  require(lr > 0.0, "train: learning rate must be positive");
  require(patience > 0, "train: patience must be positive");
  require(workers >= 1, "train: need at least one worker");
}

namespace {

std::vector<long> flat_ids(const std::vector<int>& rows_or_targets, long stride,
                           const std::vector<int>& inner) {
  std::vector<long> ids(inner.size());
  for (size_t i = 0; i < inner.size(); ++i)
    ids[i] = (long)rows_or_targets[i] * stride + inner[i];
  return ids;
}

}  // namespace

Tensor label_nll(const SeqModel& m, const TokenSequence& seq, const std::vector<int>& rows,
                 const std::vector<std::vector<double>>& targets,
                 const std::vector<double>& weights, double gauss_var) {
  require(!rows.empty(), "label_nll: no readout rows");
  require(targets.size() == rows.size() && weights.size() == rows.size(),
          "label_nll: rows/targets/weights size mismatch");
  long out_dim = m.config().out_dim;
  Tensor out = m.forward(seq, rows);
  Tensor per_row;  // [R] negative log-likelihoods
  if (m.config().head == HeadKind::policy_discrete) {
    Tensor logp = nn::log_softmax_lastdim(out);
    std::vector<long> ids(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
      require(targets[i].size() == 1, "label_nll: discrete target must be one action index");
      long a = (long)targets[i][0];
      require(a >= 0 && a < out_dim, "label_nll: action index out of range");
      ids[i] = (long)i * out_dim + a;
    }
    per_row = nn::neg(nn::gather_flat(logp, ids));
  } else if (m.config().head == HeadKind::policy_continuous) {
    require(gauss_var > 0.0, "label_nll: gauss_var must be positive");
    std::vector<double> flat;
    flat.reserve(rows.size() * out_dim);
    for (const std::vector<double>& t : targets) {
      require((long)t.size() == out_dim, "label_nll: continuous target width mismatch");
      flat.insert(flat.end(), t.begin(), t.end());
    }
    Tensor a = Tensor::constant({(long)rows.size(), out_dim}, flat);
    Tensor sq = nn::reduce_sum_lastdim(nn::square(nn::sub(a, out)));
    double log_norm = 0.5 * out_dim * std::log(2.0 * 3.14159265358979323846 * gauss_var);
    per_row = nn::add(nn::scale(sq, 0.5 / gauss_var),
                      Tensor::full({(long)rows.size()}, log_norm));
  } else {
    fail("label_nll: model head is not a policy head");
  }
  Tensor w = Tensor::constant({(long)rows.size()}, weights);
  return nn::mean_all(nn::mul(per_row, w));
}

Tensor icpo_step_loss(const SeqModel& m, const TokenSequence& seq, const std::vector<int>& rows,
                      const std::vector<int>& preferred, const std::vector<int>& rejected,
                      const IcpoConfig& cfg) {
  cfg.validate();
  require(m.config().head == HeadKind::policy_discrete, "icpo_step_loss: need a discrete head");
  require(!rows.empty(), "icpo_step_loss: no records");
  require(preferred.size() == rows.size() && rejected.size() == rows.size(),
          "icpo_step_loss: rows/actions size mismatch");
  long out_dim = m.config().out_dim;
  for (size_t i = 0; i < rows.size(); ++i) {
    require(preferred[i] >= 0 && preferred[i] < out_dim && rejected[i] >= 0 &&
                rejected[i] < out_dim,
            "icpo_step_loss: action index out of range");
    require(preferred[i] != rejected[i], "icpo_step_loss: identical preference pair");
  }
  Tensor logp = nn::log_softmax_lastdim(m.forward(seq, rows));
  std::vector<int> row_index(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) row_index[i] = (int)i;
  Tensor lp = nn::gather_flat(logp, flat_ids(row_index, out_dim, preferred));
  Tensor lm = nn::gather_flat(logp, flat_ids(row_index, out_dim, rejected));
  Tensor inner = cfg.scale_preferred ? nn::sub(nn::scale(lp, cfg.lambda), lm)
                                     : nn::sub(lp, nn::scale(lm, cfg.lambda));
  return nn::neg(nn::mean_all(nn::logsigmoid(nn::scale(inner, cfg.beta))));
}

Tensor icpo_step_loss_continuous(const SeqModel& m, const TokenSequence& seq,
                                 const std::vector<int>& rows,
                                 const std::vector<std::vector<double>>& preferred,
                                 const std::vector<std::vector<double>>& rejected,
                                 const IcpoConfig& cfg) {
  cfg.validate();
  require(m.config().head == HeadKind::policy_continuous,
          "icpo_step_loss_continuous: need a continuous head");
  require(!rows.empty(), "icpo_step_loss_continuous: no records");
  require(preferred.size() == rows.size() && rejected.size() == rows.size(),
          "icpo_step_loss_continuous: rows/actions size mismatch");
  long d = m.config().out_dim;
  std::vector<double> plus_flat, minus_flat;
  for (size_t i = 0; i < rows.size(); ++i) {
    require((long)preferred[i].size() == d && (long)rejected[i].size() == d,
            "icpo_step_loss_continuous: action width mismatch");
    plus_flat.insert(plus_flat.end(), preferred[i].begin(), preferred[i].end());
    minus_flat.insert(minus_flat.end(), rejected[i].begin(), rejected[i].end());
  }
  Tensor mu = m.forward(seq, rows);
  long n = (long)rows.size();
  Tensor dplus =
      nn::reduce_sum_lastdim(nn::square(nn::sub(Tensor::constant({n, d}, plus_flat), mu)));
  Tensor dminus =
      nn::reduce_sum_lastdim(nn::square(nn::sub(Tensor::constant({n, d}, minus_flat), mu)));
  Tensor inner = cfg.scale_preferred ? nn::sub(dminus, nn::scale(dplus, cfg.lambda))
                                     : nn::sub(nn::scale(dminus, cfg.lambda), dplus);
  return nn::neg(nn::mean_all(nn::logsigmoid(nn::scale(inner, cfg.beta))));
}

Tensor icrg_pair_loss(const SeqModel& reward_model, const Codec& codec,
                      const TrajPairRecord& pair) {
  require(reward_model.config().head == HeadKind::reward, "icrg_pair_loss: need a reward head");
  require(pair.t1.len() == pair.t2.len(), "icrg_pair_loss: trajectory horizons differ");
  const Traj& plus = pair.preferred();
  const Traj& minus = pair.rejected();
  long h = (long)plus.len();
  std::vector<Query> queries;
  queries.reserve(2 * h);
  for (long i = 0; i < h; ++i) queries.push_back({plus.s[i], plus.a[i]});
  for (long i = 0; i < h; ++i) queries.push_back({minus.s[i], minus.a[i]});
  TokenSequence seq = model::encode_tprl(codec, pair, queries);
  std::vector<int> rows(2 * h);
  for (long i = 0; i < 2 * h; ++i) rows[i] = seq.n_ctx + (int)i;
  Tensor out = reward_model.forward(seq, rows);  // [2h, 1]
  Tensor gap = nn::sub(nn::reduce_sum(nn::slice(out, 0, 0, h)),
                       nn::reduce_sum(nn::slice(out, 0, h, h)));
  return nn::neg(nn::logsigmoid(gap));
}

std::vector<double> icrg_label_steps(const RewardLabeler& labeler, const Codec& codec,
                                     const TrajPairRecord& ctx_pair, const Traj& target) {
  require(labeler.reward_model != nullptr, "icrg_label_steps: no reward model");
  require(labeler.trained, "icrg_label_steps: reward model has not been trained");
  require(target.len() > 0, "icrg_label_steps: empty trajectory");
  nn::NoGrad ng;
  std::vector<Query> queries;
  queries.reserve(target.len());
  for (size_t i = 0; i < target.len(); ++i) queries.push_back({target.s[i], target.a[i]});
  TokenSequence seq = model::encode_tprl(codec, ctx_pair, queries);
  std::vector<int> rows(queries.size());
  for (size_t i = 0; i < queries.size(); ++i) rows[i] = seq.n_ctx + (int)i;
  Tensor out = labeler.reward_model->forward(seq, rows);
  return out.value();
}

std::vector<double> returns_to_go(const std::vector<double>& rewards, double gamma) {
  require(gamma > 0.0 && gamma <= 1.0, "returns_to_go: gamma must be in (0, 1]");
  std::vector<double> g(rewards.size());
  double acc = 0.0;
  for (size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + gamma * acc;
    g[i] = acc;
  }
  return g;
}

Tensor dit_value_loss(const SeqModel& q_model, const SeqModel& v_model, const Codec& codec,
                      const Traj& traj, const DitConfig& cfg) {
  cfg.validate();
  require(q_model.config().head == HeadKind::q_value && v_model.config().head == HeadKind::v_value,
          "dit_value_loss: wrong heads");
  require(!traj.r.empty(), "dit_value_loss: trajectory has no rewards");
  require(traj.r.size() == traj.len(), "dit_value_loss: reward count mismatch");
  long h = (long)traj.len();
  std::vector<int> rows(h);
  for (long i = 0; i < h; ++i) rows[i] = (int)i;
  Tensor qs = q_model.forward(model::encode_dit_q(codec, traj), rows);
  Tensor vs = v_model.forward(model::encode_dit_v(codec, traj), rows);
  Tensor g = Tensor::constant({h, 1}, returns_to_go(traj.r, cfg.gamma));
  return nn::mean_all(nn::add(nn::square(nn::sub(qs, g)), nn::square(nn::sub(vs, g))));
}

std::vector<double> dit_advantages(const SeqModel& q_model, const SeqModel& v_model,
                                   const Codec& codec, const Traj& traj) {
  require(traj.len() > 0, "dit_advantages: empty trajectory");
  nn::NoGrad ng;
  std::vector<int> rows((size_t)traj.len());
  for (size_t i = 0; i < traj.len(); ++i) rows[i] = (int)i;
  std::vector<double> q = q_model.forward(model::encode_dit_q(codec, traj), rows).value();
  std::vector<double> v = v_model.forward(model::encode_dit_v(codec, traj), rows).value();
  std::vector<double> adv(q.size());
  for (size_t i = 0; i < q.size(); ++i) adv[i] = q[i] - v[i];
  return adv;
}

Tensor dit_policy_example_loss(const SeqModel& policy, const Codec& codec, const Traj& traj,
                               const std::vector<double>& advantages, const DitConfig& cfg) {
  cfg.validate();
  require(!traj.r.empty() && traj.r.size() == traj.len(),
          "dit_policy_example_loss: trajectory needs (estimated) rewards");
  require(advantages.size() == traj.len(), "dit_policy_example_loss: advantage count mismatch");
  RewardContext ctx;
  ctx.has_next = false;
  ctx.recs.reserve(traj.len());
  std::vector<Query> queries;
  std::vector<std::vector<double>> targets;
  std::vector<double> weights(traj.len());
  for (size_t i = 0; i < traj.len(); ++i) {
    ctx.recs.push_back({traj.s[i], traj.a[i], traj.r[i], {}});
    queries.push_back({traj.s[i], {}});
    targets.push_back(traj.a[i]);
    weights[i] = std::exp(std::min(advantages[i] / cfg.eta, cfg.clip));
  }
  TokenSequence seq = model::encode_reward_annotated(codec, ctx, queries);
  std::vector<int> rows(traj.len());
  for (size_t i = 0; i < traj.len(); ++i) rows[i] = seq.n_ctx + (int)i;
  return label_nll(policy, seq, rows, targets, weights);
}

// ---- training loop ----

TrainStats fit(std::vector<Tensor> params, const ExampleSet& train, const ExampleSet* val,
               const TrainConfig& cfg) {
  cfg.validate();
  require(train.size() > 0, "train: empty example set");
  for (const Tensor& p : params) require(p.requires_grad(), "train: frozen tensor in params");

  nn::Adam adam(params, {cfg.lr, 0.9, 0.999, 1e-8});
  WorkerPool pool(cfg.workers);
  TrainStats st;

  int n = train.size();
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  Rng shuffle_rng = make_rng(derive_seed(cfg.seed, "epoch_shuffle"));

  auto val_loss = [&]() {
    nn::NoGrad ng;
    double tot = 0.0;
    for (int i = 0; i < val->size(); ++i) {
      Rng r = make_rng(derive_seed(cfg.seed, "val_aug", (uint64_t)i));
      tot += val->loss(i, r).item();
    }
    return tot / val->size();
  };

  bool use_val = val != nullptr && val->size() > 0;
  double best = 0.0;
  std::vector<std::vector<double>> best_values;
  int best_epoch = -1, stale = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_total = 0.0;
    for (int base = 0; base < n; base += cfg.batch_size) {
      int b = std::min(cfg.batch_size, n - base);
      std::vector<double> losses(b);
      std::vector<nn::GradSink> sinks(b);
      try {
        pool.run(b, [&](int k) {
          int idx = order[base + k];
          Rng r = make_rng(derive_seed(cfg.seed, "aug", ((uint64_t)epoch << 32) | (uint64_t)idx));
          Tensor l = train.loss(idx, r);
          losses[k] = l.item();
          nn::backward_into(l, sinks[k], 1.0 / b);
        });
      } catch (const std::exception& e) {
        fail("train: epoch " + std::to_string(epoch) + " batch " +
             std::to_string(base / cfg.batch_size) + ": " + e.what());
      }
      for (int k = 0; k < b; ++k) {
        if (!std::isfinite(losses[k]))
          fail("train: non-finite loss at epoch " + std::to_string(epoch) + " batch " +
               std::to_string(base / cfg.batch_size) + " example " + std::to_string(order[base + k]));
        epoch_total += losses[k];
      }
      adam.zero_grads();
      // Merge worker sinks in batch order so accumulation order is fixed.
      for (int k = 0; k < b; ++k) {
        for (auto& [node, g] : sinks[k]) {
          node->ensure_grad();
          for (size_t i = 0; i < g.size(); ++i) node->grad[i] += g[i];
        }
      }
      adam.step();
    }
    st.train_loss.push_back(epoch_total / n);
    if (use_val) {
      double vl = val_loss();
      st.val_loss.push_back(vl);
      if (best_epoch < 0 || vl < best) {
        best = vl;
        best_epoch = epoch;
        best_values.clear();
        for (const Tensor& p : params) best_values.push_back(p.value());
        stale = 0;
      } else if (++stale >= cfg.patience) {
        break;
      }
    }
  }
  if (best_epoch >= 0) {
    for (size_t i = 0; i < params.size(); ++i) params[i].node->value = best_values[i];
    st.best_epoch = best_epoch;
  }
  return st;
}

// ---- framework drivers ----

Codec codec_for(const prefgen::CorpusManifest& m) {
  if (m.env == "darkroom") return Codec::darkroom(m.grid);
  if (m.env == "bandit") return Codec::bandit(m.arms);
  if (m.env == "pointreach") return Codec::pointreach();
  fail("codec_for: unknown env " + m.env);
}

int env_action_dim(const prefgen::CorpusManifest& m) {
  if (m.env == "darkroom") return envs::DarkRoom::n_actions;
  if (m.env == "bandit") return m.arms;
  if (m.env == "pointreach") return 3;
  fail("env_action_dim: unknown env " + m.env);
}

bool env_discrete(const prefgen::CorpusManifest& m) { return m.env != "pointreach"; }

namespace {

// Validation split by task id: the last tenth of distinct ids (at least one
// when there are at least two tasks).
std::set<int> val_task_ids(const std::vector<int>& task_ids) {
  std::set<int> distinct(task_ids.begin(), task_ids.end());
  if (distinct.size() < 2) return {};
  size_t n_val = std::max<size_t>(1, distinct.size() / 10);
  std::set<int> val;
  for (auto it = distinct.rbegin(); n_val-- > 0; ++it) val.insert(*it);
  return val;
}

template <typename Bundle>
void split_indices(const std::vector<Bundle>& bundles, std::vector<int>& train_idx,
                   std::vector<int>& val_idx) {
  std::vector<int> ids;
  ids.reserve(bundles.size());
  for (const Bundle& b : bundles) ids.push_back(b.task_id);
  std::set<int> val = val_task_ids(ids);
  for (size_t i = 0; i < bundles.size(); ++i)
    (val.count(bundles[i].task_id) ? val_idx : train_idx).push_back((int)i);
}

std::vector<Query> state_queries(const std::vector<prefgen::QueryLabel>& qs) {
  std::vector<Query> out;
  out.reserve(qs.size());
  for (const prefgen::QueryLabel& q : qs) out.push_back({q.s, {}});
  return out;
}

// Supervised action prediction on labeled query states; context is a
// step-preference dataset, a trajectory pair, or a reward-annotated dataset.
struct LabeledQuerySet : ExampleSet {
  const prefgen::Corpus* corpus = nullptr;
  const Codec* codec = nullptr;
  const SeqModel* m = nullptr;
  std::vector<int> idxs;

  int size() const override { return (int)idxs.size(); }
  Tensor loss(int i, Rng&) const override {
    const std::string& kind = corpus->manifest.kind;
    const std::vector<prefgen::QueryLabel>* queries;
    if (kind == "reward")
      queries = &corpus->reward[idxs[i]].queries;
    else if (kind == "tprl")
      queries = &corpus->tprl[idxs[i]].queries;
    else
      queries = &corpus->iprl[idxs[i]].queries;
    require(!queries->empty(), "train: bundle has no labeled queries");
    TokenSequence seq =
        kind == "reward"
            ? model::encode_reward_annotated(*codec, corpus->reward[idxs[i]].ctx,
                                             state_queries(*queries))
        : kind == "tprl"
            ? model::encode_tprl(*codec, corpus->tprl[idxs[i]].pair, state_queries(*queries))
            : model::encode_iprl(*codec, corpus->iprl[idxs[i]].ctx, state_queries(*queries));
    std::vector<int> rows(queries->size());
    std::vector<std::vector<double>> targets(queries->size());
    std::vector<double> weights(queries->size(), 1.0);
    for (size_t k = 0; k < queries->size(); ++k) {
      rows[k] = seq.n_ctx + (int)k;
      targets[k] = (*queries)[k].astar;
    }
    return label_nll(*m, seq, rows, targets, weights);
  }
};

// Preference-only training on the context's own records with full-context
// conditioning. Stateless tasks share one query token and optionally train on
// a random-length context prefix so deployment-time short contexts are
// in-distribution.
struct StepPrefSet : ExampleSet {
  const prefgen::Corpus* corpus = nullptr;
  const Codec* codec = nullptr;
  const SeqModel* m = nullptr;
  std::vector<int> idxs;
  IcpoConfig icpo;
  bool discrete = true;
  bool stateless = false;
  bool subsample_prefix = false;

  int size() const override { return (int)idxs.size(); }
  Tensor loss(int i, Rng& rng) const override {
    const IprlContext& full = corpus->iprl[idxs[i]].ctx;
    IprlContext ctx = full;
    if (subsample_prefix) {
      size_t len = 1 + (size_t)(rng() % full.recs.size());
      ctx.recs.resize(len);
    }
    size_t n = ctx.recs.size();
    std::vector<Query> queries;
    std::vector<int> rows(n);
    if (stateless) {
      queries.push_back({{}, {}});
      for (size_t h = 0; h < n; ++h) rows[h] = (int)n;  // the one shared query token
    } else {
      queries.reserve(n);
      for (size_t h = 0; h < n; ++h) {
        queries.push_back({ctx.recs[h].s, {}});
        rows[h] = (int)(n + h);
      }
    }
    TokenSequence seq = model::encode_iprl(*codec, ctx, queries);
    if (discrete) {
      std::vector<int> pref(n), rej(n);
      for (size_t h = 0; h < n; ++h) {
        const StepPrefRecord& rec = ctx.recs[h];
        pref[h] = (int)(rec.y > 0 ? rec.a : rec.a2)[0];
        rej[h] = (int)(rec.y > 0 ? rec.a2 : rec.a)[0];
      }
      return icpo_step_loss(*m, seq, rows, pref, rej, icpo);
    }
    std::vector<std::vector<double>> pref(n), rej(n);
    for (size_t h = 0; h < n; ++h) {
      const StepPrefRecord& rec = ctx.recs[h];
      pref[h] = rec.y > 0 ? rec.a : rec.a2;
      rej[h] = rec.y > 0 ? rec.a2 : rec.a;
    }
    return icpo_step_loss_continuous(*m, seq, rows, pref, rej, icpo);
  }
};

struct PairSet : ExampleSet {
  const prefgen::Corpus* corpus = nullptr;
  const Codec* codec = nullptr;
  const SeqModel* m = nullptr;
  std::vector<int> idxs;

  int size() const override { return (int)idxs.size(); }
  Tensor loss(int i, Rng&) const override {
    return icrg_pair_loss(*m, *codec, corpus->tprl[idxs[i]].pair);
  }
};

struct ValueSet : ExampleSet {
  const std::vector<Traj>* trajs = nullptr;
  const Codec* codec = nullptr;
  const SeqModel* q = nullptr;
  const SeqModel* v = nullptr;
  DitConfig dit;
  std::vector<int> idxs;

  int size() const override { return (int)idxs.size(); }
  Tensor loss(int i, Rng&) const override {
    return dit_value_loss(*q, *v, *codec, (*trajs)[idxs[i]], dit);
  }
};

struct WeightedPolicySet : ExampleSet {
  const std::vector<Traj>* trajs = nullptr;
  const std::vector<std::vector<double>>* advantages = nullptr;
  const Codec* codec = nullptr;
  const SeqModel* m = nullptr;
  DitConfig dit;
  std::vector<int> idxs;

  int size() const override { return (int)idxs.size(); }
  Tensor loss(int i, Rng&) const override {
    return dit_policy_example_loss(*m, *codec, (*trajs)[idxs[i]], (*advantages)[idxs[i]], dit);
  }
};

ModelConfig sized(const std::string& preset, int feat_dim, int out_dim, HeadKind head,
                  int max_seq_len, double dropout) {
  ModelConfig mc = ModelConfig::preset(preset);
  mc.feat_dim = feat_dim;
  mc.out_dim = out_dim;
  mc.head = head;
  mc.max_seq_len = max_seq_len;
  mc.dropout = dropout;
  mc.validate();
  return mc;
}

int max_bundle_queries(const prefgen::Corpus& c) {
  size_t n = 1;
  for (const auto& b : c.iprl) n = std::max(n, b.queries.size());
  for (const auto& b : c.tprl) n = std::max(n, b.queries.size());
  for (const auto& b : c.reward) n = std::max(n, b.queries.size());
  return (int)n;
}

}  // namespace

TrainedBundle train_framework(const prefgen::Corpus& corpus, const FrameworkConfig& cfg) {
  cfg.train.validate();
  const prefgen::CorpusManifest& man = corpus.manifest;
  const std::string& fw = cfg.framework;
  require(fw == "dpt" || fw == "dp2t" || fw == "icpo" || fw == "icrg",
          "train_framework: unknown framework " + fw);
  if (fw == "dpt") require(man.kind == "reward", "train_framework: dpt needs a reward corpus");
  if (fw == "dp2t")
    require(man.kind == "iprl" || man.kind == "tprl",
            "train_framework: dp2t needs a preference corpus");
  if (fw == "icpo")
    require(man.kind == "iprl", "train_framework: icpo needs a step-preference corpus");
  if (fw == "icrg") require(man.kind == "tprl", "train_framework: icrg needs a trajectory corpus");

  TrainedBundle out;
  Codec codec = codec_for(man);
  bool discrete = env_discrete(man);
  HeadKind policy_head = discrete ? HeadKind::policy_discrete : HeadKind::policy_continuous;
  int act = env_action_dim(man);

  if (fw == "dpt" || fw == "dp2t") {
    int feat = man.kind == "reward" ? model::reward_annotated_feat_dim(codec)
               : man.kind == "tprl" ? model::tprl_feat_dim(codec)
                                    : model::iprl_feat_dim(codec);
    int ctx_len = man.kind == "tprl" ? 2 * man.horizon : man.horizon;
    int max_seq = ctx_len + max_bundle_queries(corpus);
    out.policy = std::make_unique<SeqModel>(
        sized(cfg.model_preset, feat, act, policy_head, max_seq, cfg.dropout),
        derive_seed(cfg.train.seed, "policy_init"));
    if (!cfg.resume_from.empty()) out.policy->load(cfg.resume_from + "/policy.bin");
    LabeledQuerySet tr, va;
    tr.corpus = va.corpus = &corpus;
    tr.codec = va.codec = &codec;
    tr.m = va.m = out.policy.get();
    if (man.kind == "reward")
      split_indices(corpus.reward, tr.idxs, va.idxs);
    else if (man.kind == "tprl")
      split_indices(corpus.tprl, tr.idxs, va.idxs);
    else
      split_indices(corpus.iprl, tr.idxs, va.idxs);
    out.policy_stats = fit(out.policy->params(), tr, va.size() ? &va : nullptr, cfg.train);
    return out;
  }

  if (fw == "icpo") {
    bool stateless = man.env == "bandit";
    int max_seq = stateless ? man.horizon + 1 : 2 * man.horizon;
    out.policy = std::make_unique<SeqModel>(
        sized(cfg.model_preset, model::iprl_feat_dim(codec), act, policy_head, max_seq,
              cfg.dropout),
        derive_seed(cfg.train.seed, "policy_init"));
    if (!cfg.resume_from.empty()) out.policy->load(cfg.resume_from + "/policy.bin");
    StepPrefSet tr, va;
    tr.corpus = va.corpus = &corpus;
    tr.codec = va.codec = &codec;
    tr.m = va.m = out.policy.get();
    tr.icpo = va.icpo = cfg.icpo;
    tr.discrete = va.discrete = discrete;
    tr.stateless = va.stateless = stateless;
    tr.subsample_prefix = va.subsample_prefix = stateless;
    split_indices(corpus.iprl, tr.idxs, va.idxs);
    out.policy_stats = fit(out.policy->params(), tr, va.size() ? &va : nullptr, cfg.train);
    return out;
  }

  // Reward-generation pipeline, stages strictly in order: fit the in-context
  // reward model on trajectory preferences, relabel every trajectory with
  // estimated step rewards, fit prefix-conditioned value models on the
  // relabeled returns, then train the advantage-weighted policy.
  require(cfg.resume_from.empty(),
          "train_framework: the staged pipeline has no single checkpoint to resume");
  require(discrete, "train_framework: the reward-generation pipeline is discrete-only here");
  int h = man.horizon;
  out.reward = std::make_unique<SeqModel>(
      sized(cfg.value_preset, model::tprl_feat_dim(codec), 1, HeadKind::reward, 4 * h,
            cfg.dropout),
      derive_seed(cfg.train.seed, "reward_init"));
  {
    PairSet tr, va;
    tr.corpus = va.corpus = &corpus;
    tr.codec = va.codec = &codec;
    tr.m = va.m = out.reward.get();
    split_indices(corpus.tprl, tr.idxs, va.idxs);
    TrainConfig rc = cfg.train;
    rc.seed = derive_seed(cfg.train.seed, "reward_stage");
    out.reward_stats = fit(out.reward->params(), tr, va.size() ? &va : nullptr, rc);
  }

  RewardLabeler labeler{out.reward.get(), true};
  std::vector<Traj> labeled;
  std::vector<int> traj_tasks;
  labeled.reserve(2 * corpus.tprl.size());
  for (const prefgen::TprlBundle& b : corpus.tprl) {
    for (const Traj* t : {&b.pair.t1, &b.pair.t2}) {
      Traj lt = *t;
      lt.r = icrg_label_steps(labeler, codec, b.pair, lt);
      labeled.push_back(std::move(lt));
      traj_tasks.push_back(b.task_id);
    }
  }

  int dit_feat_q = codec.state_feat + codec.action_feat;
  out.q = std::make_unique<SeqModel>(
      sized(cfg.value_preset, dit_feat_q, 1, HeadKind::q_value, h, cfg.dropout),
      derive_seed(cfg.train.seed, "q_init"));
  out.v = std::make_unique<SeqModel>(
      sized(cfg.value_preset, codec.state_feat, 1, HeadKind::v_value, h, cfg.dropout),
      derive_seed(cfg.train.seed, "v_init"));
  std::vector<int> tr_idx, va_idx;
  {
    std::set<int> val = val_task_ids(traj_tasks);
    for (size_t i = 0; i < labeled.size(); ++i)
      (val.count(traj_tasks[i]) ? va_idx : tr_idx).push_back((int)i);
  }
  {
    ValueSet tr, va;
    tr.trajs = va.trajs = &labeled;
    tr.codec = va.codec = &codec;
    tr.q = va.q = out.q.get();
    tr.v = va.v = out.v.get();
    tr.dit = va.dit = cfg.dit;
    tr.idxs = tr_idx;
    va.idxs = va_idx;
    std::vector<Tensor> params = out.q->params();
    params.insert(params.end(), out.v->params().begin(), out.v->params().end());
    TrainConfig vc = cfg.train;
    vc.seed = derive_seed(cfg.train.seed, "value_stage");
    out.value_stats = fit(params, tr, va.size() ? &va : nullptr, vc);
  }

  std::vector<std::vector<double>> advantages(labeled.size());
  for (size_t i = 0; i < labeled.size(); ++i)
    advantages[i] = dit_advantages(*out.q, *out.v, codec, labeled[i]);

  out.policy = std::make_unique<SeqModel>(
      sized(cfg.model_preset, model::reward_annotated_feat_dim(codec), act, policy_head, 2 * h,
            cfg.dropout),
      derive_seed(cfg.train.seed, "policy_init"));
  {
    WeightedPolicySet tr, va;
    tr.trajs = va.trajs = &labeled;
    tr.advantages = va.advantages = &advantages;
    tr.codec = va.codec = &codec;
    tr.m = va.m = out.policy.get();
    tr.dit = va.dit = cfg.dit;
    tr.idxs = tr_idx;
    va.idxs = va_idx;
    TrainConfig pc = cfg.train;
    pc.seed = derive_seed(cfg.train.seed, "policy_stage");
    out.policy_stats = fit(out.policy->params(), tr, va.size() ? &va : nullptr, pc);
  }
  return out;
}

}  // namespace icprl::frameworks
