#pragma once

#include <string>
#include <vector>

#include "icprl/encode.hpp"
#include "icprl/tensor.hpp"

namespace icprl::model {

enum class HeadKind { policy_discrete, policy_continuous, reward, q_value, v_value };

std::string head_kind_name(HeadKind k);
HeadKind head_kind_from(const std::string& s);

struct ModelConfig {
  int n_layers = 4;
  int d_model = 64;
  int n_heads = 4;
  int max_seq_len = 256;
  int feat_dim = 0;   // token feature width (layout-dependent)
  int out_dim = 0;    // actions, action dims, or 1 for scalar heads
  HeadKind head = HeadKind::policy_discrete;
  double dropout = 0.0;

  // Named size presets; feat/out/head still come from the experiment.
  // desk: 4x64x4 (default working scale)
  // paper_iprl: 6x256x8, paper_tprl_reward: 4x32x4, paper_metaworld: 8x256x8
  static ModelConfig preset(const std::string& name);

  std::string canonical() const;
  uint64_t hash() const { return fnv1a(canonical()); }
  void validate() const;
};

// Decoder-only transformer over token sequences: learned positional
// embeddings, pre-norm blocks, GELU MLPs, causal masking, and a linear
// readout head applied at the requested positions. Query tokens see the
// whole context but never one another.
class SeqModel {
 public:
  SeqModel(ModelConfig cfg, uint64_t init_seed);

  // Returns [n_readout, out_dim] rows. readout entries index tokens of seq.
  // dropout_rng enables dropout (training only; cfg.dropout > 0).
  nn::Tensor forward(const TokenSequence& seq, const std::vector<int>& readout,
                     Rng* dropout_rng = nullptr) const;

  const ModelConfig& config() const { return cfg_; }
  const std::vector<nn::Tensor>& params() const { return params_; }
  std::vector<nn::Tensor>& params() { return params_; }

  void save(const std::string& path) const;
  // Restores weights; rejects a file whose recorded config hash differs.
  void load(const std::string& path);

 private:
  ModelConfig cfg_;
  std::vector<nn::Tensor> params_;

  nn::Tensor p(const std::string& name) const;
  nn::Tensor add_param(const std::string& name, std::vector<long> shape, double stddev, Rng& rng);
};

}  // namespace icprl::model
