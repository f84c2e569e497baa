#pragma once

#include <string>
#include <vector>

#include "icprl/records.hpp"

namespace icprl::model {

// Expands raw states/actions into fixed-width model features. Discrete
// states and actions become one-hot blocks; continuous ones pass through.
struct Codec {
  enum class Enc { onehot_cell, onehot_index, identity, none };

  Enc state_enc = Enc::none;
  Enc action_enc = Enc::onehot_index;
  int grid = 0;          // onehot_cell
  int state_raw = 0;     // raw vector width
  int action_raw = 0;
  int state_feat = 0;    // encoded widths
  int action_feat = 0;

  static Codec darkroom(int grid);
  static Codec bandit(int arms);
  static Codec pointreach();

  void put_state(const std::vector<double>& raw, double* out) const;
  void put_action(const std::vector<double>& raw, double* out) const;
};

// A model input sequence: n_ctx context tokens followed by zero or more query
// tokens. Context tokens attend causally among themselves; every query token
// attends the full context plus itself only, and shares the position id that
// a single appended query would have, so a multi-query sequence scores each
// query exactly as its own single-query sequence would.
struct TokenSequence {
  int feat_dim = 0;
  int n_ctx = 0;
  std::vector<double> feats;     // total() x feat_dim
  std::vector<int> channel;      // 0 context, 1 context alternate side, 2 query
  std::vector<int> pos_id;
  std::vector<uint8_t> valid;    // masked-out tokens contribute nothing

  int total() const { return (int)channel.size(); }
  int n_query() const { return total() - n_ctx; }
};

// Query for reward/value readouts; policy queries carry only a state.
struct Query {
  std::vector<double> s;
  std::vector<double> a;  // empty for policy queries
};

// Token layouts (zero-padded fixed slots):
//   iprl:             [state | action | action' | y(+-1) | is_query]
//   reward_annotated: [state | action | r | next_state | is_query]
//   tprl:             [state | action | is_query], channel encodes the side
//   dit_q:            [state | action]      (readout at every position)
//   dit_v:            [state]
TokenSequence encode_iprl(const Codec& c, const IprlContext& ctx,
                          const std::vector<Query>& queries);
TokenSequence encode_reward_annotated(const Codec& c, const RewardContext& ctx,
                                      const std::vector<Query>& queries);
TokenSequence encode_tprl(const Codec& c, const TrajPairRecord& pair,
                          const std::vector<Query>& queries);
TokenSequence encode_dit_q(const Codec& c, const Traj& traj);
TokenSequence encode_dit_v(const Codec& c, const Traj& traj);

int iprl_feat_dim(const Codec& c);
int reward_annotated_feat_dim(const Codec& c);
int tprl_feat_dim(const Codec& c);

}  // namespace icprl::model
