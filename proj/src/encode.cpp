#include "icprl/encode.hpp"

#include <cmath>

#include "icprl/common.hpp"

namespace icprl::model {

namespace {

void put_onehot(double* out, int width, int index, const char* who) {
  require(index >= 0 && index < width,
          std::string(who) + ": one-hot index " + std::to_string(index) + " out of range [0," +
              std::to_string(width) + ")");
  for (int i = 0; i < width; i++) out[i] = 0.0;
  out[index] = 1.0;
}

}  // namespace

Codec Codec::darkroom(int grid) {
  Codec c;
  c.state_enc = Enc::onehot_cell;
  c.action_enc = Enc::onehot_index;
  c.grid = grid;
  c.state_raw = 2;
  c.action_raw = 1;
  c.state_feat = grid * grid;
  c.action_feat = 5;
  return c;
}

Codec Codec::bandit(int arms) {
  Codec c;
  c.state_enc = Enc::none;
  c.action_enc = Enc::onehot_index;
  c.state_raw = 0;
  c.action_raw = 1;
  c.state_feat = 0;
  c.action_feat = arms;
  return c;
}

Codec Codec::pointreach() {
  Codec c;
  c.state_enc = Enc::identity;
  c.action_enc = Enc::identity;
  c.state_raw = 6;
  c.action_raw = 3;
  c.state_feat = 6;
  c.action_feat = 3;
  return c;
}

void Codec::put_state(const std::vector<double>& raw, double* out) const {
  if (state_enc == Enc::none) {
    require(raw.empty(), "codec: stateless environment given a state");
    return;
  }
  require((int)raw.size() == state_raw, "codec: raw state width " + std::to_string(raw.size()) +
                                            ", expected " + std::to_string(state_raw));
  if (state_enc == Enc::identity) {
    for (int i = 0; i < state_raw; i++) out[i] = raw[i];
    return;
  }
  int x = (int)std::llround(raw[0]), y = (int)std::llround(raw[1]);
  require(x >= 0 && x < grid && y >= 0 && y < grid,
          "codec: cell (" + std::to_string(x) + "," + std::to_string(y) + ") outside " +
              std::to_string(grid) + "x" + std::to_string(grid) + " grid");
  put_onehot(out, grid * grid, x * grid + y, "codec state");
}

void Codec::put_action(const std::vector<double>& raw, double* out) const {
  require((int)raw.size() == action_raw, "codec: raw action width " + std::to_string(raw.size()) +
                                             ", expected " + std::to_string(action_raw));
  if (action_enc == Enc::identity) {
    for (int i = 0; i < action_raw; i++) out[i] = raw[i];
    return;
  }
  put_onehot(out, action_feat, (int)std::llround(raw[0]), "codec action");
}

int iprl_feat_dim(const Codec& c) { return c.state_feat + 2 * c.action_feat + 2; }
int reward_annotated_feat_dim(const Codec& c) { return 2 * c.state_feat + c.action_feat + 2; }
int tprl_feat_dim(const Codec& c) { return c.state_feat + c.action_feat + 1; }

namespace {

TokenSequence blank(int n_tokens, int feat_dim) {
  TokenSequence t;
  t.feat_dim = feat_dim;
  t.feats.assign((size_t)n_tokens * feat_dim, 0.0);
  t.channel.assign(n_tokens, 0);
  t.pos_id.assign(n_tokens, 0);
  t.valid.assign(n_tokens, 1);
  return t;
}

void append_queries(TokenSequence& t, const Codec& c, const std::vector<Query>& queries,
                    int action_slot, int flag_slot, bool allow_action) {
  for (size_t qi = 0; qi < queries.size(); qi++) {
    const Query& q = queries[qi];
    int row = t.n_ctx + (int)qi;
    double* f = t.feats.data() + (size_t)row * t.feat_dim;
    c.put_state(q.s, f);
    if (!q.a.empty()) {
      require(allow_action, "encode: query carries an action in a state-only layout");
      c.put_action(q.a, f + action_slot);
    }
    f[flag_slot] = 1.0;
    t.channel[row] = 2;
    t.pos_id[row] = t.n_ctx;
  }
}

}  // namespace

TokenSequence encode_iprl(const Codec& c, const IprlContext& ctx,
                          const std::vector<Query>& queries) {
  require(!ctx.recs.empty() || !queries.empty(), "encode_iprl: no tokens to encode");
  int fd = iprl_feat_dim(c);
  int H = (int)ctx.recs.size();
  TokenSequence t = blank(H + (int)queries.size(), fd);
  t.n_ctx = H;
  int slot_a = c.state_feat, slot_a2 = c.state_feat + c.action_feat;
  int slot_y = c.state_feat + 2 * c.action_feat, slot_q = slot_y + 1;
  for (int h = 0; h < H; h++) {
    const auto& r = ctx.recs[h];
    require(r.y == 1 || r.y == -1, "encode_iprl: preference bit must be +-1");
    double* f = t.feats.data() + (size_t)h * fd;
    c.put_state(r.s, f);
    c.put_action(r.a, f + slot_a);
    c.put_action(r.a2, f + slot_a2);
    f[slot_y] = (double)r.y;
    t.pos_id[h] = h;
  }
  append_queries(t, c, queries, slot_a, slot_q, false);
  return t;
}

TokenSequence encode_reward_annotated(const Codec& c, const RewardContext& ctx,
                                      const std::vector<Query>& queries) {
  require(!ctx.recs.empty() || !queries.empty(),
          "encode_reward_annotated: no tokens to encode");
  int fd = reward_annotated_feat_dim(c);
  int H = (int)ctx.recs.size();
  TokenSequence t = blank(H + (int)queries.size(), fd);
  t.n_ctx = H;
  int slot_a = c.state_feat, slot_r = c.state_feat + c.action_feat;
  int slot_s2 = slot_r + 1, slot_q = slot_s2 + c.state_feat;
  for (int h = 0; h < H; h++) {
    const auto& r = ctx.recs[h];
    double* f = t.feats.data() + (size_t)h * fd;
    c.put_state(r.s, f);
    c.put_action(r.a, f + slot_a);
    f[slot_r] = r.r;
    if (ctx.has_next) {
      require(!r.s2.empty(), "encode_reward_annotated: missing next state");
      c.put_state(r.s2, f + slot_s2);
    }
    t.pos_id[h] = h;
  }
  append_queries(t, c, queries, slot_a, slot_q, false);
  return t;
}

TokenSequence encode_tprl(const Codec& c, const TrajPairRecord& pair,
                          const std::vector<Query>& queries) {
  const Traj& pos = pair.preferred();
  const Traj& neg = pair.rejected();
  require(pos.len() > 0 && pos.len() == neg.len(),
          "encode_tprl: trajectories must be non-empty and equal length");
  int H = (int)pos.len();
  int fd = tprl_feat_dim(c);
  TokenSequence t = blank(2 * H + (int)queries.size(), fd);
  t.n_ctx = 2 * H;
  int slot_a = c.state_feat, slot_q = c.state_feat + c.action_feat;
  // interleave: preferred step h, then rejected step h
  for (int h = 0; h < H; h++) {
    for (int side = 0; side < 2; side++) {
      const Traj& tr = side == 0 ? pos : neg;
      int row = 2 * h + side;
      double* f = t.feats.data() + (size_t)row * fd;
      c.put_state(tr.s[h], f);
      c.put_action(tr.a[h], f + slot_a);
      t.channel[row] = side;
      t.pos_id[row] = row;
    }
  }
  append_queries(t, c, queries, slot_a, slot_q, true);
  return t;
}

namespace {

TokenSequence encode_traj_tokens(const Codec& c, const Traj& traj, bool with_actions) {
  require(traj.len() > 0, "encode_dit: empty trajectory");
  int H = (int)traj.len();
  int fd = with_actions ? c.state_feat + c.action_feat : c.state_feat;
  TokenSequence t = blank(H, fd);
  t.n_ctx = H;
  for (int h = 0; h < H; h++) {
    double* f = t.feats.data() + (size_t)h * fd;
    c.put_state(traj.s[h], f);
    if (with_actions) {
      require(traj.a.size() == traj.s.size(), "encode_dit: trajectory missing actions");
      c.put_action(traj.a[h], f + c.state_feat);
    }
    t.pos_id[h] = h;
  }
  return t;
}

}  // namespace

TokenSequence encode_dit_q(const Codec& c, const Traj& traj) {
  return encode_traj_tokens(c, traj, true);
}

TokenSequence encode_dit_v(const Codec& c, const Traj& traj) {
  return encode_traj_tokens(c, traj, false);
}

}  // namespace icprl::model
