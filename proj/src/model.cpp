#include "icprl/model.hpp"

#include <cmath>
#include <sstream>

#include "icprl/checkpoint.hpp"

namespace icprl::model {

using nn::Tensor;

std::string head_kind_name(HeadKind k) {
  switch (k) {
    case HeadKind::policy_discrete: return "policy_discrete";
    case HeadKind::policy_continuous: return "policy_continuous";
    case HeadKind::reward: return "reward";
    case HeadKind::q_value: return "q_value";
    case HeadKind::v_value: return "v_value";
  }
  fail("head_kind_name: bad enum");
}

HeadKind head_kind_from(const std::string& s) {
  if (s == "policy_discrete") return HeadKind::policy_discrete;
  if (s == "policy_continuous") return HeadKind::policy_continuous;
  if (s == "reward") return HeadKind::reward;
  if (s == "q_value") return HeadKind::q_value;
  if (s == "v_value") return HeadKind::v_value;
  throw std::invalid_argument("unknown head kind: " + s);
}

ModelConfig ModelConfig::preset(const std::string& name) {
  ModelConfig c;
  if (name == "desk") {
    c.n_layers = 4; c.d_model = 64; c.n_heads = 4; c.max_seq_len = 256;
  } else if (name == "paper_iprl") {
    c.n_layers = 6; c.d_model = 256; c.n_heads = 8; c.max_seq_len = 512;
  } else if (name == "paper_tprl_reward") {
    c.n_layers = 4; c.d_model = 32; c.n_heads = 4; c.max_seq_len = 512;
  } else if (name == "paper_metaworld") {
    c.n_layers = 8; c.d_model = 256; c.n_heads = 8; c.max_seq_len = 512;
  } else {
    throw std::invalid_argument("unknown model preset: " + name);
  }
  return c;
}

std::string ModelConfig::canonical() const {
  std::ostringstream os;
  os << "layers=" << n_layers << " d_model=" << d_model << " heads=" << n_heads
     << " max_seq=" << max_seq_len << " feat=" << feat_dim << " out=" << out_dim
     << " head=" << head_kind_name(head) << " dropout=" << format_double(dropout);
  return os.str();
}

void ModelConfig::validate() const {
  require(n_layers > 0, "model: n_layers must be positive");
  require(d_model > 0 && n_heads > 0, "model: d_model and n_heads must be positive");
  require(d_model % n_heads == 0, "model: d_model must divide evenly into heads");
  require(max_seq_len > 0, "model: max_seq_len must be positive");
  require(feat_dim > 0, "model: feat_dim must be set from the token layout");
  require(out_dim > 0, "model: out_dim must be set");
  require(dropout >= 0.0 && dropout < 1.0, "model: dropout must be in [0,1)");
}

Tensor SeqModel::add_param(const std::string& name, std::vector<long> shape, double stddev,
                           Rng& rng) {
  Tensor t = Tensor::randn(std::move(shape), stddev, rng, true, name);
  params_.push_back(t);
  return t;
}

SeqModel::SeqModel(ModelConfig cfg, uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng = make_rng(derive_seed(init_seed, "model_init"));
  const long d = cfg_.d_model;
  const double sd = 0.02;
  add_param("tok.w", {cfg_.feat_dim, d}, sd, rng);
  add_param("tok.b", {d}, 0.0, rng);
  add_param("chan.w", {3, d}, sd, rng);
  // Row max_seq_len exists so the shared query slot is addressable even when
  // the context fills the window.
  add_param("pos.w", {cfg_.max_seq_len + 1, d}, sd, rng);
  for (int i = 0; i < cfg_.n_layers; i++) {
    std::string pre = "layer" + std::to_string(i) + ".";
    Tensor g1 = add_param(pre + "ln1.g", {d}, 0.0, rng);
    std::fill(g1.value().begin(), g1.value().end(), 1.0);
    add_param(pre + "ln1.b", {d}, 0.0, rng);
    add_param(pre + "attn.qkv.w", {d, 3 * d}, sd, rng);
    add_param(pre + "attn.qkv.b", {3 * d}, 0.0, rng);
    add_param(pre + "attn.out.w", {d, d}, sd, rng);
    add_param(pre + "attn.out.b", {d}, 0.0, rng);
    Tensor g2 = add_param(pre + "ln2.g", {d}, 0.0, rng);
    std::fill(g2.value().begin(), g2.value().end(), 1.0);
    add_param(pre + "ln2.b", {d}, 0.0, rng);
    add_param(pre + "mlp.fc.w", {d, 4 * d}, sd, rng);
    add_param(pre + "mlp.fc.b", {4 * d}, 0.0, rng);
    add_param(pre + "mlp.out.w", {4 * d, d}, sd, rng);
    add_param(pre + "mlp.out.b", {d}, 0.0, rng);
  }
  Tensor gf = add_param("final_ln.g", {d}, 0.0, rng);
  std::fill(gf.value().begin(), gf.value().end(), 1.0);
  add_param("final_ln.b", {d}, 0.0, rng);
  // Zero head: a fresh model scores every readout 0, so discrete policies
  // start exactly uniform.
  add_param("head.w", {d, cfg_.out_dim}, 0.0, rng);
  add_param("head.b", {cfg_.out_dim}, 0.0, rng);
}

Tensor SeqModel::p(const std::string& name) const {
  for (const Tensor& t : params_)
    if (t.name() == name) return t;
  fail("model: no parameter named " + name);
}

namespace {

// 0 where key j is visible to row i, -1e30 otherwise. Context rows see prior
// valid context plus themselves; query rows see all valid context plus
// themselves, so queries never interact.
Tensor attention_mask(const TokenSequence& seq) {
  const int t = seq.total();
  std::vector<double> m((size_t)t * t, -1e30);
  for (int i = 0; i < t; i++) {
    for (int j = 0; j < t; j++) {
      bool ok = j == i;
      if (!ok && seq.valid[j]) ok = i < seq.n_ctx ? j < i : j < seq.n_ctx;
      if (ok) m[(size_t)i * t + j] = 0.0;
    }
  }
  return Tensor::constant({t, t}, std::move(m));
}

Tensor maybe_dropout(const Tensor& x, double rate, Rng* rng) {
  if (rng == nullptr || rate <= 0.0) return x;
  std::bernoulli_distribution keep(1.0 - rate);
  std::vector<double> m(x.numel());
  for (double& v : m) v = keep(*rng) ? 1.0 / (1.0 - rate) : 0.0;
  return mul(x, Tensor::constant(x.shape(), std::move(m)));
}

}  // namespace

Tensor SeqModel::forward(const TokenSequence& seq, const std::vector<int>& readout,
                         Rng* dropout_rng) const {
  const int t = seq.total();
  require(t > 0, "model: empty sequence");
  require(t <= cfg_.max_seq_len, "model: sequence length " + std::to_string(t) +
                                     " exceeds max_seq_len " + std::to_string(cfg_.max_seq_len));
  require(seq.feat_dim == cfg_.feat_dim,
          "model: sequence feat_dim " + std::to_string(seq.feat_dim) + " but model expects " +
              std::to_string(cfg_.feat_dim));
  require(seq.n_ctx >= 0 && seq.n_ctx <= t, "model: bad n_ctx");
  require((long)seq.feats.size() == (long)t * cfg_.feat_dim, "model: feats size mismatch");
  require(seq.pos_id.size() == (size_t)t && seq.valid.size() == (size_t)t,
          "model: pos_id/valid size mismatch");
  require(!readout.empty(), "model: readout rows required");
  std::vector<long> chan_ids(t), pos_ids(t);
  for (int i = 0; i < t; i++) {
    require(seq.channel[i] >= 0 && seq.channel[i] < 3, "model: channel out of range");
    require(seq.pos_id[i] >= 0 && seq.pos_id[i] <= cfg_.max_seq_len, "model: pos_id out of range");
    chan_ids[i] = seq.channel[i];
    pos_ids[i] = seq.pos_id[i];
  }
  std::vector<long> rows(readout.size());
  for (size_t i = 0; i < readout.size(); i++) {
    require(readout[i] >= 0 && readout[i] < t, "model: readout row out of range");
    require(seq.valid[readout[i]] != 0, "model: readout row is masked out");
    rows[i] = readout[i];
  }

  const long d = cfg_.d_model;
  const long dh = d / cfg_.n_heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt((double)dh);

  Tensor x = add(nn::matmul(Tensor::constant({t, cfg_.feat_dim}, seq.feats), p("tok.w")),
                 p("tok.b"));
  x = add(x, embed_lookup(p("chan.w"), chan_ids));
  x = add(x, embed_lookup(p("pos.w"), pos_ids));
  x = maybe_dropout(x, cfg_.dropout, dropout_rng);

  Tensor mask = attention_mask(seq);
  for (int l = 0; l < cfg_.n_layers; l++) {
    std::string pre = "layer" + std::to_string(l) + ".";
    Tensor h = layernorm(x, p(pre + "ln1.g"), p(pre + "ln1.b"));
    Tensor qkv = add(nn::matmul(h, p(pre + "attn.qkv.w")), p(pre + "attn.qkv.b"));
    std::vector<Tensor> heads;
    heads.reserve(cfg_.n_heads);
    for (int k = 0; k < cfg_.n_heads; k++) {
      Tensor q = slice(qkv, 1, (long)k * dh, dh);
      Tensor key = slice(qkv, 1, d + (long)k * dh, dh);
      Tensor v = slice(qkv, 1, 2 * d + (long)k * dh, dh);
      Tensor scores = add(scale(nn::matmul(q, key, false, true), inv_sqrt_dh), mask);
      heads.push_back(nn::matmul(softmax_lastdim(scores), v));
    }
    Tensor attn = add(nn::matmul(concat(heads, 1), p(pre + "attn.out.w")), p(pre + "attn.out.b"));
    x = add(x, maybe_dropout(attn, cfg_.dropout, dropout_rng));
    Tensor h2 = layernorm(x, p(pre + "ln2.g"), p(pre + "ln2.b"));
    Tensor f = gelu(add(nn::matmul(h2, p(pre + "mlp.fc.w")), p(pre + "mlp.fc.b")));
    Tensor o = add(nn::matmul(f, p(pre + "mlp.out.w")), p(pre + "mlp.out.b"));
    x = add(x, maybe_dropout(o, cfg_.dropout, dropout_rng));
  }
  x = layernorm(x, p("final_ln.g"), p("final_ln.b"));
  return add(nn::matmul(embed_lookup(x, rows), p("head.w")), p("head.b"));
}

void SeqModel::save(const std::string& path) const {
  nn::save_checkpoint(path, cfg_.hash(), params_);
}

void SeqModel::load(const std::string& path) {
  nn::Checkpoint ck = nn::load_checkpoint(path);
  if (ck.config_hash != cfg_.hash())
    fail("model: checkpoint " + path + " was written for a different model configuration");
  nn::restore_params(ck, params_);
}

}  // namespace icprl::model
