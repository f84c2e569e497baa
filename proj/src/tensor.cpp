#include "icprl/tensor.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <unordered_set>

extern "C" void openblas_set_num_threads(int);

namespace icprl::nn {

namespace {

thread_local bool g_grad_enabled = true;
thread_local GradSink* g_sink = nullptr;

void blas_single_thread() {
  static std::once_flag once;
  std::call_once(once, [] { openblas_set_num_threads(1); });
}

bool is_leaf(const Node& n) { return n.parents.empty(); }

// Where gradient contributions for `n` should accumulate. Leaves are
// redirected into the active sink (if any) so concurrent graphs never write
// to shared nodes.
double* grad_ptr(Node& n) {
  if (g_sink != nullptr && is_leaf(n)) {
    auto& v = (*g_sink)[&n];
    if ((long)v.size() != n.numel()) v.assign(n.numel(), 0.0);
    return v.data();
  }
  n.ensure_grad();
  return n.grad.data();
}

NodePtr make_node(std::vector<long> shape, std::vector<double> value) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  return n;
}

long checked_numel(const std::vector<long>& shape, const char* who) {
  require(!shape.empty(), std::string(who) + ": rank-0 shape");
  long n = 1;
  for (long d : shape) {
    require(d > 0, std::string(who) + ": non-positive dimension in " + shape_str(shape));
    n *= d;
  }
  return n;
}

// Attach result bookkeeping: parents and backward closure, honoring NoGrad.
Tensor finish(NodePtr out, std::vector<Tensor> parents, std::function<void(Node&)> bw) {
  bool any = false;
  for (const auto& p : parents) any = any || p.node->requires_grad;
  if (g_grad_enabled && any) {
    out->requires_grad = true;
    for (auto& p : parents) out->parents.push_back(p.node);
    out->backward_fn = std::move(bw);
  }
  return Tensor(std::move(out));
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

std::string shape_str(const std::vector<long>& s) {
  std::string r = "[";
  for (size_t i = 0; i < s.size(); i++) {
    if (i) r += ",";
    r += std::to_string(s[i]);
  }
  return r + "]";
}

Tensor Tensor::constant(std::vector<long> shape, std::vector<double> data) {
  long n = checked_numel(shape, "constant");
  require((long)data.size() == n, "constant: data size " + std::to_string(data.size()) +
                                      " does not match shape " + shape_str(shape));
  return Tensor(make_node(std::move(shape), std::move(data)));
}

Tensor Tensor::zeros(std::vector<long> shape, bool requires_grad, std::string name) {
  long n = checked_numel(shape, "zeros");
  auto node = make_node(std::move(shape), std::vector<double>(n, 0.0));
  node->requires_grad = requires_grad;
  node->name = std::move(name);
  return Tensor(std::move(node));
}

Tensor Tensor::full(std::vector<long> shape, double v) {
  long n = checked_numel(shape, "full");
  return Tensor(make_node(std::move(shape), std::vector<double>(n, v)));
}

Tensor Tensor::randn(std::vector<long> shape, double stddev, Rng& rng, bool requires_grad,
                     std::string name) {
  long n = checked_numel(shape, "randn");
  std::vector<double> v(n);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (long i = 0; i < n; i++) v[i] = stddev == 0.0 ? 0.0 : stddev * dist(rng);
  auto node = make_node(std::move(shape), std::move(v));
  node->requires_grad = requires_grad;
  node->name = std::move(name);
  return Tensor(std::move(node));
}

double Tensor::item() const {
  require(numel() == 1, "item: tensor has " + std::to_string(numel()) + " elements");
  return node->value[0];
}

NoGrad::NoGrad() : prev(g_grad_enabled) { g_grad_enabled = false; }
NoGrad::~NoGrad() { g_grad_enabled = prev; }
bool grad_enabled() { return g_grad_enabled; }

// ---------------------------------------------------------------------------
// backward

namespace {

std::vector<Node*> topo_order(Node* root) {
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.push_back({root, 0});
  seen.insert(root);
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      Node* p = n->parents[i].get();
      i++;
      if (p->requires_grad && !seen.count(p) && p->backward_fn) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  return order;  // children after parents; iterate in reverse for backprop
}

void run_backward(const Tensor& loss, double seed) {
  require(loss.defined(), "backward: undefined tensor");
  require(loss.numel() == 1, "backward: loss must be scalar, got " + shape_str(loss.shape()));
  if (!loss.node->requires_grad) return;
  for (double v : loss.value())
    require(std::isfinite(v), "backward: loss is not finite");
  Node* root = loss.node.get();
  if (!root->backward_fn) {  // loss is itself a leaf
    grad_ptr(*root)[0] += seed;
    return;
  }
  auto order = topo_order(root);
  root->ensure_grad();
  root->grad[0] += seed;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->requires_grad) {
      n->ensure_grad();
      n->backward_fn(*n);
    }
  }
}

}  // namespace

void backward(const Tensor& loss, double seed) { run_backward(loss, seed); }

void backward_into(const Tensor& loss, GradSink& sink, double seed) {
  g_sink = &sink;
  try {
    run_backward(loss, seed);
  } catch (...) {
    g_sink = nullptr;
    throw;
  }
  g_sink = nullptr;
}

// ---------------------------------------------------------------------------
// matmul

namespace {

struct MatDims {
  long batch, m, k, n;
};

MatDims matmul_dims(const Tensor& a, const Tensor& b, bool ta, bool tb) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  require(sa.size() == sb.size() && (sa.size() == 2 || sa.size() == 3),
          "matmul: ranks must both be 2 or 3, got " + shape_str(sa) + " x " + shape_str(sb));
  long batch = 1;
  size_t off = 0;
  if (sa.size() == 3) {
    require(sa[0] == sb[0], "matmul: batch mismatch " + shape_str(sa) + " x " + shape_str(sb));
    batch = sa[0];
    off = 1;
  }
  long ar = sa[off], ac = sa[off + 1], br = sb[off], bc = sb[off + 1];
  long m = ta ? ac : ar, ka = ta ? ar : ac;
  long kb = tb ? bc : br, n = tb ? br : bc;
  require(ka == kb, "matmul: inner dimension mismatch " + shape_str(sa) + (ta ? "^T" : "") +
                        " x " + shape_str(sb) + (tb ? "^T" : ""));
  return {batch, m, ka, n};
}

void dgemm(bool ta, bool tb, long m, long n, long k, const double* a, long lda, const double* b,
           long ldb, double beta, double* c, long ldc) {
  blas_single_thread();
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans,
              (int)m, (int)n, (int)k, 1.0, a, (int)lda, b, (int)ldb, beta, c, (int)ldc);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
  MatDims d = matmul_dims(a, b, trans_a, trans_b);
  std::vector<long> out_shape =
      d.batch == 1 && a.shape().size() == 2 ? std::vector<long>{d.m, d.n}
                                            : std::vector<long>{d.batch, d.m, d.n};
  std::vector<double> out((size_t)d.batch * d.m * d.n);
  const auto& av = a.value();
  const auto& bv = b.value();
  long a_sz = d.m * d.k, b_sz = d.k * d.n, c_sz = d.m * d.n;
  long lda = trans_a ? d.m : d.k, ldb = trans_b ? d.k : d.n;
  for (long bi = 0; bi < d.batch; bi++)
    dgemm(trans_a, trans_b, d.m, d.n, d.k, av.data() + bi * a_sz, lda, bv.data() + bi * b_sz, ldb,
          0.0, out.data() + bi * c_sz, d.n);

  auto node = make_node(out_shape, std::move(out));
  return finish(node, {a, b}, [a, b, d, trans_a, trans_b](Node& self) {
    long a_sz = d.m * d.k, b_sz = d.k * d.n, c_sz = d.m * d.n;
    long lda = trans_a ? d.m : d.k, ldb = trans_b ? d.k : d.n;
    const double* dc = self.grad.data();
    const auto& av = a.value();
    const auto& bv = b.value();
    if (a.node->requires_grad) {
      double* da = grad_ptr(*a.node);
      for (long bi = 0; bi < d.batch; bi++) {
        const double* g = dc + bi * c_sz;
        const double* bp = bv.data() + bi * b_sz;
        double* out = da + bi * a_sz;
        if (!trans_a)  // dA[m,k] = dC . B'^T
          dgemm(false, !trans_b, d.m, d.k, d.n, g, d.n, bp, ldb, 1.0, out, d.k);
        else  // dA[k,m] = B' . dC^T
          dgemm(trans_b, true, d.k, d.m, d.n, bp, ldb, g, d.n, 1.0, out, d.m);
      }
    }
    if (b.node->requires_grad) {
      double* db = grad_ptr(*b.node);
      for (long bi = 0; bi < d.batch; bi++) {
        const double* g = dc + bi * c_sz;
        const double* ap = av.data() + bi * a_sz;
        double* out = db + bi * b_sz;
        if (!trans_b)  // dB[k,n] = A'^T . dC
          dgemm(!trans_a, false, d.k, d.n, d.m, ap, lda, g, d.n, 1.0, out, d.n);
        else  // dB[n,k] = dC^T . A'
          dgemm(true, trans_a, d.n, d.k, d.m, g, d.n, ap, lda, 1.0, out, d.k);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// elementwise and shape ops

Tensor add(const Tensor& a, const Tensor& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  bool suffix = sb.size() <= sa.size() &&
                std::equal(sb.begin(), sb.end(), sa.end() - sb.size());
  require(suffix, "add: rhs shape " + shape_str(sb) + " is not a suffix of lhs " + shape_str(sa));
  long nb = b.numel(), na = a.numel();
  std::vector<double> out(na);
  const auto& av = a.value();
  const auto& bv = b.value();
  for (long i = 0; i < na; i++) out[i] = av[i] + bv[i % nb];
  auto node = make_node(sa, std::move(out));
  return finish(node, {a, b}, [a, b, na, nb](Node& self) {
    const double* g = self.grad.data();
    if (a.node->requires_grad) {
      double* da = grad_ptr(*a.node);
      for (long i = 0; i < na; i++) da[i] += g[i];
    }
    if (b.node->requires_grad) {
      double* db = grad_ptr(*b.node);
      for (long i = 0; i < na; i++) db[i % nb] += g[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, neg(b)); }

Tensor mul(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(),
          "mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  long n = a.numel();
  std::vector<double> out(n);
  const auto& av = a.value();
  const auto& bv = b.value();
  for (long i = 0; i < n; i++) out[i] = av[i] * bv[i];
  auto node = make_node(a.shape(), std::move(out));
  return finish(node, {a, b}, [a, b, n](Node& self) {
    const double* g = self.grad.data();
    if (a.node->requires_grad) {
      double* da = grad_ptr(*a.node);
      const auto& bv = b.value();
      for (long i = 0; i < n; i++) da[i] += g[i] * bv[i];
    }
    if (b.node->requires_grad) {
      double* db = grad_ptr(*b.node);
      const auto& av = a.value();
      for (long i = 0; i < n; i++) db[i] += g[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& a, double c) {
  long n = a.numel();
  std::vector<double> out(n);
  const auto& av = a.value();
  for (long i = 0; i < n; i++) out[i] = av[i] * c;
  auto node = make_node(a.shape(), std::move(out));
  return finish(node, {a}, [a, c, n](Node& self) {
    if (!a.node->requires_grad) return;
    double* da = grad_ptr(*a.node);
    const double* g = self.grad.data();
    for (long i = 0; i < n; i++) da[i] += g[i] * c;
  });
}

namespace {

// Shared scaffolding for unary elementwise ops with local derivative df(x, y).
template <class F, class DF>
Tensor unary_op(const Tensor& a, F f, DF df) {
  const auto& v = a.value();
  std::vector<double> out(v.size());
  for (size_t i = 0; i < v.size(); i++) out[i] = f(v[i]);
  auto node = make_node(a.shape(), std::move(out));
  return finish(node, {a}, [a, df](Node& self) {
    if (!a.node->requires_grad) return;
    double* da = grad_ptr(*a.node);
    const double* g = self.grad.data();
    const auto& x = a.value();
    const auto& y = self.value;
    for (size_t i = 0; i < x.size(); i++) da[i] += g[i] * df(x[i], y[i]);
  });
}

}  // namespace

Tensor neg(const Tensor& a) {
  return unary_op(a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor square(const Tensor& a) {
  return unary_op(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor exp(const Tensor& a) {
  return unary_op(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary_op(a, [](double x) { return std::log(x); },
                  [](double x, double) { return 1.0 / x; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(a, [](double x) { return sigmoid_scalar(x); },
                  [](double, double y) { return y * (1.0 - y); });
}

Tensor logsigmoid(const Tensor& a) {
  // -softplus(-x), evaluated stably on both branches.
  return unary_op(a,
                  [](double x) {
                    if (x >= 0) return -std::log1p(std::exp(-x));
                    return x - std::log1p(std::exp(x));
                  },
                  [](double x, double) { return sigmoid_scalar(-x); });
}

Tensor gelu(const Tensor& a) {
  constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double kA = 0.044715;
  return unary_op(a,
                  [](double x) {
                    double u = kC * (x + kA * x * x * x);
                    return 0.5 * x * (1.0 + std::tanh(u));
                  },
                  [](double x, double) {
                    double u = kC * (x + kA * x * x * x);
                    double t = std::tanh(u);
                    double du = kC * (1.0 + 3.0 * kA * x * x);
                    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
                  });
}

namespace {

long last_dim(const Tensor& t) { return t.shape().back(); }
long row_count(const Tensor& t) { return t.numel() / t.shape().back(); }

}  // namespace

Tensor softmax_lastdim(const Tensor& a) {
  long n = last_dim(a), rows = row_count(a);
  std::vector<double> out(a.numel());
  const auto& x = a.value();
  for (long r = 0; r < rows; r++) {
    const double* xr = x.data() + r * n;
    double* yr = out.data() + r * n;
    double m = xr[0];
    for (long j = 1; j < n; j++) m = std::max(m, xr[j]);
    double s = 0;
    for (long j = 0; j < n; j++) s += (yr[j] = std::exp(xr[j] - m));
    for (long j = 0; j < n; j++) yr[j] /= s;
  }
  auto node = make_node(a.shape(), std::move(out));
  return finish(node, {a}, [a, n, rows](Node& self) {
    if (!a.node->requires_grad) return;
    double* da = grad_ptr(*a.node);
    const double* g = self.grad.data();
    const double* y = self.value.data();
    for (long r = 0; r < rows; r++) {
      const double* yr = y + r * n;
      const double* gr = g + r * n;
      double dot = 0;
      for (long j = 0; j < n; j++) dot += gr[j] * yr[j];
      double* dr = da + r * n;
      for (long j = 0; j < n; j++) dr[j] += yr[j] * (gr[j] - dot);
    }
  });
}

Tensor log_softmax_lastdim(const Tensor& a) {
  long n = last_dim(a), rows = row_count(a);
  std::vector<double> out(a.numel());
  const auto& x = a.value();
  for (long r = 0; r < rows; r++) {
    const double* xr = x.data() + r * n;
    double* yr = out.data() + r * n;
    double m = xr[0];
    for (long j = 1; j < n; j++) m = std::max(m, xr[j]);
    double s = 0;
    for (long j = 0; j < n; j++) s += std::exp(xr[j] - m);
    double lse = m + std::log(s);
    for (long j = 0; j < n; j++) yr[j] = xr[j] - lse;
  }
  auto node = make_node(a.shape(), std::move(out));
  return finish(node, {a}, [a, n, rows](Node& self) {
    if (!a.node->requires_grad) return;
    double* da = grad_ptr(*a.node);
    const double* g = self.grad.data();
    const double* y = self.value.data();
    for (long r = 0; r < rows; r++) {
      const double* yr = y + r * n;
      const double* gr = g + r * n;
      double gs = 0;
      for (long j = 0; j < n; j++) gs += gr[j];
      double* dr = da + r * n;
      for (long j = 0; j < n; j++) dr[j] += gr[j] - std::exp(yr[j]) * gs;
    }
  });
}

Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  long n = last_dim(x), rows = row_count(x);
  require(gain.shape() == std::vector<long>{n} && bias.shape() == std::vector<long>{n},
          "layernorm: gain/bias must be [" + std::to_string(n) + "], got " +
              shape_str(gain.shape()) + " and " + shape_str(bias.shape()));
  std::vector<double> out(x.numel());
  auto rstd = std::make_shared<std::vector<double>>(rows);
  auto mean = std::make_shared<std::vector<double>>(rows);
  const auto& xv = x.value();
  const auto& gv = gain.value();
  const auto& bv = bias.value();
  for (long r = 0; r < rows; r++) {
    const double* xr = xv.data() + r * n;
    double mu = 0;
    for (long j = 0; j < n; j++) mu += xr[j];
    mu /= n;
    double var = 0;
    for (long j = 0; j < n; j++) var += (xr[j] - mu) * (xr[j] - mu);
    var /= n;
    double rs = 1.0 / std::sqrt(var + eps);
    (*mean)[r] = mu;
    (*rstd)[r] = rs;
    double* yr = out.data() + r * n;
    for (long j = 0; j < n; j++) yr[j] = (xr[j] - mu) * rs * gv[j] + bv[j];
  }
  auto node = make_node(x.shape(), std::move(out));
  return finish(node, {x, gain, bias}, [x, gain, bias, n, rows, mean, rstd](Node& self) {
    const double* g = self.grad.data();
    const auto& xv = x.value();
    const auto& gv = gain.value();
    double* dx = x.node->requires_grad ? grad_ptr(*x.node) : nullptr;
    double* dg = gain.node->requires_grad ? grad_ptr(*gain.node) : nullptr;
    double* db = bias.node->requires_grad ? grad_ptr(*bias.node) : nullptr;
    for (long r = 0; r < rows; r++) {
      const double* xr = xv.data() + r * n;
      const double* gr = g + r * n;
      double mu = (*mean)[r], rs = (*rstd)[r];
      double m1 = 0, m2 = 0;
      for (long j = 0; j < n; j++) {
        double xhat = (xr[j] - mu) * rs;
        double gdy = gv[j] * gr[j];
        m1 += gdy;
        m2 += gdy * xhat;
        if (dg) dg[j] += gr[j] * xhat;
        if (db) db[j] += gr[j];
      }
      if (dx) {
        m1 /= n;
        m2 /= n;
        double* dxr = dx + r * n;
        for (long j = 0; j < n; j++) {
          double xhat = (xr[j] - mu) * rs;
          dxr[j] += rs * (gv[j] * gr[j] - m1 - xhat * m2);
        }
      }
    }
  });
}

Tensor embed_lookup(const Tensor& table, const std::vector<long>& ids) {
  require(table.shape().size() == 2, "embed_lookup: table must be 2-D, got " +
                                         shape_str(table.shape()));
  long v = table.shape()[0], d = table.shape()[1];
  require(!ids.empty(), "embed_lookup: empty index list");
  for (long id : ids)
    require(id >= 0 && id < v, "embed_lookup: index " + std::to_string(id) +
                                   " out of range [0," + std::to_string(v) + ")");
  std::vector<double> out(ids.size() * d);
  const auto& tv = table.value();
  for (size_t i = 0; i < ids.size(); i++)
    std::copy_n(tv.data() + ids[i] * d, d, out.data() + i * d);
  auto node = make_node({(long)ids.size(), d}, std::move(out));
  return finish(node, {table}, [table, ids, d](Node& self) {
    if (!table.node->requires_grad) return;
    double* dt = grad_ptr(*table.node);
    const double* g = self.grad.data();
    for (size_t i = 0; i < ids.size(); i++) {
      double* row = dt + ids[i] * d;
      const double* gr = g + i * d;
      for (long j = 0; j < d; j++) row[j] += gr[j];
    }
  });
}

Tensor gather_flat(const Tensor& x, const std::vector<long>& ids) {
  long n = x.numel();
  require(!ids.empty(), "gather_flat: empty index list");
  for (long id : ids)
    require(id >= 0 && id < n, "gather_flat: index " + std::to_string(id) +
                                   " out of range [0," + std::to_string(n) + ")");
  std::vector<double> out(ids.size());
  const auto& xv = x.value();
  for (size_t i = 0; i < ids.size(); i++) out[i] = xv[ids[i]];
  auto node = make_node({(long)ids.size()}, std::move(out));
  return finish(node, {x}, [x, ids](Node& self) {
    if (!x.node->requires_grad) return;
    double* dx = grad_ptr(*x.node);
    const double* g = self.grad.data();
    for (size_t i = 0; i < ids.size(); i++) dx[ids[i]] += g[i];
  });
}

namespace {

// outer/inner block sizes around `axis` for a row-major layout.
void block_dims(const std::vector<long>& shape, int axis, long& outer, long& inner) {
  outer = 1;
  for (int i = 0; i < axis; i++) outer *= shape[i];
  inner = 1;
  for (size_t i = axis + 1; i < shape.size(); i++) inner *= shape[i];
}

}  // namespace

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  require(!parts.empty(), "concat: no inputs");
  const auto& s0 = parts[0].shape();
  require(axis >= 0 && axis < (int)s0.size(), "concat: axis out of range");
  long total = 0;
  for (const auto& p : parts) {
    const auto& s = p.shape();
    require(s.size() == s0.size(), "concat: rank mismatch");
    for (size_t i = 0; i < s.size(); i++)
      require((int)i == axis || s[i] == s0[i],
              "concat: shape mismatch " + shape_str(s) + " vs " + shape_str(s0));
    total += s[axis];
  }
  std::vector<long> out_shape = s0;
  out_shape[axis] = total;
  long outer, inner;
  block_dims(out_shape, axis, outer, inner);
  std::vector<double> out((size_t)outer * total * inner);
  long off = 0;
  for (const auto& p : parts) {
    long len = p.shape()[axis];
    const auto& pv = p.value();
    for (long o = 0; o < outer; o++)
      std::copy_n(pv.data() + o * len * inner, len * inner,
                  out.data() + (o * total + off) * inner);
    off += len;
  }
  auto node = make_node(out_shape, std::move(out));
  std::vector<Tensor> parents = parts;
  return finish(node, parts, [parents, axis, outer, inner, total](Node& self) {
    const double* g = self.grad.data();
    long off = 0;
    for (const auto& p : parents) {
      long len = p.shape()[axis];
      if (p.node->requires_grad) {
        double* dp = grad_ptr(*p.node);
        for (long o = 0; o < outer; o++) {
          const double* gs = g + (o * total + off) * inner;
          double* dd = dp + o * len * inner;
          for (long i = 0; i < len * inner; i++) dd[i] += gs[i];
        }
      }
      off += len;
    }
  });
}

Tensor slice(const Tensor& x, int axis, long start, long len) {
  const auto& s = x.shape();
  require(axis >= 0 && axis < (int)s.size(), "slice: axis out of range");
  require(start >= 0 && len > 0 && start + len <= s[axis],
          "slice: range [" + std::to_string(start) + "," + std::to_string(start + len) +
              ") out of bounds for axis size " + std::to_string(s[axis]));
  std::vector<long> out_shape = s;
  out_shape[axis] = len;
  long outer, inner;
  block_dims(s, axis, outer, inner);
  long full = s[axis];
  std::vector<double> out((size_t)outer * len * inner);
  const auto& xv = x.value();
  for (long o = 0; o < outer; o++)
    std::copy_n(xv.data() + (o * full + start) * inner, len * inner, out.data() + o * len * inner);
  auto node = make_node(out_shape, std::move(out));
  return finish(node, {x}, [x, outer, inner, full, start, len](Node& self) {
    if (!x.node->requires_grad) return;
    double* dx = grad_ptr(*x.node);
    const double* g = self.grad.data();
    for (long o = 0; o < outer; o++) {
      double* dd = dx + (o * full + start) * inner;
      const double* gs = g + o * len * inner;
      for (long i = 0; i < len * inner; i++) dd[i] += gs[i];
    }
  });
}

Tensor reduce_sum(const Tensor& x) {
  long n = x.numel();
  double s = 0;
  const auto& xv = x.value();
  for (long i = 0; i < n; i++) s += xv[i];
  auto node = make_node({1}, {s});
  return finish(node, {x}, [x, n](Node& self) {
    if (!x.node->requires_grad) return;
    double* dx = grad_ptr(*x.node);
    double g = self.grad[0];
    for (long i = 0; i < n; i++) dx[i] += g;
  });
}

Tensor reduce_sum_lastdim(const Tensor& x) {
  long n = last_dim(x), rows = row_count(x);
  std::vector<long> out_shape(x.shape().begin(), x.shape().end() - 1);
  if (out_shape.empty()) out_shape = {1};
  std::vector<double> out(rows, 0.0);
  const auto& xv = x.value();
  for (long r = 0; r < rows; r++) {
    const double* xr = xv.data() + r * n;
    double s = 0;
    for (long j = 0; j < n; j++) s += xr[j];
    out[r] = s;
  }
  auto node = make_node(out_shape, std::move(out));
  return finish(node, {x}, [x, n, rows](Node& self) {
    if (!x.node->requires_grad) return;
    double* dx = grad_ptr(*x.node);
    const double* g = self.grad.data();
    for (long r = 0; r < rows; r++)
      for (long j = 0; j < n; j++) dx[r * n + j] += g[r];
  });
}

Tensor mean_all(const Tensor& x) { return scale(reduce_sum(x), 1.0 / (double)x.numel()); }

}  // namespace icprl::nn
