#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "icprl/common.hpp"

namespace icprl::nn {

// Reverse-mode autodiff over float64 tensors. Graphs are built eagerly by the
// op functions below; backward() walks the graph once in reverse topological
// order. Gradients accumulate with += until explicitly zeroed, so repeated
// backward calls sum their contributions.
//
// Shapes are explicit everywhere: the only implicit broadcast is a rhs whose
// shape is a suffix of the lhs shape in add(). Everything else requires exact
// matches and throws std::invalid_argument with the offending shapes.

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  std::vector<long> shape;
  std::vector<double> value;
  std::vector<double> grad;  // lazily allocated, persists for leaves
  bool requires_grad = false;
  std::string name;  // parameter path for leaves, empty otherwise
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward_fn;

  long numel() const {
    long n = 1;
    for (long d : shape) n *= d;
    return n;
  }
  void ensure_grad() {
    if ((long)grad.size() != numel()) grad.assign(numel(), 0.0);
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr n) : node(std::move(n)) {}

  static Tensor constant(std::vector<long> shape, std::vector<double> data);
  static Tensor zeros(std::vector<long> shape, bool requires_grad = false, std::string name = "");
  static Tensor full(std::vector<long> shape, double v);
  static Tensor scalar(double v) { return full({1}, v); }
  // Gaussian init, used for parameters; stddev 0 gives exact zeros.
  static Tensor randn(std::vector<long> shape, double stddev, Rng& rng, bool requires_grad = true,
                      std::string name = "");

  bool defined() const { return node != nullptr; }
  const std::vector<long>& shape() const { return node->shape; }
  long numel() const { return node->numel(); }
  std::vector<double>& value() const { return node->value; }
  std::vector<double>& grad() const { return node->grad; }
  bool requires_grad() const { return node->requires_grad; }
  const std::string& name() const { return node->name; }
  double item() const;

  NodePtr node;
};

// While a NoGrad guard is alive on a thread, ops do not record parents or
// backward closures; forward values are still computed.
struct NoGrad {
  NoGrad();
  ~NoGrad();
  bool prev;
};
bool grad_enabled();

// Leaf gradients can be redirected into a per-call sink so that independent
// graphs may run backward concurrently (one sink per thread) and be merged
// serially afterward. Non-leaf gradients always live in their graph-private
// nodes.
using GradSink = std::unordered_map<Node*, std::vector<double>>;

void backward(const Tensor& loss, double seed = 1.0);
void backward_into(const Tensor& loss, GradSink& sink, double seed = 1.0);

Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a = false, bool trans_b = false);
Tensor add(const Tensor& a, const Tensor& b);  // b may be a suffix-shape of a
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise, equal shapes
Tensor scale(const Tensor& a, double c);
Tensor neg(const Tensor& a);
Tensor square(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor logsigmoid(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor softmax_lastdim(const Tensor& a);
Tensor log_softmax_lastdim(const Tensor& a);
Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
// Row gather from a 2-D tensor (embedding tables, position tables, readout
// row selection). ids are bounds-checked.
Tensor embed_lookup(const Tensor& table, const std::vector<long>& ids);
// Gather arbitrary flat elements; result is 1-D [ids.size()].
Tensor gather_flat(const Tensor& x, const std::vector<long>& ids);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& x, int axis, long start, long len);
Tensor reduce_sum(const Tensor& x);          // -> [1]
Tensor reduce_sum_lastdim(const Tensor& x);  // [..., n] -> [...]
Tensor mean_all(const Tensor& x);            // -> [1]

std::string shape_str(const std::vector<long>& s);

}  // namespace icprl::nn
