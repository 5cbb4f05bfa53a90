#pragma once

#include <Eigen/Dense>
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace accsurf::ad {

using Mat = Eigen::MatrixXd;

// Thrown when an optimization run hits a numerical dead end (NaN gradients,
// Cholesky failure after jitter escalation, non-finite losses).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Trainable tensor with Adam moment slots. Addresses must stay stable for the
// lifetime of the graphs referencing it; keep Params inside a ParamStore.
struct Param {
  std::string name;
  Mat value;
  Mat grad;
  Mat m, v;  // Adam moments

  explicit Param(std::string n, Mat init)
      : name(std::move(n)),
        value(std::move(init)),
        grad(Mat::Zero(value.rows(), value.cols())),
        m(Mat::Zero(value.rows(), value.cols())),
        v(Mat::Zero(value.rows(), value.cols())) {}
};

class ParamStore {
 public:
  Param& add(const std::string& name, Mat init) {
    params_.emplace_back(name, std::move(init));
    return params_.back();
  }
  std::vector<Param*> all() {
    std::vector<Param*> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(&p);
    return out;
  }
  std::size_t size() const { return params_.size(); }

 private:
  std::deque<Param> params_;  // deque: stable addresses
};

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Mat value;
  Mat grad;
  bool needs_grad = false;
  Param* param = nullptr;  // set on leaves bound to a trainable Param
  std::vector<NodePtr> parents;
  std::function<void(Node&)> pull;  // scatters node.grad into parents
};

// Value-semantic handle on a graph node. Graphs are define-by-run: every
// optimization step rebuilds the expression from the current Param values.
class Var {
 public:
  Var() = default;
  explicit Var(NodePtr n) : node_(std::move(n)) {}

  const Mat& value() const { return node_->value; }
  const Mat& grad() const { return node_->grad; }
  double scalar() const { return node_->value(0, 0); }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  const NodePtr& node() const { return node_; }
  bool defined() const { return node_ != nullptr; }

 private:
  NodePtr node_;
};

Var constant(Mat value);
Var constant(double value);  // 1x1
Var leaf(Param& p);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // elementwise
Var div(const Var& a, const Var& b);  // elementwise
Var neg(const Var& a);
Var scale(const Var& a, double c);
Var add_const(const Var& a, double c);

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

Var exp_(const Var& a);
Var log_(const Var& a);
Var sqrt_(const Var& a);
Var square(const Var& a);
Var sigmoid_(const Var& a);
Var softplus_(const Var& a);
Var tanh_(const Var& a);
Var lgamma_(const Var& a);
Var clamp(const Var& a, double lo, double hi);

// Broadcast / reduction.
Var rep_cols(const Var& a, Eigen::Index n);  // (r x 1) -> (r x n)
Var rep_rows(const Var& a, Eigen::Index n);  // (1 x c) -> (n x c)
Var row_sum(const Var& a);                   // -> (r x 1)
Var col_sum(const Var& a);                   // -> (1 x c)
Var total_sum(const Var& a);                 // -> (1 x 1)

// Multiply/divide a matrix by a 1x1 graph scalar.
Var mul_scalar(const Var& a, const Var& s);
Var div_scalar(const Var& a, const Var& s);

// Linear algebra. spd_solve/logdet_spd read only the lower triangle of K and
// assume K is symmetric by construction; their adjoints are exact for
// symmetric perturbations.
Var spd_solve(const Var& K, const Var& B);       // K^{-1} B via LLT
Var logdet_spd(const Var& K);                    // log det K
Var tri_solve_lower(const Var& L, const Var& B); // L^{-1} B
Var take_diag(const Var& a);                     // (m x m) -> (m x 1)
Var make_diag(const Var& v);                     // (m x 1) -> (m x m)

// Row-wise log-sum-exp with a constant max shift; -> (r x 1).
Var logsumexp_rows(const Var& a);

// Reverse pass from a 1x1 root. Accumulates into Param::grad for every bound
// leaf (on top of whatever is already there) and returns the root value.
double backward(const Var& root);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  // Applies one update from Param::grad and clears the grads.
  void step(std::span<Param* const> params);
  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  std::int64_t steps_taken() const { return t_; }
  void set_steps_taken(std::int64_t t) { t_ = t; }

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
};

}  // namespace accsurf::ad
