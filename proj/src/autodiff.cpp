#include "accsurf/autodiff.hpp"

#include <cmath>
#include <unordered_set>

#include "accsurf/special.hpp"

namespace accsurf::ad {

namespace {

NodePtr make_node(Mat value, std::vector<NodePtr> parents,
                  std::function<void(Node&)> pull) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  for (const auto& p : n->parents) {
    if (p->needs_grad) {
      n->needs_grad = true;
      break;
    }
  }
  if (n->needs_grad) n->pull = std::move(pull);
  return n;
}

void accumulate(Node& target, const Mat& g) {
  if (!target.needs_grad) return;
  if (target.grad.size() == 0) {
    target.grad = g;
  } else {
    target.grad += g;
  }
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

Mat digamma_mat(const Mat& x) {
  return x.unaryExpr([](double v) { return digamma(v); });
}

}  // namespace

Var constant(Mat value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(n);
}

Var constant(double value) {
  Mat m(1, 1);
  m(0, 0) = value;
  return constant(std::move(m));
}

Var leaf(Param& p) {
  auto n = std::make_shared<Node>();
  n->value = p.value;
  n->needs_grad = true;
  n->param = &p;
  return Var(n);
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  auto pa = a.node(), pb = b.node();
  return Var(make_node(a.value() + b.value(), {pa, pb}, [pa, pb](Node& n) {
    accumulate(*pa, n.grad);
    accumulate(*pb, n.grad);
  }));
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  auto pa = a.node(), pb = b.node();
  return Var(make_node(a.value() - b.value(), {pa, pb}, [pa, pb](Node& n) {
    accumulate(*pa, n.grad);
    accumulate(*pb, -n.grad);
  }));
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  auto pa = a.node(), pb = b.node();
  return Var(make_node(a.value().cwiseProduct(b.value()), {pa, pb},
                       [pa, pb](Node& n) {
                         accumulate(*pa, n.grad.cwiseProduct(pb->value));
                         accumulate(*pb, n.grad.cwiseProduct(pa->value));
                       }));
}

Var div(const Var& a, const Var& b) {
  check_same_shape(a, b, "div");
  auto pa = a.node(), pb = b.node();
  return Var(make_node(a.value().cwiseQuotient(b.value()), {pa, pb},
                       [pa, pb](Node& n) {
                         accumulate(*pa, n.grad.cwiseQuotient(pb->value));
                         Mat gb = -n.grad.cwiseProduct(pa->value)
                                       .cwiseQuotient(pb->value.cwiseProduct(pb->value));
                         accumulate(*pb, gb);
                       }));
}

Var neg(const Var& a) {
  auto pa = a.node();
  return Var(make_node(-a.value(), {pa},
                       [pa](Node& n) { accumulate(*pa, -n.grad); }));
}

Var scale(const Var& a, double c) {
  auto pa = a.node();
  return Var(make_node(a.value() * c, {pa},
                       [pa, c](Node& n) { accumulate(*pa, n.grad * c); }));
}

Var add_const(const Var& a, double c) {
  auto pa = a.node();
  return Var(make_node((a.value().array() + c).matrix(), {pa},
                       [pa](Node& n) { accumulate(*pa, n.grad); }));
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: shape mismatch");
  auto pa = a.node(), pb = b.node();
  return Var(make_node(a.value() * b.value(), {pa, pb}, [pa, pb](Node& n) {
    accumulate(*pa, n.grad * pb->value.transpose());
    accumulate(*pb, pa->value.transpose() * n.grad);
  }));
}

Var transpose(const Var& a) {
  auto pa = a.node();
  return Var(make_node(a.value().transpose(), {pa}, [pa](Node& n) {
    accumulate(*pa, n.grad.transpose());
  }));
}

Var exp_(const Var& a) {
  auto pa = a.node();
  Mat out = a.value().array().exp().matrix();
  auto po = std::make_shared<Mat>(out);
  return Var(make_node(std::move(out), {pa}, [pa, po](Node& n) {
    accumulate(*pa, n.grad.cwiseProduct(*po));
  }));
}

Var log_(const Var& a) {
  auto pa = a.node();
  return Var(make_node(a.value().array().log().matrix(), {pa}, [pa](Node& n) {
    accumulate(*pa, n.grad.cwiseQuotient(pa->value));
  }));
}

Var sqrt_(const Var& a) {
  auto pa = a.node();
  Mat out = a.value().array().sqrt().matrix();
  auto po = std::make_shared<Mat>(out);
  return Var(make_node(std::move(out), {pa}, [pa, po](Node& n) {
    accumulate(*pa, (n.grad.array() * 0.5 / po->array()).matrix());
  }));
}

Var square(const Var& a) {
  auto pa = a.node();
  return Var(make_node(a.value().array().square().matrix(), {pa}, [pa](Node& n) {
    accumulate(*pa, (n.grad.array() * 2.0 * pa->value.array()).matrix());
  }));
}

Var sigmoid_(const Var& a) {
  auto pa = a.node();
  Mat out = a.value().unaryExpr([](double v) { return sigmoid(v); });
  auto po = std::make_shared<Mat>(out);
  return Var(make_node(std::move(out), {pa}, [pa, po](Node& n) {
    accumulate(*pa,
               (n.grad.array() * po->array() * (1.0 - po->array())).matrix());
  }));
}

Var softplus_(const Var& a) {
  auto pa = a.node();
  Mat out = a.value().unaryExpr([](double v) { return softplus(v); });
  return Var(make_node(std::move(out), {pa}, [pa](Node& n) {
    Mat g = pa->value.unaryExpr([](double v) { return sigmoid(v); });
    accumulate(*pa, n.grad.cwiseProduct(g));
  }));
}

Var tanh_(const Var& a) {
  auto pa = a.node();
  Mat out = a.value().array().tanh().matrix();
  auto po = std::make_shared<Mat>(out);
  return Var(make_node(std::move(out), {pa}, [pa, po](Node& n) {
    accumulate(*pa, (n.grad.array() * (1.0 - po->array().square())).matrix());
  }));
}

Var lgamma_(const Var& a) {
  auto pa = a.node();
  Mat out = a.value().unaryExpr([](double v) { return std::lgamma(v); });
  return Var(make_node(std::move(out), {pa}, [pa](Node& n) {
    accumulate(*pa, n.grad.cwiseProduct(digamma_mat(pa->value)));
  }));
}

Var clamp(const Var& a, double lo, double hi) {
  auto pa = a.node();
  Mat out = a.value().array().max(lo).min(hi).matrix();
  return Var(make_node(std::move(out), {pa}, [pa, lo, hi](Node& n) {
    Mat mask = pa->value.unaryExpr(
        [lo, hi](double v) { return (v > lo && v < hi) ? 1.0 : 0.0; });
    accumulate(*pa, n.grad.cwiseProduct(mask));
  }));
}

Var rep_cols(const Var& a, Eigen::Index n) {
  if (a.cols() != 1) throw std::invalid_argument("rep_cols: need column vector");
  auto pa = a.node();
  return Var(make_node(a.value().replicate(1, n), {pa}, [pa](Node& n_) {
    accumulate(*pa, n_.grad.rowwise().sum());
  }));
}

Var rep_rows(const Var& a, Eigen::Index n) {
  if (a.rows() != 1) throw std::invalid_argument("rep_rows: need row vector");
  auto pa = a.node();
  return Var(make_node(a.value().replicate(n, 1), {pa}, [pa](Node& n_) {
    accumulate(*pa, n_.grad.colwise().sum());
  }));
}

Var row_sum(const Var& a) {
  auto pa = a.node();
  Eigen::Index c = a.cols();
  return Var(make_node(a.value().rowwise().sum(), {pa}, [pa, c](Node& n) {
    accumulate(*pa, n.grad.replicate(1, c));
  }));
}

Var col_sum(const Var& a) {
  auto pa = a.node();
  Eigen::Index r = a.rows();
  return Var(make_node(a.value().colwise().sum(), {pa}, [pa, r](Node& n) {
    accumulate(*pa, n.grad.replicate(r, 1));
  }));
}

Var total_sum(const Var& a) {
  auto pa = a.node();
  Mat out(1, 1);
  out(0, 0) = a.value().sum();
  return Var(make_node(std::move(out), {pa}, [pa](Node& n) {
    accumulate(*pa, Mat::Constant(pa->value.rows(), pa->value.cols(),
                                  n.grad(0, 0)));
  }));
}

Var mul_scalar(const Var& a, const Var& s) {
  if (s.rows() != 1 || s.cols() != 1) {
    throw std::invalid_argument("mul_scalar: s must be 1x1");
  }
  auto pa = a.node(), ps = s.node();
  return Var(make_node(a.value() * s.value()(0, 0), {pa, ps},
                       [pa, ps](Node& n) {
                         accumulate(*pa, n.grad * ps->value(0, 0));
                         Mat gs(1, 1);
                         gs(0, 0) = n.grad.cwiseProduct(pa->value).sum();
                         accumulate(*ps, gs);
                       }));
}

Var div_scalar(const Var& a, const Var& s) {
  if (s.rows() != 1 || s.cols() != 1) {
    throw std::invalid_argument("div_scalar: s must be 1x1");
  }
  auto pa = a.node(), ps = s.node();
  return Var(make_node(a.value() / s.value()(0, 0), {pa, ps},
                       [pa, ps](Node& n) {
                         double sv = ps->value(0, 0);
                         accumulate(*pa, n.grad / sv);
                         Mat gs(1, 1);
                         gs(0, 0) =
                             -n.grad.cwiseProduct(pa->value).sum() / (sv * sv);
                         accumulate(*ps, gs);
                       }));
}

Var spd_solve(const Var& K, const Var& B) {
  if (K.rows() != K.cols() || K.rows() != B.rows()) {
    throw std::invalid_argument("spd_solve: shape mismatch");
  }
  Eigen::LLT<Mat> llt(K.value());
  if (llt.info() != Eigen::Success) {
    throw NumericalError("spd_solve: Cholesky factorization failed");
  }
  Mat x = llt.solve(B.value());
  auto pk = K.node(), pb = B.node();
  auto px = std::make_shared<Mat>(x);
  auto pllt = std::make_shared<Eigen::LLT<Mat>>(std::move(llt));
  return Var(make_node(std::move(x), {pk, pb}, [pk, pb, px, pllt](Node& n) {
    Mat gb = pllt->solve(n.grad);
    accumulate(*pb, gb);
    accumulate(*pk, Mat(-gb * px->transpose()));
  }));
}

Var logdet_spd(const Var& K) {
  if (K.rows() != K.cols()) throw std::invalid_argument("logdet_spd: not square");
  Eigen::LLT<Mat> llt(K.value());
  if (llt.info() != Eigen::Success) {
    throw NumericalError("logdet_spd: Cholesky factorization failed");
  }
  Mat L = llt.matrixL();
  Mat out(1, 1);
  out(0, 0) = 2.0 * L.diagonal().array().log().sum();
  auto pk = K.node();
  auto pllt = std::make_shared<Eigen::LLT<Mat>>(std::move(llt));
  return Var(make_node(std::move(out), {pk}, [pk, pllt](Node& n) {
    Mat kinv = pllt->solve(Mat::Identity(pk->value.rows(), pk->value.cols()));
    accumulate(*pk, Mat(n.grad(0, 0) * kinv));
  }));
}

Var tri_solve_lower(const Var& L, const Var& B) {
  if (L.rows() != L.cols() || L.rows() != B.rows()) {
    throw std::invalid_argument("tri_solve_lower: shape mismatch");
  }
  Mat x = L.value().triangularView<Eigen::Lower>().solve(B.value());
  auto pl = L.node(), pb = B.node();
  auto px = std::make_shared<Mat>(x);
  return Var(make_node(std::move(x), {pl, pb}, [pl, pb, px](Node& n) {
    Mat gb = pl->value.triangularView<Eigen::Lower>().transpose().solve(n.grad);
    accumulate(*pb, gb);
    Mat gl = -gb * px->transpose();
    gl.triangularView<Eigen::StrictlyUpper>().setZero();
    accumulate(*pl, gl);
  }));
}

Var take_diag(const Var& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("take_diag: not square");
  auto pa = a.node();
  return Var(make_node(a.value().diagonal(), {pa}, [pa](Node& n) {
    Mat g = Mat::Zero(pa->value.rows(), pa->value.cols());
    g.diagonal() = n.grad.col(0);
    accumulate(*pa, g);
  }));
}

Var make_diag(const Var& v) {
  if (v.cols() != 1) throw std::invalid_argument("make_diag: need column vector");
  auto pv = v.node();
  Mat out = Mat::Zero(v.rows(), v.rows());
  out.diagonal() = v.value().col(0);
  return Var(make_node(std::move(out), {pv}, [pv](Node& n) {
    accumulate(*pv, Mat(n.grad.diagonal()));
  }));
}

Var logsumexp_rows(const Var& a) {
  Mat mx = a.value().rowwise().maxCoeff();
  Var shifted = sub(a, constant(Mat(mx.replicate(1, a.cols()))));
  return add(constant(std::move(mx)), log_(row_sum(exp_(shifted))));
}

double backward(const Var& root) {
  if (root.rows() != 1 || root.cols() != 1) {
    throw std::invalid_argument("backward: root must be scalar");
  }
  // Iterative post-order DFS for the topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* parent = node->parents[idx++].get();
      if (parent->needs_grad && seen.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order) n->grad.setZero(0, 0);
  Node* r = root.node().get();
  r->grad = Mat::Ones(1, 1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->grad.size() == 0) continue;  // unreached
    if (n->pull) n->pull(*n);
    if (n->param) n->param->grad += n->grad;
  }
  return root.scalar();
}

void Adam::step(std::span<Param* const> params) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (Param* p : params) {
    if (!p->grad.allFinite()) {
      throw NumericalError("Adam: non-finite gradient for parameter " + p->name);
    }
    p->m = cfg_.beta1 * p->m + (1.0 - cfg_.beta1) * p->grad;
    p->v = cfg_.beta2 * p->v +
           (1.0 - cfg_.beta2) * p->grad.cwiseProduct(p->grad);
    Mat mhat = p->m / bc1;
    Mat vhat = p->v / bc2;
    p->value.array() -=
        cfg_.lr * mhat.array() / (vhat.array().sqrt() + cfg_.eps);
    p->grad.setZero();
  }
}

}  // namespace accsurf::ad
