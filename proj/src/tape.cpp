#include "mdaforge/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mdaforge/error.hpp"
#include "mdaforge/kernels.hpp"

namespace mdaforge::ad {

const Matrix& Var::value() const { return tape_->value(*this); }
const Matrix& Var::grad() const { return tape_->grad(*this); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw ShapeError("scalar(): node is " + v.shape());
  return v(0, 0);
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

const Tape::Node& Tape::node(Var v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) throw Error("variable does not belong to this tape");
  return nodes_[v.id_];
}

Var Tape::constant(Matrix value) {
  Node n;
  n.op = "constant";
  n.owned = std::move(value);
  return push(std::move(n));
}

Var Tape::variable(Matrix value) {
  Node n;
  n.op = "variable";
  n.grad = Matrix(value.rows(), value.cols());
  n.owned = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::parameter(const Matrix& value) {
  Node n;
  n.op = "parameter";
  n.external = &value;
  n.grad = Matrix(value.rows(), value.cols());
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::record(std::string_view op, Matrix value, std::span<const Var> parents, BackwardFn backward) {
  if (!value.all_finite()) {
    throw NonFiniteError(std::string(op) + ": non-finite value in forward pass");
  }
  Node n;
  n.op = op;
  for (const Var& p : parents) {
    if (node(p).requires_grad) n.requires_grad = true;
  }
  if (n.requires_grad) {
    n.grad = Matrix(value.rows(), value.cols());
    n.backward = std::move(backward);
  }
  n.owned = std::move(value);
  return push(std::move(n));
}

void Tape::backward(Var loss) {
  const Node& l = node(loss);
  if (l.value().rows() != 1 || l.value().cols() != 1) {
    throw ShapeError("backward: loss must be 1x1, got " + l.value().shape());
  }
  for (Node& n : nodes_) {
    if (n.requires_grad) n.grad.fill(0.0);
  }
  if (!l.requires_grad) return;
  nodes_[loss.id_].grad(0, 0) = 1.0;
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward) n.backward(*this, n.grad, n.value());
  }
}

const Matrix& Tape::value(Var v) const { return node(v).value(); }

const Matrix& Tape::grad(Var v) const {
  const Node& n = node(v);
  if (!n.requires_grad) throw Error(std::string(n.op) + " node does not track gradients");
  return n.grad;
}

std::string_view Tape::op(Var v) const { return node(v).op; }

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

Matrix* Tape::grad_sink(Var v) {
  node(v);
  Node& n = nodes_[v.id_];
  return n.requires_grad ? &n.grad : nullptr;
}

namespace {

Tape& same_tape(Var a, Var b, const char* op) {
  if (!a.valid() || !b.valid() || &a.tape() != &b.tape()) {
    throw Error(std::string(op) + ": operands live on different tapes");
  }
  return a.tape();
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape() + " vs " + b.shape());
  }
}

void axpy(Matrix& dst, const Matrix& src, double factor) {
  double* d = dst.data();
  const double* s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += factor * s[i];
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b, "matmul");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: shape mismatch " + av.shape() + " * " + bv.shape());
  }
  Matrix out(av.rows(), bv.cols());
  kernels::gemm_acc(av, bv, out);
  const Var parents[] = {a, b};
  return t.record("matmul", std::move(out), parents, [a, b](Tape& tp, const Matrix& g, const Matrix&) {
    if (Matrix* ga = tp.grad_sink(a)) kernels::gemm_a_bt_acc(g, b.value(), *ga);
    if (Matrix* gb = tp.grad_sink(b)) kernels::gemm_at_b_acc(a.value(), g, *gb);
  });
}

Var add_row_bias(Var x, Var bias) {
  Tape& t = same_tape(x, bias, "add_row_bias");
  const Matrix& xv = x.value();
  const Matrix& bv = bias.value();
  if (bv.rows() != 1 || bv.cols() != xv.cols()) {
    throw ShapeError("add_row_bias: shape mismatch " + xv.shape() + " + bias " + bv.shape());
  }
  Matrix out = xv;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bv(0, c);
  }
  const Var parents[] = {x, bias};
  return t.record("add_row_bias", std::move(out), parents, [x, bias](Tape& tp, const Matrix& g, const Matrix&) {
    if (Matrix* gx = tp.grad_sink(x)) axpy(*gx, g, 1.0);
    if (Matrix* gb = tp.grad_sink(bias)) {
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < g.cols(); ++c) (*gb)(0, c) += g(r, c);
      }
    }
  });
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b, "add");
  require_same_shape(a.value(), b.value(), "add");
  Matrix out = a.value();
  axpy(out, b.value(), 1.0);
  const Var parents[] = {a, b};
  return t.record("add", std::move(out), parents, [a, b](Tape& tp, const Matrix& g, const Matrix&) {
    if (Matrix* ga = tp.grad_sink(a)) axpy(*ga, g, 1.0);
    if (Matrix* gb = tp.grad_sink(b)) axpy(*gb, g, 1.0);
  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b, "sub");
  require_same_shape(a.value(), b.value(), "sub");
  Matrix out = a.value();
  axpy(out, b.value(), -1.0);
  const Var parents[] = {a, b};
  return t.record("sub", std::move(out), parents, [a, b](Tape& tp, const Matrix& g, const Matrix&) {
    if (Matrix* ga = tp.grad_sink(a)) axpy(*ga, g, 1.0);
    if (Matrix* gb = tp.grad_sink(b)) axpy(*gb, g, -1.0);
  });
}

Var tanh(Var x) {
  Matrix out = x.value();
  for (double& v : out.values()) v = std::tanh(v);
  const Var parents[] = {x};
  return x.tape().record("tanh", std::move(out), parents, [x](Tape& tp, const Matrix& g, const Matrix& y) {
    Matrix* gx = tp.grad_sink(x);
    if (!gx) return;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double yi = y.data()[i];
      gx->data()[i] += g.data()[i] * (1.0 - yi * yi);
    }
  });
}

Var relu(Var x) {
  Matrix out = x.value();
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  const Var parents[] = {x};
  return x.tape().record("relu", std::move(out), parents, [x](Tape& tp, const Matrix& g, const Matrix&) {
    Matrix* gx = tp.grad_sink(x);
    if (!gx) return;
    const Matrix& xv = x.value();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (xv.data()[i] > 0.0) gx->data()[i] += g.data()[i];
    }
  });
}

Var log_softmax_rows(Var x) {
  const Matrix& xv = x.value();
  if (xv.cols() == 0) throw ShapeError("log_softmax_rows: zero columns");
  Matrix out(xv.rows(), xv.cols());
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    const auto in = xv.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (double v : in) total += std::exp(v - mx);
    const double lse = mx + std::log(total);
    auto o = out.row(r);
    for (std::size_t c = 0; c < in.size(); ++c) o[c] = in[c] - lse;
  }
  const Var parents[] = {x};
  return x.tape().record("log_softmax_rows", std::move(out), parents,
                         [x](Tape& tp, const Matrix& g, const Matrix& y) {
                           Matrix* gx = tp.grad_sink(x);
                           if (!gx) return;
                           for (std::size_t r = 0; r < g.rows(); ++r) {
                             double gsum = 0.0;
                             for (double v : g.row(r)) gsum += v;
                             for (std::size_t c = 0; c < g.cols(); ++c) {
                               (*gx)(r, c) += g(r, c) - std::exp(y(r, c)) * gsum;
                             }
                           }
                         });
}

Var scale(Var x, double factor) {
  Matrix out = x.value();
  for (double& v : out.values()) v *= factor;
  const Var parents[] = {x};
  return x.tape().record("scale", std::move(out), parents, [x, factor](Tape& tp, const Matrix& g, const Matrix&) {
    if (Matrix* gx = tp.grad_sink(x)) axpy(*gx, g, factor);
  });
}

Var neg(Var x) {
  Matrix out = x.value();
  for (double& v : out.values()) v = -v;
  const Var parents[] = {x};
  return x.tape().record("neg", std::move(out), parents, [x](Tape& tp, const Matrix& g, const Matrix&) {
    if (Matrix* gx = tp.grad_sink(x)) axpy(*gx, g, -1.0);
  });
}

Var sum(Var x) {
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  Matrix out(1, 1, total);
  const Var parents[] = {x};
  return x.tape().record("sum", std::move(out), parents, [x](Tape& tp, const Matrix& g, const Matrix&) {
    Matrix* gx = tp.grad_sink(x);
    if (!gx) return;
    for (double& v : gx->values()) v += g(0, 0);
  });
}

Var mean_all(Var x) {
  const Matrix& xv = x.value();
  if (xv.empty()) throw ShapeError("mean_all: empty input");
  double total = 0.0;
  for (double v : xv.values()) total += v;
  const double n = static_cast<double>(xv.size());
  Matrix out(1, 1, total / n);
  const Var parents[] = {x};
  return x.tape().record("mean_all", std::move(out), parents, [x, n](Tape& tp, const Matrix& g, const Matrix&) {
    Matrix* gx = tp.grad_sink(x);
    if (!gx) return;
    const double share = g(0, 0) / n;
    for (double& v : gx->values()) v += share;
  });
}

Var gather_rows(Var x, std::span<const std::size_t> rows) {
  const Matrix& xv = x.value();
  Matrix out(rows.size(), xv.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= xv.rows()) {
      throw ShapeError("gather_rows: row " + std::to_string(rows[r]) + " out of range for " + xv.shape());
    }
    std::copy(xv.row(rows[r]).begin(), xv.row(rows[r]).end(), out.row(r).begin());
  }
  const Var parents[] = {x};
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return x.tape().record("gather_rows", std::move(out), parents,
                         [x, idx = std::move(idx)](Tape& tp, const Matrix& g, const Matrix&) {
                           Matrix* gx = tp.grad_sink(x);
                           if (!gx) return;
                           for (std::size_t r = 0; r < idx.size(); ++r) {
                             auto dst = gx->row(idx[r]);
                             auto src = g.row(r);
                             for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
                           }
                         });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t cols = parts.front().cols();
  std::size_t total = 0;
  for (const Var& p : parts) {
    same_tape(parts.front(), p, "concat_rows");
    if (p.cols() != cols) {
      throw ShapeError("concat_rows: shape mismatch " + parts.front().value().shape() + " vs " + p.value().shape());
    }
    total += p.rows();
  }
  Matrix out(total, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    std::copy(p.value().values().begin(), p.value().values().end(), out.data() + offset * cols);
    offset += p.rows();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts.front().tape().record("concat_rows", std::move(out), parts,
                                     [inputs = std::move(inputs)](Tape& tp, const Matrix& g, const Matrix&) {
                                       std::size_t off = 0;
                                       for (const Var& p : inputs) {
                                         const std::size_t n = p.rows() * g.cols();
                                         if (Matrix* gp = tp.grad_sink(p)) {
                                           const double* src = g.data() + off * g.cols();
                                           for (std::size_t i = 0; i < n; ++i) gp->data()[i] += src[i];
                                         }
                                         off += p.rows();
                                       }
                                     });
}

Var pick(Var x, std::span<const std::size_t> columns) {
  const Matrix& xv = x.value();
  if (columns.size() != xv.rows()) {
    throw ShapeError("pick: " + std::to_string(columns.size()) + " indices for " + xv.shape());
  }
  Matrix out(xv.rows(), 1);
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    if (columns[r] >= xv.cols()) {
      throw ShapeError("pick: column " + std::to_string(columns[r]) + " out of range for " + xv.shape());
    }
    out(r, 0) = xv(r, columns[r]);
  }
  const Var parents[] = {x};
  std::vector<std::size_t> idx(columns.begin(), columns.end());
  return x.tape().record("pick", std::move(out), parents,
                         [x, idx = std::move(idx)](Tape& tp, const Matrix& g, const Matrix&) {
                           Matrix* gx = tp.grad_sink(x);
                           if (!gx) return;
                           for (std::size_t r = 0; r < idx.size(); ++r) (*gx)(r, idx[r]) += g(r, 0);
                         });
}

Var grl(Var x, double lambda) {
  if (!(lambda >= 0.0)) throw Error("grl: lambda must be >= 0");
  const Var parents[] = {x};
  return x.tape().record("grl", x.value(), parents, [x, lambda](Tape& tp, const Matrix& g, const Matrix&) {
    Matrix* gx = tp.grad_sink(x);
    if (!gx) return;
    const double factor = -lambda;
    for (std::size_t i = 0; i < g.size(); ++i) gx->data()[i] += factor * g.data()[i];
  });
}

Var gaussian_kernel_mean(Var a, Var b, double sigma) {
  Tape& t = same_tape(a, b, "gaussian_kernel_mean");
  if (!(sigma > 0.0)) throw Error("gaussian_kernel_mean: sigma must be > 0");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.cols()) {
    throw ShapeError("gaussian_kernel_mean: shape mismatch " + av.shape() + " vs " + bv.shape());
  }
  if (av.rows() == 0 || bv.rows() == 0) throw ShapeError("gaussian_kernel_mean: empty operand");
  Matrix k(av.rows(), bv.rows());
  kernels::pairwise_sq_dist(av, bv, k);
  const double inv_two_var = 1.0 / (2.0 * sigma * sigma);
  double total = 0.0;
  for (double& v : k.values()) {
    v = std::exp(-v * inv_two_var);
    total += v;
  }
  const double pairs = static_cast<double>(k.size());
  Matrix out(1, 1, total / pairs);
  const Var parents[] = {a, b};
  return t.record("gaussian_kernel_mean", std::move(out), parents,
                  [a, b, k = std::move(k), sigma, pairs](Tape& tp, const Matrix& g, const Matrix&) {
                    // coef_ij = g / pairs * K_ij / sigma^2
                    Matrix coef = k;
                    const double s = g(0, 0) / (pairs * sigma * sigma);
                    for (double& v : coef.values()) v *= s;
                    const Matrix& av = a.value();
                    const Matrix& bv = b.value();
                    if (Matrix* ga = tp.grad_sink(a)) {
                      // ga_i += sum_j coef_ij (b_j - a_i)
                      kernels::gemm_acc(coef, bv, *ga);
                      for (std::size_t i = 0; i < coef.rows(); ++i) {
                        double rs = 0.0;
                        for (double v : coef.row(i)) rs += v;
                        for (std::size_t c = 0; c < av.cols(); ++c) (*ga)(i, c) -= rs * av(i, c);
                      }
                    }
                    if (Matrix* gb = tp.grad_sink(b)) {
                      // gb_j += sum_i coef_ij (a_i - b_j)
                      kernels::gemm_at_b_acc(coef, av, *gb);
                      for (std::size_t j = 0; j < coef.cols(); ++j) {
                        double cs = 0.0;
                        for (std::size_t i = 0; i < coef.rows(); ++i) cs += coef(i, j);
                        for (std::size_t c = 0; c < bv.cols(); ++c) (*gb)(j, c) -= cs * bv(j, c);
                      }
                    }
                  });
}

}  // namespace mdaforge::ad
