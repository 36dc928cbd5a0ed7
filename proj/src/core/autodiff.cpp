// SPDX-License-Identifier: Apache-2.0
#include "chimera/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "chimera/error.hpp"
#include "chimera/kernels.hpp"

namespace chimera::ad {

const Tensor& Var::value() const { return tape_->value(*this); }
bool Var::requires_grad() const { return tape_->requires_grad(*this); }

Tensor GradientMap::grad(Var v) const {
  if (v.id() < grads_.size() && !grads_[v.id()].empty()) return grads_[v.id()];
  return Tensor(v.id() < shapes_.size() ? shapes_[v.id()] : v.shape());
}

bool GradientMap::reached(Var v) const { return v.id() < grads_.size() && !grads_[v.id()].empty(); }

bool GradSink::wants(Var parent) const { return tape_.requires_grad(parent); }

Tensor& GradSink::grad(Var parent) {
  Tensor& g = grads_[parent.id()];
  if (g.empty() && parent.value().size() > 0) g = Tensor(parent.shape());
  return g;
}

Var Tape::leaf(Tensor value) {
  const bool rg = value.requires_grad();
  nodes_.push_back(Node{std::move(value), rg, nullptr});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::parameter(Tensor value) { return leaf(std::move(value.set_requires_grad(true))); }

Var Tape::constant(Tensor value) { return leaf(std::move(value.set_requires_grad(false))); }

Var Tape::record(Tensor value, std::span<const Var> parents, BackwardFn fn) {
  bool rg = false;
  for (const Var& p : parents) {
    if (&p.tape() != this) throw ShapeError("op mixes vars from different tapes");
    rg = rg || requires_grad(p);
  }
  nodes_.push_back(Node{std::move(value), rg, rg ? std::move(fn) : nullptr});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

GradientMap Tape::backward(Var root) const {
  if (&root.tape() != this) throw ShapeError("backward: root belongs to another tape");
  if (value(root).size() != 1) {
    throw ShapeError("backward: root must be scalar, got shape " + shape_string(root.shape()));
  }
  GradientMap out;
  out.grads_.resize(nodes_.size());
  out.shapes_.reserve(nodes_.size());
  for (const Node& n : nodes_) out.shapes_.push_back(n.value.shape());

  out.grads_[root.id()] = Tensor(root.shape(), 1.0);
  GradSink sink(*this, out.grads_);
  for (std::int64_t id = root.id(); id >= 0; --id) {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = out.grads_[static_cast<std::size_t>(id)];
    if (g.empty() || !node.requires_grad || !node.backward) continue;
    node.backward(g, sink);
  }
  // Leaves that never require grad carry no meaningful gradient.
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!nodes_[i].requires_grad) out.grads_[i] = Tensor();
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

const kernels::KernelTable& K() { return kernels::active(); }

Tensor checked(Tensor t, const char* op) {
  if (!t.all_finite()) throw NonFiniteError(std::string(op) + ": non-finite result");
  return t;
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

void require_rank2(const Var& a, const char* op) {
  if (a.shape().size() != 2) {
    throw ShapeError(std::string(op) + ": expected rank-2 tensor, got " + shape_string(a.shape()));
  }
}

template <class Fwd, class Bwd>
Var elementwise(Var a, const char* op, Fwd fwd, Bwd bwd) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  y = checked(std::move(y), op);
  // The closure reads x from the parent and y from a copy it owns.
  auto saved_y = std::make_shared<Tensor>(y);
  return a.tape().record(std::move(y), {a}, [a, saved_y, bwd](const Tensor& g, GradSink& s) {
    Tensor& ga = s.grad(a);
    const Tensor& xv = a.value();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bwd(xv[i], (*saved_y)[i]);
  });
}

}  // namespace

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Tensor y(a.shape());
  K().add(a.value().data().data(), b.value().data().data(), y.data().data(), y.size());
  return a.tape().record(checked(std::move(y), "add"), {a, b}, [a, b](const Tensor& g, GradSink& s) {
    if (s.wants(a)) K().axpy(1.0, g.data().data(), s.grad(a).data().data(), g.size());
    if (s.wants(b)) K().axpy(1.0, g.data().data(), s.grad(b).data().data(), g.size());
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Tensor y(a.shape());
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] - z[i];
  return a.tape().record(checked(std::move(y), "sub"), {a, b}, [a, b](const Tensor& g, GradSink& s) {
    if (s.wants(a)) K().axpy(1.0, g.data().data(), s.grad(a).data().data(), g.size());
    if (s.wants(b)) K().axpy(-1.0, g.data().data(), s.grad(b).data().data(), g.size());
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  Tensor y(a.shape());
  K().mul(a.value().data().data(), b.value().data().data(), y.data().data(), y.size());
  return a.tape().record(checked(std::move(y), "mul"), {a, b}, [a, b](const Tensor& g, GradSink& s) {
    const std::size_t n = g.size();
    if (s.wants(a)) {
      Tensor& ga = s.grad(a);
      const Tensor& bv = b.value();
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * bv[i];
    }
    if (s.wants(b)) {
      Tensor& gb = s.grad(b);
      const Tensor& av = a.value();
      for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double c) {
  Tensor y(a.shape());
  const Tensor& x = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = c * x[i];
  return a.tape().record(checked(std::move(y), "scale"), {a}, [a, c](const Tensor& g, GradSink& s) {
    K().axpy(c, g.data().data(), s.grad(a).data().data(), g.size());
  });
}

Var add_scalar(Var a, double c) {
  Tensor y(a.shape());
  const Tensor& x = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] + c;
  return a.tape().record(checked(std::move(y), "add_scalar"), {a}, [a](const Tensor& g, GradSink& s) {
    K().axpy(1.0, g.data().data(), s.grad(a).data().data(), g.size());
  });
}

Var add_row(Var a, Var row) {
  require_rank2(a, "add_row");
  const std::size_t m = a.shape()[0];
  const std::size_t n = a.shape()[1];
  if (row.value().size() != n || row.shape().size() > 2 ||
      (row.shape().size() == 2 && row.shape()[0] != 1)) {
    throw ShapeError("add_row: row shape " + shape_string(row.shape()) + " incompatible with " +
                     shape_string(a.shape()));
  }
  Tensor y = a.value();
  const double* r = row.value().data().data();
  for (std::size_t i = 0; i < m; ++i) K().axpy(1.0, r, y.data().data() + i * n, n);
  return a.tape().record(checked(std::move(y), "add_row"), {a, row},
                         [a, row, m, n](const Tensor& g, GradSink& s) {
                           if (s.wants(a)) K().axpy(1.0, g.data().data(), s.grad(a).data().data(), g.size());
                           if (s.wants(row)) {
                             double* gr = s.grad(row).data().data();
                             for (std::size_t i = 0; i < m; ++i) K().axpy(1.0, g.data().data() + i * n, gr, n);
                           }
                         });
}

Var mul_col(Var a, Var col) {
  require_rank2(a, "mul_col");
  const std::size_t m = a.shape()[0];
  const std::size_t n = a.shape()[1];
  if (col.value().size() != m) {
    throw ShapeError("mul_col: column shape " + shape_string(col.shape()) + " incompatible with " +
                     shape_string(a.shape()));
  }
  Tensor y(a.shape());
  const Tensor& x = a.value();
  const Tensor& c = col.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] = x[i * n + j] * c[i];
  return a.tape().record(checked(std::move(y), "mul_col"), {a, col},
                         [a, col, m, n](const Tensor& g, GradSink& s) {
                           const Tensor& cv = col.value();
                           if (s.wants(a)) {
                             double* ga = s.grad(a).data().data();
                             for (std::size_t i = 0; i < m; ++i)
                               K().axpy(cv[i], g.data().data() + i * n, ga + i * n, n);
                           }
                           if (s.wants(col)) {
                             Tensor& gc = s.grad(col);
                             const Tensor& av = a.value();
                             for (std::size_t i = 0; i < m; ++i)
                               gc[i] += K().dot(g.data().data() + i * n, av.data().data() + i * n, n);
                           }
                         });
}

Var matmul(Var a, Var b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw ShapeError("matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  Tensor y(Shape{m, n});
  K().gemm_nn(a.value().data().data(), b.value().data().data(), y.data().data(), m, n, k, false);
  return a.tape().record(checked(std::move(y), "matmul"), {a, b},
                         [a, b, m, n, k](const Tensor& g, GradSink& s) {
                           if (s.wants(a))  // dA = G B^T
                             K().gemm_nt(g.data().data(), b.value().data().data(),
                                         s.grad(a).data().data(), m, k, n, true);
                           if (s.wants(b))  // dB = A^T G
                             K().gemm_tn(a.value().data().data(), g.data().data(),
                                         s.grad(b).data().data(), k, n, m, true);
                         });
}

Var matmul_nt(Var a, Var b) {
  require_rank2(a, "matmul_nt");
  require_rank2(b, "matmul_nt");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[0];
  if (b.shape()[1] != k) {
    throw ShapeError("matmul_nt: " + shape_string(a.shape()) + " x " + shape_string(b.shape()) + "^T");
  }
  Tensor y(Shape{m, n});
  K().gemm_nt(a.value().data().data(), b.value().data().data(), y.data().data(), m, n, k, false);
  return a.tape().record(checked(std::move(y), "matmul_nt"), {a, b},
                         [a, b, m, n, k](const Tensor& g, GradSink& s) {
                           if (s.wants(a))  // dA = G B
                             K().gemm_nn(g.data().data(), b.value().data().data(),
                                         s.grad(a).data().data(), m, k, n, true);
                           if (s.wants(b))  // dB = G^T A
                             K().gemm_tn(g.data().data(), a.value().data().data(),
                                         s.grad(b).data().data(), n, k, m, true);
                         });
}

Var bmm_nt(Var a, Var b) {
  if (a.shape().size() != 3 || b.shape().size() != 3 || a.shape()[0] != b.shape()[0] ||
      a.shape()[2] != b.shape()[2]) {
    throw ShapeError("bmm_nt: " + shape_string(a.shape()) + " x " + shape_string(b.shape()) + "^T");
  }
  const std::size_t B = a.shape()[0], n = a.shape()[1], k = a.shape()[2], m = b.shape()[1];
  Tensor y(Shape{B, n, m});
  for (std::size_t i = 0; i < B; ++i) {
    K().gemm_nt(a.value().data().data() + i * n * k, b.value().data().data() + i * m * k,
                y.data().data() + i * n * m, n, m, k, false);
  }
  return a.tape().record(checked(std::move(y), "bmm_nt"), {a, b},
                         [a, b, B, n, k, m](const Tensor& g, GradSink& s) {
                           const double* gp = g.data().data();
                           if (s.wants(a)) {
                             double* ga = s.grad(a).data().data();
                             for (std::size_t i = 0; i < B; ++i)
                               K().gemm_nn(gp + i * n * m, b.value().data().data() + i * m * k,
                                           ga + i * n * k, n, k, m, true);
                           }
                           if (s.wants(b)) {
                             double* gb = s.grad(b).data().data();
                             for (std::size_t i = 0; i < B; ++i)
                               K().gemm_tn(gp + i * n * m, a.value().data().data() + i * n * k,
                                           gb + i * m * k, m, k, n, true);
                           }
                         });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  for (const Var& p : parts) require_rank2(p, "concat_cols");
  const std::size_t m = parts[0].shape()[0];
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (p.shape()[0] != m) throw ShapeError("concat_cols: row count mismatch");
    widths.push_back(p.shape()[1]);
    total += p.shape()[1];
  }
  Tensor y(Shape{m, total});
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& x = parts[k].value();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(x.data().data() + i * widths[k], widths[k], y.data().data() + i * total + offset);
    offset += widths[k];
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return parts[0].tape().record(
      checked(std::move(y), "concat_cols"), parts,
      [saved, widths, m, total](const Tensor& g, GradSink& s) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < saved.size(); ++k) {
          if (s.wants(saved[k])) {
            double* gp = s.grad(saved[k]).data().data();
            for (std::size_t i = 0; i < m; ++i)
              K().axpy(1.0, g.data().data() + i * total + off, gp + i * widths[k], widths[k]);
          }
          off += widths[k];
        }
      });
}

Var gather_rows(Var table, std::span<const std::size_t> rows) {
  require_rank2(table, "gather_rows");
  const std::size_t v = table.shape()[0], d = table.shape()[1];
  for (std::size_t r : rows) {
    if (r >= v) throw ShapeError("gather_rows: row " + std::to_string(r) + " out of range " + std::to_string(v));
  }
  Tensor y(Shape{rows.size(), d});
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(table.value().data().data() + rows[i] * d, d, y.data().data() + i * d);
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return table.tape().record(std::move(y), {table}, [table, idx, d](const Tensor& g, GradSink& s) {
    double* gt = s.grad(table).data().data();
    for (std::size_t i = 0; i < idx.size(); ++i) K().axpy(1.0, g.data().data() + i * d, gt + idx[i] * d, d);
  });
}

Var reshape(Var a, Shape shape) {
  if (shape_size(shape) != a.value().size()) {
    throw ShapeError("reshape: " + shape_string(a.shape()) + " -> " + shape_string(shape));
  }
  Tensor y(std::move(shape), a.value().storage());
  return a.tape().record(std::move(y), {a}, [a](const Tensor& g, GradSink& s) {
    K().axpy(1.0, g.data().data(), s.grad(a).data().data(), g.size());
  });
}

Var sigmoid(Var a) {
  return elementwise(
      a, "sigmoid",
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return elementwise(a, "tanh", [](double x) { return std::tanh(x); },
                     [](double, double y) { return 1.0 - y * y; });
}

Var exp(Var a) {
  return elementwise(a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  for (double x : a.value().data()) {
    if (!(x > 0.0)) throw DomainError("log: non-positive argument " + std::to_string(x));
  }
  return elementwise(a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var relu(Var a) {
  return elementwise(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
                     [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var clamp_min(Var a, double floor) {
  return elementwise(a, "clamp_min", [floor](double x) { return x >= floor ? x : floor; },
                     [floor](double x, double) { return x >= floor ? 1.0 : 0.0; });
}

Var max_rows(Var a) {
  require_rank2(a, "max_rows");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  if (n == 0) throw ShapeError("max_rows: empty rows");
  Tensor y(Shape{m, 1});
  std::vector<std::size_t> arg(m);
  const Tensor& x = a.value();
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < n; ++j)
      if (x[i * n + j] > x[i * n + best]) best = j;
    arg[i] = best;
    y[i] = x[i * n + best];
  }
  return a.tape().record(std::move(y), {a}, [a, arg, n](const Tensor& g, GradSink& s) {
    Tensor& ga = s.grad(a);
    for (std::size_t i = 0; i < arg.size(); ++i) ga[i * n + arg[i]] += g[i];
  });
}

Var sum_rows(Var a) {
  require_rank2(a, "sum_rows");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  Tensor y(Shape{m, 1});
  const Tensor& x = a.value();
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += x[i * n + j];
    y[i] = acc;
  }
  return a.tape().record(checked(std::move(y), "sum_rows"), {a}, [a, m, n](const Tensor& g, GradSink& s) {
    Tensor& ga = s.grad(a);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[i];
  });
}

Var sum_all(Var a) {
  double acc = 0.0;
  for (double v : a.value().data()) acc += v;
  return a.tape().record(checked(Tensor::scalar(acc), "sum_all"), {a}, [a](const Tensor& g, GradSink& s) {
    Tensor& ga = s.grad(a);
    const double gv = g[0];
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gv;
  });
}

Var mean_all(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ShapeError("mean_all: empty tensor");
  return scale(sum_all(a), 1.0 / static_cast<double>(n));
}

Var softmax_rows(Var a) {
  require_rank2(a, "softmax_rows");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  Tensor y(a.shape());
  const Tensor& x = a.value();
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = x.data().data() + i * n;
    const double mx = *std::max_element(row, row + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      y[i * n + j] = std::exp(row[j] - mx);
      z += y[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] /= z;
  }
  auto saved = std::make_shared<Tensor>(y);
  return a.tape().record(checked(std::move(y), "softmax_rows"), {a},
                         [a, saved, m, n](const Tensor& g, GradSink& s) {
                           Tensor& ga = s.grad(a);
                           const Tensor& yv = *saved;
                           for (std::size_t i = 0; i < m; ++i) {
                             const double inner = K().dot(g.data().data() + i * n, yv.data().data() + i * n, n);
                             for (std::size_t j = 0; j < n; ++j)
                               ga[i * n + j] += yv[i * n + j] * (g[i * n + j] - inner);
                           }
                         });
}

// ---------------------------------------------------------------------------

GradCheckResult grad_check(const MultiFn& f, const std::vector<Tensor>& points, double eps) {
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& p : points) vars.push_back(tape.parameter(p));
    const Var root = f(tape, vars);
    const GradientMap grads = tape.backward(root);
    for (const Var& v : vars) analytic.push_back(grads.grad(v));
  }

  auto evaluate = [&](const std::vector<Tensor>& at) {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& p : at) vars.push_back(tape.constant(p));
    return f(tape, vars).value().item();
  };

  std::vector<Tensor> probe = points;
  double max_abs = 0.0, scale_a = 0.0, scale_n = 0.0;
  for (std::size_t t = 0; t < points.size(); ++t) {
    for (std::size_t i = 0; i < points[t].size(); ++i) {
      const double x0 = points[t][i];
      probe[t][i] = x0 + eps;
      const double up = evaluate(probe);
      probe[t][i] = x0 - eps;
      const double down = evaluate(probe);
      probe[t][i] = x0;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[t][i];
      max_abs = std::max(max_abs, std::abs(a - numeric));
      scale_a = std::max(scale_a, std::abs(a));
      scale_n = std::max(scale_n, std::abs(numeric));
    }
  }
  const double denom = std::max({scale_a, scale_n, std::numeric_limits<double>::min()});
  return GradCheckResult{max_abs == 0.0 ? 0.0 : max_abs / denom, max_abs};
}

GradCheckResult grad_check(const UnaryFn& f, const Tensor& point, double eps) {
  return grad_check([&f](Tape& tape, std::span<const Var> vars) { return f(tape, vars[0]); },
                    std::vector<Tensor>{point}, eps);
}

}  // namespace chimera::ad
