#include "dmada/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "dmada/kernels.hpp"

namespace dmada {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << "x";
    os << s[i];
  }
  os << "]";
  return os.str();
}

namespace {

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) {
    if (d == 0) return 0;
    n *= d;
  }
  return n;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

bool any_requires_grad(const std::vector<Tensor>& parents) {
  for (const auto& p : parents)
    if (p.requires_grad()) return true;
  return false;
}

}  // namespace

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("Tensor::from: " + shape_str(shape) + " holds " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::vector<double> v(shape_numel(shape), 0.0);
  return from(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> v(shape_numel(shape), value);
  return from(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw ShapeError("rows: tensor is not rank-2, shape " +
                                    shape_str(shape()));
  return n_->shape[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw ShapeError("cols: tensor is not rank-2, shape " +
                                    shape_str(shape()));
  return n_->shape[1];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return n_->values[r * cols() + c];
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item: tensor is not scalar, shape " +
                                    shape_str(shape()));
  return n_->values[0];
}

const std::vector<double>& Tensor::grad() const {
  return const_cast<Node*>(n_.get())->grad_buf();
}

void Tensor::zero_grad() {
  if (!n_->grad.empty()) std::fill(n_->grad.begin(), n_->grad.end(), 0.0);
}

void Tensor::detach_tape() {
  n_->parents.clear();
  n_->backprop = nullptr;
}

Tensor Tensor::clone_values() const {
  return Tensor::from(n_->shape, n_->values, false);
}

Tensor make_op(Shape shape, std::vector<double> values,
               std::vector<Tensor> parents,
               std::function<void(Tensor::Node&)> backprop) {
  const bool rg = any_requires_grad(parents);
  Tensor out = Tensor::from(std::move(shape), std::move(values), rg);
  if (rg) {
    auto node = out.node();
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node());
    node->backprop = std::move(backprop);
  }
  return out;
}

void Tensor::backward() const {
  if (size() != 1) {
    throw ShapeError("backward: loss must be scalar, shape " +
                     shape_str(shape()));
  }
  if (!n_->requires_grad) return;

  // iterative post-order topological sort
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(n_.get(), 0);
  visited.insert(n_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  n_->grad_buf()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backprop) node->backprop(*node);
  }
}

// ---- ops ----

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()));
  }
  const std::size_t r = a.rows(), k = a.cols(), c = b.cols();
  std::vector<double> out(r * c);
  kernels::matmul(a.values().data(), b.values().data(), out.data(), r, k, c);
  auto an = a.node();
  auto bn = b.node();
  return make_op(
      {r, c}, std::move(out), {a, b},
      [an, bn, r, k, c](Tensor::Node& self) {
        if (an->requires_grad) {
          // dA += G * B^T
          kernels::matmul_nt_acc(self.grad.data(), bn->values.data(),
                                 an->grad_buf().data(), r, c, k);
        }
        if (bn->requires_grad) {
          // dB += A^T * G
          kernels::matmul_tn_acc(an->values.data(), self.grad.data(),
                                 bn->grad_buf().data(), r, k, c);
        }
      });
}

namespace {

Tensor binary_pointwise(const Tensor& a, const Tensor& b, const char* name,
                        double (*f)(double, double),
                        void (*df)(double, double, double, double&, double&)) {
  require_same_shape(a, b, name);
  const std::size_t n = a.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(a.at(i), b.at(i));
  auto an = a.node();
  auto bn = b.node();
  return make_op(a.shape(), std::move(out), {a, b},
                 [an, bn, df, n](Tensor::Node& self) {
                   const bool ga = an->requires_grad, gb = bn->requires_grad;
                   auto* da = ga ? an->grad_buf().data() : nullptr;
                   auto* db = gb ? bn->grad_buf().data() : nullptr;
                   for (std::size_t i = 0; i < n; ++i) {
                     double pa = 0, pb = 0;
                     df(an->values[i], bn->values[i], self.grad[i], pa, pb);
                     if (ga) da[i] += pa;
                     if (gb) db[i] += pb;
                   }
                 });
}

Tensor unary_pointwise(const Tensor& a, std::vector<double> out,
                       std::vector<double> dydx) {
  const std::size_t n = a.size();
  auto an = a.node();
  auto d = std::make_shared<std::vector<double>>(std::move(dydx));
  return make_op(a.shape(), std::move(out), {a},
                 [an, d, n](Tensor::Node& self) {
                   auto& da = an->grad_buf();
                   for (std::size_t i = 0; i < n; ++i)
                     da[i] += self.grad[i] * (*d)[i];
                 });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_pointwise(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double, double g, double& pa, double& pb) {
        pa = g;
        pb = g;
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_pointwise(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double, double g, double& pa, double& pb) {
        pa = g;
        pb = -g;
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_pointwise(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double x, double y, double g, double& pa, double& pb) {
        pa = g * y;
        pb = g * x;
      });
}

Tensor add_scalar(const Tensor& a, double s) {
  const std::size_t n = a.size();
  std::vector<double> out(n), d(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) out[i] = a.at(i) + s;
  return unary_pointwise(a, std::move(out), std::move(d));
}

Tensor mul_scalar(const Tensor& a, double s) {
  const std::size_t n = a.size();
  std::vector<double> out(n), d(n, s);
  for (std::size_t i = 0; i < n; ++i) out[i] = a.at(i) * s;
  return unary_pointwise(a, std::move(out), std::move(d));
}

Tensor relu(const Tensor& a) {
  const std::size_t n = a.size();
  std::vector<double> out(n), d(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a.at(i);
    out[i] = x > 0 ? x : 0.0;
    d[i] = x > 0 ? 1.0 : 0.0;
  }
  return unary_pointwise(a, std::move(out), std::move(d));
}

Tensor sigmoid(const Tensor& a) {
  const std::size_t n = a.size();
  std::vector<double> out(n), d(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a.at(i);
    const double s = x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                            : std::exp(x) / (1.0 + std::exp(x));
    out[i] = s;
    d[i] = s * (1.0 - s);
  }
  return unary_pointwise(a, std::move(out), std::move(d));
}

Tensor tanh_op(const Tensor& a) {
  const std::size_t n = a.size();
  std::vector<double> out(n), d(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = std::tanh(a.at(i));
    out[i] = t;
    d[i] = 1.0 - t * t;
  }
  return unary_pointwise(a, std::move(out), std::move(d));
}

Tensor softplus(const Tensor& a) {
  const std::size_t n = a.size();
  std::vector<double> out(n), d(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a.at(i);
    // log(1+e^x), overflow-safe
    out[i] = x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    d[i] = x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                  : std::exp(x) / (1.0 + std::exp(x));
  }
  return unary_pointwise(a, std::move(out), std::move(d));
}

Tensor log_op(const Tensor& a) {
  const std::size_t n = a.size();
  std::vector<double> out(n), d(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a.at(i);
    if (!(x > 0)) {
      throw ValueError("log: non-positive input " + std::to_string(x));
    }
    out[i] = std::log(x);
    d[i] = 1.0 / x;
  }
  return unary_pointwise(a, std::move(out), std::move(d));
}

Tensor exp_op(const Tensor& a) {
  const std::size_t n = a.size();
  std::vector<double> out(n), d(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp(a.at(i));
    d[i] = out[i];
  }
  return unary_pointwise(a, std::move(out), std::move(d));
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

Tensor square(const Tensor& a) { return mul(a, a); }

Tensor clamp(const Tensor& a, double lo, double hi) {
  const std::size_t n = a.size();
  std::vector<double> out(n), d(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a.at(i);
    out[i] = std::min(hi, std::max(lo, x));
    d[i] = (x > lo && x < hi) ? 1.0 : 0.0;
  }
  return unary_pointwise(a, std::move(out), std::move(d));
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  if (parts.size() == 1) return parts[0];
  const Shape& s0 = parts[0].shape();
  if (axis >= s0.size())
    throw ShapeError("concat: axis " + std::to_string(axis) +
                     " out of range for rank " + std::to_string(s0.size()));
  Shape out_shape = s0;
  std::size_t axis_total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != s0.size())
      throw ShapeError("concat: rank mismatch " + shape_str(s0) + " vs " +
                       shape_str(s));
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != s0[i])
        throw ShapeError("concat: non-axis dimension mismatch " +
                         shape_str(s0) + " vs " + shape_str(s));
    }
    axis_total += s[axis];
  }
  out_shape[axis] = axis_total;

  // outer = product of dims before axis, inner = product after
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s0[i];
  for (std::size_t i = axis + 1; i < s0.size(); ++i) inner *= s0[i];

  std::vector<double> out(outer * axis_total * inner);
  std::vector<std::size_t> widths;
  widths.reserve(parts.size());
  for (const auto& p : parts) widths.push_back(p.shape()[axis] * inner);
  const std::size_t out_row = axis_total * inner;
  {
    std::size_t off = 0;
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
      const auto& v = parts[pi].values();
      for (std::size_t o = 0; o < outer; ++o) {
        std::copy(v.begin() + o * widths[pi], v.begin() + (o + 1) * widths[pi],
                  out.begin() + o * out_row + off);
      }
      off += widths[pi];
    }
  }

  std::vector<std::shared_ptr<Tensor::Node>> pn;
  pn.reserve(parts.size());
  for (const auto& p : parts) pn.push_back(p.node());
  return make_op(out_shape, std::move(out), parts,
                 [pn, widths, outer, out_row](Tensor::Node& self) {
                   std::size_t off = 0;
                   for (std::size_t pi = 0; pi < pn.size(); ++pi) {
                     if (pn[pi]->requires_grad) {
                       auto& g = pn[pi]->grad_buf();
                       for (std::size_t o = 0; o < outer; ++o) {
                         const double* src =
                             self.grad.data() + o * out_row + off;
                         double* dst = g.data() + o * widths[pi];
                         for (std::size_t i = 0; i < widths[pi]; ++i)
                           dst[i] += src[i];
                       }
                     }
                     off += widths[pi];
                   }
                 });
}

Tensor scale_rows(const Tensor& m, const Tensor& v) {
  const std::size_t r = m.rows(), c = m.cols();
  if (v.rank() != 1 || v.size() != r) {
    throw ShapeError("scale_rows: vector " + shape_str(v.shape()) +
                     " does not match matrix " + shape_str(m.shape()));
  }
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = m.at(i, j) * v.at(i);
  auto mn = m.node();
  auto vn = v.node();
  return make_op({r, c}, std::move(out), {m, v},
                 [mn, vn, r, c](Tensor::Node& self) {
                   if (mn->requires_grad) {
                     auto& g = mn->grad_buf();
                     for (std::size_t i = 0; i < r; ++i)
                       for (std::size_t j = 0; j < c; ++j)
                         g[i * c + j] += self.grad[i * c + j] * vn->values[i];
                   }
                   if (vn->requires_grad) {
                     auto& g = vn->grad_buf();
                     for (std::size_t i = 0; i < r; ++i)
                       for (std::size_t j = 0; j < c; ++j)
                         g[i] += self.grad[i * c + j] * mn->values[i * c + j];
                   }
                 });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  auto an = a.node();
  return make_op({1}, {acc}, {a}, [an](Tensor::Node& self) {
    auto& g = an->grad_buf();
    const double s = self.grad[0];
    for (auto& x : g) x += s;
  });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw ShapeError("mean: empty tensor");
  return mul_scalar(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor row_sum(const Tensor& a) {
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(r, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i] += a.at(i, j);
  auto an = a.node();
  return make_op({r}, std::move(out), {a}, [an, r, c](Tensor::Node& self) {
    auto& g = an->grad_buf();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[i];
  });
}

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
  const std::size_t r = m.rows(), c = m.cols();
  if (v.rank() != 1 || v.size() != c) {
    throw ShapeError("add_rowvec: vector " + shape_str(v.shape()) +
                     " does not match matrix " + shape_str(m.shape()));
  }
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = m.at(i, j) + v.at(j);
  auto mn = m.node();
  auto vn = v.node();
  return make_op({r, c}, std::move(out), {m, v},
                 [mn, vn, r, c](Tensor::Node& self) {
                   if (mn->requires_grad) {
                     auto& g = mn->grad_buf();
                     for (std::size_t i = 0; i < r * c; ++i)
                       g[i] += self.grad[i];
                   }
                   if (vn->requires_grad) {
                     auto& g = vn->grad_buf();
                     for (std::size_t i = 0; i < r; ++i)
                       for (std::size_t j = 0; j < c; ++j)
                         g[j] += self.grad[i * c + j];
                   }
                 });
}

Tensor gather_rows(const Tensor& a, const std::vector<std::size_t>& idx) {
  const std::size_t r = a.rows(), c = a.cols();
  for (auto i : idx)
    if (i >= r)
      throw ValueError("gather_rows: index " + std::to_string(i) +
                       " out of range for " + std::to_string(r) + " rows");
  std::vector<double> out(idx.size() * c);
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy(a.values().begin() + idx[i] * c,
              a.values().begin() + (idx[i] + 1) * c, out.begin() + i * c);
  auto an = a.node();
  auto ix = std::make_shared<std::vector<std::size_t>>(idx);
  return make_op({idx.size(), c}, std::move(out), {a},
                 [an, ix, c](Tensor::Node& self) {
                   auto& g = an->grad_buf();
                   for (std::size_t i = 0; i < ix->size(); ++i)
                     for (std::size_t j = 0; j < c; ++j)
                       g[(*ix)[i] * c + j] += self.grad[i * c + j];
                 });
}

Tensor softmax_cross_entropy(const Tensor& logits, const Tensor& target_probs) {
  require_same_shape(logits, target_probs, "softmax_cross_entropy");
  const std::size_t b = logits.rows(), k = logits.cols();
  if (k < 2) throw ShapeError("softmax_cross_entropy: need K >= 2, got " +
                              std::to_string(k));
  for (double v : logits.values()) {
    if (!std::isfinite(v))
      throw NumericError("softmax_cross_entropy: non-finite logit");
  }

  // forward with max-subtraction; cache softmax and row mass for backward
  auto probs = std::make_shared<std::vector<double>>(b * k);
  auto mass = std::make_shared<std::vector<double>>(b, 0.0);
  auto lse = std::make_shared<std::vector<double>>(b, 0.0);
  double loss = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    double mx = logits.at(i, 0);
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, logits.at(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(logits.at(i, j) - mx);
    const double log_z = mx + std::log(z);
    (*lse)[i] = log_z;
    double row = 0.0, tmass = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double t = target_probs.at(i, j);
      (*probs)[i * k + j] = std::exp(logits.at(i, j) - log_z);
      row += t * (log_z - logits.at(i, j));
      tmass += t;
    }
    (*mass)[i] = tmass;
    loss += row;
  }
  loss /= static_cast<double>(b);

  auto ln = logits.node();
  auto tn = target_probs.node();
  return make_op(
      {1}, {loss}, {logits, target_probs},
      [ln, tn, probs, mass, lse, b, k](Tensor::Node& self) {
        const double g = self.grad[0] / static_cast<double>(b);
        if (ln->requires_grad) {
          auto& gl = ln->grad_buf();
          for (std::size_t i = 0; i < b; ++i)
            for (std::size_t j = 0; j < k; ++j)
              gl[i * k + j] += g * ((*mass)[i] * (*probs)[i * k + j] -
                                    tn->values[i * k + j]);
        }
        if (tn->requires_grad) {
          auto& gt = tn->grad_buf();
          for (std::size_t i = 0; i < b; ++i)
            for (std::size_t j = 0; j < k; ++j)
              gt[i * k + j] += g * ((*lse)[i] - ln->values[i * k + j]);
        }
      });
}

std::vector<double> softmax_rows(const Tensor& logits) {
  const std::size_t b = logits.rows(), k = logits.cols();
  std::vector<double> out(b * k);
  for (std::size_t i = 0; i < b; ++i) {
    double mx = logits.at(i, 0);
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, logits.at(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      out[i * k + j] = std::exp(logits.at(i, j) - mx);
      z += out[i * k + j];
    }
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] /= z;
  }
  return out;
}

Tensor sample_gaussian(const Shape& shape, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.normal();
  return Tensor::from(shape, std::move(v), false);
}

void adam_step(Tensor& param, AdamState& state) {
  if (!param.has_grad()) {
    throw ValueError("adam_step: parameter has no gradient");
  }
  const std::size_t n = param.size();
  if (state.m.empty()) state.m.assign(n, 0.0);
  if (state.v.empty()) state.v.assign(n, 0.0);
  if (state.m.size() != n || state.v.size() != n) {
    throw ShapeError("adam_step: state size " + std::to_string(state.m.size()) +
                     " does not match parameter size " + std::to_string(n));
  }
  state.t += 1;
  const double b1t = 1.0 - std::pow(state.beta1, state.t);
  const double b2t = 1.0 - std::pow(state.beta2, state.t);
  auto& vals = param.mutable_values();
  auto& g = param.mutable_grad();
  for (std::size_t i = 0; i < n; ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g[i] * g[i];
    const double mhat = state.m[i] / b1t;
    const double vhat = state.v[i] / b2t;
    vals[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.eps);
  }
  std::fill(g.begin(), g.end(), 0.0);
}

}  // namespace dmada
