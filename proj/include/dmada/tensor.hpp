#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dmada/errors.hpp"
#include "dmada/rng.hpp"

namespace dmada {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

// Dense 64-bit float tensor with a tape for reverse-mode differentiation.
// Value semantics on the handle; the node (values, grad, tape edges) is
// shared. The tape is rebuilt on every forward pass.
class Tensor {
 public:
  struct Node {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // allocated on first touch
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;  // reads grad, accumulates parents

    std::size_t size() const { return values.size(); }
    std::vector<double>& grad_buf() {
      if (grad.empty()) grad.assign(values.size(), 0.0);
      return grad;
    }
  };

  Tensor() = default;

  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return n_ != nullptr; }
  const Shape& shape() const { return n_->shape; }
  std::size_t size() const { return n_->values.size(); }
  std::size_t rank() const { return n_->shape.size(); }
  // rank-2 helpers
  std::size_t rows() const;
  std::size_t cols() const;

  const std::vector<double>& values() const { return n_->values; }
  std::vector<double>& mutable_values() { return n_->values; }
  double at(std::size_t i) const { return n_->values[i]; }
  double at(std::size_t r, std::size_t c) const;
  double item() const;

  bool requires_grad() const { return n_->requires_grad; }
  void set_requires_grad(bool rg) { n_->requires_grad = rg; }
  bool has_grad() const { return !n_->grad.empty(); }
  const std::vector<double>& grad() const;
  std::vector<double>& mutable_grad() { return n_->grad_buf(); }
  void zero_grad();
  void detach_tape();  // drop parents/backprop, keep values

  // reverse pass from a scalar
  void backward() const;

  Tensor clone_values() const;  // deep copy of values, no tape, no grad

  std::shared_ptr<Node> node() const { return n_; }

 private:
  explicit Tensor(std::shared_ptr<Node> n) : n_(std::move(n)) {}
  std::shared_ptr<Node> n_;

  friend Tensor make_op(Shape shape, std::vector<double> values,
                        std::vector<Tensor> parents,
                        std::function<void(Node&)> backprop);
};

Tensor make_op(Shape shape, std::vector<double> values,
               std::vector<Tensor> parents,
               std::function<void(Tensor::Node&)> backprop);

// ---- ops ----

Tensor matmul(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);

Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh_op(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor log_op(const Tensor& a);
Tensor exp_op(const Tensor& a);
Tensor neg(const Tensor& a);
Tensor square(const Tensor& a);

// pass-through gradient strictly inside (lo, hi), zero outside
Tensor clamp(const Tensor& a, double lo, double hi);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);

// scale row i of m by v[i]; v is rank-1 of length rows(m)
Tensor scale_rows(const Tensor& m, const Tensor& v);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor row_sum(const Tensor& a);                   // [B x d] -> [B]
Tensor add_rowvec(const Tensor& m, const Tensor& v);  // [B x d] + [d]
Tensor gather_rows(const Tensor& a, const std::vector<std::size_t>& idx);

// mean over batch of -sum_i target_i * log softmax(logits)_i, max-stabilized
Tensor softmax_cross_entropy(const Tensor& logits, const Tensor& target_probs);

// no-grad row-wise softmax of the tensor's values
std::vector<double> softmax_rows(const Tensor& logits);

// i.i.d. standard normal entries, outside the tape
Tensor sample_gaussian(const Shape& shape, Rng& rng);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(double s, const Tensor& a) { return mul_scalar(a, s); }
inline Tensor operator*(const Tensor& a, double s) { return mul_scalar(a, s); }
inline Tensor operator+(const Tensor& a, double s) { return add_scalar(a, s); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

// ---- Adam ----

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long t = 0;
  double learning_rate = 0.0004;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam update in place; increments t and zeros the gradient.
void adam_step(Tensor& param, AdamState& state);

}  // namespace dmada
