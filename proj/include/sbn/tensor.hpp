#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbn/rng.hpp"

namespace sbn {

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised whenever an operation would store a NaN/Inf.
struct NumericError : TensorError {
  using TensorError::TensorError;
};

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until backward touches this node
  bool requires_grad = false;
  bool consumed = false;  // set once backward has run through this node
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  bool is_leaf() const { return !backward_fn; }
  std::vector<double>& ensure_grad();
};

}  // namespace detail

// Dense row-major 64-bit tensor with an optional reverse-mode tape node.
// Value-like: copies share the underlying node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::int64_t size() const { return static_cast<std::int64_t>(node_->data.size()); }
  std::int64_t dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
  int rank() const { return static_cast<int>(node_->shape.size()); }

  double* data() { return node_->data.data(); }
  const double* data() const { return node_->data.data(); }
  std::vector<double>& data_vec() { return node_->data; }
  const std::vector<double>& data_vec() const { return node_->data; }

  double value() const;  // scalar tensors only
  double at(std::int64_t i) const { return node_->data[static_cast<size_t>(i)]; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }
  bool has_grad() const { return !node_->grad.empty(); }
  const std::vector<double>& grad() const;
  void zero_grad();

  std::shared_ptr<detail::Node> node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  friend Tensor make_op(Shape shape, std::vector<double> data,
                        std::vector<Tensor> parents,
                        std::function<void(detail::Node&)> backward_fn,
                        const char* opname);
  std::shared_ptr<detail::Node> node_;
};

// Wraps freshly computed data into a tape node; validates finiteness.
Tensor make_op(Shape shape, std::vector<double> data,
               std::vector<Tensor> parents,
               std::function<void(detail::Node&)> backward_fn,
               const char* opname);

// --- elementwise -----------------------------------------------------------
// Binary ops accept exact-shape pairs or a 1-element tensor on either side.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor neg(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sin(const Tensor& a);
Tensor cos(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double c) { return scale(a, c); }
inline Tensor operator*(double c, const Tensor& a) { return scale(a, c); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

// --- reductions / structure ------------------------------------------------
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor conv2d(const Tensor& input, const Tensor& kernels, int stride, int pad);
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);  // x: CxHxW
Tensor softmax(const Tensor& a, int axis);
Tensor global_avg_pool(const Tensor& x);  // CxHxW -> C
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& a, const Shape& start, const Shape& extent);
Tensor reshape(const Tensor& a, Shape shape);
Tensor transpose(const Tensor& a);  // rank 2 only
// out[n,r] = sum_c T[n,4r+c] * h[n,c]; per-row 4x4 transform of homogeneous points
Tensor batched_transform(const Tensor& transforms, const Tensor& points);

// --- backward --------------------------------------------------------------
void backward(const Tensor& loss);

// Central finite differences against analytic gradients. Returns the max of
// |analytic - fd| / max(1e-8, |fd|) over sampled coordinates.
double finite_diff_check(const std::function<Tensor()>& f,
                         const std::vector<Tensor>& params, double eps,
                         Rng& rng, int max_coords_per_tensor = 8);

}  // namespace sbn
