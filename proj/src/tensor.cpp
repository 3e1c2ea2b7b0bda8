#include "sbn/tensor.hpp"

#include "sbn/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace sbn {

using MatMap = Eigen::Map<
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap = Eigen::Map<
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void validate_shape(const Shape& shape, const char* where) {
  for (auto e : shape)
    if (e <= 0)
      throw TensorError(std::string(where) + ": non-positive extent in " +
                        shape_str(shape));
}

void check_finite(const std::vector<double>& v, const char* opname) {
  for (double x : v)
    if (!std::isfinite(x))
      throw NumericError(std::string(opname) + " produced a non-finite value");
}

}  // namespace

std::vector<double>& detail::Node::ensure_grad() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  validate_shape(shape, "zeros");
  auto n = std::make_shared<detail::Node>();
  n->data.assign(static_cast<size_t>(numel(shape)), 0.0);
  n->shape = std::move(shape);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::fill(t.data_vec().begin(), t.data_vec().end(), value);
  check_finite(t.data_vec(), "full");
  return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data,
                         bool requires_grad) {
  validate_shape(shape, "from_data");
  if (numel(shape) != static_cast<std::int64_t>(data.size()))
    throw TensorError("from_data: " + shape_str(shape) + " does not match " +
                      std::to_string(data.size()) + " values");
  check_finite(data, "from_data");
  auto n = std::make_shared<detail::Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

double Tensor::value() const {
  if (size() != 1) throw TensorError("value(): tensor is not scalar");
  return node_->data[0];
}

const std::vector<double>& Tensor::grad() const {
  if (node_->grad.empty())
    throw TensorError("grad(): no gradient present; run backward first");
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.clear(); }

Tensor make_op(Shape shape, std::vector<double> data,
               std::vector<Tensor> parents,
               std::function<void(detail::Node&)> backward_fn,
               const char* opname) {
  check_finite(data, opname);
  auto n = std::make_shared<detail::Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  bool rg = false;
  for (auto& p : parents) {
    rg = rg || p.requires_grad();
    n->parents.push_back(p.node());
  }
  n->requires_grad = rg;
  if (rg) n->backward_fn = std::move(backward_fn);
  return Tensor(std::move(n));
}

// --- elementwise -----------------------------------------------------------

namespace {

// exact-shape pairs or a 1-element tensor on either side
void binary_shapes(const Tensor& a, const Tensor& b, const char* opname) {
  if (a.shape() == b.shape() || a.size() == 1 || b.size() == 1) return;
  throw TensorError(std::string(opname) + ": shape mismatch " +
                    shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

// fa(x, y) -> value; ga/gb: local derivatives at (x, y)
template <class F, class Ga, class Gb>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* opname, F fa,
                 Ga ga, Gb gb) {
  binary_shapes(a, b, opname);
  const bool sa = a.size() == 1 && b.size() != 1;
  const bool sb = b.size() == 1 && a.size() != 1;
  const Tensor& big = sa ? b : a;
  const std::int64_t n = big.size();
  std::vector<double> out(static_cast<size_t>(n));
  const double* pa = a.data();
  const double* pb = b.data();
  for (std::int64_t i = 0; i < n; ++i)
    out[static_cast<size_t>(i)] = fa(pa[sa ? 0 : i], pb[sb ? 0 : i]);
  auto an = a.node();
  auto bn = b.node();
  return make_op(
      big.shape(), std::move(out), {a, b},
      [an, bn, sa, sb, n, ga, gb](detail::Node& self) {
        const double* g = self.grad.data();
        const double* pa2 = an->data.data();
        const double* pb2 = bn->data.data();
        if (an->requires_grad) {
          auto& gr = an->ensure_grad();
          for (std::int64_t i = 0; i < n; ++i)
            gr[sa ? 0 : static_cast<size_t>(i)] +=
                g[i] * ga(pa2[sa ? 0 : i], pb2[sb ? 0 : i]);
        }
        if (bn->requires_grad) {
          auto& gr = bn->ensure_grad();
          for (std::int64_t i = 0; i < n; ++i)
            gr[sb ? 0 : static_cast<size_t>(i)] +=
                g[i] * gb(pa2[sa ? 0 : i], pb2[sb ? 0 : i]);
        }
      },
      opname);
}

template <class F, class G>
Tensor unary_op(const Tensor& a, const char* opname, F f, G g) {
  const std::int64_t n = a.size();
  std::vector<double> out(static_cast<size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    out[static_cast<size_t>(i)] = f(a.data()[i]);
  auto an = a.node();
  return make_op(
      a.shape(), std::move(out), {a},
      [an, n, g](detail::Node& self) {
        if (!an->requires_grad) return;
        auto& gr = an->ensure_grad();
        for (std::int64_t i = 0; i < n; ++i)
          gr[static_cast<size_t>(i)] += self.grad[static_cast<size_t>(i)] *
                                        g(an->data[static_cast<size_t>(i)]);
      },
      opname);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Tensor scale(const Tensor& a, double c) {
  return unary_op(
      a, "scale", [c](double x) { return c * x; },
      [c](double) { return c; });
}

Tensor add_scalar(const Tensor& a, double c) {
  return unary_op(
      a, "add_scalar", [c](double x) { return x + c; },
      [](double) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor relu(const Tensor& a) {
  return unary_op(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sin(const Tensor& a) {
  return unary_op(
      a, "sin", [](double x) { return std::sin(x); },
      [](double x) { return std::cos(x); });
}

Tensor cos(const Tensor& a) {
  return unary_op(
      a, "cos", [](double x) { return std::cos(x); },
      [](double x) { return -std::sin(x); });
}

Tensor sqrt(const Tensor& a) {
  return unary_op(
      a, "sqrt", [](double x) { return std::sqrt(x); },
      [](double x) { return 0.5 / std::sqrt(x); });
}

Tensor abs(const Tensor& a) {
  // subgradient 0 at the kink
  return unary_op(
      a, "abs", [](double x) { return std::abs(x); },
      [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& a) {
  return unary_op(
      a, "square", [](double x) { return x * x; },
      [](double x) { return 2.0 * x; });
}

// --- reductions / structure ------------------------------------------------

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) s += a.data()[i];
  auto an = a.node();
  auto n = a.size();
  return make_op(
      {1}, {s}, {a},
      [an, n](detail::Node& self) {
        if (!an->requires_grad) return;
        auto& gr = an->ensure_grad();
        const double g = self.grad[0];
        for (std::int64_t i = 0; i < n; ++i) gr[static_cast<size_t>(i)] += g;
      },
      "sum");
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / double(a.size())); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw TensorError("matmul: operands must be rank 2");
  const std::int64_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2)
    throw TensorError("matmul: inner dimensions disagree " +
                      shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<double> out(static_cast<size_t>(m * n));
  {
    ConstMatMap A(a.data(), m, k), B(b.data(), k, n);
    MatMap C(out.data(), m, n);
    C.noalias() = A * B;
  }
  auto an = a.node();
  auto bn = b.node();
  return make_op(
      {m, n}, std::move(out), {a, b},
      [an, bn, m, k, n](detail::Node& self) {
        ConstMatMap G(self.grad.data(), m, n);
        ConstMatMap A(an->data.data(), m, k), B(bn->data.data(), k, n);
        if (an->requires_grad) {
          MatMap GA(an->ensure_grad().data(), m, k);
          GA.noalias() += G * B.transpose();
        }
        if (bn->requires_grad) {
          MatMap GB(bn->ensure_grad().data(), k, n);
          GB.noalias() += A.transpose() * G;
        }
      },
      "matmul");
}

Tensor conv2d(const Tensor& input, const Tensor& kernels, int stride,
              int pad) {
  if (input.rank() != 3 || kernels.rank() != 4)
    throw TensorError("conv2d: expected CxHxW input and OxCxkxk kernels");
  const std::int64_t ci = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::int64_t co = kernels.dim(0), ck = kernels.dim(1),
                     kh = kernels.dim(2), kw = kernels.dim(3);
  if (ck != ci) throw TensorError("conv2d: channel mismatch");
  if (kh != kw) throw TensorError("conv2d: kernels must be square");
  if (stride < 1 || pad < 0) throw TensorError("conv2d: bad stride/pad");
  const std::int64_t ho = (h + 2 * pad - kh) / stride + 1;
  const std::int64_t wo = (w + 2 * pad - kw) / stride + 1;
  if (h + 2 * pad < kh || w + 2 * pad < kw || ho < 1 || wo < 1)
    throw TensorError("conv2d: kernel larger than padded input");

  const std::int64_t prows = ci * kh * kw, pcols = ho * wo;
  auto patches = std::make_shared<std::vector<double>>(
      static_cast<size_t>(prows * pcols), 0.0);
  const double* in = input.data();
  for (std::int64_t c = 0; c < ci; ++c)
    for (std::int64_t dy = 0; dy < kh; ++dy)
      for (std::int64_t dx = 0; dx < kw; ++dx) {
        const std::int64_t r = (c * kh + dy) * kw + dx;
        double* prow = patches->data() + r * pcols;
        for (std::int64_t oy = 0; oy < ho; ++oy) {
          const std::int64_t iy = oy * stride + dy - pad;
          if (iy < 0 || iy >= h) continue;
          for (std::int64_t ox = 0; ox < wo; ++ox) {
            const std::int64_t ix = ox * stride + dx - pad;
            if (ix < 0 || ix >= w) continue;
            prow[oy * wo + ox] = in[(c * h + iy) * w + ix];
          }
        }
      }

  std::vector<double> out(static_cast<size_t>(co * pcols));
  {
    ConstMatMap K(kernels.data(), co, prows);
    ConstMatMap P(patches->data(), prows, pcols);
    MatMap O(out.data(), co, pcols);
    O.noalias() = K * P;
  }
  auto in_n = input.node();
  auto k_n = kernels.node();
  return make_op(
      {co, ho, wo}, std::move(out), {input, kernels},
      [in_n, k_n, patches, ci, h, w, co, kh, kw, ho, wo, stride,
       pad](detail::Node& self) {
        const std::int64_t prows = ci * kh * kw, pcols = ho * wo;
        ConstMatMap G(self.grad.data(), co, pcols);
        if (k_n->requires_grad) {
          ConstMatMap P(patches->data(), prows, pcols);
          MatMap GK(k_n->ensure_grad().data(), co, prows);
          GK.noalias() += G * P.transpose();
        }
        if (in_n->requires_grad) {
          ConstMatMap K(k_n->data.data(), co, prows);
          Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
              GP = K.transpose() * G;
          auto& gin = in_n->ensure_grad();
          for (std::int64_t c = 0; c < ci; ++c)
            for (std::int64_t dy = 0; dy < kh; ++dy)
              for (std::int64_t dx = 0; dx < kw; ++dx) {
                const std::int64_t r = (c * kh + dy) * kw + dx;
                for (std::int64_t oy = 0; oy < ho; ++oy) {
                  const std::int64_t iy = oy * stride + dy - pad;
                  if (iy < 0 || iy >= h) continue;
                  for (std::int64_t ox = 0; ox < wo; ++ox) {
                    const std::int64_t ix = ox * stride + dx - pad;
                    if (ix < 0 || ix >= w) continue;
                    gin[static_cast<size_t>((c * h + iy) * w + ix)] +=
                        GP(r, oy * wo + ox);
                  }
                }
              }
        }
      },
      "conv2d");
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  if (x.rank() != 3 || bias.rank() != 1 || bias.dim(0) != x.dim(0))
    throw TensorError("add_channel_bias: bias must match channel count");
  const std::int64_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
  std::vector<double> out(static_cast<size_t>(c * hw));
  for (std::int64_t i = 0; i < c; ++i) {
    const double b = bias.data()[i];
    for (std::int64_t j = 0; j < hw; ++j)
      out[static_cast<size_t>(i * hw + j)] = x.data()[i * hw + j] + b;
  }
  auto xn = x.node();
  auto bn = bias.node();
  return make_op(
      x.shape(), std::move(out), {x, bias},
      [xn, bn, c, hw](detail::Node& self) {
        if (xn->requires_grad) {
          auto& gx = xn->ensure_grad();
          for (size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
        }
        if (bn->requires_grad) {
          auto& gb = bn->ensure_grad();
          for (std::int64_t i = 0; i < c; ++i) {
            double s = 0.0;
            for (std::int64_t j = 0; j < hw; ++j)
              s += self.grad[static_cast<size_t>(i * hw + j)];
            gb[static_cast<size_t>(i)] += s;
          }
        }
      },
      "add_channel_bias");
}

namespace {

// outer/axis/inner decomposition for axis-wise ops
struct AxisSplit {
  std::int64_t outer, axis, inner;
};

AxisSplit split_axis(const Shape& shape, int axis, const char* opname) {
  if (axis < 0 || axis >= static_cast<int>(shape.size()))
    throw TensorError(std::string(opname) + ": axis out of range");
  AxisSplit s{1, shape[static_cast<size_t>(axis)], 1};
  for (int i = 0; i < axis; ++i) s.outer *= shape[static_cast<size_t>(i)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < shape.size(); ++i)
    s.inner *= shape[i];
  return s;
}

}  // namespace

Tensor softmax(const Tensor& a, int axis) {
  const AxisSplit s = split_axis(a.shape(), axis, "softmax");
  std::vector<double> out(static_cast<size_t>(a.size()));
  const double* in = a.data();
  for (std::int64_t o = 0; o < s.outer; ++o)
    for (std::int64_t i = 0; i < s.inner; ++i) {
      const std::int64_t base = o * s.axis * s.inner + i;
      double mx = in[base];
      for (std::int64_t k = 1; k < s.axis; ++k)
        mx = std::max(mx, in[base + k * s.inner]);
      double z = 0.0;
      for (std::int64_t k = 0; k < s.axis; ++k)
        z += std::exp(in[base + k * s.inner] - mx);
      for (std::int64_t k = 0; k < s.axis; ++k)
        out[static_cast<size_t>(base + k * s.inner)] =
            std::exp(in[base + k * s.inner] - mx) / z;
    }
  auto an = a.node();
  return make_op(
      a.shape(), std::move(out), {a},
      [an, s](detail::Node& self) {
        if (!an->requires_grad) return;
        auto& gr = an->ensure_grad();
        const double* y = self.data.data();
        const double* g = self.grad.data();
        for (std::int64_t o = 0; o < s.outer; ++o)
          for (std::int64_t i = 0; i < s.inner; ++i) {
            const std::int64_t base = o * s.axis * s.inner + i;
            double dot = 0.0;
            for (std::int64_t k = 0; k < s.axis; ++k) {
              const std::int64_t idx = base + k * s.inner;
              dot += g[idx] * y[idx];
            }
            for (std::int64_t k = 0; k < s.axis; ++k) {
              const std::int64_t idx = base + k * s.inner;
              gr[static_cast<size_t>(idx)] += y[idx] * (g[idx] - dot);
            }
          }
      },
      "softmax");
}

Tensor global_avg_pool(const Tensor& x) {
  if (x.rank() != 3) throw TensorError("global_avg_pool: expected CxHxW");
  const std::int64_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
  std::vector<double> out(static_cast<size_t>(c));
  for (std::int64_t i = 0; i < c; ++i) {
    double s = 0.0;
    for (std::int64_t j = 0; j < hw; ++j) s += x.data()[i * hw + j];
    out[static_cast<size_t>(i)] = s / double(hw);
  }
  auto xn = x.node();
  return make_op(
      {c}, std::move(out), {x},
      [xn, c, hw](detail::Node& self) {
        if (!xn->requires_grad) return;
        auto& gr = xn->ensure_grad();
        for (std::int64_t i = 0; i < c; ++i) {
          const double g = self.grad[static_cast<size_t>(i)] / double(hw);
          for (std::int64_t j = 0; j < hw; ++j)
            gr[static_cast<size_t>(i * hw + j)] += g;
        }
      },
      "global_avg_pool");
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw TensorError("concat: no parts");
  Shape shape = parts[0].shape();
  if (axis < 0 || axis >= static_cast<int>(shape.size()))
    throw TensorError("concat: axis out of range");
  std::int64_t total = 0;
  for (auto& p : parts) {
    if (p.rank() != static_cast<int>(shape.size()))
      throw TensorError("concat: rank mismatch");
    for (int i = 0; i < p.rank(); ++i)
      if (i != axis && p.dim(i) != shape[static_cast<size_t>(i)])
        throw TensorError("concat: non-axis extent mismatch");
    total += p.dim(axis);
  }
  shape[static_cast<size_t>(axis)] = total;
  const AxisSplit s = split_axis(shape, axis, "concat");
  std::vector<double> out(static_cast<size_t>(numel(shape)));
  std::vector<std::int64_t> offsets;
  std::int64_t off = 0;
  for (auto& p : parts) {
    offsets.push_back(off);
    const std::int64_t pa = p.dim(axis);
    for (std::int64_t o = 0; o < s.outer; ++o)
      std::copy(p.data() + o * pa * s.inner, p.data() + (o + 1) * pa * s.inner,
                out.data() + (o * total + off) * s.inner);
    off += pa;
  }
  std::vector<std::shared_ptr<detail::Node>> pn;
  std::vector<std::int64_t> paxis;
  for (auto& p : parts) {
    pn.push_back(p.node());
    paxis.push_back(p.dim(axis));
  }
  return make_op(
      shape, std::move(out), parts,
      [pn, paxis, offsets, s, total](detail::Node& self) {
        for (size_t pi = 0; pi < pn.size(); ++pi) {
          if (!pn[pi]->requires_grad) continue;
          auto& gr = pn[pi]->ensure_grad();
          const std::int64_t pa = paxis[pi], off = offsets[pi];
          for (std::int64_t o = 0; o < s.outer; ++o)
            for (std::int64_t j = 0; j < pa * s.inner; ++j)
              gr[static_cast<size_t>(o * pa * s.inner + j)] +=
                  self.grad[static_cast<size_t>((o * total + off) * s.inner +
                                                j)];
        }
      },
      "concat");
}

Tensor slice(const Tensor& a, const Shape& start, const Shape& extent) {
  const int r = a.rank();
  if (static_cast<int>(start.size()) != r ||
      static_cast<int>(extent.size()) != r)
    throw TensorError("slice: start/extent rank mismatch");
  for (int i = 0; i < r; ++i)
    if (start[static_cast<size_t>(i)] < 0 || extent[static_cast<size_t>(i)] < 1 ||
        start[static_cast<size_t>(i)] + extent[static_cast<size_t>(i)] >
            a.dim(i))
      throw TensorError("slice: out of bounds");
  // row-major strides
  std::vector<std::int64_t> stride(static_cast<size_t>(r), 1);
  for (int i = r - 2; i >= 0; --i)
    stride[static_cast<size_t>(i)] =
        stride[static_cast<size_t>(i + 1)] * a.dim(i + 1);
  const std::int64_t n = numel(extent);
  std::vector<double> out(static_cast<size_t>(n));
  std::vector<std::int64_t> src_index(static_cast<size_t>(n));
  Shape idx(static_cast<size_t>(r), 0);
  for (std::int64_t flat = 0; flat < n; ++flat) {
    std::int64_t src = 0;
    for (int i = 0; i < r; ++i)
      src += (start[static_cast<size_t>(i)] + idx[static_cast<size_t>(i)]) *
             stride[static_cast<size_t>(i)];
    out[static_cast<size_t>(flat)] = a.data()[src];
    src_index[static_cast<size_t>(flat)] = src;
    for (int i = r - 1; i >= 0; --i) {
      if (++idx[static_cast<size_t>(i)] < extent[static_cast<size_t>(i)]) break;
      idx[static_cast<size_t>(i)] = 0;
    }
  }
  auto an = a.node();
  return make_op(
      extent, std::move(out), {a},
      [an, src_index](detail::Node& self) {
        if (!an->requires_grad) return;
        auto& gr = an->ensure_grad();
        for (size_t i = 0; i < src_index.size(); ++i)
          gr[static_cast<size_t>(src_index[i])] += self.grad[i];
      },
      "slice");
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size())
    throw TensorError("reshape: element count mismatch " +
                      shape_str(a.shape()) + " -> " + shape_str(shape));
  auto an = a.node();
  std::vector<double> out(a.data_vec());
  return make_op(
      std::move(shape), std::move(out), {a},
      [an](detail::Node& self) {
        if (!an->requires_grad) return;
        auto& gr = an->ensure_grad();
        for (size_t i = 0; i < gr.size(); ++i) gr[i] += self.grad[i];
      },
      "reshape");
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw TensorError("transpose: rank 2 only");
  const std::int64_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(static_cast<size_t>(m * n));
  {
    ConstMatMap A(a.data(), m, n);
    MatMap T(out.data(), n, m);
    T = A.transpose();
  }
  auto an = a.node();
  return make_op(
      {n, m}, std::move(out), {a},
      [an, m, n](detail::Node& self) {
        if (!an->requires_grad) return;
        MatMap GA(an->ensure_grad().data(), m, n);
        ConstMatMap G(self.grad.data(), n, m);
        GA += G.transpose();
      },
      "transpose");
}

Tensor batched_transform(const Tensor& transforms, const Tensor& points) {
  if (transforms.rank() != 2 || transforms.dim(1) != 16 || points.rank() != 2 ||
      points.dim(1) != 4 || transforms.dim(0) != points.dim(0))
    throw TensorError("batched_transform: expected Nx16 transforms and Nx4 points");
  const std::int64_t n = points.dim(0);
  std::vector<double> out(static_cast<size_t>(n * 4));
  const double* t = transforms.data();
  const double* h = points.data();
  for (std::int64_t v = 0; v < n; ++v)
    for (int r = 0; r < 4; ++r) {
      double s = 0.0;
      for (int c = 0; c < 4; ++c) s += t[v * 16 + 4 * r + c] * h[v * 4 + c];
      out[static_cast<size_t>(v * 4 + r)] = s;
    }
  auto tn = transforms.node();
  auto pn = points.node();
  return make_op(
      {n, 4}, std::move(out), {transforms, points},
      [tn, pn, n](detail::Node& self) {
        const double* g = self.grad.data();
        if (tn->requires_grad) {
          auto& gt = tn->ensure_grad();
          for (std::int64_t v = 0; v < n; ++v)
            for (int r = 0; r < 4; ++r)
              for (int c = 0; c < 4; ++c)
                gt[static_cast<size_t>(v * 16 + 4 * r + c)] +=
                    g[v * 4 + r] * pn->data[static_cast<size_t>(v * 4 + c)];
        }
        if (pn->requires_grad) {
          auto& gp = pn->ensure_grad();
          for (std::int64_t v = 0; v < n; ++v)
            for (int c = 0; c < 4; ++c) {
              double s = 0.0;
              for (int r = 0; r < 4; ++r)
                s += g[v * 4 + r] *
                     tn->data[static_cast<size_t>(v * 16 + 4 * r + c)];
              gp[static_cast<size_t>(v * 4 + c)] += s;
            }
        }
      },
      "batched_transform");
}

// --- backward --------------------------------------------------------------

void backward(const Tensor& loss) {
  if (loss.size() != 1) throw TensorError("backward: loss must be scalar");
  auto root = loss.node();
  if (root->consumed)
    throw TensorError("backward: tape already consumed; re-run the forward pass");
  if (!root->requires_grad)
    throw TensorError("backward: loss does not depend on any parameter");

  // iterative post-order DFS over the requires_grad subgraph
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, child] = stack.back();
    if (child < node->parents.size()) {
      detail::Node* p = node->parents[child++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        if (p->consumed)
          throw TensorError(
              "backward: tape already consumed; re-run the forward pass");
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad()[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->is_leaf()) continue;
    if (node->grad.empty()) continue;  // unreached side branch
    node->backward_fn(*node);
  }
  for (detail::Node* node : order) {
    if (!node->is_leaf()) node->consumed = true;
    for (double g : node->grad)
      if (!std::isfinite(g))
        throw NumericError("backward produced a non-finite gradient");
  }
}

double finite_diff_check(const std::function<Tensor()>& f,
                         const std::vector<Tensor>& params, double eps,
                         Rng& rng, int max_coords_per_tensor) {
  for (auto p : params) p.zero_grad();
  Tensor loss = f();
  backward(loss);
  std::vector<std::vector<double>> analytic;
  for (auto& p : params) analytic.push_back(p.grad());

  double max_err = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor p = params[pi];
    std::vector<std::int64_t> coords;
    if (p.size() <= max_coords_per_tensor) {
      for (std::int64_t i = 0; i < p.size(); ++i) coords.push_back(i);
    } else {
      for (int i = 0; i < max_coords_per_tensor; ++i)
        coords.push_back(
            static_cast<std::int64_t>(rng.next_u64() % std::uint64_t(p.size())));
    }
    for (auto c : coords) {
      double* slot = p.data() + c;
      const double orig = *slot;
      *slot = orig + eps;
      const double fp = f().value();
      *slot = orig - eps;
      const double fm = f().value();
      *slot = orig;
      if (!std::isfinite(fp) || !std::isfinite(fm))
        throw NumericError("finite_diff_check: non-finite evaluation");
      const double fd = (fp - fm) / (2.0 * eps);
      const double err = std::abs(analytic[pi][static_cast<size_t>(c)] - fd) /
                         std::max(1e-8, std::abs(fd));
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

}  // namespace sbn

namespace sbn {
double Rng::normal() {
  // u in (0,1] to keep the log finite
  const double u = 1.0 - uniform();
  const double v = uniform();
  return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * 3.141592653589793238462643383279502884 * v);
}
}  // namespace sbn
