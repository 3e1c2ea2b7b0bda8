#include "sbn/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace sbn {

Tensor& ParamStore::add(const std::string& name, Tensor value) {
  if (index_.count(name))
    throw TensorError("ParamStore: duplicate parameter " + name);
  value.set_requires_grad(true);
  index_[name] = entries_.size();
  entries_.push_back(Entry{name, std::move(value), {}, {}, 0});
  Entry& e = entries_.back();
  e.m.assign(static_cast<size_t>(e.value.size()), 0.0);
  e.v.assign(static_cast<size_t>(e.value.size()), 0.0);
  return e.value;
}

Tensor& ParamStore::param(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end())
    throw TensorError("ParamStore: unknown parameter " + name);
  return entries_[it->second].value;
}

const Tensor& ParamStore::param(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end())
    throw TensorError("ParamStore: unknown parameter " + name);
  return entries_[it->second].value;
}

bool ParamStore::contains(const std::string& name) const {
  return index_.count(name) != 0;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.value.zero_grad();
}

std::vector<Tensor> ParamStore::params() const {
  std::vector<Tensor> out;
  for (auto& e : entries_) out.push_back(e.value);
  return out;
}

std::vector<Tensor> ParamStore::params_with_prefix(
    const std::string& prefix) const {
  std::vector<Tensor> out;
  for (auto& e : entries_)
    if (e.name.rfind(prefix, 0) == 0) out.push_back(e.value);
  return out;
}

// --- layers ----------------------------------------------------------------

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  const std::int64_t d_in = weight.dim(0), d_out = weight.dim(1);
  if (bias.size() != d_out) throw TensorError("linear: bias width mismatch");
  const bool vector_in = x.rank() == 1;
  Tensor rows = vector_in ? reshape(x, {1, d_in}) : x;
  if (rows.dim(1) != d_in)
    throw TensorError("linear: trailing extent " + std::to_string(rows.dim(1)) +
                      " != d_in " + std::to_string(d_in));
  Tensor y = matmul(rows, weight);
  const std::int64_t l = rows.dim(0);
  Tensor b_row = reshape(bias, {1, d_out});
  if (l == 1) {
    y = y + b_row;
  } else {
    std::vector<Tensor> tiled(static_cast<size_t>(l), b_row);
    y = y + concat(tiled, 0);
  }
  return vector_in ? reshape(y, {d_out}) : y;
}

Tensor conv_layer(const Tensor& x, const ParamStore& store,
                  const std::string& prefix, int stride, int pad) {
  Tensor y = conv2d(x, store.param(prefix + ".weight"), stride, pad);
  return add_channel_bias(y, store.param(prefix + ".bias"));
}

Tensor residual_block(const Tensor& x, const ParamStore& store,
                      const std::string& prefix,
                      const ResidualBlockSpec& spec) {
  Tensor h = relu(conv_layer(x, store, prefix + ".conv1", spec.stride, 1));
  h = conv_layer(h, store, prefix + ".conv2", 1, 1);
  Tensor shortcut =
      spec.needs_projection()
          ? conv_layer(x, store, prefix + ".proj", spec.stride, 0)
          : x;
  if (h.shape() != shortcut.shape())
    throw TensorError("residual_block: path shapes disagree");
  return relu(h + shortcut);
}

Tensor mhsa(const Tensor& x, const ParamStore& store, const std::string& prefix,
            const AttentionConfig& cfg) {
  const bool vector_in = x.rank() == 1;
  Tensor seq = vector_in ? reshape(x, {1, x.size()}) : x;
  if (seq.dim(1) != cfg.model_dim)
    throw TensorError("mhsa: input width != model_dim");
  const std::int64_t l = seq.dim(0), hd = cfg.head_dim;

  Tensor q = linear(seq, store.param(prefix + ".wq.weight"),
                    store.param(prefix + ".wq.bias"));
  Tensor k = linear(seq, store.param(prefix + ".wk.weight"),
                    store.param(prefix + ".wk.bias"));
  Tensor v = linear(seq, store.param(prefix + ".wv.weight"),
                    store.param(prefix + ".wv.bias"));

  std::vector<Tensor> head_outputs;
  for (int h = 0; h < cfg.heads; ++h) {
    Tensor qh = slice(q, {0, h * hd}, {l, hd});
    Tensor kh = slice(k, {0, h * hd}, {l, hd});
    Tensor vh = slice(v, {0, h * hd}, {l, hd});
    Tensor scores = scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(double(hd)));
    head_outputs.push_back(matmul(softmax(scores, 1), vh));
  }
  Tensor merged = concat(head_outputs, 1);
  Tensor out = linear(merged, store.param(prefix + ".wo.weight"),
                      store.param(prefix + ".wo.bias"));
  return vector_in ? reshape(out, {cfg.model_dim}) : out;
}

Tensor mlp(const Tensor& x, const ParamStore& store, const std::string& prefix,
           const std::vector<int>& widths) {
  if (widths.size() < 2) throw TensorError("mlp: need at least in/out widths");
  Tensor h = x;
  for (size_t i = 0; i + 1 < widths.size(); ++i) {
    const std::string layer = prefix + ".fc" + std::to_string(i);
    h = linear(h, store.param(layer + ".weight"), store.param(layer + ".bias"));
    if (i + 2 < widths.size()) h = relu(h);
  }
  return h;
}

// --- initialization --------------------------------------------------------

namespace {

Tensor he_uniform(Shape shape, std::int64_t fan_in, Rng& rng) {
  const double limit = std::sqrt(6.0 / double(fan_in));
  std::vector<double> data(static_cast<size_t>(numel(shape)));
  for (auto& v : data) v = rng.uniform(-limit, limit);
  return Tensor::from_data(std::move(shape), std::move(data));
}

}  // namespace

void init_linear(ParamStore& store, const std::string& prefix, int d_in,
                 int d_out, Rng& rng) {
  store.add(prefix + ".weight", he_uniform({d_in, d_out}, d_in, rng));
  store.add(prefix + ".bias", Tensor::zeros({d_out}));
}

void init_conv(ParamStore& store, const std::string& prefix, int c_out,
               int c_in, int k, Rng& rng) {
  store.add(prefix + ".weight",
            he_uniform({c_out, c_in, k, k}, std::int64_t(c_in) * k * k, rng));
  store.add(prefix + ".bias", Tensor::zeros({c_out}));
}

void init_residual_block(ParamStore& store, const std::string& prefix,
                         const ResidualBlockSpec& spec, Rng& rng) {
  init_conv(store, prefix + ".conv1", spec.out_channels, spec.in_channels, 3,
            rng);
  init_conv(store, prefix + ".conv2", spec.out_channels, spec.out_channels, 3,
            rng);
  if (spec.needs_projection())
    init_conv(store, prefix + ".proj", spec.out_channels, spec.in_channels, 1,
              rng);
}

void init_mhsa(ParamStore& store, const std::string& prefix,
               const AttentionConfig& cfg, Rng& rng) {
  const int inner = cfg.heads * cfg.head_dim;
  init_linear(store, prefix + ".wq", cfg.model_dim, inner, rng);
  init_linear(store, prefix + ".wk", cfg.model_dim, inner, rng);
  init_linear(store, prefix + ".wv", cfg.model_dim, inner, rng);
  init_linear(store, prefix + ".wo", inner, cfg.model_dim, rng);
}

void init_mlp(ParamStore& store, const std::string& prefix,
              const std::vector<int>& widths, Rng& rng) {
  for (size_t i = 0; i + 1 < widths.size(); ++i)
    init_linear(store, prefix + ".fc" + std::to_string(i), widths[i],
                widths[i + 1], rng);
}

// --- optimizer -------------------------------------------------------------

bool is_locked(const std::string& name,
               const std::vector<std::string>& locked_prefixes) {
  for (auto& p : locked_prefixes)
    if (name.rfind(p, 0) == 0) return true;
  return false;
}

void adam_step(ParamStore& store, const AdamConfig& cfg,
               const std::vector<std::string>& locked_prefixes) {
  for (auto& e : store.entries()) {
    if (is_locked(e.name, locked_prefixes)) continue;
    // A parameter with no grad was not part of this step's graph; its value,
    // moments, and step counter stay frozen.
    if (!e.value.has_grad()) continue;
    const std::vector<double>& g = e.value.grad();
    e.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(e.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(e.step));
    double* p = e.value.data();
    for (size_t i = 0; i < g.size(); ++i) {
      e.m[i] = cfg.beta1 * e.m[i] + (1.0 - cfg.beta1) * g[i];
      e.v[i] = cfg.beta2 * e.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = e.m[i] / bc1;
      const double vhat = e.v[i] / bc2;
      p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

}  // namespace sbn
