#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "sbn/rng.hpp"
#include "sbn/tensor.hpp"

namespace sbn {

// Named parameters plus Adam state, with deterministic iteration order.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    std::vector<double> m, v;  // Adam moments
    std::int64_t step = 0;
  };

  Tensor& add(const std::string& name, Tensor value);
  Tensor& param(const std::string& name);
  const Tensor& param(const std::string& name) const;
  bool contains(const std::string& name) const;
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }
  size_t size() const { return entries_.size(); }
  void zero_grad();
  std::vector<Tensor> params() const;
  std::vector<Tensor> params_with_prefix(const std::string& prefix) const;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, size_t> index_;
};

struct AttentionConfig {
  int heads = 8;
  int head_dim = 64;
  int model_dim = 2048;
};

// --- layers ----------------------------------------------------------------
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

struct ResidualBlockSpec {
  int in_channels;
  int out_channels;
  int stride;
  bool needs_projection() const {
    return in_channels != out_channels || stride != 1;
  }
};

// conv-relu-conv plus shortcut, relu after the add
Tensor residual_block(const Tensor& x, const ParamStore& store,
                      const std::string& prefix, const ResidualBlockSpec& spec);

// x: L x model_dim (sequence length 1 in production); returns L x model_dim
Tensor mhsa(const Tensor& x, const ParamStore& store, const std::string& prefix,
            const AttentionConfig& cfg);

// alternating linear+relu, no activation on the last layer;
// widths = {d_in, hidden..., d_out}
Tensor mlp(const Tensor& x, const ParamStore& store, const std::string& prefix,
           const std::vector<int>& widths);

// --- initialization --------------------------------------------------------
// He-uniform fan-in weights, zero biases.
void init_linear(ParamStore& store, const std::string& prefix, int d_in,
                 int d_out, Rng& rng);
void init_conv(ParamStore& store, const std::string& prefix, int c_out,
               int c_in, int k, Rng& rng);
void init_residual_block(ParamStore& store, const std::string& prefix,
                         const ResidualBlockSpec& spec, Rng& rng);
void init_mhsa(ParamStore& store, const std::string& prefix,
               const AttentionConfig& cfg, Rng& rng);
void init_mlp(ParamStore& store, const std::string& prefix,
              const std::vector<int>& widths, Rng& rng);

// conv with bias, as used by residual blocks
Tensor conv_layer(const Tensor& x, const ParamStore& store,
                  const std::string& prefix, int stride, int pad);

// --- optimizer -------------------------------------------------------------
struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Parameters whose name starts with a locked prefix keep their value,
// moments, and step counter untouched.
void adam_step(ParamStore& store, const AdamConfig& cfg,
               const std::vector<std::string>& locked_prefixes = {});

bool is_locked(const std::string& name,
               const std::vector<std::string>& locked_prefixes);

}  // namespace sbn
