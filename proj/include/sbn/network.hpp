#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sbn/errors.hpp"
#include "sbn/nn.hpp"
#include "sbn/rng.hpp"
#include "sbn/tensor.hpp"

namespace sbn {

struct NetConfig {
  int input_resolution = 64;
  std::vector<int> backbone_stage_channels = {32, 64, 128, 256};
  int model_dim = 256;
  AttentionConfig attention{8, 64, 256};
  std::vector<int> mlp_hidden = {256};
  bool attention_enabled = true;
  bool multi_branch = true;
  std::vector<double> theta_init;  // 3K, rest pose by default
  std::vector<double> beta_init;   // n_beta, mean shape
  std::vector<double> cam_init = {1.0, 0.0, 0.0};

  void validate() const;  // throws ValidationError
  bool operator==(const NetConfig&) const = default;
};

// mini-model default: 16 joints, 4 betas
NetConfig default_net_config(int n_joints = 16, int n_beta = 4);

// backbone feature map dimensions before pooling, {C, H, W}
std::array<std::int64_t, 3> backbone_output_shape(const NetConfig& cfg);

struct NetOutput {
  Tensor theta;  // 3K
  Tensor beta;   // n_beta
  Tensor cam;    // (s, tx, ty)
};

enum class Branch { pose, shape, cam };

void init_network(ParamStore& store, const NetConfig& cfg, Rng& rng);

// image: 3 x R x R, stroke = 1, background = 0
Tensor backbone_forward(const Tensor& image, const ParamStore& store,
                        const NetConfig& cfg);

Tensor decoder_branch_forward(Branch branch, const Tensor& f_in,
                              const ParamStore& store, const NetConfig& cfg);

NetOutput sketchbodynet_forward(const Tensor& image, const ParamStore& store,
                                const NetConfig& cfg);

void save_checkpoint(const std::string& path, const ParamStore& store,
                     const NetConfig& cfg, const Rng& rng, std::int64_t step);

// store must already hold parameters laid out for cfg; shapes are validated
// against the file header
void load_checkpoint(const std::string& path, ParamStore& store,
                     const NetConfig& cfg, Rng& rng, std::int64_t& step);

// reads only the header, so a checkpoint can be opened without knowing its
// architecture up front
NetConfig read_checkpoint_config(const std::string& path);

}  // namespace sbn
