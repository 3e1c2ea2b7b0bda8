#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sbn/body_model.hpp"
#include "sbn/network.hpp"
#include "sbn/sketch.hpp"
#include "sbn/tensor.hpp"

namespace sbn {

// Component values are reported only when the regime supervises them.
struct LossBreakdown {
  std::optional<double> shape3d, joints3d, joints2d, theta, beta;
  Tensor total;
  SketchSource regime = SketchSource::synthetic;
};

// sum of elementwise L1 deviations over all vertices
Tensor shape_l1(const Tensor& pred_vertices, const Tensor& gt_vertices);

// mean over unmasked joints of the squared Euclidean deviation;
// empty mask means every joint counts
Tensor joints_mse(const Tensor& pred, const Tensor& gt,
                  const std::vector<std::uint8_t>& mask = {});

Tensor param_mse(const Tensor& pred, const Tensor& gt);

// tape constant from any dense Eigen expression; column vectors become rank 1
template <class Derived>
Tensor constant(const Eigen::MatrixBase<Derived>& m) {
  MatrixXdR tmp = m;
  std::vector<double> data(tmp.data(), tmp.data() + tmp.size());
  if (Derived::ColsAtCompileTime == 1)
    return Tensor::from_data({tmp.rows()}, std::move(data));
  return Tensor::from_data({tmp.rows(), tmp.cols()}, std::move(data));
}

// synthetic: shape + 3D joints + 2D joints + theta + beta, unit weights;
// freehand: 3D joints + theta only
LossBreakdown total_loss(const SketchSample& sample, const NetOutput& net_out,
                         const SmplOutput& smpl_out, const Tensor& projected2d);

}  // namespace sbn
