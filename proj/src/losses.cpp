#include "sbn/losses.hpp"

#include <algorithm>

namespace sbn {

Tensor shape_l1(const Tensor& pred_vertices, const Tensor& gt_vertices) {
  if (pred_vertices.shape() != gt_vertices.shape())
    throw TensorError("shape_l1: shape mismatch");
  return sum(abs(sub(pred_vertices, gt_vertices)));
}

Tensor joints_mse(const Tensor& pred, const Tensor& gt,
                  const std::vector<std::uint8_t>& mask) {
  if (pred.shape() != gt.shape())
    throw TensorError("joints_mse: shape mismatch");
  if (pred.rank() != 2 || (pred.dim(1) != 2 && pred.dim(1) != 3))
    throw TensorError("joints_mse: expected N x 2 or N x 3");
  const std::int64_t n = pred.dim(0), d = pred.dim(1);
  if (!mask.empty() && mask.size() != static_cast<size_t>(n))
    throw TensorError("joints_mse: mask length != joint count");
  std::int64_t active = n;
  if (!mask.empty())
    active = std::count_if(mask.begin(), mask.end(),
                           [](std::uint8_t m) { return m != 0; });
  if (active == 0) throw ValidationError("joints_mse: no unmasked joints");
  Tensor sq = square(sub(pred, gt));
  if (!mask.empty() && active != n) {
    std::vector<double> w(static_cast<size_t>(n * d));
    for (std::int64_t j = 0; j < n; ++j)
      for (std::int64_t c = 0; c < d; ++c)
        w[static_cast<size_t>(j * d + c)] =
            mask[static_cast<size_t>(j)] ? 1.0 : 0.0;
    sq = mul(sq, Tensor::from_data({n, d}, std::move(w)));
  }
  return scale(sum(sq), 1.0 / static_cast<double>(active));
}

Tensor param_mse(const Tensor& pred, const Tensor& gt) {
  if (pred.shape() != gt.shape())
    throw TensorError("param_mse: length mismatch");
  return mean(square(sub(pred, gt)));
}

LossBreakdown total_loss(const SketchSample& sample, const NetOutput& net_out,
                         const SmplOutput& smpl_out,
                         const Tensor& projected2d) {
  LossBreakdown out;
  out.regime = sample.source;
  if (!sample.theta || !sample.joints3d)
    throw ValidationError("total_loss: sample lacks theta/joints3d");

  Tensor l3d = joints_mse(smpl_out.joints, constant(*sample.joints3d),
                          sample.joint_mask);
  Tensor ltheta = param_mse(net_out.theta, constant(*sample.theta));
  out.joints3d = l3d.value();
  out.theta = ltheta.value();

  if (sample.source == SketchSource::freehand) {
    out.total = add(l3d, ltheta);
    return out;
  }
  if (!sample.beta || !sample.joints2d || !sample.mesh_vertices)
    throw ValidationError("total_loss: synthetic sample lacks annotations");
  Tensor lshape = shape_l1(smpl_out.vertices, constant(*sample.mesh_vertices));
  Tensor l2d = joints_mse(projected2d, constant(*sample.joints2d),
                          sample.joint_mask);
  Tensor lbeta = param_mse(net_out.beta, constant(*sample.beta));
  out.shape3d = lshape.value();
  out.joints2d = l2d.value();
  out.beta = lbeta.value();
  out.total = add(add(add(add(lshape, l3d), l2d), ltheta), lbeta);
  return out;
}

}  // namespace sbn
