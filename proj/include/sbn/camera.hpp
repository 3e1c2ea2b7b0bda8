#pragma once

#include "sbn/body_model.hpp"
#include "sbn/tensor.hpp"

namespace sbn {

// Weak perspective: (u, v) = s * (x + tx, y + ty). Normalized image
// coordinates, the image square spans [-1, 1] on both axes.
struct CameraParams {
  double s = 1.0;
  double tx = 0.0;
  double ty = 0.0;
};

MatrixX2d project(const MatrixX3d& points, const CameraParams& cam);

// differentiable variant; points N x 3, cam a 3-vector (s, tx, ty)
Tensor project(const Tensor& points, const Tensor& cam);

// Continuous pixel coordinates, row 0 at the top (+v is up in world), pixel
// centers at integers. Rounding is left to the caller.
MatrixX2d to_pixels(const MatrixX2d& uv, int resolution);
MatrixX2d from_pixels(const MatrixX2d& px, int resolution);

}  // namespace sbn
