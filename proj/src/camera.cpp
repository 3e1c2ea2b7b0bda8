#include "sbn/camera.hpp"

namespace sbn {

MatrixX2d project(const MatrixX3d& points, const CameraParams& cam) {
  MatrixX2d out(points.rows(), 2);
  out.col(0) = cam.s * (points.col(0).array() + cam.tx);
  out.col(1) = cam.s * (points.col(1).array() + cam.ty);
  return out;
}

Tensor project(const Tensor& points, const Tensor& cam) {
  if (points.shape().size() != 2 || points.shape()[1] != 3)
    throw TensorError("project: points must be N x 3");
  if (cam.size() != 3) throw TensorError("project: cam must hold (s, tx, ty)");
  const std::int64_t n = points.shape()[0];
  Tensor s = slice(cam, {0}, {1});
  Tensor tx = slice(cam, {1}, {1});
  Tensor ty = slice(cam, {2}, {1});
  Tensor x = slice(points, {0, 0}, {n, 1});
  Tensor y = slice(points, {0, 1}, {n, 1});
  Tensor u = mul(s, add(x, tx));
  Tensor v = mul(s, add(y, ty));
  return concat({u, v}, 1);
}

MatrixX2d to_pixels(const MatrixX2d& uv, int resolution) {
  if (resolution < 1) throw TensorError("to_pixels: resolution must be >= 1");
  const double half = 0.5 * (resolution - 1);
  MatrixX2d out(uv.rows(), 2);
  out.col(0) = (uv.col(0).array() + 1.0) * half;
  out.col(1) = (1.0 - uv.col(1).array()) * half;
  return out;
}

MatrixX2d from_pixels(const MatrixX2d& px, int resolution) {
  if (resolution < 2) throw TensorError("from_pixels: resolution must be >= 2");
  const double half = 0.5 * (resolution - 1);
  MatrixX2d out(px.rows(), 2);
  out.col(0) = px.col(0).array() / half - 1.0;
  out.col(1) = 1.0 - px.col(1).array() / half;
  return out;
}

}  // namespace sbn
