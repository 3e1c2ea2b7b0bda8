#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "sbn/errors.hpp"
#include "sbn/tensor.hpp"

namespace sbn {

using MatrixX3d = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using MatrixX2d = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;
using MatrixXdR =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using FacesMatrix = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;

// SMPL-style model data. Immutable after load; all big arrays row-major.
struct BodyModelSpec {
  std::int64_t V = 0, F = 0, K = 0, n_beta = 0;
  MatrixX3d template_vertices;   // V x 3, meters
  FacesMatrix faces;             // F x 3
  MatrixXdR shape_blendshapes;   // (V*3) x n_beta
  MatrixXdR pose_blendshapes;    // (V*3) x 9*(K-1), keyed by vec(R_j - I)
  MatrixXdR joint_regressor;     // K x V
  MatrixXdR skin_weights;        // V x K, rows sum to 1
  std::vector<int> parents;      // parents[0] == -1, parents[j] < j

  void validate() const;  // throws ValidationError
};

BodyModelSpec load_body_model(const std::string& path);
// use_blob stores the large float arrays in a little-endian sidecar next to
// the header file
void save_body_model(const std::string& path, const BodyModelSpec& spec,
                     bool use_blob = false);

void write_obj(const std::string& path, const MatrixX3d& vertices,
               const FacesMatrix& faces);

// pose/shape parameters; theta: 3K axis-angle, first 3 = root orientation
struct BodyParams {
  Eigen::VectorXd theta;
  Eigen::VectorXd beta;
};

// --- differentiable pieces -------------------------------------------------

// axis-angle (3) -> rotation (3x3); Taylor branch below 1e-8
Tensor rodrigues(const Tensor& axis_angle);

Tensor blend_shape(const BodyModelSpec& spec, const Tensor& beta);   // V x 3
Tensor pose_blend(const BodyModelSpec& spec, const Tensor& theta);   // V x 3
Tensor regress_joints(const BodyModelSpec& spec, const Tensor& vertices);

struct FkResult {
  std::vector<Tensor> globals;  // K global 4x4 transforms
  Tensor skinning;              // K x 16, G_j * T(-rest_j)
  Tensor skinning_delta;        // K x 16, skinning minus the identity
  Tensor posed_joints;          // K x 3
};

FkResult forward_kinematics(const BodyModelSpec& spec, const Tensor& theta,
                            const Tensor& rest_joints);

struct SmplOutput {
  Tensor vertices;  // V x 3
  Tensor joints;    // K x 3
};

SmplOutput smpl_forward(const BodyModelSpec& spec, const Tensor& theta,
                        const Tensor& beta);

// Eigen convenience wrapper (no tape)
struct SmplOutputEigen {
  MatrixX3d vertices;
  MatrixX3d joints;
};
SmplOutputEigen smpl_forward(const BodyModelSpec& spec,
                             const BodyParams& params);

// Procedural humanoid stand-in: K=16, V=600, n_beta=4, zero pose blendshapes.
BodyModelSpec make_mini_model(std::uint64_t seed);

}  // namespace sbn
