#include "doctest.h"
#include "sbn/body_model.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

using namespace sbn;

namespace {

Tensor vec3(double x, double y, double z, bool rg = false) {
  return Tensor::from_data({3}, {x, y, z}, rg);
}

Eigen::Matrix3d to_eigen3(const Tensor& t) {
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = t.at(r * 3 + c);
  return m;
}

// two-joint chain along +y with a handful of vertices and nonzero pose
// blendshapes, for exercising the Bp pathway
BodyModelSpec two_joint_model() {
  BodyModelSpec spec;
  spec.V = 4;
  spec.F = 2;
  spec.K = 2;
  spec.n_beta = 1;
  spec.parents = {-1, 0};
  spec.template_vertices.resize(4, 3);
  spec.template_vertices << 0.1, 0.0, 0.0, -0.1, 0.0, 0.0, 0.1, 1.0, 0.0, -0.1,
      1.0, 0.0;
  spec.faces.resize(2, 3);
  spec.faces << 0, 1, 2, 1, 3, 2;
  spec.shape_blendshapes = MatrixXdR::Zero(12, 1);
  spec.shape_blendshapes(0, 0) = 0.5;
  spec.pose_blendshapes = MatrixXdR::Zero(12, 9);
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 9; ++j)
      spec.pose_blendshapes(i, j) = 0.01 * double(i + 1) * double(j + 1);
  spec.joint_regressor = MatrixXdR::Zero(2, 4);
  spec.joint_regressor(0, 0) = 0.5;
  spec.joint_regressor(0, 1) = 0.5;
  spec.joint_regressor(1, 2) = 0.5;
  spec.joint_regressor(1, 3) = 0.5;
  spec.skin_weights = MatrixXdR::Zero(4, 2);
  spec.skin_weights(0, 0) = 1;
  spec.skin_weights(1, 0) = 1;
  spec.skin_weights(2, 1) = 1;
  spec.skin_weights(3, 1) = 1;
  spec.validate();
  return spec;
}

}  // namespace

TEST_CASE("rodrigues basics") {
  Eigen::Matrix3d r0 = to_eigen3(rodrigues(vec3(0, 0, 0)));
  CHECK(r0.isIdentity(0.0));

  Eigen::Matrix3d rz = to_eigen3(rodrigues(vec3(0, 0, std::numbers::pi)));
  CHECK(std::abs(rz(0, 0) + 1) < 1e-12);
  CHECK(std::abs(rz(1, 1) + 1) < 1e-12);
  CHECK(std::abs(rz(2, 2) - 1) < 1e-12);

  Eigen::Vector3d w(0.1, 0.2, 0.3);
  Eigen::Matrix3d r = to_eigen3(rodrigues(vec3(0.1, 0.2, 0.3)));
  CHECK((r.transpose() * r - Eigen::Matrix3d::Identity()).norm() < 1e-10);
  CHECK(std::abs(r.determinant() - 1) < 1e-10);
  Eigen::Matrix3d expect =
      Eigen::AngleAxisd(w.norm(), w.normalized()).toRotationMatrix();
  CHECK((r - expect).norm() < 1e-12);
}

TEST_CASE("rodrigues orthonormality across magnitudes up to 2pi") {
  Rng rng(77);
  for (int i = 0; i < 200; ++i) {
    Eigen::Vector3d dir(rng.normal(), rng.normal(), rng.normal());
    dir.normalize();
    const double mag = rng.uniform(0, 2 * std::numbers::pi);
    Eigen::Vector3d w = mag * dir;
    Eigen::Matrix3d r = to_eigen3(rodrigues(vec3(w.x(), w.y(), w.z())));
    CHECK((r.transpose() * r - Eigen::Matrix3d::Identity()).norm() < 1e-10);
    CHECK(std::abs(r.determinant() - 1) < 1e-10);
  }
}

TEST_CASE("rodrigues is differentiable through the small-angle branch") {
  Rng rng(5);
  // ||R||_F is constant, so probe R through a fixed weight matrix instead
  Tensor probe = Tensor::from_data(
      {3, 3}, {0.3, -1.1, 0.7, 2.0, 0.5, -0.4, -0.9, 1.3, 0.6});
  auto f = [&](const Tensor& w) {
    return sum(mul(rodrigues(w), probe));
  };
  Tensor w = vec3(1e-10, -2e-10, 1e-10, true);
  CHECK(finite_diff_check([&] { return f(w); }, {w}, 1e-6, rng) < 1e-4);
  Tensor w2 = vec3(0.4, -0.2, 0.7, true);
  CHECK(finite_diff_check([&] { return f(w2); }, {w2}, 1e-6, rng) < 1e-6);
}

TEST_CASE("blend_shape linearity") {
  BodyModelSpec spec = two_joint_model();
  Tensor zero = blend_shape(spec, Tensor::zeros({1}));
  for (int i = 0; i < zero.size(); ++i) CHECK(zero.at(i) == 0.0);

  Tensor e1 = blend_shape(spec, Tensor::from_data({1}, {1.0}));
  CHECK(e1.at(0) == 0.5);
  Tensor e2 = blend_shape(spec, Tensor::from_data({1}, {2.0}));
  CHECK(e2.at(0) == 1.0);
  CHECK_THROWS_AS(blend_shape(spec, Tensor::zeros({3})), TensorError);
}

TEST_CASE("pose_blend zero pose and root-only rotation give zero offsets") {
  BodyModelSpec spec = two_joint_model();
  Tensor zero = pose_blend(spec, Tensor::zeros({6}));
  for (int i = 0; i < zero.size(); ++i) CHECK(zero.at(i) == 0.0);

  Tensor root_only =
      pose_blend(spec, Tensor::from_data({6}, {0.3, 0.2, 0.9, 0, 0, 0}));
  for (int i = 0; i < root_only.size(); ++i) CHECK(root_only.at(i) == 0.0);
}

TEST_CASE("pose_blend contracts P with vec(R - I) for a bent joint") {
  BodyModelSpec spec = two_joint_model();
  Eigen::VectorXd theta(6);
  theta << 0, 0, 0, 0.2, -0.1, 0.4;
  Tensor offsets = pose_blend(
      spec, Tensor::from_data({6}, {0, 0, 0, 0.2, -0.1, 0.4}));
  Eigen::Vector3d w(0.2, -0.1, 0.4);
  Eigen::Matrix3d r =
      Eigen::AngleAxisd(w.norm(), w.normalized()).toRotationMatrix();
  Eigen::Matrix3d d = r - Eigen::Matrix3d::Identity();
  Eigen::VectorXd coeff(9);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) coeff(i * 3 + j) = d(i, j);
  Eigen::VectorXd expect = spec.pose_blendshapes * coeff;
  for (int i = 0; i < 12; ++i)
    CHECK(offsets.at(i) == doctest::Approx(expect(i)).epsilon(1e-10));
}

TEST_CASE("regress_joints basics") {
  BodyModelSpec spec = two_joint_model();
  Tensor verts = Tensor::from_data({4, 3}, {1, 2, 3, 3, 4, 5, 0, 0, 0, 2, 2, 2});
  Tensor joints = regress_joints(spec, verts);
  CHECK(joints.at(0) == 2.0);  // midpoint of first two vertices
  CHECK(joints.at(1) == 3.0);
  CHECK(joints.at(3) == 1.0);

  // one-hot row picks the vertex, uniform row the centroid
  BodyModelSpec hot = spec;
  hot.joint_regressor.setZero();
  hot.joint_regressor(0, 2) = 1.0;
  hot.joint_regressor(1, 0) = 0.25;
  hot.joint_regressor(1, 1) = 0.25;
  hot.joint_regressor(1, 2) = 0.25;
  hot.joint_regressor(1, 3) = 0.25;
  Tensor j2 = regress_joints(hot, verts);
  CHECK(j2.at(0) == 0.0);
  CHECK(j2.at(3) == doctest::Approx(1.5));
}

TEST_CASE("forward_kinematics: zero pose gives identity skinning transforms") {
  BodyModelSpec spec = two_joint_model();
  Tensor rest = Tensor::from_data({2, 3}, {0, 0, 0, 0, 1, 0});
  FkResult fk = forward_kinematics(spec, Tensor::zeros({6}), rest);
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 16; ++i) {
      const double expect = (i % 5 == 0) ? 1.0 : 0.0;
      CHECK(fk.skinning.at(j * 16 + i) == expect);
      CHECK(fk.skinning_delta.at(j * 16 + i) == 0.0);
    }
  CHECK(fk.posed_joints.at(4) == 1.0);
}

TEST_CASE("forward_kinematics: root half-turn rotates joints about the root") {
  BodyModelSpec spec = two_joint_model();
  Tensor rest = Tensor::from_data({2, 3}, {0.5, 0.25, 0, 0.5, 1.25, 0});
  Tensor theta = Tensor::from_data({6}, {0, 0, std::numbers::pi, 0, 0, 0});
  FkResult fk = forward_kinematics(spec, theta, rest);
  // joint 1 = root + Rz(pi) * (rest1 - rest0) = (0.5, 0.25) + (0, -1)
  CHECK(fk.posed_joints.at(0) == doctest::Approx(0.5));
  CHECK(fk.posed_joints.at(1) == doctest::Approx(0.25));
  CHECK(fk.posed_joints.at(3) == doctest::Approx(0.5));
  CHECK(fk.posed_joints.at(4) == doctest::Approx(-0.75));
}

TEST_CASE("forward_kinematics: colinear 3-chain with a 90-degree middle bend") {
  BodyModelSpec spec = two_joint_model();
  spec.K = 3;
  spec.parents = {-1, 0, 1};
  spec.pose_blendshapes = MatrixXdR::Zero(spec.V * 3, 18);
  spec.joint_regressor = MatrixXdR::Zero(3, 4);
  spec.skin_weights = MatrixXdR::Zero(4, 3);
  for (int v = 0; v < 4; ++v) spec.skin_weights(v, 0) = 1;
  Tensor rest = Tensor::from_data({3, 3}, {0, 0, 0, 0, 1, 0, 0, 2, 0});
  Tensor theta = Tensor::from_data(
      {9}, {0, 0, 0, 0, 0, std::numbers::pi / 2, 0, 0, 0});
  FkResult fk = forward_kinematics(spec, theta, rest);
  // end joint: middle bends +90 about z -> (0,1,0) + Rz(90)*(0,1,0) = (-1,1,0)
  CHECK(fk.posed_joints.at(6) == doctest::Approx(-1.0));
  CHECK(fk.posed_joints.at(7) == doctest::Approx(1.0));
  CHECK(fk.posed_joints.at(8) == doctest::Approx(0.0));
}

TEST_CASE("smpl_forward rest-pose identity is exact") {
  BodyModelSpec spec = make_mini_model(1234);
  SmplOutput out =
      smpl_forward(spec, Tensor::zeros({3 * spec.K}), Tensor::zeros({spec.n_beta}));
  for (std::int64_t v = 0; v < spec.V; ++v)
    for (int c = 0; c < 3; ++c)
      CHECK(out.vertices.at(v * 3 + c) == spec.template_vertices(v, c));
}

TEST_CASE("smpl_forward beta basis adds the first blendshape column") {
  BodyModelSpec spec = make_mini_model(1234);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(spec.n_beta);
  beta(0) = 1.0;
  SmplOutput out = smpl_forward(
      spec, Tensor::zeros({3 * spec.K}),
      Tensor::from_data({spec.n_beta}, {1, 0, 0, 0}));
  for (std::int64_t v = 0; v < 20; ++v)
    for (int c = 0; c < 3; ++c)
      CHECK(out.vertices.at(v * 3 + c) ==
            doctest::Approx(spec.template_vertices(v, c) +
                            spec.shape_blendshapes(v * 3 + c, 0)));
}

TEST_CASE("smpl_forward root-only pose is a rigid transform of the template") {
  BodyModelSpec spec = make_mini_model(1234);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(3 * spec.K);
  theta(0) = 0.4;
  theta(1) = -0.3;
  theta(2) = 1.1;
  BodyParams params{theta, Eigen::VectorXd::Zero(spec.n_beta)};
  SmplOutputEigen out = smpl_forward(spec, params);

  // pairwise distances preserved
  Rng rng(2);
  for (int i = 0; i < 300; ++i) {
    const auto a = rng.next_u64() % std::uint64_t(spec.V);
    const auto b = rng.next_u64() % std::uint64_t(spec.V);
    const double d0 = (spec.template_vertices.row(int(a)) -
                       spec.template_vertices.row(int(b)))
                          .norm();
    const double d1 = (out.vertices.row(int(a)) - out.vertices.row(int(b))).norm();
    CHECK(std::abs(d0 - d1) < 1e-9);
  }

  // explicit rigid-transform oracle: R*(v - root) + root
  Eigen::Vector3d w(0.4, -0.3, 1.1);
  Eigen::Matrix3d r =
      Eigen::AngleAxisd(w.norm(), w.normalized()).toRotationMatrix();
  Eigen::RowVector3d root =
      spec.joint_regressor.row(0) * spec.template_vertices;
  for (int v = 0; v < 50; ++v) {
    Eigen::RowVector3d expect =
        (r * (spec.template_vertices.row(v) - root).transpose()).transpose() +
        root;
    CHECK((out.vertices.row(v) - expect).norm() < 1e-9);
  }
}

TEST_CASE("one-hot skinning moves vertices rigidly with their joint") {
  BodyModelSpec spec = two_joint_model();
  spec.pose_blendshapes.setZero();
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(6);
  theta(5) = std::numbers::pi / 2;  // bend joint 1 about z
  BodyParams params{theta, Eigen::VectorXd::Zero(1)};
  SmplOutputEigen out = smpl_forward(spec, params);
  // vertices 0,1 are one-hot on the root: unchanged
  CHECK((out.vertices.row(0) - spec.template_vertices.row(0)).norm() < 1e-12);
  CHECK((out.vertices.row(1) - spec.template_vertices.row(1)).norm() < 1e-12);
  // vertices 2,3 rotate rigidly about joint 1 at (0,1,0)
  Eigen::Vector3d j1(0, 1, 0);
  Eigen::Matrix3d rz = Eigen::AngleAxisd(std::numbers::pi / 2,
                                         Eigen::Vector3d::UnitZ())
                           .toRotationMatrix();
  for (int v = 2; v < 4; ++v) {
    Eigen::Vector3d expect =
        rz * (spec.template_vertices.row(v).transpose() - j1) + j1;
    CHECK((out.vertices.row(v).transpose() - expect).norm() < 1e-12);
  }
}

TEST_CASE("smpl_forward gradients pass finite differences on the mini model") {
  BodyModelSpec spec = make_mini_model(99);
  Rng rng(42);
  std::vector<double> tv(size_t(3 * spec.K)), bv(size_t(spec.n_beta));
  for (auto& x : tv) x = rng.uniform(-0.4, 0.4);
  for (auto& x : bv) x = rng.uniform(-1, 1);
  Tensor theta = Tensor::from_data({3 * spec.K}, tv, true);
  Tensor beta = Tensor::from_data({spec.n_beta}, bv, true);
  auto f = [&] {
    SmplOutput o = smpl_forward(spec, theta, beta);
    return add(sum(square(o.vertices)), sum(square(o.joints)));
  };
  CHECK(finite_diff_check(f, {theta, beta}, 1e-5, rng, 6) < 1e-4);
}

TEST_CASE("mini model is valid, deterministic, and self-consistent") {
  BodyModelSpec a = make_mini_model(7);
  BodyModelSpec b = make_mini_model(7);
  CHECK(a.template_vertices == b.template_vertices);
  CHECK(a.skin_weights == b.skin_weights);
  BodyModelSpec c = make_mini_model(8);
  CHECK(a.template_vertices != c.template_vertices);
  CHECK(a.V == 600);
  CHECK(a.K == 16);
  CHECK(a.n_beta == 4);

  // regressor applied to the template reproduces the skeleton joints
  MatrixXdR joints = a.joint_regressor * a.template_vertices;
  CHECK(std::abs(joints(0, 0) - 0.0) < 1e-12);
  CHECK(std::abs(joints(0, 1) - 0.95) < 1e-12);
  CHECK(std::abs(joints(3, 1) - 1.48) < 1e-12);
}

TEST_CASE("model file roundtrip, inline and blob") {
  BodyModelSpec spec = make_mini_model(3);
  for (bool blob : {false, true}) {
    const std::string path = blob ? "/tmp/sbn_model_blob.json"
                                  : "/tmp/sbn_model_inline.json";
    save_body_model(path, spec, blob);
    BodyModelSpec back = load_body_model(path);
    CHECK(back.template_vertices == spec.template_vertices);
    CHECK(back.shape_blendshapes == spec.shape_blendshapes);
    CHECK(back.joint_regressor == spec.joint_regressor);
    CHECK(back.skin_weights == spec.skin_weights);
    CHECK(back.faces == spec.faces);
    CHECK(back.parents == spec.parents);
  }
  CHECK_THROWS_AS(load_body_model("/tmp/does_not_exist_model.json"), IoError);
}

TEST_CASE("obj export has V vertex lines and F face lines") {
  BodyModelSpec spec = two_joint_model();
  write_obj("/tmp/sbn_test.obj", spec.template_vertices, spec.faces);
  std::ifstream in("/tmp/sbn_test.obj");
  int v = 0, f = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("v ", 0) == 0) ++v;
    if (line.rfind("f ", 0) == 0) ++f;
  }
  CHECK(v == 4);
  CHECK(f == 2);
}
