#include "sbn/body_model.hpp"

#include <Eigen/Geometry>

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "sbn/rng.hpp"

namespace sbn {

using nlohmann::json;

namespace {

constexpr int kModelVersion = 1;

Tensor const_tensor(const MatrixXdR& m) {
  return Tensor::from_data({m.rows(), m.cols()},
                           std::vector<double>(m.data(), m.data() + m.size()));
}

Tensor const_tensor(const MatrixX3d& m) {
  return Tensor::from_data({m.rows(), 3},
                           std::vector<double>(m.data(), m.data() + m.size()));
}

const Tensor& identity3() {
  static const Tensor t =
      Tensor::from_data({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  return t;
}

const Tensor& identity4() {
  static const Tensor t = Tensor::from_data(
      {4, 4}, {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1});
  return t;
}

// cross-matrix basis: [w]_x = wx*Ex + wy*Ey + wz*Ez
const Tensor& cross_basis(int axis) {
  static const Tensor ex =
      Tensor::from_data({3, 3}, {0, 0, 0, 0, 0, -1, 0, 1, 0});
  static const Tensor ey =
      Tensor::from_data({3, 3}, {0, 0, 1, 0, 0, 0, -1, 0, 0});
  static const Tensor ez =
      Tensor::from_data({3, 3}, {0, -1, 0, 1, 0, 0, 0, 0, 0});
  return axis == 0 ? ex : (axis == 1 ? ey : ez);
}

}  // namespace

void BodyModelSpec::validate() const {
  if (V < 1 || F < 1 || K < 2 || n_beta < 1)
    throw ValidationError("body model: bad counts");
  if (template_vertices.rows() != V)
    throw ValidationError("body model: template_vertices rows != V");
  if (faces.rows() != F) throw ValidationError("body model: faces rows != F");
  if (shape_blendshapes.rows() != V * 3 || shape_blendshapes.cols() != n_beta)
    throw ValidationError("body model: shape_blendshapes must be (V*3) x n_beta");
  if (pose_blendshapes.rows() != V * 3 ||
      pose_blendshapes.cols() != 9 * (K - 1))
    throw ValidationError(
        "body model: pose_blendshapes must be (V*3) x 9*(K-1)");
  if (joint_regressor.rows() != K || joint_regressor.cols() != V)
    throw ValidationError("body model: joint_regressor must be K x V");
  if (skin_weights.rows() != V || skin_weights.cols() != K)
    throw ValidationError("body model: skin_weights must be V x K");
  if (static_cast<std::int64_t>(parents.size()) != K || parents[0] != -1)
    throw ValidationError("body model: parents must have K entries, root -1");
  for (std::int64_t j = 1; j < K; ++j)
    if (parents[static_cast<size_t>(j)] < 0 ||
        parents[static_cast<size_t>(j)] >= j)
      throw ValidationError("body model: parents[j] must be < j");
  for (std::int64_t v = 0; v < V; ++v) {
    double row = 0;
    for (std::int64_t k = 0; k < K; ++k) {
      const double w = skin_weights(v, k);
      if (w < 0) throw ValidationError("body model: negative skin weight");
      row += w;
    }
    if (std::abs(row - 1.0) > 1e-9)
      throw ValidationError("body model: skin weight row does not sum to 1");
  }
  for (std::int64_t f = 0; f < F; ++f)
    for (int c = 0; c < 3; ++c)
      if (faces(f, c) < 0 || faces(f, c) >= V)
        throw ValidationError("body model: face references invalid vertex");
}

// --- file format -----------------------------------------------------------

namespace {

json array_field(const std::vector<double>& values, std::ofstream* blob,
                 std::int64_t* blob_offset) {
  if (!blob) return json(values);
  json j;
  j["blob_offset"] = *blob_offset;
  j["count"] = values.size();
  blob->write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
  *blob_offset += static_cast<std::int64_t>(values.size());
  return j;
}

std::vector<double> read_array_field(const json& j, const std::string& name,
                                     std::int64_t expected,
                                     std::ifstream* blob) {
  const json& f = j.at(name);
  std::vector<double> out;
  if (f.is_array()) {
    out = f.get<std::vector<double>>();
  } else {
    if (!blob)
      throw IoError("body model: field " + name +
                    " references a blob but no blob file is declared");
    const std::int64_t off = f.at("blob_offset").get<std::int64_t>();
    const std::int64_t count = f.at("count").get<std::int64_t>();
    out.resize(static_cast<size_t>(count));
    blob->seekg(off * static_cast<std::int64_t>(sizeof(double)));
    blob->read(reinterpret_cast<char*>(out.data()),
               static_cast<std::streamsize>(count * sizeof(double)));
    if (blob->gcount() !=
        static_cast<std::streamsize>(count * sizeof(double)))
      throw IoError("body model: blob truncated while reading " + name);
  }
  if (static_cast<std::int64_t>(out.size()) != expected)
    throw ValidationError("body model: field " + name + " has " +
                          std::to_string(out.size()) + " values, expected " +
                          std::to_string(expected));
  return out;
}

std::string sibling_path(const std::string& path, const std::string& name) {
  const auto pos = path.find_last_of("/\\");
  return pos == std::string::npos ? name : path.substr(0, pos + 1) + name;
}

}  // namespace

void save_body_model(const std::string& path, const BodyModelSpec& spec,
                     bool use_blob) {
  spec.validate();
  std::ofstream blob;
  std::int64_t blob_offset = 0;
  const std::string blob_name = "model.blob";
  if (use_blob) {
    blob.open(sibling_path(path, blob_name), std::ios::binary);
    if (!blob) throw IoError("body model: cannot write blob next to " + path);
  }
  std::ofstream* bp = use_blob ? &blob : nullptr;

  auto flat = [](const double* p, std::int64_t n) {
    return std::vector<double>(p, p + n);
  };
  json j;
  j["version"] = kModelVersion;
  j["V"] = spec.V;
  j["F"] = spec.F;
  j["K"] = spec.K;
  j["n_beta"] = spec.n_beta;
  if (use_blob) j["blob"] = blob_name;
  j["template_vertices"] = array_field(
      flat(spec.template_vertices.data(), spec.V * 3), bp, &blob_offset);
  j["shape_blendshapes"] = array_field(
      flat(spec.shape_blendshapes.data(), spec.V * 3 * spec.n_beta), bp,
      &blob_offset);
  j["pose_blendshapes"] = array_field(
      flat(spec.pose_blendshapes.data(), spec.V * 3 * 9 * (spec.K - 1)), bp,
      &blob_offset);
  j["joint_regressor"] = array_field(
      flat(spec.joint_regressor.data(), spec.K * spec.V), bp, &blob_offset);
  j["skin_weights"] = array_field(flat(spec.skin_weights.data(),
                                       spec.V * spec.K),
                                  bp, &blob_offset);
  std::vector<int> faces_flat(spec.faces.data(),
                              spec.faces.data() + spec.F * 3);
  j["faces"] = faces_flat;
  j["parents"] = spec.parents;

  std::ofstream out(path);
  if (!out) throw IoError("body model: cannot write " + path);
  out << j.dump();
}

BodyModelSpec load_body_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("body model: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("body model: malformed header in " + path + ": " + e.what());
  }
  BodyModelSpec spec;
  try {
    if (j.at("version").get<int>() != kModelVersion)
      throw IoError("body model: unsupported version in " + path);
    spec.V = j.at("V").get<std::int64_t>();
    spec.F = j.at("F").get<std::int64_t>();
    spec.K = j.at("K").get<std::int64_t>();
    spec.n_beta = j.at("n_beta").get<std::int64_t>();
    std::ifstream blob;
    std::ifstream* bp = nullptr;
    if (j.contains("blob")) {
      blob.open(sibling_path(path, j.at("blob").get<std::string>()),
                std::ios::binary);
      if (!blob)
        throw IoError("body model: missing blob for " + path);
      bp = &blob;
    }
    auto to_mat = [](std::vector<double> v, std::int64_t r, std::int64_t c) {
      MatrixXdR m(r, c);
      std::copy(v.begin(), v.end(), m.data());
      return m;
    };
    spec.template_vertices =
        to_mat(read_array_field(j, "template_vertices", spec.V * 3, bp),
               spec.V, 3);
    spec.shape_blendshapes =
        to_mat(read_array_field(j, "shape_blendshapes",
                                spec.V * 3 * spec.n_beta, bp),
               spec.V * 3, spec.n_beta);
    spec.pose_blendshapes =
        to_mat(read_array_field(j, "pose_blendshapes",
                                spec.V * 3 * 9 * (spec.K - 1), bp),
               spec.V * 3, 9 * (spec.K - 1));
    spec.joint_regressor = to_mat(
        read_array_field(j, "joint_regressor", spec.K * spec.V, bp), spec.K,
        spec.V);
    spec.skin_weights = to_mat(
        read_array_field(j, "skin_weights", spec.V * spec.K, bp), spec.V,
        spec.K);
    auto faces_flat = j.at("faces").get<std::vector<int>>();
    if (static_cast<std::int64_t>(faces_flat.size()) != spec.F * 3)
      throw ValidationError("body model: faces count mismatch");
    spec.faces.resize(spec.F, 3);
    std::copy(faces_flat.begin(), faces_flat.end(), spec.faces.data());
    spec.parents = j.at("parents").get<std::vector<int>>();
  } catch (const json::exception& e) {
    throw IoError("body model: malformed field in " + path + ": " + e.what());
  }
  spec.validate();
  return spec;
}

void write_obj(const std::string& path, const MatrixX3d& vertices,
               const FacesMatrix& faces) {
  std::ofstream out(path);
  if (!out) throw IoError("obj: cannot write " + path);
  char line[128];
  for (Eigen::Index v = 0; v < vertices.rows(); ++v) {
    // %.17g guarantees a bit-exact double round-trip through the text file
    std::snprintf(line, sizeof line, "v %.17g %.17g %.17g\n", vertices(v, 0),
                  vertices(v, 1), vertices(v, 2));
    out << line;
  }
  for (Eigen::Index f = 0; f < faces.rows(); ++f)
    out << "f " << faces(f, 0) + 1 << ' ' << faces(f, 1) + 1 << ' '
        << faces(f, 2) + 1 << '\n';
}

// --- differentiable pieces -------------------------------------------------

Tensor rodrigues(const Tensor& axis_angle) {
  if (axis_angle.size() != 3) throw TensorError("rodrigues: expected 3 values");
  Tensor w = reshape(axis_angle, {3});
  Tensor n2 = sum(square(w));
  Tensor a, b;  // R = I + a*[w]_x + b*[w]_x^2 with unnormalized w
  if (n2.value() < 1e-16) {
    // second-order Taylor in n2, differentiable at 0
    a = add_scalar(scale(n2, -1.0 / 6.0), 1.0);
    b = add_scalar(scale(n2, -1.0 / 24.0), 0.5);
  } else {
    Tensor n = sqrt(n2);
    a = div(sin(n), n);
    b = div(add_scalar(neg(cos(n)), 1.0), n2);
  }
  Tensor k = add(add(mul(slice(w, {0}, {1}), cross_basis(0)),
                     mul(slice(w, {1}, {1}), cross_basis(1))),
                 mul(slice(w, {2}, {1}), cross_basis(2)));
  return add(identity3(), add(mul(a, k), mul(b, matmul(k, k))));
}

Tensor blend_shape(const BodyModelSpec& spec, const Tensor& beta) {
  if (beta.size() != spec.n_beta)
    throw TensorError("blend_shape: beta length != n_beta");
  Tensor s = const_tensor(spec.shape_blendshapes);
  Tensor offsets = matmul(s, reshape(beta, {spec.n_beta, 1}));
  return reshape(offsets, {spec.V, 3});
}

namespace {

std::vector<Tensor> joint_rotations(const BodyModelSpec& spec,
                                    const Tensor& theta) {
  if (theta.size() != 3 * spec.K)
    throw TensorError("theta length != 3K");
  std::vector<Tensor> rs;
  rs.reserve(static_cast<size_t>(spec.K));
  Tensor flat = reshape(theta, {3 * spec.K});
  for (std::int64_t j = 0; j < spec.K; ++j)
    rs.push_back(rodrigues(slice(flat, {3 * j}, {3})));
  return rs;
}

Tensor pose_blend_from_rotations(const BodyModelSpec& spec,
                                 const std::vector<Tensor>& rotations) {
  std::vector<Tensor> coeffs;
  for (std::int64_t j = 1; j < spec.K; ++j)
    coeffs.push_back(
        reshape(sub(rotations[static_cast<size_t>(j)], identity3()), {9}));
  Tensor c = concat(coeffs, 0);
  Tensor p = const_tensor(spec.pose_blendshapes);
  return reshape(matmul(p, reshape(c, {9 * (spec.K - 1), 1})), {spec.V, 3});
}

FkResult fk_from_rotations(const BodyModelSpec& spec,
                           const std::vector<Tensor>& rotations,
                           const Tensor& rest_joints) {
  const std::int64_t K = spec.K;
  Tensor rest = reshape(rest_joints, {K, 3});
  // Delta form: global rotation R_g, displacement d = posed - rest. All
  // quantities are exactly zero at the rest pose, which keeps the rest-pose
  // identity bit-exact through skinning.
  std::vector<Tensor> r_global(static_cast<size_t>(K));
  std::vector<Tensor> r_global_m1(static_cast<size_t>(K));  // R_g - I
  std::vector<Tensor> disp(static_cast<size_t>(K));         // 3x1
  FkResult out;
  std::vector<Tensor> skin_rows, delta_rows;
  for (std::int64_t j = 0; j < K; ++j) {
    const Tensor& r_local = rotations[static_cast<size_t>(j)];
    Tensor rest_j = transpose(slice(rest, {j, 0}, {1, 3}));  // 3x1
    if (j == 0) {
      r_global[0] = r_local;
      disp[0] = Tensor::zeros({3, 1});
    } else {
      const int p = spec.parents[static_cast<size_t>(j)];
      Tensor rest_p = transpose(slice(rest, {p, 0}, {1, 3}));
      Tensor bone = sub(rest_j, rest_p);
      r_global[static_cast<size_t>(j)] =
          matmul(r_global[static_cast<size_t>(p)], r_local);
      disp[static_cast<size_t>(j)] =
          add(disp[static_cast<size_t>(p)],
              matmul(r_global_m1[static_cast<size_t>(p)], bone));
    }
    r_global_m1[static_cast<size_t>(j)] =
        sub(r_global[static_cast<size_t>(j)], identity3());

    // skinning delta: [R_g - I | d - (R_g - I) rest_j]; bottom row zero
    Tensor trans = sub(disp[static_cast<size_t>(j)],
                       matmul(r_global_m1[static_cast<size_t>(j)], rest_j));
    Tensor top = concat({r_global_m1[static_cast<size_t>(j)], trans}, 1);
    Tensor delta = concat({top, Tensor::zeros({1, 4})}, 0);
    delta_rows.push_back(reshape(delta, {1, 16}));
    skin_rows.push_back(reshape(add(delta, identity4()), {1, 16}));

    Tensor g_top =
        concat({r_global[static_cast<size_t>(j)],
                add(rest_j, disp[static_cast<size_t>(j)])},
               1);
    out.globals.push_back(
        concat({g_top, Tensor::from_data({1, 4}, {0, 0, 0, 1})}, 0));
  }
  out.skinning = concat(skin_rows, 0);
  out.skinning_delta = concat(delta_rows, 0);
  std::vector<Tensor> joint_rows;
  for (std::int64_t j = 0; j < K; ++j)
    joint_rows.push_back(transpose(
        add(transpose(slice(rest, {j, 0}, {1, 3})), disp[static_cast<size_t>(j)])));
  out.posed_joints = concat(joint_rows, 0);
  return out;
}

}  // namespace

Tensor pose_blend(const BodyModelSpec& spec, const Tensor& theta) {
  return pose_blend_from_rotations(spec, joint_rotations(spec, theta));
}

Tensor regress_joints(const BodyModelSpec& spec, const Tensor& vertices) {
  return matmul(const_tensor(spec.joint_regressor), vertices);
}

FkResult forward_kinematics(const BodyModelSpec& spec, const Tensor& theta,
                            const Tensor& rest_joints) {
  return fk_from_rotations(spec, joint_rotations(spec, theta), rest_joints);
}

SmplOutput smpl_forward(const BodyModelSpec& spec, const Tensor& theta,
                        const Tensor& beta) {
  auto rotations = joint_rotations(spec, theta);
  Tensor t0 = const_tensor(spec.template_vertices);
  Tensor shaped = add(t0, blend_shape(spec, beta));
  Tensor rest_joints = regress_joints(spec, shaped);
  Tensor posed_template = add(shaped, pose_blend_from_rotations(spec, rotations));
  FkResult fk = fk_from_rotations(spec, rotations, rest_joints);

  Tensor per_vertex =
      matmul(const_tensor(spec.skin_weights), fk.skinning_delta);  // V x 16
  Tensor hom = concat({posed_template, Tensor::full({spec.V, 1}, 1.0)}, 1);
  Tensor correction = batched_transform(per_vertex, hom);  // V x 4
  SmplOutput out;
  out.vertices = add(posed_template, slice(correction, {0, 0}, {spec.V, 3}));
  out.joints = fk.posed_joints;
  return out;
}

SmplOutputEigen smpl_forward(const BodyModelSpec& spec,
                             const BodyParams& params) {
  Tensor theta = Tensor::from_data(
      {params.theta.size()},
      std::vector<double>(params.theta.data(),
                          params.theta.data() + params.theta.size()));
  Tensor beta = Tensor::from_data(
      {params.beta.size()},
      std::vector<double>(params.beta.data(),
                          params.beta.data() + params.beta.size()));
  SmplOutput o = smpl_forward(spec, theta, beta);
  SmplOutputEigen e;
  e.vertices.resize(spec.V, 3);
  std::copy(o.vertices.data(), o.vertices.data() + spec.V * 3,
            e.vertices.data());
  e.joints.resize(spec.K, 3);
  std::copy(o.joints.data(), o.joints.data() + spec.K * 3, e.joints.data());
  return e;
}

// --- mini model ------------------------------------------------------------

namespace {

struct Bone {
  int parent_joint;
  int child_joint;
  double radius;
};

}  // namespace

BodyModelSpec make_mini_model(std::uint64_t seed) {
  Rng rng = Rng(seed).split("mini-model");
  constexpr int K = 16;
  // joint order: pelvis spine chest head l_sho l_elb l_wri r_sho r_elb r_wri
  //              l_hip l_knee l_ank r_hip r_knee r_ank
  const double J[K][3] = {
      {0.00, 0.95, 0.0},  {0.00, 1.10, 0.0},  {0.00, 1.25, 0.0},
      {0.00, 1.48, 0.0},  {0.18, 1.38, 0.0},  {0.30, 1.10, 0.0},
      {0.38, 0.86, 0.0},  {-0.18, 1.38, 0.0}, {-0.30, 1.10, 0.0},
      {-0.38, 0.86, 0.0}, {0.10, 0.90, 0.0},  {0.12, 0.50, 0.0},
      {0.13, 0.08, 0.0},  {-0.10, 0.90, 0.0}, {-0.12, 0.50, 0.0},
      {-0.13, 0.08, 0.0}};
  const std::vector<int> parents = {-1, 0, 1, 2, 2, 4, 5, 2,
                                    7,  8, 0, 10, 11, 0, 13, 14};
  const std::vector<Bone> bones = {
      {0, 1, 0.105}, {1, 2, 0.115}, {2, 3, 0.065}, {2, 4, 0.05},
      {4, 5, 0.042}, {5, 6, 0.036}, {2, 7, 0.05},  {7, 8, 0.042},
      {8, 9, 0.036}, {0, 10, 0.07}, {10, 11, 0.06}, {11, 12, 0.045},
      {0, 13, 0.07}, {13, 14, 0.06}, {14, 15, 0.045}};

  constexpr int kRings = 5, kAround = 8;
  const int verts_per_bone = kRings * kAround;
  const int V = static_cast<int>(bones.size()) * verts_per_bone;  // 600

  BodyModelSpec spec;
  spec.V = V;
  spec.K = K;
  spec.n_beta = 4;
  spec.parents = parents;
  spec.template_vertices.resize(V, 3);
  spec.skin_weights = MatrixXdR::Zero(V, K);
  spec.joint_regressor = MatrixXdR::Zero(K, V);

  // deterministic small radius variation, mirrored so the body stays
  // bilaterally symmetric
  const int mirror_class[15] = {0, 1, 2, 3, 4, 5, 3, 4, 5, 6, 7, 8, 6, 7, 8};
  std::vector<double> class_scale;
  for (int i = 0; i < 9; ++i)
    class_scale.push_back(1.0 + 0.05 * rng.uniform(-1, 1));
  std::vector<double> radius_scale;
  for (size_t b = 0; b < bones.size(); ++b)
    radius_scale.push_back(class_scale[static_cast<size_t>(mirror_class[b])]);

  std::vector<FacesMatrix::Scalar> face_list;
  int vtx = 0;
  for (size_t b = 0; b < bones.size(); ++b) {
    const Bone& bone = bones[b];
    Eigen::Vector3d p(J[bone.parent_joint][0], J[bone.parent_joint][1],
                      J[bone.parent_joint][2]);
    Eigen::Vector3d c(J[bone.child_joint][0], J[bone.child_joint][1],
                      J[bone.child_joint][2]);
    Eigen::Vector3d axis = (c - p).normalized();
    Eigen::Vector3d ref = std::abs(axis.y()) < 0.9
                              ? Eigen::Vector3d::UnitY()
                              : Eigen::Vector3d::UnitX();
    Eigen::Vector3d u = axis.cross(ref).normalized();
    Eigen::Vector3d w = axis.cross(u);
    const int base = vtx;
    for (int r = 0; r < kRings; ++r) {
      const double t = double(r) / double(kRings - 1);  // dyadic: 0,.25,...
      Eigen::Vector3d center = p + t * (c - p);
      const double rad = bone.radius * radius_scale[b];
      for (int a = 0; a < kAround; ++a) {
        const double phi = 2.0 * std::numbers::pi * a / kAround;
        Eigen::Vector3d v =
            center + rad * (std::cos(phi) * u + std::sin(phi) * w);
        spec.template_vertices.row(vtx) = v.transpose();
        spec.skin_weights(vtx, bone.child_joint) = t;
        spec.skin_weights(vtx, bone.parent_joint) = 1.0 - t;
        ++vtx;
      }
    }
    // tube faces
    for (int r = 0; r + 1 < kRings; ++r)
      for (int a = 0; a < kAround; ++a) {
        const int a2 = (a + 1) % kAround;
        const int i00 = base + r * kAround + a;
        const int i01 = base + r * kAround + a2;
        const int i10 = base + (r + 1) * kAround + a;
        const int i11 = base + (r + 1) * kAround + a2;
        face_list.insert(face_list.end(), {i00, i01, i11});
        face_list.insert(face_list.end(), {i00, i11, i10});
      }
    // regressor: child joint = centroid of the end ring
    const int end_ring = base + (kRings - 1) * kAround;
    for (int a = 0; a < kAround; ++a)
      spec.joint_regressor(bone.child_joint, end_ring + a) = 1.0 / kAround;
    if (bone.parent_joint == 0 && b == 0)
      for (int a = 0; a < kAround; ++a)
        spec.joint_regressor(0, base + a) = 1.0 / kAround;
  }
  spec.F = static_cast<std::int64_t>(face_list.size() / 3);
  spec.faces.resize(spec.F, 3);
  std::copy(face_list.begin(), face_list.end(), spec.faces.data());

  // shape directions: height, girth, limb length, torso length
  spec.shape_blendshapes = MatrixXdR::Zero(V * 3, 4);
  auto limb_of = [&](int v) {
    const int b = v / verts_per_bone;
    return b >= 3 && b <= 8 ? 1 : (b >= 9 ? 2 : 0);  // 0 torso, 1 arms, 2 legs
  };
  for (int v = 0; v < V; ++v) {
    const double x = spec.template_vertices(v, 0);
    const double y = spec.template_vertices(v, 1);
    const double z = spec.template_vertices(v, 2);
    spec.shape_blendshapes(v * 3 + 1, 0) = 0.10 * (y - 0.95);
    spec.shape_blendshapes(v * 3 + 0, 1) = 0.12 * x;
    spec.shape_blendshapes(v * 3 + 2, 1) = 0.12 * z;
    if (limb_of(v) == 1) {
      spec.shape_blendshapes(v * 3 + 0, 2) = 0.10 * x;
      spec.shape_blendshapes(v * 3 + 1, 2) = 0.06 * (1.38 - y);
    } else if (limb_of(v) == 2) {
      spec.shape_blendshapes(v * 3 + 1, 2) = 0.10 * (0.90 - y);
    }
    const double torso_t = std::clamp((y - 0.95) / 0.30, 0.0, 1.0);
    spec.shape_blendshapes(v * 3 + 1, 3) = 0.08 * torso_t;
  }

  // pose-corrective data cannot be invented; the Bp pathway is exercised by a
  // dedicated hand-built test model instead
  spec.pose_blendshapes = MatrixXdR::Zero(V * 3, 9 * (K - 1));

  spec.validate();
  return spec;
}

}  // namespace sbn
