#include "sbn/dataset.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "sbn/errors.hpp"

namespace sbn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string resolve(const std::string& root, const std::string& path) {
  if (path.empty() || path.front() == '/') return path;
  return root.empty() ? path : root + "/" + path;
}

json matrix_json(const MatrixXdR& m) {
  return json(std::vector<double>(m.data(), m.data() + m.size()));
}

template <int Cols>
Eigen::Matrix<double, Eigen::Dynamic, Cols, Eigen::RowMajor> matrix_from_json(
    const json& j, const std::string& where) {
  std::vector<double> v = j.get<std::vector<double>>();
  if (v.empty() || v.size() % Cols != 0)
    throw ValidationError(where + ": length not a multiple of " +
                          std::to_string(Cols));
  Eigen::Matrix<double, Eigen::Dynamic, Cols, Eigen::RowMajor> m(
      static_cast<Eigen::Index>(v.size() / Cols), Cols);
  std::copy(v.begin(), v.end(), m.data());
  return m;
}

std::string source_name(SketchSource s) {
  return s == SketchSource::synthetic ? "synthetic" : "freehand";
}

SketchSource source_from_name(const std::string& s, const std::string& where) {
  if (s == "synthetic") return SketchSource::synthetic;
  if (s == "freehand") return SketchSource::freehand;
  throw ValidationError(where + ": unknown source '" + s + "'");
}

}  // namespace

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("manifest: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("manifest: parse failure in " + path + ": " + e.what());
  }
  DatasetManifest m;
  m.root_dir = fs::path(path).parent_path().string();
  std::vector<std::string> errors;
  try {
    m.version = j.at("version").get<int>();
    if (m.version != 1)
      throw ValidationError("unsupported manifest version");
    m.body_model = j.at("body_model").get<std::string>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("manifest: bad header: ") + e.what());
  }
  if (!fs::exists(resolve(m.root_dir, m.body_model)))
    errors.push_back("body model file missing: " + m.body_model);

  std::vector<std::string> seen;
  for (const auto& rj : j.value("records", json::array())) {
    ManifestRecord r;
    try {
      r.id = rj.at("id").get<std::string>();
      r.image = rj.at("image").get<std::string>();
      r.source = source_from_name(rj.at("source").get<std::string>(), r.id);
      if (rj.contains("theta")) {
        auto v = rj["theta"].get<std::vector<double>>();
        r.theta = Eigen::Map<Eigen::VectorXd>(v.data(),
                                              static_cast<Eigen::Index>(v.size()));
      }
      if (rj.contains("beta")) {
        auto v = rj["beta"].get<std::vector<double>>();
        r.beta = Eigen::Map<Eigen::VectorXd>(v.data(),
                                             static_cast<Eigen::Index>(v.size()));
      }
      if (rj.contains("cam")) {
        auto v = rj["cam"].get<std::vector<double>>();
        if (v.size() != 3)
          throw ValidationError(r.id + ": cam needs 3 values");
        r.cam = CameraParams{v[0], v[1], v[2]};
      }
      if (rj.contains("joints3d"))
        r.joints3d = matrix_from_json<3>(rj["joints3d"], r.id + ".joints3d");
      if (rj.contains("joints2d"))
        r.joints2d = matrix_from_json<2>(rj["joints2d"], r.id + ".joints2d");
      if (rj.contains("mesh")) r.mesh = rj["mesh"].get<std::string>();
      if (rj.contains("joint_mask"))
        r.joint_mask = rj["joint_mask"].get<std::vector<std::uint8_t>>();
    } catch (const std::exception& e) {
      errors.push_back(std::string("record parse failure: ") + e.what());
      continue;
    }
    if (std::find(seen.begin(), seen.end(), r.id) != seen.end())
      errors.push_back("duplicate id: " + r.id);
    seen.push_back(r.id);
    if (!fs::exists(resolve(m.root_dir, r.image)))
      errors.push_back(r.id + ": image file missing: " + r.image);
    if (r.mesh && !fs::exists(resolve(m.root_dir, *r.mesh)))
      errors.push_back(r.id + ": mesh file missing: " + *r.mesh);
    if (r.source == SketchSource::synthetic) {
      if (!r.theta || !r.beta || !r.cam || !r.joints3d || !r.joints2d ||
          !r.mesh)
        errors.push_back(r.id +
                         ": synthetic record must carry theta, beta, cam, "
                         "joints3d, joints2d, mesh");
    } else if (!r.theta || !r.joints3d) {
      errors.push_back(r.id + ": freehand record must carry theta, joints3d");
    }
    m.records.push_back(std::move(r));
  }
  if (!errors.empty()) {
    std::ostringstream os;
    os << "manifest " << path << " invalid:";
    for (const auto& e : errors) os << "\n  " << e;
    throw ValidationError(os.str());
  }
  return m;
}

void save_manifest(const std::string& path, const DatasetManifest& manifest) {
  json j;
  j["version"] = manifest.version;
  j["body_model"] = manifest.body_model;
  j["records"] = json::array();
  for (const auto& r : manifest.records) {
    json rj{{"id", r.id}, {"image", r.image}, {"source", source_name(r.source)}};
    if (r.theta)
      rj["theta"] = std::vector<double>(r.theta->data(),
                                        r.theta->data() + r.theta->size());
    if (r.beta)
      rj["beta"] =
          std::vector<double>(r.beta->data(), r.beta->data() + r.beta->size());
    if (r.cam) rj["cam"] = {r.cam->s, r.cam->tx, r.cam->ty};
    if (r.joints3d) rj["joints3d"] = matrix_json(*r.joints3d);
    if (r.joints2d) rj["joints2d"] = matrix_json(*r.joints2d);
    if (r.mesh) rj["mesh"] = *r.mesh;
    if (!r.joint_mask.empty()) rj["joint_mask"] = r.joint_mask;
    j["records"].push_back(std::move(rj));
  }
  std::ofstream out(path);
  if (!out) throw IoError("manifest: cannot write " + path);
  out << j.dump(1) << '\n';
  if (!out) throw IoError("manifest: write failed for " + path);
}

MatrixX3d read_obj_vertices(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("obj: cannot open " + path);
  std::vector<double> v;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("v ", 0) != 0) continue;
    std::istringstream is(line.substr(2));
    double x, y, z;
    if (!(is >> x >> y >> z)) throw IoError("obj: bad vertex line in " + path);
    v.push_back(x);
    v.push_back(y);
    v.push_back(z);
  }
  if (v.empty()) throw IoError("obj: no vertices in " + path);
  MatrixX3d m(static_cast<Eigen::Index>(v.size() / 3), 3);
  std::copy(v.begin(), v.end(), m.data());
  return m;
}

SketchSample load_sample(const DatasetManifest& manifest,
                         const ManifestRecord& record) {
  SketchSample s;
  s.image = read_pgm(resolve(manifest.root_dir, record.image));
  s.source = record.source;
  s.theta = record.theta;
  s.beta = record.beta;
  s.cam = record.cam;
  s.joints3d = record.joints3d;
  s.joints2d = record.joints2d;
  if (record.mesh)
    s.mesh_vertices = read_obj_vertices(resolve(manifest.root_dir, *record.mesh));
  s.joint_mask = record.joint_mask;
  if (s.joint_mask.empty() && s.joints3d)
    s.joint_mask.assign(static_cast<size_t>(s.joints3d->rows()), 1);
  return s;
}

std::vector<std::vector<int>> make_batches(
    const DatasetManifest& manifest, std::optional<SketchSource> source_filter,
    int batch_size, std::uint64_t seed, int epoch) {
  if (batch_size < 1) throw ValidationError("make_batches: batch_size < 1");
  std::vector<int> idx;
  for (size_t i = 0; i < manifest.records.size(); ++i)
    if (!source_filter || manifest.records[i].source == *source_filter)
      idx.push_back(static_cast<int>(i));
  if (idx.empty())
    throw ValidationError("make_batches: no records match the source filter");
  Rng rng = Rng(seed).split("shuffle-epoch-" + std::to_string(epoch));
  for (size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[rng.next_u64() % i]);
  std::vector<std::vector<int>> batches;
  for (size_t i = 0; i < idx.size(); i += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(idx.size(), i + static_cast<size_t>(batch_size));
    batches.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(i),
                         idx.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

std::vector<double> default_views(int count) {
  std::vector<double> views(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i)
    views[static_cast<size_t>(i)] = 2.0 * std::numbers::pi * i / count;
  return views;
}

namespace {

// framing camera from the rest-pose bounding box
CameraParams framing_camera(const BodyModelSpec& spec) {
  const auto mn = spec.template_vertices.colwise().minCoeff();
  const auto mx = spec.template_vertices.colwise().maxCoeff();
  const double cx = 0.5 * (mn(0) + mx(0));
  const double cy = 0.5 * (mn(1) + mx(1));
  const double extent = std::max(
      {mx(0) - cx, cx - mn(0), mx(1) - cy, cy - mn(1), mx(2) - mn(2), 1e-6});
  return CameraParams{0.75 / extent, -cx, -cy};
}

std::string pad(int v, int width) {
  std::string s = std::to_string(v);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

}  // namespace

DatasetManifest build_synthetic_dataset(const BodyModelSpec& spec,
                                        const std::string& model_path,
                                        int n_samples,
                                        const std::vector<double>& views,
                                        std::uint64_t seed,
                                        const std::string& out_dir,
                                        const DatasetPolicy& policy) {
  if (n_samples < 1 || views.empty())
    throw ValidationError("build_synthetic_dataset: nothing to generate");
  fs::create_directories(fs::path(out_dir) / "images");
  fs::create_directories(fs::path(out_dir) / "meshes");
  const CameraParams frame = framing_camera(spec);
  DatasetManifest manifest;
  manifest.body_model = model_path;
  manifest.root_dir = out_dir;

  Rng root(seed);
  for (int i = 0; i < n_samples; ++i) {
    Rng rng = root.split("sample-" + std::to_string(i));
    std::vector<SketchSample> rendered;
    BodyParams params;
    for (int attempt = 0;; ++attempt) {
      if (attempt >= policy.max_retries)
        throw ValidationError("build_synthetic_dataset: sample " +
                              std::to_string(i) +
                              " exceeded the retry budget");
      params.theta = Eigen::VectorXd::Zero(3 * spec.K);
      for (std::int64_t jnt = 1; jnt < spec.K; ++jnt) {
        Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
        const double n = axis.norm();
        if (n < 1e-12) continue;
        params.theta.segment<3>(3 * jnt) =
            axis / n * rng.uniform(0.0, policy.max_joint_angle);
      }
      params.beta = Eigen::VectorXd(spec.n_beta);
      for (std::int64_t b = 0; b < spec.n_beta; ++b)
        params.beta(b) = std::clamp(rng.normal(0.0, policy.beta_sigma),
                                    -policy.beta_clamp, policy.beta_clamp);
      CameraParams cam{
          frame.s * (1.0 + rng.uniform(-policy.cam_scale_jitter,
                                       policy.cam_scale_jitter)),
          frame.tx + rng.uniform(-policy.cam_shift_jitter,
                                 policy.cam_shift_jitter),
          frame.ty + rng.uniform(-policy.cam_shift_jitter,
                                 policy.cam_shift_jitter)};
      rendered.clear();
      bool ok = true;
      for (double yaw : views) {
        SketchSample s;
        try {
          s = generate_synthetic_sample(spec, params, cam, policy.sample, yaw);
        } catch (const ValidationError&) {
          ok = false;
          break;
        }
        if (s.joints2d->cwiseAbs().maxCoeff() > 1.0) {
          ok = false;
          break;
        }
        rendered.push_back(std::move(s));
      }
      if (ok) break;
    }
    for (size_t v = 0; v < views.size(); ++v) {
      const SketchSample& s = rendered[v];
      ManifestRecord r;
      r.id = "s" + pad(i, 4) + "_v" + pad(static_cast<int>(v), 2);
      r.image = "images/" + r.id + ".pgm";
      r.mesh = "meshes/" + r.id + ".obj";
      r.source = SketchSource::synthetic;
      r.theta = s.theta;
      r.beta = s.beta;
      r.cam = s.cam;
      r.joints3d = s.joints3d;
      r.joints2d = s.joints2d;
      r.joint_mask = s.joint_mask;
      write_pgm(out_dir + "/" + r.image, s.image);
      write_obj(out_dir + "/" + *r.mesh, *s.mesh_vertices, spec.faces);
      manifest.records.push_back(std::move(r));
    }
  }
  save_manifest(out_dir + "/manifest.json", manifest);
  return manifest;
}

RasterImage degrade_sketch(const RasterImage& sketch, Rng& rng,
                           double jitter_prob, double dropout) {
  RasterImage out = make_image(sketch.resolution, 255);
  for (int y = 0; y < sketch.resolution; ++y)
    for (int x = 0; x < sketch.resolution; ++x) {
      if (sketch.at(x, y) >= 128) continue;
      if (rng.uniform() < dropout) continue;
      int nx = x, ny = y;
      if (rng.uniform() < jitter_prob) {
        nx += static_cast<int>(rng.next_u64() % 3) - 1;
        ny += static_cast<int>(rng.next_u64() % 3) - 1;
      }
      if (out.in_bounds(nx, ny)) out.at(nx, ny) = 0;
    }
  return out;
}

DatasetManifest build_pseudo_freehand_dataset(const DatasetManifest& source,
                                              std::uint64_t seed,
                                              const std::string& out_dir) {
  fs::create_directories(fs::path(out_dir) / "images");
  DatasetManifest out;
  out.body_model = fs::absolute(resolve(source.root_dir, source.body_model))
                       .lexically_normal()
                       .string();
  out.root_dir = out_dir;
  Rng root(seed);
  for (const auto& rec : source.records) {
    if (rec.source != SketchSource::synthetic) continue;
    if (!rec.theta || !rec.joints3d)
      throw ValidationError("pseudo-freehand: source record " + rec.id +
                            " lacks theta/joints3d");
    Rng rng = root.split("degrade-" + rec.id);
    RasterImage degraded = degrade_sketch(
        read_pgm(resolve(source.root_dir, rec.image)), rng);
    ManifestRecord r;
    r.id = rec.id + "_fh";
    r.image = "images/" + r.id + ".pgm";
    r.source = SketchSource::freehand;
    r.theta = rec.theta;
    r.joints3d = rec.joints3d;
    r.joint_mask = rec.joint_mask;
    write_pgm(out_dir + "/" + r.image, degraded);
    out.records.push_back(std::move(r));
  }
  if (out.records.empty())
    throw ValidationError("pseudo-freehand: no synthetic records in source");
  save_manifest(out_dir + "/manifest.json", out);
  return out;
}

DatasetManifest merge_manifests(const DatasetManifest& a,
                                const DatasetManifest& b) {
  auto absr = [](const std::string& root, const std::string& p) {
    return fs::absolute(resolve(root, p)).lexically_normal().string();
  };
  DatasetManifest out;
  out.body_model = absr(a.root_dir, a.body_model);
  if (absr(b.root_dir, b.body_model) != out.body_model)
    throw ValidationError("merge_manifests: body models differ");
  auto append = [&](const DatasetManifest& src) {
    for (ManifestRecord r : src.records) {
      r.image = absr(src.root_dir, r.image);
      if (r.mesh) r.mesh = absr(src.root_dir, *r.mesh);
      out.records.push_back(std::move(r));
    }
  };
  append(a);
  append(b);
  std::vector<std::string> ids;
  for (const auto& r : out.records) {
    if (std::find(ids.begin(), ids.end(), r.id) != ids.end())
      throw ValidationError("merge_manifests: duplicate id " + r.id);
    ids.push_back(r.id);
  }
  return out;
}

}  // namespace sbn
