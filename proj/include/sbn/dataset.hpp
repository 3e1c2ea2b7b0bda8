#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sbn/body_model.hpp"
#include "sbn/camera.hpp"
#include "sbn/rng.hpp"
#include "sbn/sketch.hpp"

namespace sbn {

struct ManifestRecord {
  std::string id;
  std::string image;  // path relative to the manifest
  SketchSource source = SketchSource::synthetic;
  std::optional<Eigen::VectorXd> theta, beta;
  std::optional<CameraParams> cam;
  std::optional<MatrixX3d> joints3d;
  std::optional<MatrixX2d> joints2d;
  std::optional<std::string> mesh;  // OBJ path relative to the manifest
  std::vector<std::uint8_t> joint_mask;
};

struct DatasetManifest {
  int version = 1;
  std::string body_model;  // path relative to the manifest
  std::vector<ManifestRecord> records;
  std::string root_dir;  // directory of the manifest file, set on load
};

DatasetManifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const DatasetManifest& manifest);

MatrixX3d read_obj_vertices(const std::string& path);

SketchSample load_sample(const DatasetManifest& manifest,
                         const ManifestRecord& record);

// indices into manifest.records, shuffled deterministically by (seed, epoch)
std::vector<std::vector<int>> make_batches(
    const DatasetManifest& manifest, std::optional<SketchSource> source_filter,
    int batch_size, std::uint64_t seed, int epoch);

struct DatasetPolicy {
  SampleConfig sample;                      // render/crop geometry
  double max_joint_angle = 0.6;             // rad, non-root joints
  double beta_sigma = 0.5;
  double beta_clamp = 2.0;
  double cam_scale_jitter = 0.1;            // relative
  double cam_shift_jitter = 0.05;
  int max_retries = 50;
};

// default 14 views evenly spaced over [0, 2*pi)
std::vector<double> default_views(int count = 14);

// writes images/, meshes/ and manifest.json under out_dir; every record is
// synthetic-complete; body framing derived from the rest pose
DatasetManifest build_synthetic_dataset(const BodyModelSpec& spec,
                                        const std::string& model_path,
                                        int n_samples,
                                        const std::vector<double>& views,
                                        std::uint64_t seed,
                                        const std::string& out_dir,
                                        const DatasetPolicy& policy = {});

// stroke jitter + dropout; output stays {0, 255}
RasterImage degrade_sketch(const RasterImage& sketch, Rng& rng,
                           double jitter_prob = 0.3, double dropout = 0.1);

// synthetic records become freehand ones: degraded image, theta + joints3d
// supervision only
DatasetManifest build_pseudo_freehand_dataset(const DatasetManifest& source,
                                              std::uint64_t seed,
                                              const std::string& out_dir);

// one manifest with both record sets; all paths made absolute, ids must stay
// unique and the body models must agree
DatasetManifest merge_manifests(const DatasetManifest& a,
                                const DatasetManifest& b);

}  // namespace sbn
