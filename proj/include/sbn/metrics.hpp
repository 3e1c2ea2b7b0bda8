#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sbn/body_model.hpp"
#include "sbn/camera.hpp"
#include "sbn/sketch.hpp"

namespace sbn {

struct SimilarityTransform {
  double scale = 1.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  MatrixX3d apply(const MatrixX3d& points) const;
};

// root-aligned mean per-joint Euclidean error, in input units
double mpjpe(const MatrixX3d& pred, const MatrixX3d& gt, int root_index,
             const std::vector<std::uint8_t>& mask = {},
             bool root_align = true);

// least-squares similarity fit of pred onto gt (Umeyama with reflection fix)
SimilarityTransform procrustes_align(const MatrixX3d& pred, const MatrixX3d& gt,
                                     const std::vector<std::uint8_t>& mask = {});

double reconst_error(const MatrixX3d& pred, const MatrixX3d& gt,
                     const std::vector<std::uint8_t>& mask = {});

// masks are {0,1}; percentages
double silhouette_accuracy(const RasterImage& pred, const RasterImage& gt);
double silhouette_f1(const RasterImage& pred, const RasterImage& gt);
double silhouette_iou(const RasterImage& pred, const RasterImage& gt);

struct ParamPrediction {
  Eigen::VectorXd theta;
  Eigen::VectorXd beta;
  CameraParams cam;
};
using PredictFn = std::function<ParamPrediction(const SketchSample&)>;

struct SampleMetrics {
  std::optional<double> mpjpe_mm, reconst_mm, acc, f1, iou;
  bool used_closing = false;
};

struct MetricsReport {
  std::vector<SampleMetrics> samples;
  std::optional<double> mean_mpjpe_mm, mean_reconst_mm, mean_acc, mean_f1,
      mean_iou;
  int joint_samples = 0;       // samples entering the joint metrics
  int silhouette_samples = 0;  // samples entering the pixel metrics
  int closing_fallbacks = 0;

  std::string to_json() const;
  std::string to_table() const;  // MPJPE, Reconst. Error, Acc., F1
};

struct EvalOptions {
  int root_index = 0;
  bool root_align = true;
};

MetricsReport evaluate_dataset(const PredictFn& model,
                               const std::vector<SketchSample>& samples,
                               const BodyModelSpec& spec,
                               const EvalOptions& opts = {});

}  // namespace sbn
