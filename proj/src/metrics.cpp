#include "sbn/metrics.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include "json.hpp"

#include <cmath>
#include <cstdio>

#include "sbn/errors.hpp"

namespace sbn {

namespace {

MatrixX3d select_rows(const MatrixX3d& m, const std::vector<std::uint8_t>& mask,
                      const char* where) {
  if (mask.empty()) return m;
  if (mask.size() != static_cast<size_t>(m.rows()))
    throw ValidationError(std::string(where) + ": mask length mismatch");
  Eigen::Index n = 0;
  for (auto b : mask) n += b != 0;
  if (n == 0) throw ValidationError(std::string(where) + ": empty mask");
  MatrixX3d out(n, 3);
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    if (mask[static_cast<size_t>(i)]) out.row(r++) = m.row(i);
  return out;
}

void check_pair(const MatrixX3d& pred, const MatrixX3d& gt,
                const char* where) {
  if (pred.rows() != gt.rows())
    throw ValidationError(std::string(where) + ": joint count mismatch");
  if (pred.rows() < 1)
    throw ValidationError(std::string(where) + ": no joints");
}

}  // namespace

MatrixX3d SimilarityTransform::apply(const MatrixX3d& points) const {
  MatrixX3d out = scale * (points * rotation.transpose());
  out.rowwise() += translation.transpose();
  return out;
}

double mpjpe(const MatrixX3d& pred, const MatrixX3d& gt, int root_index,
             const std::vector<std::uint8_t>& mask, bool root_align) {
  check_pair(pred, gt, "mpjpe");
  if (root_index < 0 || root_index >= pred.rows())
    throw ValidationError("mpjpe: root index out of range");
  MatrixX3d p = pred, g = gt;
  if (root_align) {
    p.rowwise() -= pred.row(root_index);
    g.rowwise() -= gt.row(root_index);
  }
  MatrixX3d dp = select_rows(p, mask, "mpjpe");
  MatrixX3d dg = select_rows(g, mask, "mpjpe");
  return (dp - dg).rowwise().norm().mean();
}

SimilarityTransform procrustes_align(const MatrixX3d& pred, const MatrixX3d& gt,
                                     const std::vector<std::uint8_t>& mask) {
  check_pair(pred, gt, "procrustes");
  MatrixX3d p = select_rows(pred, mask, "procrustes");
  MatrixX3d g = select_rows(gt, mask, "procrustes");
  if (p.rows() < 3) throw ValidationError("procrustes: fewer than 3 joints");
  const Eigen::RowVector3d pc = p.colwise().mean();
  const Eigen::RowVector3d gc = g.colwise().mean();
  p.rowwise() -= pc;
  g.rowwise() -= gc;
  const double n = static_cast<double>(p.rows());
  const double var_p = p.squaredNorm() / n;
  if (var_p <= 0.0)
    throw ValidationError("procrustes: coincident points");
  const Eigen::Matrix3d cov = g.transpose() * p / n;
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d d = Eigen::Vector3d::Ones();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0)
    d(2) = -1.0;  // flip the smallest singular direction
  SimilarityTransform t;
  t.rotation = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
  t.scale = svd.singularValues().dot(d) / var_p;
  t.translation = gc.transpose() - t.scale * t.rotation * pc.transpose();
  return t;
}

double reconst_error(const MatrixX3d& pred, const MatrixX3d& gt,
                     const std::vector<std::uint8_t>& mask) {
  SimilarityTransform t = procrustes_align(pred, gt, mask);
  MatrixX3d p = select_rows(t.apply(pred), mask, "reconst_error");
  MatrixX3d g = select_rows(gt, mask, "reconst_error");
  return (p - g).rowwise().norm().mean();
}

namespace {

struct PixelCounts {
  std::int64_t both = 0, pred_only = 0, gt_only = 0, neither = 0;
};

PixelCounts count_pixels(const RasterImage& pred, const RasterImage& gt,
                         const char* where) {
  if (pred.resolution != gt.resolution)
    throw ValidationError(std::string(where) + ": resolution mismatch");
  PixelCounts c;
  for (size_t i = 0; i < pred.pixels.size(); ++i) {
    const bool p = pred.pixels[i] != 0, g = gt.pixels[i] != 0;
    if (p && g)
      ++c.both;
    else if (p)
      ++c.pred_only;
    else if (g)
      ++c.gt_only;
    else
      ++c.neither;
  }
  return c;
}

}  // namespace

double silhouette_accuracy(const RasterImage& pred, const RasterImage& gt) {
  PixelCounts c = count_pixels(pred, gt, "silhouette_accuracy");
  const double total =
      static_cast<double>(c.both + c.pred_only + c.gt_only + c.neither);
  return 100.0 * static_cast<double>(c.both + c.neither) / total;
}

double silhouette_f1(const RasterImage& pred, const RasterImage& gt) {
  PixelCounts c = count_pixels(pred, gt, "silhouette_f1");
  const std::int64_t np = c.both + c.pred_only, ng = c.both + c.gt_only;
  if (np == 0 && ng == 0) return 100.0;
  if (np == 0 || ng == 0) return 0.0;
  const double precision = static_cast<double>(c.both) / static_cast<double>(np);
  const double recall = static_cast<double>(c.both) / static_cast<double>(ng);
  if (precision + recall == 0.0) return 0.0;
  return 100.0 * 2.0 * precision * recall / (precision + recall);
}

double silhouette_iou(const RasterImage& pred, const RasterImage& gt) {
  PixelCounts c = count_pixels(pred, gt, "silhouette_iou");
  const std::int64_t uni = c.both + c.pred_only + c.gt_only;
  if (uni == 0) return 100.0;
  return 100.0 * static_cast<double>(c.both) / static_cast<double>(uni);
}

MetricsReport evaluate_dataset(const PredictFn& model,
                               const std::vector<SketchSample>& samples,
                               const BodyModelSpec& spec,
                               const EvalOptions& opts) {
  if (samples.empty()) throw ValidationError("evaluate_dataset: no samples");
  MetricsReport report;
  double sum_mpjpe = 0, sum_reconst = 0, sum_acc = 0, sum_f1 = 0, sum_iou = 0;
  for (const auto& sample : samples) {
    ParamPrediction pred = model(sample);
    SmplOutputEigen out = smpl_forward(spec, BodyParams{pred.theta, pred.beta});
    SampleMetrics sm;
    if (sample.joints3d) {
      sm.mpjpe_mm = 1000.0 * mpjpe(out.joints, *sample.joints3d,
                                   opts.root_index, sample.joint_mask,
                                   opts.root_align);
      sm.reconst_mm =
          1000.0 * reconst_error(out.joints, *sample.joints3d,
                                 sample.joint_mask);
      sum_mpjpe += *sm.mpjpe_mm;
      sum_reconst += *sm.reconst_mm;
      ++report.joint_samples;
    }
    // a degenerate predicted camera cannot be rendered; the sample simply
    // drops out of the pixel metrics (its count makes the gap visible)
    if (sample.image.resolution > 0 && pred.cam.s > 0) {
      RasterImage pred_mask = rasterize_silhouette(
          out.vertices, spec.faces, pred.cam, sample.image.resolution);
      RasterImage gt_mask = fill_interior(sample.image, &sm.used_closing);
      sm.acc = silhouette_accuracy(pred_mask, gt_mask);
      sm.f1 = silhouette_f1(pred_mask, gt_mask);
      sm.iou = silhouette_iou(pred_mask, gt_mask);
      sum_acc += *sm.acc;
      sum_f1 += *sm.f1;
      sum_iou += *sm.iou;
      ++report.silhouette_samples;
      if (sm.used_closing) ++report.closing_fallbacks;
    }
    report.samples.push_back(std::move(sm));
  }
  if (report.joint_samples > 0) {
    report.mean_mpjpe_mm = sum_mpjpe / report.joint_samples;
    report.mean_reconst_mm = sum_reconst / report.joint_samples;
  }
  if (report.silhouette_samples > 0) {
    report.mean_acc = sum_acc / report.silhouette_samples;
    report.mean_f1 = sum_f1 / report.silhouette_samples;
    report.mean_iou = sum_iou / report.silhouette_samples;
  }
  return report;
}

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  j["means"] = {{"mpjpe_mm", opt(mean_mpjpe_mm)},
                {"reconst_error_mm", opt(mean_reconst_mm)},
                {"acc", opt(mean_acc)},
                {"f1", opt(mean_f1)},
                {"iou", opt(mean_iou)}};
  j["joint_samples"] = joint_samples;
  j["silhouette_samples"] = silhouette_samples;
  j["closing_fallbacks"] = closing_fallbacks;
  j["samples"] = nlohmann::json::array();
  for (const auto& s : samples)
    j["samples"].push_back({{"mpjpe_mm", opt(s.mpjpe_mm)},
                            {"reconst_error_mm", opt(s.reconst_mm)},
                            {"acc", opt(s.acc)},
                            {"f1", opt(s.f1)},
                            {"iou", opt(s.iou)},
                            {"used_closing", s.used_closing}});
  return j.dump(2);
}

std::string MetricsReport::to_table() const {
  char cell[64];
  std::string out = "  MPJPE  Reconst. Error    Acc.      F1\n";
  auto fmt = [&](const std::optional<double>& v, int width) {
    if (!v) return std::string(static_cast<size_t>(width - 1), ' ') + "-";
    std::snprintf(cell, sizeof cell, "%*.2f", width, *v);
    return std::string(cell);
  };
  out += fmt(mean_mpjpe_mm, 7) + "  " + fmt(mean_reconst_mm, 14) + "  " +
         fmt(mean_acc, 6) + "  " + fmt(mean_f1, 6) + "\n";
  return out;
}

}  // namespace sbn
