#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sbn/body_model.hpp"
#include "sbn/camera.hpp"

namespace sbn {

// Square bitmap. Sketches hold {0, 255} (0 = stroke, 255 = background);
// masks hold {0, 1} (1 = foreground).
struct RasterImage {
  int resolution = 0;
  std::vector<std::uint8_t> pixels;  // row-major, row 0 at the top

  std::uint8_t& at(int x, int y) {
    return pixels[static_cast<size_t>(y) * static_cast<size_t>(resolution) +
                  static_cast<size_t>(x)];
  }
  std::uint8_t at(int x, int y) const {
    return pixels[static_cast<size_t>(y) * static_cast<size_t>(resolution) +
                  static_cast<size_t>(x)];
  }
  bool in_bounds(int x, int y) const {
    return x >= 0 && y >= 0 && x < resolution && y < resolution;
  }
};

RasterImage make_image(int resolution, std::uint8_t fill);

// Affine map from source normalized coordinates to crop normalized
// coordinates: u' = a*u + bu, v' = a*v + bv (one scale, the box is square).
struct CropTransform {
  double a = 1.0;
  double bu = 0.0;
  double bv = 0.0;
  int x0 = 0, y0 = 0, side = 0;  // source-pixel crop box
  int src_resolution = 0;
  int out_resolution = 0;

  MatrixX2d apply(const MatrixX2d& uv) const;
  // weak-perspective cam producing crop coordinates directly
  CameraParams compose(const CameraParams& cam) const;
};

enum class SketchSource { synthetic, freehand };

struct SketchSample {
  RasterImage image;  // sketch, {0, 255}
  SketchSource source = SketchSource::synthetic;
  std::optional<Eigen::VectorXd> theta;
  std::optional<Eigen::VectorXd> beta;
  std::optional<CameraParams> cam;
  std::optional<MatrixX3d> joints3d;
  std::optional<MatrixX2d> joints2d;  // crop-normalized coordinates
  std::optional<MatrixX3d> mesh_vertices;
  std::vector<std::uint8_t> joint_mask;  // per joint, 1 = supervised
};

// mask output, {0, 1}; coverage union over triangles, no depth buffer
RasterImage rasterize_silhouette(const MatrixX3d& vertices,
                                 const FacesMatrix& faces,
                                 const CameraParams& cam, int resolution);

// mask minus its erosion by the 3x3 cross, rendered black on white;
// dilation (3x3 cross, applied dilation times) thickens the strokes
RasterImage extract_edges(const RasterImage& mask, int dilation = 0);

RasterImage detect_bbox_and_crop(const RasterImage& sketch, int out_resolution,
                                 double margin, CropTransform* transform);

struct SampleConfig {
  int render_resolution = 256;
  int out_resolution = 64;
  double margin = 0.1;
  int stroke_dilation = 1;
};

SketchSample generate_synthetic_sample(const BodyModelSpec& spec,
                                       const BodyParams& params,
                                       const CameraParams& cam,
                                       const SampleConfig& config,
                                       double view_angle);

RasterImage read_pgm(const std::string& path);
void write_pgm(const std::string& path, const RasterImage& image);

// strokes plus every region they enclose, as a {0,1} mask; falls back to a
// morphological closing when the outline does not enclose anything
RasterImage fill_interior(const RasterImage& sketch,
                          bool* used_closing = nullptr);

}  // namespace sbn
