#include "sbn/sketch.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>

namespace sbn {

RasterImage make_image(int resolution, std::uint8_t fill) {
  if (resolution < 1) throw ValidationError("make_image: resolution < 1");
  RasterImage img;
  img.resolution = resolution;
  img.pixels.assign(
      static_cast<size_t>(resolution) * static_cast<size_t>(resolution), fill);
  return img;
}

// --- rasterization ---------------------------------------------------------

namespace {

double edge_fn(double ax, double ay, double bx, double by, double px,
               double py) {
  return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

}  // namespace

RasterImage rasterize_silhouette(const MatrixX3d& vertices,
                                 const FacesMatrix& faces,
                                 const CameraParams& cam, int resolution) {
  if (vertices.rows() == 0 || faces.rows() == 0)
    throw ValidationError("rasterize_silhouette: empty mesh");
  if (cam.s <= 0) throw ValidationError("rasterize_silhouette: cam.s <= 0");
  MatrixX2d px = to_pixels(project(vertices, cam), resolution);
  RasterImage mask = make_image(resolution, 0);
  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    double x0 = px(faces(f, 0), 0), y0 = px(faces(f, 0), 1);
    double x1 = px(faces(f, 1), 0), y1 = px(faces(f, 1), 1);
    double x2 = px(faces(f, 2), 0), y2 = px(faces(f, 2), 1);
    const double area2 = edge_fn(x0, y0, x1, y1, x2, y2);
    if (area2 == 0.0) continue;
    if (area2 < 0.0) {
      std::swap(x1, x2);
      std::swap(y1, y2);
    }
    const int xlo = std::max(
        0, static_cast<int>(std::ceil(std::min({x0, x1, x2}))));
    const int xhi = std::min(
        resolution - 1, static_cast<int>(std::floor(std::max({x0, x1, x2}))));
    const int ylo = std::max(
        0, static_cast<int>(std::ceil(std::min({y0, y1, y2}))));
    const int yhi = std::min(
        resolution - 1, static_cast<int>(std::floor(std::max({y0, y1, y2}))));
    for (int y = ylo; y <= yhi; ++y)
      for (int x = xlo; x <= xhi; ++x) {
        const double p = x, q = y;
        if (edge_fn(x0, y0, x1, y1, p, q) >= 0.0 &&
            edge_fn(x1, y1, x2, y2, p, q) >= 0.0 &&
            edge_fn(x2, y2, x0, y0, p, q) >= 0.0)
          mask.at(x, y) = 1;
      }
  }
  return mask;
}

// --- morphology ------------------------------------------------------------

namespace {

bool mask_fg(const RasterImage& img, int x, int y) { return img.at(x, y) != 0; }

RasterImage dilate_cross(const RasterImage& fg) {
  const int r = fg.resolution;
  RasterImage out = make_image(r, 0);
  for (int y = 0; y < r; ++y)
    for (int x = 0; x < r; ++x) {
      bool on = mask_fg(fg, x, y);
      on = on || (x > 0 && mask_fg(fg, x - 1, y));
      on = on || (x + 1 < r && mask_fg(fg, x + 1, y));
      on = on || (y > 0 && mask_fg(fg, x, y - 1));
      on = on || (y + 1 < r && mask_fg(fg, x, y + 1));
      if (on) out.at(x, y) = 1;
    }
  return out;
}

}  // namespace

RasterImage extract_edges(const RasterImage& mask, int dilation) {
  const int r = mask.resolution;
  RasterImage edges = make_image(r, 0);
  for (int y = 0; y < r; ++y)
    for (int x = 0; x < r; ++x) {
      if (!mask_fg(mask, x, y)) continue;
      const bool interior = x > 0 && mask_fg(mask, x - 1, y) && x + 1 < r &&
                            mask_fg(mask, x + 1, y) && y > 0 &&
                            mask_fg(mask, x, y - 1) && y + 1 < r &&
                            mask_fg(mask, x, y + 1);
      if (!interior) edges.at(x, y) = 1;
    }
  for (int i = 0; i < dilation; ++i) edges = dilate_cross(edges);
  RasterImage sketch = make_image(r, 255);
  for (int y = 0; y < r; ++y)
    for (int x = 0; x < r; ++x)
      if (mask_fg(edges, x, y)) sketch.at(x, y) = 0;
  return sketch;
}

// --- bounding box crop -----------------------------------------------------

MatrixX2d CropTransform::apply(const MatrixX2d& uv) const {
  MatrixX2d out(uv.rows(), 2);
  out.col(0) = a * uv.col(0).array() + bu;
  out.col(1) = a * uv.col(1).array() + bv;
  return out;
}

CameraParams CropTransform::compose(const CameraParams& cam) const {
  CameraParams out;
  out.s = a * cam.s;
  out.tx = cam.tx + bu / out.s;
  out.ty = cam.ty + bv / out.s;
  return out;
}

RasterImage detect_bbox_and_crop(const RasterImage& sketch, int out_resolution,
                                 double margin, CropTransform* transform) {
  if (out_resolution < 2)
    throw ValidationError("detect_bbox_and_crop: out_resolution < 2");
  const int r = sketch.resolution;
  int x0 = r, y0 = r, x1 = -1, y1 = -1;
  for (int y = 0; y < r; ++y)
    for (int x = 0; x < r; ++x)
      if (sketch.at(x, y) < 128) {
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
  if (x1 < 0) throw ValidationError("detect_bbox_and_crop: no body found");
  const int mw = static_cast<int>(std::lround(margin * (x1 - x0 + 1)));
  const int mh = static_cast<int>(std::lround(margin * (y1 - y0 + 1)));
  x0 -= mw;
  x1 += mw;
  y0 -= mh;
  y1 += mh;
  const int w = x1 - x0 + 1, h = y1 - y0 + 1;
  const int side = std::max(w, h);
  x0 -= (side - w) / 2;
  y0 -= (side - h) / 2;

  RasterImage out = make_image(out_resolution, 255);
  for (int j = 0; j < out_resolution; ++j)
    for (int i = 0; i < out_resolution; ++i) {
      const int sx =
          x0 + static_cast<int>((i + 0.5) * side / out_resolution);
      const int sy =
          y0 + static_cast<int>((j + 0.5) * side / out_resolution);
      if (!sketch.in_bounds(sx, sy)) continue;
      out.at(i, j) = sketch.at(sx, sy) < 128 ? 0 : 255;
    }

  if (transform) {
    CropTransform tf;
    tf.x0 = x0;
    tf.y0 = y0;
    tf.side = side;
    tf.src_resolution = r;
    tf.out_resolution = out_resolution;
    tf.a = static_cast<double>(r - 1) * out_resolution /
           (static_cast<double>(side) * (out_resolution - 1));
    // offsets from pushing the origin through the pixel chain
    const double cx = (r - 1) / 2.0;          // source pixel of u = 0
    const double cy = (r - 1) / 2.0;          // source pixel of v = 0
    const double oi = (cx - x0 + 0.5) * out_resolution / side - 0.5;
    const double oj = (cy - y0 + 0.5) * out_resolution / side - 0.5;
    tf.bu = 2.0 * oi / (out_resolution - 1) - 1.0;
    tf.bv = 1.0 - 2.0 * oj / (out_resolution - 1);
    *transform = tf;
  }
  return out;
}

// --- sample generation -----------------------------------------------------

SketchSample generate_synthetic_sample(const BodyModelSpec& spec,
                                       const BodyParams& params,
                                       const CameraParams& cam,
                                       const SampleConfig& config,
                                       double view_angle) {
  BodyParams viewed = params;
  Eigen::Vector3d w = params.theta.head<3>();
  Eigen::AngleAxisd root(Eigen::Matrix3d::Identity());
  if (w.norm() > 0) root = Eigen::AngleAxisd(w.norm(), w.normalized());
  const Eigen::Matrix3d r =
      Eigen::AngleAxisd(view_angle, Eigen::Vector3d::UnitY()).toRotationMatrix() *
      root.toRotationMatrix();
  const Eigen::AngleAxisd composed(r);
  viewed.theta.head<3>() = composed.angle() * composed.axis();

  SmplOutputEigen body = smpl_forward(spec, viewed);
  RasterImage mask = rasterize_silhouette(body.vertices, spec.faces, cam,
                                          config.render_resolution);
  if (std::all_of(mask.pixels.begin(), mask.pixels.end(),
                  [](std::uint8_t v) { return v == 0; }))
    throw ValidationError("generate_synthetic_sample: silhouette off-screen");
  RasterImage edges = extract_edges(mask, config.stroke_dilation);

  CropTransform tf;
  SketchSample sample;
  detect_bbox_and_crop(edges, config.out_resolution, config.margin, &tf);
  // resample the mask through the same box and re-extract edges, so strokes
  // stay closed at any render/crop resolution ratio
  RasterImage crop_mask = make_image(config.out_resolution, 0);
  for (int j = 0; j < config.out_resolution; ++j)
    for (int i = 0; i < config.out_resolution; ++i) {
      const int sx =
          tf.x0 + static_cast<int>((i + 0.5) * tf.side / config.out_resolution);
      const int sy =
          tf.y0 + static_cast<int>((j + 0.5) * tf.side / config.out_resolution);
      if (mask.in_bounds(sx, sy)) crop_mask.at(i, j) = mask.at(sx, sy);
    }
  sample.image = extract_edges(crop_mask, config.stroke_dilation);
  sample.source = SketchSource::synthetic;
  sample.theta = viewed.theta;
  sample.beta = params.beta;
  sample.cam = tf.compose(cam);
  sample.joints3d = body.joints;
  sample.joints2d = project(body.joints, *sample.cam);
  sample.mesh_vertices = body.vertices;
  sample.joint_mask.assign(static_cast<size_t>(spec.K), 1);
  return sample;
}

// --- PGM -------------------------------------------------------------------

RasterImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("pgm: cannot open " + path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (!in || magic != "P5" || maxval != 255 || w < 1 || h < 1)
    throw IoError("pgm: malformed header in " + path);
  if (w != h) throw IoError("pgm: image is not square in " + path);
  in.get();  // single whitespace byte after the header
  RasterImage img = make_image(w, 0);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
    throw IoError("pgm: payload size mismatch in " + path);
  return img;
}

void write_pgm(const std::string& path, const RasterImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("pgm: cannot write " + path);
  out << "P5\n" << image.resolution << ' ' << image.resolution << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw IoError("pgm: write failed for " + path);
}

// --- interior fill ---------------------------------------------------------

namespace {

// returns {0,1} interior (strokes plus enclosed pixels) and the count of
// enclosed background pixels
std::pair<RasterImage, std::int64_t> flood_interior(const RasterImage& strokes) {
  const int r = strokes.resolution;
  std::vector<std::uint8_t> outside(strokes.pixels.size(), 0);
  std::deque<std::pair<int, int>> queue;
  auto push = [&](int x, int y) {
    const size_t idx =
        static_cast<size_t>(y) * static_cast<size_t>(r) + static_cast<size_t>(x);
    if (outside[idx] || mask_fg(strokes, x, y)) return;
    outside[idx] = 1;
    queue.emplace_back(x, y);
  };
  for (int i = 0; i < r; ++i) {
    push(i, 0);
    push(i, r - 1);
    push(0, i);
    push(r - 1, i);
  }
  while (!queue.empty()) {
    auto [x, y] = queue.front();
    queue.pop_front();
    if (x > 0) push(x - 1, y);
    if (x + 1 < r) push(x + 1, y);
    if (y > 0) push(x, y - 1);
    if (y + 1 < r) push(x, y + 1);
  }
  RasterImage interior = make_image(r, 0);
  std::int64_t enclosed = 0;
  for (int y = 0; y < r; ++y)
    for (int x = 0; x < r; ++x) {
      const size_t idx = static_cast<size_t>(y) * static_cast<size_t>(r) +
                         static_cast<size_t>(x);
      if (outside[idx]) continue;
      interior.at(x, y) = 1;
      if (!mask_fg(strokes, x, y)) ++enclosed;
    }
  return {interior, enclosed};
}

}  // namespace

RasterImage fill_interior(const RasterImage& sketch, bool* used_closing) {
  const int r = sketch.resolution;
  RasterImage strokes = make_image(r, 0);
  for (int y = 0; y < r; ++y)
    for (int x = 0; x < r; ++x)
      if (sketch.at(x, y) < 128) strokes.at(x, y) = 1;
  if (used_closing) *used_closing = false;
  auto [interior, enclosed] = flood_interior(strokes);
  for (int radius = 1; enclosed == 0 && radius <= 3; ++radius) {
    strokes = dilate_cross(strokes);
    std::tie(interior, enclosed) = flood_interior(strokes);
    if (used_closing) *used_closing = true;
  }
  return interior;
}

}  // namespace sbn
