// sbn command-line toolkit: dataset generation, training, inference,
// evaluation and model export.
//
// Exit codes: 0 success, 1 usage error, 2 data/validation error,
// 3 runtime/numeric error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "sbn/metrics.hpp"
#include "sbn/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sbn;

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("bad JSON in " + path + ": " + e.what());
  }
}

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key))
      throw ValidationError("unknown key \"" + key + "\" in " + where);
}

NetConfig parse_net_config(const json& j) {
  reject_unknown_keys(
      j,
      {"n_joints", "n_beta", "input_resolution", "backbone_stage_channels",
       "model_dim", "attention", "mlp_hidden", "attention_enabled",
       "multi_branch", "theta_init", "beta_init", "cam_init"},
      "net config");
  NetConfig cfg =
      default_net_config(j.value("n_joints", 16), j.value("n_beta", 4));
  if (j.contains("input_resolution"))
    j.at("input_resolution").get_to(cfg.input_resolution);
  if (j.contains("backbone_stage_channels"))
    j.at("backbone_stage_channels").get_to(cfg.backbone_stage_channels);
  if (j.contains("model_dim")) {
    j.at("model_dim").get_to(cfg.model_dim);
    cfg.attention.model_dim = cfg.model_dim;
  }
  if (j.contains("attention")) {
    const json& a = j.at("attention");
    reject_unknown_keys(a, {"heads", "head_dim", "model_dim"},
                        "net config attention");
    if (a.contains("heads")) a.at("heads").get_to(cfg.attention.heads);
    if (a.contains("head_dim")) a.at("head_dim").get_to(cfg.attention.head_dim);
    if (a.contains("model_dim"))
      a.at("model_dim").get_to(cfg.attention.model_dim);
  }
  if (j.contains("mlp_hidden")) j.at("mlp_hidden").get_to(cfg.mlp_hidden);
  if (j.contains("attention_enabled"))
    j.at("attention_enabled").get_to(cfg.attention_enabled);
  if (j.contains("multi_branch"))
    j.at("multi_branch").get_to(cfg.multi_branch);
  if (j.contains("theta_init")) j.at("theta_init").get_to(cfg.theta_init);
  if (j.contains("beta_init")) j.at("beta_init").get_to(cfg.beta_init);
  if (j.contains("cam_init")) j.at("cam_init").get_to(cfg.cam_init);
  cfg.validate();
  return cfg;
}

SketchSource parse_source(const std::string& s) {
  if (s == "synthetic") return SketchSource::synthetic;
  if (s == "freehand") return SketchSource::freehand;
  throw ValidationError("unknown sample source \"" + s + "\"");
}

TrainConfig parse_train_config(const std::string& path) {
  const json j = read_json_file(path);
  reject_unknown_keys(j,
                      {"stages", "lr", "batch_size", "seed", "lock",
                       "fixed_locks", "checkpoint_every", "log_path", "net"},
                      path);
  TrainConfig cfg;
  if (j.contains("stages")) {
    cfg.stages.clear();
    for (const json& sj : j.at("stages")) {
      reject_unknown_keys(sj, {"source", "epochs"}, path + " stages");
      cfg.stages.push_back({parse_source(sj.at("source").get<std::string>()),
                            sj.at("epochs").get<int>()});
    }
  }
  cfg.lr = j.value("lr", cfg.lr);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("lock")) {
    const std::string lock = j.at("lock").get<std::string>();
    if (lock == "none")
      cfg.lock = LockSchedule::none;
    else if (lock == "round_robin")
      cfg.lock = LockSchedule::round_robin;
    else if (lock == "fixed")
      cfg.lock = LockSchedule::fixed;
    else
      throw ValidationError("unknown lock schedule \"" + lock + "\" in " +
                            path);
  }
  if (j.contains("fixed_locks")) j.at("fixed_locks").get_to(cfg.fixed_locks);
  cfg.checkpoint_every = j.value("checkpoint_every", cfg.checkpoint_every);
  cfg.log_path = j.value("log_path", cfg.log_path);
  cfg.net = parse_net_config(j.value("net", json::object()));
  return cfg;
}

// inverse of CropTransform::compose: a crop-frame camera expressed in the
// frame of the uncropped source image
CameraParams uncrop_camera(const CameraParams& crop_cam,
                           const CropTransform& tf) {
  CameraParams src;
  src.s = crop_cam.s / tf.a;
  src.tx = crop_cam.tx - tf.bu / crop_cam.s;
  src.ty = crop_cam.ty - tf.bv / crop_cam.s;
  return src;
}

struct LoadedNet {
  NetConfig cfg;
  ParamStore store;
  std::int64_t step = 0;
};

LoadedNet load_net(const std::string& checkpoint) {
  LoadedNet net;
  net.cfg = read_checkpoint_config(checkpoint);
  Rng rng(0);
  init_network(net.store, net.cfg, rng);
  load_checkpoint(checkpoint, net.store, net.cfg, rng, net.step);
  return net;
}

ParamPrediction predict(const LoadedNet& net, const RasterImage& crop) {
  NetOutput out = sketchbodynet_forward(sketch_to_input(crop), net.store,
                                        net.cfg);
  ParamPrediction p;
  p.theta = Eigen::Map<const Eigen::VectorXd>(
      out.theta.data_vec().data(),
      static_cast<Eigen::Index>(out.theta.size()));
  p.beta = Eigen::Map<const Eigen::VectorXd>(
      out.beta.data_vec().data(), static_cast<Eigen::Index>(out.beta.size()));
  p.cam = {out.cam.data_vec()[0], out.cam.data_vec()[1],
           out.cam.data_vec()[2]};
  return p;
}

int cmd_gen_data(const std::string& model_path, int count, int views,
                 std::uint64_t seed, const std::string& out_dir, int render_res,
                 int crop_res, bool freehand) {
  BodyModelSpec spec = load_body_model(model_path);
  fs::create_directories(out_dir);
  DatasetPolicy policy;
  policy.sample.render_resolution = render_res;
  policy.sample.out_resolution = crop_res;
  const std::string model_abs =
      fs::absolute(model_path).lexically_normal().string();
  DatasetManifest synth = build_synthetic_dataset(
      spec, model_abs, count, default_views(views), seed, out_dir, policy);
  std::cout << "manifest: " << out_dir << "/manifest.json\n"
            << "records: " << synth.records.size() << "\n";
  if (freehand) {
    DatasetManifest fh =
        build_pseudo_freehand_dataset(synth, seed + 1, out_dir + "/freehand");
    DatasetManifest merged = merge_manifests(synth, fh);
    save_manifest(out_dir + "/merged.json", merged);
    std::cout << "freehand manifest: " << out_dir
              << "/freehand/manifest.json\n"
              << "merged manifest: " << out_dir << "/merged.json\n"
              << "merged records: " << merged.records.size() << "\n";
  }
  return 0;
}

int cmd_train(const std::string& manifest_path, const std::string& config_path,
              const std::string& out_checkpoint, bool resume) {
  TrainConfig cfg = parse_train_config(config_path);
  cfg.checkpoint_path = out_checkpoint;
  DatasetManifest manifest = load_manifest(manifest_path);
  BodyModelSpec spec =
      load_body_model(manifest.root_dir.empty() || fs::path(manifest.body_model).is_absolute()
                          ? manifest.body_model
                          : (fs::path(manifest.root_dir) / manifest.body_model)
                                .string());
  ParamStore store;
  Rng rng(cfg.seed);
  init_network(store, cfg.net, rng);
  std::int64_t start_step = 0;
  if (resume) load_checkpoint(out_checkpoint, store, cfg.net, rng, start_step);
  TrainResult result = srt_train(manifest, spec, cfg, store, rng, start_step);
  std::cout << "steps: " << result.steps
            << "\nfinal_loss: " << result.final_loss << "\n";
  return 0;
}

int cmd_infer(const std::string& checkpoint, const std::string& model_path,
              const std::string& image_path, const std::string& out_obj,
              const std::string& out_overlay, double margin) {
  LoadedNet net = load_net(checkpoint);
  BodyModelSpec spec = load_body_model(model_path);
  RasterImage sketch = read_pgm(image_path);
  bool has_stroke = false;
  for (auto p : sketch.pixels) has_stroke |= p < 128;
  if (!has_stroke)
    throw ValidationError("no body found in " + image_path + ": blank sketch");

  CropTransform tf;
  RasterImage crop =
      detect_bbox_and_crop(sketch, net.cfg.input_resolution, margin, &tf);
  ParamPrediction p = predict(net, crop);
  SmplOutputEigen body = smpl_forward(spec, {p.theta, p.beta});

  if (!out_obj.empty()) {
    write_obj(out_obj, body.vertices, spec.faces);
    std::cout << "mesh: " << out_obj << "\n";
  }
  if (!out_overlay.empty()) {
    const CameraParams src_cam = uncrop_camera(p.cam, tf);
    RasterImage overlay = sketch;
    if (src_cam.s > 0) {
      RasterImage mask = rasterize_silhouette(body.vertices, spec.faces,
                                              src_cam, sketch.resolution);
      RasterImage edges = extract_edges(mask, 0);
      for (int y = 0; y < overlay.resolution; ++y)
        for (int x = 0; x < overlay.resolution; ++x)
          if (edges.at(x, y) == 0 && overlay.at(x, y) != 0)
            overlay.at(x, y) = 128;
    } else {
      std::cerr << "warning: degenerate predicted camera (s <= 0), overlay "
                   "carries no projection\n";
    }
    write_pgm(out_overlay, overlay);
    std::cout << "overlay: " << out_overlay << "\n";
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "cam: %.6g %.6g %.6g", p.cam.s, p.cam.tx,
                p.cam.ty);
  std::cout << buf << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& manifest_path,
             const std::string& report_path) {
  LoadedNet net = load_net(checkpoint);
  DatasetManifest manifest = load_manifest(manifest_path);
  BodyModelSpec spec =
      load_body_model(fs::path(manifest.body_model).is_absolute()
                          ? manifest.body_model
                          : (fs::path(manifest.root_dir) / manifest.body_model)
                                .string());
  std::vector<SketchSample> samples;
  for (const auto& r : manifest.records) {
    SketchSample s = load_sample(manifest, r);
    if (s.image.resolution != net.cfg.input_resolution)
      throw ValidationError(
          "record " + r.id + ": image resolution " +
          std::to_string(s.image.resolution) +
          " does not match the network input resolution " +
          std::to_string(net.cfg.input_resolution));
    samples.push_back(std::move(s));
  }
  MetricsReport report = evaluate_dataset(
      [&](const SketchSample& s) { return predict(net, s.image); }, samples,
      spec);
  if (report.joint_samples == 0 && report.silhouette_samples == 0)
    throw ValidationError(
        "no record carries the annotations any metric needs");
  {
    std::ofstream out(report_path);
    if (!out) throw IoError("cannot write " + report_path);
    out << report.to_json() << "\n";
  }
  const std::string table_path =
      (fs::path(report_path).parent_path() /
       (fs::path(report_path).stem().string() + ".txt"))
          .string();
  const std::string table = report.to_table();
  {
    std::ofstream out(table_path);
    if (!out) throw IoError("cannot write " + table_path);
    out << table;
  }
  std::cout << table;
  if (report.joint_samples < static_cast<int>(samples.size()) ||
      report.silhouette_samples < static_cast<int>(samples.size()))
    std::cout << "joint samples: " << report.joint_samples << "/"
              << samples.size() << ", silhouette samples: "
              << report.silhouette_samples << "/" << samples.size() << "\n";
  std::cout << "report: " << report_path << "\ntable: " << table_path << "\n";
  return 0;
}

int cmd_make_model(const std::string& out_path, std::uint64_t seed,
                   bool blob) {
  BodyModelSpec spec = make_mini_model(seed);
  if (!fs::path(out_path).parent_path().empty())
    fs::create_directories(fs::path(out_path).parent_path());
  save_body_model(out_path, spec, blob);
  std::cout << "model: " << out_path << " (V=" << spec.V << ", F=" << spec.F
            << ", K=" << spec.K << ", n_beta=" << spec.n_beta << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sbn: sketch-to-3D-human toolkit"};
  app.require_subcommand(1);

  // gen-data
  std::string gd_model, gd_out;
  int gd_count = 16, gd_views = 14, gd_render = 256, gd_crop = 64;
  std::uint64_t gd_seed = 0;
  bool gd_freehand = false;
  auto* gen = app.add_subcommand("gen-data",
                                 "Generate a synthetic sketch dataset");
  gen->add_option("--model", gd_model, "Body model JSON")->required();
  gen->add_option("--count", gd_count, "Bodies to sample");
  gen->add_option("--views", gd_views, "Views per body");
  gen->add_option("--seed", gd_seed, "RNG seed");
  gen->add_option("--out", gd_out, "Output directory")->required();
  gen->add_option("--render-res", gd_render, "Silhouette render resolution");
  gen->add_option("--crop-res", gd_crop, "Cropped sketch resolution");
  gen->add_flag("--freehand", gd_freehand,
                "Also emit pseudo-freehand sketches and a merged manifest");

  // train
  std::string tr_manifest, tr_config, tr_out;
  bool tr_resume = false;
  auto* train = app.add_subcommand("train", "Run step-wise refinement training");
  train->add_option("--manifest", tr_manifest, "Dataset manifest")->required();
  train->add_option("--config", tr_config, "Training config JSON")->required();
  train->add_option("--out-checkpoint", tr_out, "Checkpoint path")->required();
  train->add_flag("--resume", tr_resume,
                  "Continue from the checkpoint at --out-checkpoint");

  // infer
  std::string in_ckpt, in_model, in_image, in_obj, in_overlay;
  double in_margin = 0.1;
  auto* infer = app.add_subcommand("infer",
                                   "Reconstruct a body from one sketch");
  infer->add_option("--checkpoint", in_ckpt, "Trained checkpoint")->required();
  infer->add_option("--model", in_model, "Body model JSON")->required();
  infer->add_option("--image", in_image, "Input sketch (PGM)")->required();
  infer->add_option("--out-obj", in_obj, "Output mesh (OBJ)");
  infer->add_option("--out-overlay", in_overlay,
                    "Sketch with the reprojected silhouette (PGM)");
  infer->add_option("--margin", in_margin, "Crop margin fraction");

  // eval
  std::string ev_ckpt, ev_manifest, ev_report;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval->add_option("--checkpoint", ev_ckpt, "Trained checkpoint")->required();
  eval->add_option("--manifest", ev_manifest, "Dataset manifest")->required();
  eval->add_option("--report", ev_report, "Report JSON path")->required();

  // make-model
  std::string mm_out;
  std::uint64_t mm_seed = 3;
  bool mm_blob = false;
  auto* mm = app.add_subcommand("make-model",
                                "Write the procedural mini body model");
  mm->add_option("--out", mm_out, "Model JSON path")->required();
  mm->add_option("--seed", mm_seed, "Shape seed");
  mm->add_flag("--blob", mm_blob, "Store arrays in a binary sidecar");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (gen->parsed())
      return cmd_gen_data(gd_model, gd_count, gd_views, gd_seed, gd_out,
                          gd_render, gd_crop, gd_freehand);
    if (train->parsed())
      return cmd_train(tr_manifest, tr_config, tr_out, tr_resume);
    if (infer->parsed())
      return cmd_infer(in_ckpt, in_model, in_image, in_obj, in_overlay,
                       in_margin);
    if (eval->parsed()) return cmd_eval(ev_ckpt, ev_manifest, ev_report);
    if (mm->parsed()) return cmd_make_model(mm_out, mm_seed, mm_blob);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
