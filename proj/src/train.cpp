#include "sbn/train.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "sbn/errors.hpp"

namespace sbn {

Tensor sketch_to_input(const RasterImage& sketch) {
  const std::int64_t r = sketch.resolution;
  const size_t plane = static_cast<size_t>(r) * static_cast<size_t>(r);
  std::vector<double> data(3 * plane);
  for (size_t i = 0; i < plane; ++i)
    data[i] = sketch.pixels[i] < 128 ? 1.0 : 0.0;
  std::copy(data.begin(), data.begin() + static_cast<std::ptrdiff_t>(plane),
            data.begin() + static_cast<std::ptrdiff_t>(plane));
  std::copy(data.begin(), data.begin() + static_cast<std::ptrdiff_t>(plane),
            data.begin() + static_cast<std::ptrdiff_t>(2 * plane));
  return Tensor::from_data({3, r, r}, std::move(data));
}

std::vector<std::string> round_robin_locks(std::int64_t step) {
  switch (step % 3) {
    case 0: return {"shape", "cam"};   // pose trains
    case 1: return {"pose", "cam"};    // shape trains
    default: return {"pose", "shape"};  // cam trains
  }
}

namespace {

void accumulate(std::optional<double>& acc, const std::optional<double>& v) {
  if (!v) return;
  acc = acc.value_or(0.0) + *v;
}

void divide(std::optional<double>& acc, double n) {
  if (acc) *acc /= n;
}

}  // namespace

LossBreakdown train_step(ParamStore& store, const BodyModelSpec& spec,
                         const NetConfig& net, const AdamConfig& adam,
                         const std::vector<SketchSample>& batch,
                         SketchSource regime,
                         const std::vector<std::string>& locked_prefixes) {
  if (batch.empty()) throw ValidationError("train_step: empty batch");
  store.zero_grad();
  LossBreakdown mean;
  mean.regime = regime;
  Tensor total;
  bool first = true;
  for (const auto& sample : batch) {
    if (sample.source != regime)
      throw ValidationError("train_step: batch is not homogeneous in source");
    NetOutput out = sketchbodynet_forward(sketch_to_input(sample.image), store,
                                          net);
    // Eq. 13 carries no shape supervision: pose the body with a detached
    // beta so the freehand regime sends no gradient into the shape decoder
    Tensor beta = regime == SketchSource::freehand
                      ? Tensor::from_data(out.beta.shape(),
                                          out.beta.data_vec())
                      : out.beta;
    SmplOutput body = smpl_forward(spec, out.theta, beta);
    Tensor projected2d = project(body.joints, out.cam);
    LossBreakdown lb = total_loss(sample, out, body, projected2d);
    accumulate(mean.shape3d, lb.shape3d);
    accumulate(mean.joints3d, lb.joints3d);
    accumulate(mean.joints2d, lb.joints2d);
    accumulate(mean.theta, lb.theta);
    accumulate(mean.beta, lb.beta);
    total = first ? lb.total : add(total, lb.total);
    first = false;
  }
  const double n = static_cast<double>(batch.size());
  mean.total = scale(total, 1.0 / n);
  divide(mean.shape3d, n);
  divide(mean.joints3d, n);
  divide(mean.joints2d, n);
  divide(mean.theta, n);
  divide(mean.beta, n);
  if (!std::isfinite(mean.total.value()))
    throw NumericError("train_step: non-finite batch loss");
  backward(mean.total);
  adam_step(store, adam, locked_prefixes);
  return mean;
}

namespace {

std::string fmt_component(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", *v);
  return buf;
}

}  // namespace

TrainResult srt_train(const DatasetManifest& manifest,
                      const BodyModelSpec& spec, const TrainConfig& cfg,
                      ParamStore& store, Rng& rng, std::int64_t start_step) {
  cfg.net.validate();
  const AdamConfig adam{cfg.lr, 0.9, 0.999, 1e-8};
  const double nan = std::numeric_limits<double>::quiet_NaN();
  TrainResult result;
  result.stage_first_loss.assign(cfg.stages.size(), nan);
  result.stage_final_loss.assign(cfg.stages.size(), nan);

  // samples cached on first use
  std::vector<std::optional<SketchSample>> cache(manifest.records.size());
  auto sample_at = [&](int idx) -> const SketchSample& {
    auto& slot = cache[static_cast<size_t>(idx)];
    if (!slot)
      slot = load_sample(manifest, manifest.records[static_cast<size_t>(idx)]);
    return *slot;
  };

  std::ofstream log;
  if (!cfg.log_path.empty()) {
    log.open(cfg.log_path, start_step > 0 ? std::ios::app : std::ios::trunc);
    if (!log) throw IoError("srt_train: cannot write log " + cfg.log_path);
  }

  std::int64_t step = 0;
  int epoch_key = 0;
  for (size_t stage_i = 0; stage_i < cfg.stages.size(); ++stage_i) {
    const StageSpec& stage = cfg.stages[stage_i];
    for (int epoch = 0; epoch < stage.epochs; ++epoch, ++epoch_key) {
      auto batches = make_batches(manifest, stage.source, cfg.batch_size,
                                  cfg.seed, epoch_key);
      for (const auto& batch_idx : batches) {
        if (step < start_step) {
          ++step;
          continue;
        }
        std::vector<std::string> locked;
        if (cfg.net.multi_branch) {
          if (cfg.lock == LockSchedule::round_robin)
            locked = round_robin_locks(step);
          else if (cfg.lock == LockSchedule::fixed)
            locked = cfg.fixed_locks;
        }
        std::vector<SketchSample> batch;
        batch.reserve(batch_idx.size());
        for (int idx : batch_idx) batch.push_back(sample_at(idx));
        LossBreakdown lb =
            train_step(store, spec, cfg.net, adam, batch, stage.source, locked);
        const double total = lb.total.value();
        if (std::isnan(result.stage_first_loss[stage_i]))
          result.stage_first_loss[stage_i] = total;
        result.stage_final_loss[stage_i] = total;
        result.final_loss = total;
        if (log.is_open())
          log << step << '\t' << stage_i << '\t'
              << (stage.source == SketchSource::synthetic ? "synthetic"
                                                          : "freehand")
              << '\t' << fmt_component(lb.shape3d) << '\t'
              << fmt_component(lb.joints3d) << '\t'
              << fmt_component(lb.joints2d) << '\t' << fmt_component(lb.theta)
              << '\t' << fmt_component(lb.beta) << '\t' << total << '\n';
        ++step;
        if (!cfg.checkpoint_path.empty() && cfg.checkpoint_every > 0 &&
            step % cfg.checkpoint_every == 0)
          save_checkpoint(cfg.checkpoint_path, store, cfg.net, rng, step);
      }
    }
  }
  for (double v : result.stage_first_loss)
    if (!std::isnan(v)) {
      result.first_loss = v;
      break;
    }
  result.steps = step;
  if (!cfg.checkpoint_path.empty())
    save_checkpoint(cfg.checkpoint_path, store, cfg.net, rng, step);
  return result;
}

}  // namespace sbn
