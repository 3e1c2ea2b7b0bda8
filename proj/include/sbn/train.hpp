#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sbn/dataset.hpp"
#include "sbn/losses.hpp"
#include "sbn/network.hpp"

namespace sbn {

enum class LockSchedule { none, round_robin, fixed };

struct StageSpec {
  SketchSource source = SketchSource::synthetic;
  int epochs = 0;
};

struct TrainConfig {
  // paper protocol: 100 synthetic epochs, then 10 freehand epochs
  std::vector<StageSpec> stages = {{SketchSource::synthetic, 100},
                                   {SketchSource::freehand, 10}};
  double lr = 1e-4;
  int batch_size = 64;
  std::uint64_t seed = 0;
  LockSchedule lock = LockSchedule::round_robin;
  std::vector<std::string> fixed_locks;  // branch prefixes, lock == fixed
  NetConfig net;
  std::string checkpoint_path;  // empty: no checkpoints written
  int checkpoint_every = 0;     // steps; 0 = final only
  std::string log_path;         // empty: no loss log
};

// stroke = 1, background = 0, replicated over 3 channels
Tensor sketch_to_input(const RasterImage& sketch);

// decoder prefixes locked for this step under round_robin; the backbone is
// never locked
std::vector<std::string> round_robin_locks(std::int64_t step);

// mean loss over the batch, one backward pass, one Adam step
LossBreakdown train_step(ParamStore& store, const BodyModelSpec& spec,
                         const NetConfig& net, const AdamConfig& adam,
                         const std::vector<SketchSample>& batch,
                         SketchSource regime,
                         const std::vector<std::string>& locked_prefixes);

struct TrainResult {
  std::int64_t steps = 0;
  double first_loss = 0.0;  // first step of the last executed stage
  double final_loss = 0.0;
  std::vector<double> stage_first_loss;  // per stage
  std::vector<double> stage_final_loss;
};

// executes the stage schedule; resumes past start_step without re-running
TrainResult srt_train(const DatasetManifest& manifest,
                      const BodyModelSpec& spec, const TrainConfig& cfg,
                      ParamStore& store, Rng& rng,
                      std::int64_t start_step = 0);

}  // namespace sbn
