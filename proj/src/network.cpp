#include "sbn/network.hpp"

#include "json.hpp"

#include <bit>
#include <fstream>

#include "sbn/errors.hpp"

namespace sbn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is little-endian");

void NetConfig::validate() const {
  if (input_resolution < 8)
    throw ValidationError("net config: input_resolution < 8");
  if (backbone_stage_channels.empty())
    throw ValidationError("net config: no backbone stages");
  for (int c : backbone_stage_channels)
    if (c < 1) throw ValidationError("net config: non-positive stage width");
  if (model_dim != backbone_stage_channels.back())
    throw ValidationError("net config: model_dim != backbone output width");
  if (attention.model_dim != model_dim)
    throw ValidationError("net config: attention.model_dim != model_dim");
  if (attention.heads < 1 || attention.head_dim < 1)
    throw ValidationError("net config: bad attention dims");
  for (int w : mlp_hidden)
    if (w < 1) throw ValidationError("net config: non-positive mlp width");
  if (theta_init.empty() || theta_init.size() % 3 != 0)
    throw ValidationError("net config: theta_init must hold 3K values");
  if (beta_init.empty())
    throw ValidationError("net config: beta_init is empty");
  if (cam_init.size() != 3)
    throw ValidationError("net config: cam_init must hold (s, tx, ty)");
  auto [c, h, w] = backbone_output_shape(*this);
  (void)c;
  if (h < 1 || w < 1)
    throw ValidationError("net config: backbone collapses the image");
}

NetConfig default_net_config(int n_joints, int n_beta) {
  NetConfig cfg;
  cfg.theta_init.assign(static_cast<size_t>(3 * n_joints), 0.0);
  cfg.beta_init.assign(static_cast<size_t>(n_beta), 0.0);
  return cfg;
}

std::array<std::int64_t, 3> backbone_output_shape(const NetConfig& cfg) {
  std::int64_t r = cfg.input_resolution;
  for (size_t i = 0; i < cfg.backbone_stage_channels.size(); ++i)
    r = (r + 1) / 2;  // k3 s2 p1
  return {cfg.backbone_stage_channels.back(), r, r};
}

namespace {

ResidualBlockSpec stage_spec(const NetConfig& cfg, size_t i) {
  return ResidualBlockSpec{
      i == 0 ? cfg.backbone_stage_channels[0] : cfg.backbone_stage_channels[i - 1],
      cfg.backbone_stage_channels[i], 2};
}

const char* branch_prefix(Branch b) {
  switch (b) {
    case Branch::pose: return "pose";
    case Branch::shape: return "shape";
    default: return "cam";
  }
}

const std::vector<double>& branch_init(Branch b, const NetConfig& cfg) {
  switch (b) {
    case Branch::pose: return cfg.theta_init;
    case Branch::shape: return cfg.beta_init;
    default: return cfg.cam_init;
  }
}

std::vector<int> decoder_widths(const NetConfig& cfg, int init_len,
                                int out_len) {
  std::vector<int> widths = {cfg.model_dim + init_len};
  widths.insert(widths.end(), cfg.mlp_hidden.begin(), cfg.mlp_hidden.end());
  widths.push_back(out_len);
  return widths;
}

void init_decoder(ParamStore& store, const std::string& prefix,
                  const NetConfig& cfg, int init_len, int out_len, Rng& rng) {
  if (cfg.attention_enabled)
    init_mhsa(store, prefix + ".attn", cfg.attention, rng);
  init_mlp(store, prefix + ".mlp", decoder_widths(cfg, init_len, out_len), rng);
}

}  // namespace

void init_network(ParamStore& store, const NetConfig& cfg, Rng& rng) {
  cfg.validate();
  init_conv(store, "backbone.stem", cfg.backbone_stage_channels[0], 3, 3, rng);
  for (size_t i = 0; i < cfg.backbone_stage_channels.size(); ++i)
    init_residual_block(store, "backbone.block" + std::to_string(i),
                        stage_spec(cfg, i), rng);
  const int n_theta = static_cast<int>(cfg.theta_init.size());
  const int n_beta = static_cast<int>(cfg.beta_init.size());
  if (cfg.multi_branch) {
    init_decoder(store, "pose", cfg, n_theta, n_theta, rng);
    init_decoder(store, "shape", cfg, n_beta, n_beta, rng);
    init_decoder(store, "cam", cfg, 3, 3, rng);
  } else {
    const int total = n_theta + n_beta + 3;
    init_decoder(store, "trunk", cfg, total, total, rng);
  }
}

Tensor backbone_forward(const Tensor& image, const ParamStore& store,
                        const NetConfig& cfg) {
  const std::int64_t r = cfg.input_resolution;
  if (image.shape() != Shape{3, r, r})
    throw TensorError("backbone_forward: expected a 3x" + std::to_string(r) +
                      "x" + std::to_string(r) + " image");
  Tensor x = relu(conv_layer(image, store, "backbone.stem", 1, 1));
  for (size_t i = 0; i < cfg.backbone_stage_channels.size(); ++i)
    x = residual_block(x, store, "backbone.block" + std::to_string(i),
                       stage_spec(cfg, i));
  return global_avg_pool(x);
}

namespace {

Tensor decoder_trunk(const Tensor& f_in, const ParamStore& store,
                     const std::string& prefix, const NetConfig& cfg,
                     const std::vector<double>& init, int out_len) {
  if (f_in.size() != cfg.model_dim)
    throw TensorError("decoder: feature width != model_dim");
  Tensor x = reshape(f_in, {1, cfg.model_dim});
  if (cfg.attention_enabled)
    x = add(x, mhsa(x, store, prefix + ".attn", cfg.attention));
  Tensor init_t = Tensor::from_data(
      {1, static_cast<std::int64_t>(init.size())}, init);
  x = concat({x, init_t}, 1);
  Tensor out = mlp(x, store, prefix + ".mlp",
                   decoder_widths(cfg, static_cast<int>(init.size()), out_len));
  return reshape(out, {out_len});
}

}  // namespace

Tensor decoder_branch_forward(Branch branch, const Tensor& f_in,
                              const ParamStore& store, const NetConfig& cfg) {
  const auto& init = branch_init(branch, cfg);
  return decoder_trunk(f_in, store, branch_prefix(branch), cfg, init,
                       static_cast<int>(init.size()));
}

NetOutput sketchbodynet_forward(const Tensor& image, const ParamStore& store,
                                const NetConfig& cfg) {
  Tensor f = backbone_forward(image, store, cfg);
  NetOutput out;
  if (cfg.multi_branch) {
    out.theta = decoder_branch_forward(Branch::pose, f, store, cfg);
    out.beta = decoder_branch_forward(Branch::shape, f, store, cfg);
    out.cam = decoder_branch_forward(Branch::cam, f, store, cfg);
    return out;
  }
  const std::int64_t n_theta = static_cast<std::int64_t>(cfg.theta_init.size());
  const std::int64_t n_beta = static_cast<std::int64_t>(cfg.beta_init.size());
  std::vector<double> init = cfg.theta_init;
  init.insert(init.end(), cfg.beta_init.begin(), cfg.beta_init.end());
  init.insert(init.end(), cfg.cam_init.begin(), cfg.cam_init.end());
  Tensor all = decoder_trunk(f, store, "trunk", cfg, init,
                             static_cast<int>(init.size()));
  out.theta = slice(all, {0}, {n_theta});
  out.beta = slice(all, {n_theta}, {n_beta});
  out.cam = slice(all, {n_theta + n_beta}, {3});
  return out;
}

// --- checkpoints -----------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'S', 'B', 'N', 'C', 'K', 'P', 'T', '\n'};
constexpr int kCheckpointVersion = 1;

nlohmann::json config_json(const NetConfig& cfg) {
  return nlohmann::json{
      {"input_resolution", cfg.input_resolution},
      {"backbone_stage_channels", cfg.backbone_stage_channels},
      {"model_dim", cfg.model_dim},
      {"attention",
       {{"heads", cfg.attention.heads},
        {"head_dim", cfg.attention.head_dim},
        {"model_dim", cfg.attention.model_dim}}},
      {"mlp_hidden", cfg.mlp_hidden},
      {"attention_enabled", cfg.attention_enabled},
      {"multi_branch", cfg.multi_branch},
      {"theta_init", cfg.theta_init},
      {"beta_init", cfg.beta_init},
      {"cam_init", cfg.cam_init}};
}

void write_doubles(std::ofstream& out, const std::vector<double>& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_doubles(std::ifstream& in, std::vector<double>& v, size_t n,
                  const std::string& path) {
  v.resize(n);
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(n * sizeof(double)))
    throw IoError("checkpoint: truncated payload in " + path);
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& store,
                     const NetConfig& cfg, const Rng& rng, std::int64_t step) {
  nlohmann::json header;
  header["version"] = kCheckpointVersion;
  header["config"] = config_json(cfg);
  header["rng"] = {{"algorithm", std::string(Rng::kAlgorithm)},
                   {"seed", rng.seed()},
                   {"state", rng.state()}};
  header["step"] = step;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& e : store.entries())
    tensors.push_back({{"name", e.name},
                       {"shape", e.value.shape()},
                       {"adam_step", e.step}});
  header["tensors"] = std::move(tensors);
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("checkpoint: cannot write " + path);
  out.write(kMagic, sizeof kMagic);
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& e : store.entries()) {
    write_doubles(out, e.value.data_vec());
    std::vector<double> m = e.m, v = e.v;
    m.resize(static_cast<size_t>(e.value.size()), 0.0);
    v.resize(static_cast<size_t>(e.value.size()), 0.0);
    write_doubles(out, m);
    write_doubles(out, v);
  }
  if (!out) throw IoError("checkpoint: write failed for " + path);
}

namespace {

nlohmann::json read_checkpoint_header(std::ifstream& in,
                                      const std::string& path) {
  if (!in) throw IoError("checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (in.gcount() != sizeof magic ||
      !std::equal(std::begin(magic), std::end(magic), std::begin(kMagic)))
    throw IoError("checkpoint: bad magic in " + path);
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (in.gcount() != sizeof len)
    throw IoError("checkpoint: truncated header in " + path);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (in.gcount() != static_cast<std::streamsize>(len))
    throw IoError("checkpoint: truncated header in " + path);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint: bad header in " + path + ": " + e.what());
  }
  if (header.value("version", -1) != kCheckpointVersion)
    throw ValidationError("checkpoint: unsupported version in " + path);
  return header;
}

}  // namespace

NetConfig read_checkpoint_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  nlohmann::json header = read_checkpoint_header(in, path);
  NetConfig cfg;
  try {
    const auto& cj = header.at("config");
    cj.at("input_resolution").get_to(cfg.input_resolution);
    cj.at("backbone_stage_channels").get_to(cfg.backbone_stage_channels);
    cj.at("model_dim").get_to(cfg.model_dim);
    cj.at("attention").at("heads").get_to(cfg.attention.heads);
    cj.at("attention").at("head_dim").get_to(cfg.attention.head_dim);
    cj.at("attention").at("model_dim").get_to(cfg.attention.model_dim);
    cj.at("mlp_hidden").get_to(cfg.mlp_hidden);
    cj.at("attention_enabled").get_to(cfg.attention_enabled);
    cj.at("multi_branch").get_to(cfg.multi_branch);
    cj.at("theta_init").get_to(cfg.theta_init);
    cj.at("beta_init").get_to(cfg.beta_init);
    cj.at("cam_init").get_to(cfg.cam_init);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint: bad config in " + path + ": " + e.what());
  }
  cfg.validate();
  return cfg;
}

void load_checkpoint(const std::string& path, ParamStore& store,
                     const NetConfig& cfg, Rng& rng, std::int64_t& step) {
  std::ifstream in(path, std::ios::binary);
  nlohmann::json header = read_checkpoint_header(in, path);
  if (header.at("config") != config_json(cfg))
    throw ValidationError("checkpoint: config mismatch in " + path);
  const auto& rj = header.at("rng");
  if (rj.at("algorithm").get<std::string>() != Rng::kAlgorithm)
    throw ValidationError("checkpoint: unknown rng algorithm in " + path);

  const auto& tensors = header.at("tensors");
  if (tensors.size() != store.size())
    throw ValidationError("checkpoint: tensor count mismatch in " + path);
  for (size_t i = 0; i < tensors.size(); ++i) {
    const auto& tj = tensors[i];
    auto& e = store.entries()[i];
    if (tj.at("name").get<std::string>() != e.name)
      throw ValidationError("checkpoint: tensor name mismatch at index " +
                            std::to_string(i) + " in " + path);
    if (tj.at("shape").get<Shape>() != e.value.shape())
      throw ValidationError("checkpoint: shape mismatch for " + e.name +
                            " in " + path);
    const size_t n = static_cast<size_t>(e.value.size());
    read_doubles(in, e.value.data_vec(), n, path);
    read_doubles(in, e.m, n, path);
    read_doubles(in, e.v, n, path);
    e.step = tj.at("adam_step").get<std::int64_t>();
    e.value.zero_grad();
  }
  rng.restore(header.at("rng").at("seed").get<std::uint64_t>(),
              header.at("rng").at("state").get<std::uint64_t>());
  step = header.at("step").get<std::int64_t>();
}

}  // namespace sbn
