#include "figo/pix2pix.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>

#include "figo/error.hpp"
#include "figo/nn/serialize.hpp"
#include "figo/rng.hpp"

namespace figo {
namespace {

constexpr double kLeak = 0.2;
constexpr double kInitStd = 0.02;

std::array<int, GeneratorNet::kDepth> encoder_channels(int base) {
  return {base, 2 * base, 4 * base, 8 * base, 8 * base, 8 * base};
}

bool all_finite(double v) { return std::isfinite(v); }

void add_into(nn::Tensor& dst, const nn::Tensor& src) {
  if (dst.data.empty()) {
    dst = src;
    return;
  }
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

void check_batch(const nn::Tensor& degraded, const nn::Tensor& clean, int resolution) {
  const nn::Shape want{degraded.shape.n, 1, resolution, resolution};
  if (degraded.shape.n < 1 || degraded.shape != want || clean.shape != want) {
    throw Error(ErrorCode::ShapeMismatch, "pix2pix batch " + nn::to_string(degraded.shape) +
                                              " / " + nn::to_string(clean.shape) +
                                              " does not match resolution " +
                                              std::to_string(resolution));
  }
}

nlohmann::json conv_entry(std::string_view kind, const nn::Parameter& w, int stride, int pad) {
  const bool transposed = kind == "convT";
  return {{"type", kind},
          {"in", w.dims[transposed ? 0 : 1]},
          {"out", w.dims[transposed ? 1 : 0]},
          {"kernel", w.dims[2]},
          {"stride", stride},
          {"padding", pad}};
}

}  // namespace

// ---- config -----------------------------------------------------------------

void Pix2PixTrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::SchemaViolation, msg); };
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate > 0");
  if (epochs < 1) fail("epochs ≥ 1");
  if (!(lambda_l1 >= 0.0) || !std::isfinite(lambda_l1)) fail("lambda_l1 ≥ 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) fail("beta1 in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) fail("beta2 in [0, 1)");
  if (batch_size < 1) fail("batch_size ≥ 1");
  if (generator_channels < 1) fail("generator_channels ≥ 1");
  if (discriminator_channels < 1) fail("discriminator_channels ≥ 1");
}

nlohmann::json to_json(const Pix2PixTrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"lambda_l1", c.lambda_l1},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"generator_channels", c.generator_channels},
          {"discriminator_channels", c.discriminator_channels}};
}

Pix2PixTrainConfig pix2pix_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::SchemaViolation, "pix2pix must be an object");
  Pix2PixTrainConfig c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "epochs") c.epochs = value.get<int>();
      else if (key == "beta1") c.beta1 = value.get<double>();
      else if (key == "beta2") c.beta2 = value.get<double>();
      else if (key == "lambda_l1") c.lambda_l1 = value.get<double>();
      else if (key == "batch_size") c.batch_size = value.get<int>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "generator_channels") c.generator_channels = value.get<int>();
      else if (key == "discriminator_channels") c.discriminator_channels = value.get<int>();
      else throw Error(ErrorCode::SchemaViolation, "unknown key 'pix2pix." + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::SchemaViolation, "pix2pix." + key + ": " + e.what());
    }
  }
  c.validate();
  return c;
}

// ---- generator --------------------------------------------------------------

GeneratorNet::GeneratorNet(int resolution, int base_channels)
    : resolution_(resolution), base_(base_channels) {
  const auto ch = encoder_channels(base_channels);
  down_.reserve(kDepth);
  up_.reserve(kDepth);
  for (int i = 0; i < kDepth; ++i) {
    const int in = i == 0 ? 1 : ch[i - 1];
    down_.emplace_back("g.down" + std::to_string(i), in, ch[i], 4, 2, 1);
  }
  for (int j = 0; j < kDepth; ++j) {
    const int in = j == 0 ? ch[kDepth - 1] : 2 * ch[kDepth - 1 - j];
    const int out = j + 1 < kDepth ? ch[kDepth - 2 - j] : 1;
    up_.emplace_back("g.up" + std::to_string(j), in, out, 4, 2, 1);
  }
}

nn::Tensor GeneratorNet::forward(const nn::Tensor& x) {
  enc_.assign(kDepth, {});
  cat_.assign(kDepth, {});
  enc_[0] = down_[0].forward(x);
  for (int i = 1; i < kDepth; ++i) enc_[i] = down_[i].forward(nn::leaky_relu(enc_[i - 1], kLeak));
  cat_[0] = enc_[kDepth - 1];
  nn::Tensor u = up_[0].forward(nn::relu(cat_[0]));
  for (int j = 1; j < kDepth; ++j) {
    cat_[j] = nn::concat_channels(u, enc_[kDepth - 1 - j]);
    u = up_[j].forward(nn::relu(cat_[j]));
  }
  out_ = nn::tanh(u);
  return out_;
}

nn::Tensor GeneratorNet::backward(const nn::Tensor& grad_out, bool need_input_grad) {
  std::vector<nn::Tensor> enc_grad(kDepth);
  nn::Tensor g = nn::tanh_backward(out_, grad_out);
  for (int j = kDepth - 1; j >= 1; --j) {
    const nn::Tensor gcat = nn::relu_backward(cat_[j], up_[j].backward(g));
    nn::Tensor gu;
    nn::Tensor ge;
    nn::split_channels(gcat, gcat.shape.c / 2, gu, ge);
    add_into(enc_grad[kDepth - 1 - j], ge);
    g = std::move(gu);
  }
  add_into(enc_grad[kDepth - 1], nn::relu_backward(cat_[0], up_[0].backward(g)));
  nn::Tensor dx;
  for (int i = kDepth - 1; i >= 0; --i) {
    const bool want = i > 0 || need_input_grad;
    nn::Tensor gin = down_[i].backward(enc_grad[i], want);
    if (i > 0) add_into(enc_grad[i - 1], nn::leaky_relu_backward(enc_[i - 1], gin, kLeak));
    else dx = std::move(gin);
  }
  return dx;
}

std::vector<nn::Parameter*> GeneratorNet::parameters() {
  std::vector<nn::Parameter*> out;
  for (auto& c : down_) {
    out.push_back(&c.weight);
    out.push_back(&c.bias);
  }
  for (auto& c : up_) {
    out.push_back(&c.weight);
    out.push_back(&c.bias);
  }
  return out;
}

std::vector<const nn::Parameter*> GeneratorNet::parameters() const {
  auto mut = const_cast<GeneratorNet*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

nlohmann::json GeneratorNet::layer_plan() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& c : down_) layers.push_back(conv_entry("conv", c.weight, 2, 1));
  for (const auto& c : up_) layers.push_back(conv_entry("convT", c.weight, 2, 1));
  return {{"kind", "unet"},
          {"encoder_activation", "leaky_relu(0.2)"},
          {"decoder_activation", "relu"},
          {"output_activation", "tanh"},
          {"layers", layers}};
}

// ---- discriminator ----------------------------------------------------------

DiscriminatorNet::DiscriminatorNet(int base_channels) : base_(base_channels) {
  const int b = base_channels;
  convs_.reserve(5);
  convs_.emplace_back("d.conv0", 2, b, 4, 2, 1);
  convs_.emplace_back("d.conv1", b, 2 * b, 4, 2, 1);
  convs_.emplace_back("d.conv2", 2 * b, 4 * b, 4, 2, 1);
  convs_.emplace_back("d.conv3", 4 * b, 8 * b, 4, 1, 1);
  convs_.emplace_back("d.conv4", 8 * b, 1, 4, 1, 1);
}

nn::Shape DiscriminatorNet::output_shape(int resolution) const {
  nn::Shape s{1, 2, resolution, resolution};
  for (const auto& c : convs_) s = c.output_shape(s);
  return s;
}

nn::Tensor DiscriminatorNet::forward(const nn::Tensor& condition, const nn::Tensor& candidate) {
  pre_.assign(4, {});
  nn::Tensor h = nn::concat_channels(condition, candidate);
  for (int i = 0; i < 4; ++i) {
    pre_[i] = convs_[i].forward(h);
    h = nn::leaky_relu(pre_[i], kLeak);
  }
  return convs_[4].forward(h);
}

nn::Tensor DiscriminatorNet::backward(const nn::Tensor& grad_out, bool need_input_grad) {
  nn::Tensor g = convs_[4].backward(grad_out);
  for (int i = 3; i >= 0; --i) {
    g = nn::leaky_relu_backward(pre_[i], g, kLeak);
    g = convs_[i].backward(g, i > 0 || need_input_grad);
  }
  if (!need_input_grad) return {};
  nn::Tensor gcond;
  nn::Tensor gcand;
  nn::split_channels(g, 1, gcond, gcand);
  return gcand;
}

std::vector<nn::Parameter*> DiscriminatorNet::parameters() {
  std::vector<nn::Parameter*> out;
  for (auto& c : convs_) {
    out.push_back(&c.weight);
    out.push_back(&c.bias);
  }
  return out;
}

std::vector<const nn::Parameter*> DiscriminatorNet::parameters() const {
  auto mut = const_cast<DiscriminatorNet*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

nlohmann::json DiscriminatorNet::layer_plan() const {
  nlohmann::json layers = nlohmann::json::array();
  const int strides[5] = {2, 2, 2, 1, 1};
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    layers.push_back(conv_entry("conv", convs_[i].weight, strides[i], 1));
  }
  return {{"kind", "patch"}, {"activation", "leaky_relu(0.2)"}, {"layers", layers}};
}

// ---- model ------------------------------------------------------------------

std::uint64_t Pix2PixModel::generator_checksum() const {
  const auto params = generator.parameters();
  return nn::checksum(params);
}

std::uint64_t Pix2PixModel::checksum() const {
  auto params = generator.parameters();
  const auto d = discriminator.parameters();
  params.insert(params.end(), d.begin(), d.end());
  return nn::checksum(params);
}

nlohmann::json Pix2PixModel::layer_plan() const {
  return {{"conv_layers", 17},
          {"generator", generator.layer_plan()},
          {"discriminator", discriminator.layer_plan()}};
}

Pix2PixModel build_models(int resolution, const Pix2PixTrainConfig& config) {
  if (resolution < 64 || (resolution & (resolution - 1)) != 0) {
    throw Error(ErrorCode::BadResolution,
                "resolution must be a power of two >= 64, got " + std::to_string(resolution));
  }
  config.validate();
  Pix2PixModel m{GeneratorNet(resolution, config.generator_channels),
                 DiscriminatorNet(config.discriminator_channels), config, resolution, 0};
  Rng rng(derive_seed(config.seed, 0x47414E));
  for (nn::Parameter* p : m.generator.parameters()) {
    if (p->dims.size() > 1) {
      for (double& v : p->value) v = rng.normal(0.0, kInitStd);
    }
  }
  for (nn::Parameter* p : m.discriminator.parameters()) {
    if (p->dims.size() > 1) {
      for (double& v : p->value) v = rng.normal(0.0, kInitStd);
    }
  }
  return m;
}

// ---- objectives -------------------------------------------------------------

GeneratorObjective generator_objective(Pix2PixModel& model, const nn::Tensor& degraded,
                                       const nn::Tensor& clean, double lambda,
                                       bool accumulate_grads) {
  const nn::Tensor fake = model.generator.forward(degraded);
  const nn::Tensor score = model.discriminator.forward(degraded, fake);
  const nn::LossGrad adv = nn::mse_to_constant(score, 1.0);
  const nn::LossGrad l1 = nn::mae(fake, clean);
  GeneratorObjective out{adv.loss + lambda * l1.loss, adv.loss, l1.loss};
  if (accumulate_grads) {
    nn::Tensor g = model.discriminator.backward(adv.grad, true);
    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += lambda * l1.grad.data[i];
    model.generator.backward(g, false);
  }
  return out;
}

double discriminator_objective(Pix2PixModel& model, const nn::Tensor& degraded,
                               const nn::Tensor& clean, const nn::Tensor& fake,
                               bool accumulate_grads) {
  const nn::LossGrad real = nn::mse_to_constant(model.discriminator.forward(degraded, clean), 1.0);
  if (accumulate_grads) model.discriminator.backward(real.grad, false);
  const nn::LossGrad gen = nn::mse_to_constant(model.discriminator.forward(degraded, fake), 0.0);
  if (accumulate_grads) model.discriminator.backward(gen.grad, false);
  return real.loss + gen.loss;
}

// ---- trainer ----------------------------------------------------------------

namespace {
nn::AdamConfig adam_config(const Pix2PixTrainConfig& c) {
  return {c.learning_rate, c.beta1, c.beta2, 1e-8};
}
}  // namespace

Pix2PixTrainer::Pix2PixTrainer(Pix2PixModel& model)
    : model_(model),
      g_opt_(model.generator.parameters(), adam_config(model.config)),
      d_opt_(model.discriminator.parameters(), adam_config(model.config)) {}

double Pix2PixTrainer::discriminator_step(const nn::Tensor& degraded, const nn::Tensor& clean,
                                          const nn::Tensor& fake) {
  check_batch(degraded, clean, model_.resolution);
  d_opt_.zero_grad();
  const double loss = discriminator_objective(model_, degraded, clean, fake, true);
  if (!all_finite(loss)) throw Error(ErrorCode::NonFiniteLoss, "discriminator loss is not finite");
  d_opt_.step();
  return loss;
}

StepMetrics Pix2PixTrainer::train_step(const nn::Tensor& degraded, const nn::Tensor& clean) {
  check_batch(degraded, clean, model_.resolution);
  StepMetrics m;
  const nn::Tensor fake = model_.generator.forward(degraded);
  m.d_loss = discriminator_step(degraded, clean, fake);

  g_opt_.zero_grad();
  const GeneratorObjective g =
      generator_objective(model_, degraded, clean, model_.config.lambda_l1, true);
  if (!all_finite(g.total)) throw Error(ErrorCode::NonFiniteLoss, "generator loss is not finite");
  g_opt_.step();
  m.g_adv_loss = g.adversarial;
  m.g_l1_loss = g.l1;
  return m;
}

// ---- data -------------------------------------------------------------------

nn::Tensor images_to_tensor(std::span<const FingerprintImage> images, RangeTag range) {
  if (images.empty()) throw Error(ErrorCode::ShapeMismatch, "empty image batch");
  const int w = images.front().width();
  const int h = images.front().height();
  nn::Tensor t({static_cast<int>(images.size()), 1, h, w});
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].width() != w || images[i].height() != h) {
      throw Error(ErrorCode::ShapeMismatch, "images in a batch must share dimensions");
    }
    const FingerprintImage norm = normalize(images[i], range);
    std::copy(norm.pixels().begin(), norm.pixels().end(), t.sample(static_cast<int>(i)));
  }
  return t;
}

std::vector<EpochMetrics> train_pix2pix(Pix2PixModel& model, std::span<const ImagePair> pairs,
                                        const std::function<void(const EpochMetrics&)>& on_epoch) {
  if (pairs.empty()) throw Error(ErrorCode::ShapeMismatch, "no training pairs");
  const int r = model.resolution;
  std::vector<FingerprintImage> degraded;
  std::vector<FingerprintImage> clean;
  degraded.reserve(pairs.size());
  clean.reserve(pairs.size());
  for (const ImagePair& p : pairs) {
    degraded.push_back(normalize(resize(p.degraded, r, r), RangeTag::Signed));
    clean.push_back(normalize(resize(p.clean, r, r), RangeTag::Signed));
  }

  Pix2PixTrainer trainer(model);
  std::vector<std::size_t> order(pairs.size());
  std::vector<EpochMetrics> history;
  const auto bs = static_cast<std::size_t>(model.config.batch_size);
  for (int e = 0; e < model.config.epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(model.config.seed, 0x45504F4348ULL + static_cast<std::uint64_t>(e)));
    rng.shuffle(std::span(order));
    EpochMetrics em{model.epoch + 1, {}};
    int steps = 0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      std::vector<FingerprintImage> xb;
      std::vector<FingerprintImage> yb;
      for (std::size_t k = start; k < end; ++k) {
        xb.push_back(degraded[order[k]]);
        yb.push_back(clean[order[k]]);
      }
      const StepMetrics s = trainer.train_step(images_to_tensor(xb, RangeTag::Signed),
                                               images_to_tensor(yb, RangeTag::Signed));
      em.mean.d_loss += s.d_loss;
      em.mean.g_adv_loss += s.g_adv_loss;
      em.mean.g_l1_loss += s.g_l1_loss;
      ++steps;
    }
    em.mean.d_loss /= steps;
    em.mean.g_adv_loss /= steps;
    em.mean.g_l1_loss /= steps;
    model.epoch = em.epoch;
    history.push_back(em);
    if (on_epoch) on_epoch(em);
  }
  return history;
}

FingerprintImage enhance(GeneratorNet& generator, const FingerprintImage& img) {
  const int r = generator.resolution();
  if (img.width() != r || img.height() != r) {
    throw Error(ErrorCode::ResolutionMismatch,
                "enhance expects " + std::to_string(r) + "x" + std::to_string(r) + ", got " +
                    std::to_string(img.width()) + "x" + std::to_string(img.height()));
  }
  const FingerprintImage in = normalize(img, RangeTag::Signed);
  nn::Tensor x({1, 1, r, r});
  std::copy(in.pixels().begin(), in.pixels().end(), x.data.begin());
  const nn::Tensor y = generator.forward(x);
  std::vector<double> px(y.data.size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = std::clamp(0.5 * (y.data[i] + 1.0), 0.0, 1.0);
  return FingerprintImage(r, r, RangeTag::Unit, std::move(px));
}

// ---- checkpoints ------------------------------------------------------------

namespace {

std::filesystem::path manifest_path(const std::filesystem::path& p) {
  return std::filesystem::path(p.string() + ".json");
}

std::vector<const nn::Parameter*> all_params(const Pix2PixModel& m) {
  auto params = m.generator.parameters();
  const auto d = m.discriminator.parameters();
  params.insert(params.end(), d.begin(), d.end());
  return params;
}

}  // namespace

void save_checkpoint(const Pix2PixModel& model, const std::filesystem::path& path) {
  nn::write_weights(path, all_params(model));
  const nlohmann::json manifest = {{"format_version", kCheckpointFormatVersion},
                                   {"kind", "pix2pix"},
                                   {"resolution", model.resolution},
                                   {"layer_plan", model.layer_plan()},
                                   {"seed", model.config.seed},
                                   {"epoch", model.epoch},
                                   {"config", to_json(model.config)},
                                   {"checksum", model.checksum()}};
  std::ofstream out(manifest_path(path), std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + manifest_path(path).string());
  out << manifest.dump(2) << '\n';
}

Pix2PixModel load_checkpoint(const std::filesystem::path& path) {
  const auto mpath = manifest_path(path);
  std::ifstream in(mpath);
  if (!in) throw Error(ErrorCode::MissingCheckpoint, "missing checkpoint manifest " + mpath.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptCheckpoint, mpath.string() + ": " + e.what());
  }
  try {
    const int version = manifest.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw Error(ErrorCode::VersionMismatch, "checkpoint format_version " + std::to_string(version) +
                                                  " is not supported (expected " +
                                                  std::to_string(kCheckpointFormatVersion) + ")");
    }
    if (manifest.value("kind", "pix2pix") != "pix2pix") {
      throw Error(ErrorCode::CorruptCheckpoint, mpath.string() + " is not a pix2pix checkpoint");
    }
    Pix2PixTrainConfig cfg;
    try {
      cfg = pix2pix_config_from_json(manifest.at("config"));
    } catch (const Error& e) {
      throw Error(ErrorCode::CorruptCheckpoint, mpath.string() + ": " + e.what());
    }
    Pix2PixModel model = build_models(manifest.at("resolution").get<int>(), cfg);
    model.epoch = manifest.at("epoch").get<int>();
    auto params = model.generator.parameters();
    const auto d = model.discriminator.parameters();
    params.insert(params.end(), d.begin(), d.end());
    nn::read_weights(path, params);
    if (model.checksum() != manifest.at("checksum").get<std::uint64_t>()) {
      throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": weight checksum mismatch");
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptCheckpoint, mpath.string() + ": " + e.what());
  }
}

}  // namespace figo
