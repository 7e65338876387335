#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "figo/image.hpp"
#include "figo/nn/adam.hpp"
#include "figo/nn/layers.hpp"

namespace figo {

inline constexpr int kCheckpointFormatVersion = 1;

struct Pix2PixTrainConfig {
  double learning_rate = 0.0002;
  int epochs = 10;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double lambda_l1 = 100.0;
  int batch_size = 4;
  std::uint64_t seed = 0;
  int generator_channels = 8;      // ngf
  int discriminator_channels = 8;  // ndf

  /// Throws SchemaViolation("<field> ...") on the first bad field.
  void validate() const;
};

nlohmann::json to_json(const Pix2PixTrainConfig& cfg);
/// Missing keys keep their defaults; unknown keys are a SchemaViolation.
Pix2PixTrainConfig pix2pix_config_from_json(const nlohmann::json& j);

/// 6-down / 6-up encoder-decoder with skip connections (12 conv layers),
/// LeakyReLU(0.2) going down, ReLU going up, tanh output.
class GeneratorNet {
 public:
  static constexpr int kDepth = 6;

  GeneratorNet(int resolution, int base_channels);

  int resolution() const noexcept { return resolution_; }
  int base_channels() const noexcept { return base_; }

  /// x: (n, 1, R, R) in [-1, 1]. Caches activations for backward().
  nn::Tensor forward(const nn::Tensor& x);
  /// Gradient w.r.t. the pre-tanh output is derived internally; pass
  /// d(loss)/d(output). Returns d(loss)/d(x) when need_input_grad.
  nn::Tensor backward(const nn::Tensor& grad_out, bool need_input_grad = false);

  std::vector<nn::Parameter*> parameters();
  std::vector<const nn::Parameter*> parameters() const;
  /// Final transposed conv, the probe used for gradient checks.
  nn::ConvTranspose2d& output_layer() { return up_.back(); }
  nlohmann::json layer_plan() const;

 private:
  int resolution_;
  int base_;
  std::vector<nn::Conv2d> down_;
  std::vector<nn::ConvTranspose2d> up_;
  std::vector<nn::Tensor> enc_;   // pre-activation encoder outputs
  std::vector<nn::Tensor> cat_;   // decoder inputs before ReLU
  nn::Tensor out_;
};

/// 5-conv patch classifier over (condition, candidate) stacked as 2 channels.
class DiscriminatorNet {
 public:
  explicit DiscriminatorNet(int base_channels);

  nn::Shape output_shape(int resolution) const;
  nn::Tensor forward(const nn::Tensor& condition, const nn::Tensor& candidate);
  /// Returns d(loss)/d(candidate); parameter gradients are accumulated.
  nn::Tensor backward(const nn::Tensor& grad_out, bool need_input_grad = true);

  std::vector<nn::Parameter*> parameters();
  std::vector<const nn::Parameter*> parameters() const;
  nn::Conv2d& output_layer() { return convs_.back(); }
  nlohmann::json layer_plan() const;

 private:
  int base_;
  std::vector<nn::Conv2d> convs_;
  std::vector<nn::Tensor> pre_;  // pre-activation outputs of layers 0..3
};

struct Pix2PixModel {
  GeneratorNet generator;
  DiscriminatorNet discriminator;
  Pix2PixTrainConfig config;
  int resolution;
  int epoch = 0;

  std::uint64_t generator_checksum() const;
  std::uint64_t checksum() const;
  nlohmann::json layer_plan() const;
};

/// Throws BadResolution unless resolution is a power of two >= 64. Weights
/// are drawn from N(0, 0.02) using `seed`.
Pix2PixModel build_models(int resolution, const Pix2PixTrainConfig& config);

struct StepMetrics {
  double d_loss = 0.0;
  double g_adv_loss = 0.0;
  double g_l1_loss = 0.0;
};

struct GeneratorObjective {
  double total = 0.0;
  double adversarial = 0.0;
  double l1 = 0.0;
};

/// MSE(D(x, G(x)), 1) + lambda * MAE(G(x), clean). With accumulate_grads the
/// gradient of the total is added to generator (and discriminator) grads.
GeneratorObjective generator_objective(Pix2PixModel& model, const nn::Tensor& degraded,
                                       const nn::Tensor& clean, double lambda,
                                       bool accumulate_grads);

/// MSE(D(x, clean), 1) + MSE(D(x, fake), 0).
double discriminator_objective(Pix2PixModel& model, const nn::Tensor& degraded,
                               const nn::Tensor& clean, const nn::Tensor& fake,
                               bool accumulate_grads);

/// Holds the two Adam states; one instance per training run.
class Pix2PixTrainer {
 public:
  explicit Pix2PixTrainer(Pix2PixModel& model);

  /// One D update followed by one G update. Inputs are (n, 1, R, R) signed.
  /// Throws NonFiniteLoss (before applying the update) or ShapeMismatch.
  StepMetrics train_step(const nn::Tensor& degraded, const nn::Tensor& clean);

  /// D update only, against a caller-supplied fake batch.
  double discriminator_step(const nn::Tensor& degraded, const nn::Tensor& clean,
                            const nn::Tensor& fake);

 private:
  Pix2PixModel& model_;
  nn::Adam g_opt_;
  nn::Adam d_opt_;
};

struct ImagePair {
  FingerprintImage degraded;
  FingerprintImage clean;
};

struct EpochMetrics {
  int epoch = 0;
  StepMetrics mean;
};

/// Runs config.epochs epochs over the pairs (shuffled per epoch from the
/// config seed). Images are resized to the model resolution. The callback
/// fires once per finished epoch.
std::vector<EpochMetrics> train_pix2pix(
    Pix2PixModel& model, std::span<const ImagePair> pairs,
    const std::function<void(const EpochMetrics&)>& on_epoch = {});

/// Single deterministic forward pass. Throws ResolutionMismatch unless img is
/// exactly resolution x resolution. Output is tagged Unit.
FingerprintImage enhance(GeneratorNet& generator, const FingerprintImage& img);

/// Writes `path` (weights) and `path`.json (manifest).
void save_checkpoint(const Pix2PixModel& model, const std::filesystem::path& path);
Pix2PixModel load_checkpoint(const std::filesystem::path& path);

/// Stack images as (n, 1, h, w) in the given range.
nn::Tensor images_to_tensor(std::span<const FingerprintImage> images, RangeTag range);

}  // namespace figo
