#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "figo/image.hpp"
#include "figo/nn/adam.hpp"
#include "figo/nn/layers.hpp"

namespace figo {

struct OneshotConfig {
  double learning_rate = 0.001;
  int epochs = 10;
  int embedding_dim = 64;
  int head_width = 6;
  /// Negatives per positive pair; nullopt means every cross-identity pair.
  std::optional<double> negatives_per_positive = 1.0;
  int batch_size = 16;
  std::uint64_t seed = 0;
  std::array<int, 4> encoder_channels{16, 32, 64, 64};

  void validate() const;
};

nlohmann::json to_json(const OneshotConfig& cfg);
/// Accepts "negatives_per_positive": number | "all" and the shorthand
/// "paper_faithful": true (sets embedding_dim to 2).
OneshotConfig oneshot_config_from_json(const nlohmann::json& j);

using Embedding = std::vector<double>;

/// Siamese identifier. One encoder instance serves both twins; a pair is run
/// as a single stacked batch so the weights are shared by construction.
class IdentityModel {
 public:
  /// Throws BadResolution unless resolution is a positive multiple of 16.
  IdentityModel(int resolution, const OneshotConfig& config);

  int resolution() const noexcept { return resolution_; }
  int embedding_dim() const noexcept { return config_.embedding_dim; }
  const OneshotConfig& config() const noexcept { return config_; }
  int epoch = 0;

  /// x: (n, 1, R, R) unit range -> (n, E, 1, 1). Caches for backward.
  nn::Tensor encode(const nn::Tensor& x);
  nn::Tensor encode_backward(const nn::Tensor& grad);
  /// d: (n, E, 1, 1) absolute differences -> (n, 1, 1, 1) logits.
  nn::Tensor head_logits(const nn::Tensor& d);
  nn::Tensor head_backward(const nn::Tensor& grad);
  /// Similarity from two cached embeddings; same value as similarity().
  double score(std::span<const double> a, std::span<const double> b) const;

  std::vector<nn::Parameter*> parameters();
  std::vector<const nn::Parameter*> parameters() const;
  std::vector<nn::Parameter*> encoder_parameters();
  /// Raw (pre-softplus) output weights of the head, used as a gradient probe.
  nn::Parameter& head_output_weight() { return head_w1_; }
  std::uint64_t checksum() const;
  nlohmann::json layer_plan() const;

 private:
  int resolution_;
  OneshotConfig config_;
  std::vector<nn::Conv2d> convs_;
  nn::Linear proj_;
  // Head weights are stored unconstrained and mapped through softplus: hidden
  // weights >= 0, output weights <= 0. The score therefore never rises when a
  // distance component grows, and identical inputs get the maximal score.
  nn::Parameter head_w0_;  // (width, E)
  nn::Parameter head_b0_;
  nn::Parameter head_w1_;  // (1, width)
  nn::Parameter head_b1_;
  std::vector<nn::Tensor> pre_;
  nn::Shape pooled_from_{};
  nn::Tensor head_in_;
  nn::Tensor head_pre_;
};

/// Weights from N(0, 0.02)-style fan-in scaled normals seeded by config.seed.
IdentityModel build_identity_model(int resolution, const OneshotConfig& config);

/// Throws ResolutionMismatch unless img is resolution x resolution.
Embedding embed(IdentityModel& model, const FingerprintImage& img);
std::vector<Embedding> embed_batch(IdentityModel& model, std::span<const FingerprintImage> images);
std::vector<double> distance(IdentityModel& model, const FingerprintImage& a, const FingerprintImage& b);
double similarity(IdentityModel& model, const FingerprintImage& a, const FingerprintImage& b);

struct IdentityImages {
  std::string key;
  std::vector<FingerprintImage> images;
};

struct PairIndex {
  std::size_t identity_a;
  std::size_t image_a;
  std::size_t identity_b;
  std::size_t image_b;
  int label;  // 1 same identity, 0 different
};

struct LabeledPair {
  FingerprintImage a;
  FingerprintImage b;
  int label;
};

/// Positives are every within-identity unordered pair; negatives are drawn
/// without replacement from all cross-identity pairs. Throws TooFewIdentities.
std::vector<PairIndex> make_pair_indices(std::span<const IdentityImages> ids,
                                         std::optional<double> negatives_per_positive,
                                         std::uint64_t seed);
std::vector<LabeledPair> make_pairs(std::span<const IdentityImages> ids,
                                    std::optional<double> negatives_per_positive,
                                    std::uint64_t seed);

/// Mean BCE over the pairs with gradients accumulated into the model.
double pair_loss(IdentityModel& model, std::span<const LabeledPair> pairs, bool accumulate_grads);

class OneshotTrainer {
 public:
  explicit OneshotTrainer(IdentityModel& model);
  /// One Adam step on the batch. Throws NonFiniteLoss before updating.
  double step(std::span<const LabeledPair> batch);

 private:
  IdentityModel& model_;
  nn::Adam opt_;
};

struct TrainReport {
  std::vector<double> epoch_loss;
  std::uint64_t checksum = 0;
};

/// Throws DegeneratePairs when only one label is present.
TrainReport train_oneshot(IdentityModel& model, std::span<const LabeledPair> pairs);

struct RankedEntry {
  std::string key;
  double score;
};

struct Identification {
  std::string best;
  double score = 0.0;
  std::vector<RankedEntry> ranking;
};

nlohmann::json to_json(const Identification& id);

/// Sorts by descending score, ties by ascending key.
std::vector<RankedEntry> rank_scores(std::vector<RankedEntry> scores);

class Gallery {
 public:
  Gallery() = default;
  Gallery(std::uint64_t model_checksum, int embedding_dim)
      : model_checksum_(model_checksum), dim_(embedding_dim) {}

  std::uint64_t model_checksum() const noexcept { return model_checksum_; }
  int embedding_dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return keys_.size(); }
  bool empty() const noexcept { return keys_.empty(); }
  bool contains(const std::string& key) const;
  const std::vector<std::string>& keys() const noexcept { return keys_; }
  std::span<const double> embedding(std::size_t i) const;

  /// Throws SchemaViolation on a duplicate key or wrong dimension.
  void add(const std::string& key, Embedding e);
  /// Returns false when the key is absent.
  bool remove(const std::string& key);

  void save(const std::filesystem::path& path) const;
  static Gallery load(const std::filesystem::path& path);

 private:
  std::uint64_t model_checksum_ = 0;
  int dim_ = 0;
  std::vector<std::string> keys_;
  std::vector<double> data_;
};

/// Embeds and adds. The gallery must have been created for this model.
void enroll(IdentityModel& model, Gallery& gallery, const std::string& key, const FingerprintImage& img);

Identification identify(IdentityModel& model, const FingerprintImage& probe, const Gallery& gallery);
Identification identify_embedding(const IdentityModel& model, std::span<const double> probe,
                                  const Gallery& gallery);

void save_checkpoint(const IdentityModel& model, const std::filesystem::path& path);
IdentityModel load_identity_checkpoint(const std::filesystem::path& path);

}  // namespace figo
