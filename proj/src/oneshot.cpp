#include "figo/oneshot.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>

#include "figo/error.hpp"
#include "figo/nn/serialize.hpp"
#include "figo/rng.hpp"

namespace figo {
namespace {

constexpr int kGalleryFormatVersion = 1;
constexpr double kInitialSameLogit = 3.0;

nn::Tensor stack_unit(std::span<const FingerprintImage> images, int resolution) {
  nn::Tensor t({static_cast<int>(images.size()), 1, resolution, resolution});
  for (std::size_t i = 0; i < images.size(); ++i) {
    const FingerprintImage& img = images[i];
    if (img.width() != resolution || img.height() != resolution) {
      throw Error(ErrorCode::ResolutionMismatch,
                  "identity model expects " + std::to_string(resolution) + "x" +
                      std::to_string(resolution) + ", got " + std::to_string(img.width()) + "x" +
                      std::to_string(img.height()));
    }
    const FingerprintImage u = normalize(img, RangeTag::Unit);
    std::copy(u.pixels().begin(), u.pixels().end(), t.sample(static_cast<int>(i)));
  }
  return t;
}

double sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double softplus_inverse(double y) { return y > 30 ? y : std::log(std::expm1(y)); }

std::vector<double> positive(const nn::Parameter& p) {
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = softplus(p.value[i]);
  return out;
}

}  // namespace

// ---- config -----------------------------------------------------------------

void OneshotConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::SchemaViolation, msg); };
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate > 0");
  if (epochs < 1) fail("epochs ≥ 1");
  if (embedding_dim < 1) fail("embedding_dim ≥ 1");
  if (head_width < 1) fail("head_width ≥ 1");
  if (batch_size < 1) fail("batch_size ≥ 1");
  if (negatives_per_positive && !(*negatives_per_positive >= 0.0)) {
    fail("negatives_per_positive ≥ 0 or \"all\"");
  }
  for (int c : encoder_channels) {
    if (c < 1) fail("encoder_channels entries ≥ 1");
  }
}

nlohmann::json to_json(const OneshotConfig& c) {
  nlohmann::json ratio = c.negatives_per_positive ? nlohmann::json(*c.negatives_per_positive)
                                                  : nlohmann::json("all");
  return {{"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"embedding_dim", c.embedding_dim},
          {"head_width", c.head_width},
          {"negatives_per_positive", ratio},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"encoder_channels", c.encoder_channels}};
}

OneshotConfig oneshot_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::SchemaViolation, "oneshot must be an object");
  OneshotConfig c;
  bool faithful = false;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "epochs") c.epochs = value.get<int>();
      else if (key == "embedding_dim") c.embedding_dim = value.get<int>();
      else if (key == "head_width") c.head_width = value.get<int>();
      else if (key == "batch_size") c.batch_size = value.get<int>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "encoder_channels") c.encoder_channels = value.get<std::array<int, 4>>();
      else if (key == "paper_faithful") faithful = value.get<bool>();
      else if (key == "negatives_per_positive") {
        if (value.is_string()) {
          if (value.get<std::string>() != "all") {
            throw Error(ErrorCode::SchemaViolation, "oneshot.negatives_per_positive: number or \"all\"");
          }
          c.negatives_per_positive.reset();
        } else {
          c.negatives_per_positive = value.get<double>();
        }
      } else {
        throw Error(ErrorCode::SchemaViolation, "unknown key 'oneshot." + key + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::SchemaViolation, "oneshot." + key + ": " + e.what());
    }
  }
  if (faithful) c.embedding_dim = 2;
  c.validate();
  return c;
}

// ---- model ------------------------------------------------------------------

IdentityModel::IdentityModel(int resolution, const OneshotConfig& config)
    : resolution_(resolution),
      config_(config),
      proj_("id.embed", config.encoder_channels.back(), config.embedding_dim),
      head_w0_("id.head0.weight", {static_cast<std::size_t>(config.head_width),
                                   static_cast<std::size_t>(config.embedding_dim)}),
      head_b0_("id.head0.bias", {static_cast<std::size_t>(config.head_width)}),
      head_w1_("id.head1.weight", {1, static_cast<std::size_t>(config.head_width)}),
      head_b1_("id.head1.bias", {1}) {
  config_.validate();
  if (resolution < 16 || resolution % 16 != 0) {
    throw Error(ErrorCode::BadResolution,
                "identity model needs a multiple of 16 px, got " + std::to_string(resolution));
  }
  int in = 1;
  for (std::size_t i = 0; i < config.encoder_channels.size(); ++i) {
    convs_.emplace_back("id.conv" + std::to_string(i), in, config.encoder_channels[i], 4, 2, 1);
    in = config.encoder_channels[i];
  }
}

nn::Tensor IdentityModel::encode(const nn::Tensor& x) {
  pre_.assign(convs_.size(), {});
  nn::Tensor h = x;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    pre_[i] = convs_[i].forward(h);
    h = nn::relu(pre_[i]);
  }
  pooled_from_ = h.shape;
  return proj_.forward(nn::global_avg_pool(h));
}

nn::Tensor IdentityModel::encode_backward(const nn::Tensor& grad) {
  nn::Tensor g = nn::global_avg_pool_backward(pooled_from_, proj_.backward(grad));
  for (std::size_t i = convs_.size(); i-- > 0;) {
    g = nn::relu_backward(pre_[i], g);
    g = convs_[i].backward(g, i > 0);
  }
  return g;
}

nn::Tensor IdentityModel::head_logits(const nn::Tensor& d) {
  const int n = d.shape.n;
  const int e = config_.embedding_dim;
  const int w = config_.head_width;
  const auto w0 = positive(head_w0_);
  const auto w1 = positive(head_w1_);
  head_in_ = d;
  head_pre_ = nn::Tensor({n, w, 1, 1});
  nn::Tensor z({n, 1, 1, 1});
  for (int i = 0; i < n; ++i) {
    const double* di = d.sample(i);
    double zi = head_b1_.value[0];
    for (int j = 0; j < w; ++j) {
      double h = head_b0_.value[j];
      for (int k = 0; k < e; ++k) h += w0[static_cast<std::size_t>(j) * e + k] * di[k];
      head_pre_.sample(i)[j] = h;
      zi -= w1[j] * std::max(h, 0.0);
    }
    z.sample(i)[0] = zi;
  }
  return z;
}

nn::Tensor IdentityModel::head_backward(const nn::Tensor& grad) {
  const int n = head_in_.shape.n;
  const int e = config_.embedding_dim;
  const int w = config_.head_width;
  const auto w0 = positive(head_w0_);
  const auto w1 = positive(head_w1_);
  nn::Tensor gd(head_in_.shape);
  for (int i = 0; i < n; ++i) {
    const double gz = grad.sample(i)[0];
    const double* di = head_in_.sample(i);
    head_b1_.grad[0] += gz;
    for (int j = 0; j < w; ++j) {
      const double h = head_pre_.sample(i)[j];
      if (!(h > 0)) continue;
      // z = b1 - sum_j softplus(v1_j) relu(h_j)
      head_w1_.grad[j] -= gz * h * nn::sigmoid(head_w1_.value[j]);
      const double gh = -gz * w1[j];
      head_b0_.grad[j] += gh;
      for (int k = 0; k < e; ++k) {
        const std::size_t idx = static_cast<std::size_t>(j) * e + k;
        head_w0_.grad[idx] += gh * di[k] * nn::sigmoid(head_w0_.value[idx]);
        gd.sample(i)[k] += gh * w0[idx];
      }
    }
  }
  return gd;
}

double IdentityModel::score(std::span<const double> a, std::span<const double> b) const {
  const int e = config_.embedding_dim;
  const int w = config_.head_width;
  double z = head_b1_.value[0];
  for (int j = 0; j < w; ++j) {
    double h = head_b0_.value[j];
    for (int k = 0; k < e; ++k) {
      const std::size_t idx = static_cast<std::size_t>(j) * e + k;
      h += softplus(head_w0_.value[idx]) * std::abs(a[k] - b[k]);
    }
    z -= softplus(head_w1_.value[j]) * std::max(h, 0.0);
  }
  return nn::sigmoid(z);
}

std::vector<nn::Parameter*> IdentityModel::encoder_parameters() {
  std::vector<nn::Parameter*> out;
  for (auto& c : convs_) {
    out.push_back(&c.weight);
    out.push_back(&c.bias);
  }
  out.push_back(&proj_.weight);
  out.push_back(&proj_.bias);
  return out;
}

std::vector<nn::Parameter*> IdentityModel::parameters() {
  auto out = encoder_parameters();
  for (nn::Parameter* p : {&head_w0_, &head_b0_, &head_w1_, &head_b1_}) out.push_back(p);
  return out;
}

std::vector<const nn::Parameter*> IdentityModel::parameters() const {
  auto mut = const_cast<IdentityModel*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

std::uint64_t IdentityModel::checksum() const {
  const auto params = parameters();
  return nn::checksum(params);
}

nlohmann::json IdentityModel::layer_plan() const {
  nlohmann::json convs = nlohmann::json::array();
  for (const auto& c : convs_) {
    convs.push_back({{"type", "conv"},
                     {"in", c.weight.dims[1]},
                     {"out", c.weight.dims[0]},
                     {"kernel", 4},
                     {"stride", 2},
                     {"padding", 1}});
  }
  return {{"encoder", convs},
          {"activation", "relu"},
          {"pool", "global_average"},
          {"embedding_dim", config_.embedding_dim},
          {"similarity", {{"input", "abs_difference"}, {"hidden", config_.head_width}, {"output", "sigmoid"}}}};
}

IdentityModel build_identity_model(int resolution, const OneshotConfig& config) {
  IdentityModel m(resolution, config);
  Rng rng(derive_seed(config.seed, 0x4F4E45));
  for (nn::Parameter* p : m.parameters()) {
    if (p->dims.size() < 2) continue;
    std::size_t fan_in = 1;
    for (std::size_t k = 1; k < p->dims.size(); ++k) fan_in *= p->dims[k];
    const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
    const bool head = p->name.starts_with("id.head");
    for (double& v : p->value) {
      v = rng.normal(0.0, sd);
      // Head weights are softplus-mapped; start them at |N(0, sd)|.
      if (head) v = softplus_inverse(std::abs(v) + 1e-3);
    }
  }
  // Identical inputs start at sigmoid(3) ~ 0.95. From 0, Adam at lr 1e-3
  // needs thousands of steps before any pair can score above 0.9.
  m.parameters().back()->value[0] = kInitialSameLogit;
  return m;
}

// ---- embedding & similarity -------------------------------------------------

std::vector<Embedding> embed_batch(IdentityModel& model, std::span<const FingerprintImage> images) {
  std::vector<Embedding> out;
  if (images.empty()) return out;
  const nn::Tensor e = model.encode(stack_unit(images, model.resolution()));
  const int dim = model.embedding_dim();
  for (int i = 0; i < e.shape.n; ++i) out.emplace_back(e.sample(i), e.sample(i) + dim);
  return out;
}

Embedding embed(IdentityModel& model, const FingerprintImage& img) {
  return embed_batch(model, std::span(&img, 1)).front();
}

std::vector<double> distance(IdentityModel& model, const FingerprintImage& a, const FingerprintImage& b) {
  const Embedding ea = embed(model, a);
  const Embedding eb = embed(model, b);
  std::vector<double> d(ea.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::abs(ea[i] - eb[i]);
  return d;
}

double similarity(IdentityModel& model, const FingerprintImage& a, const FingerprintImage& b) {
  return model.score(embed(model, a), embed(model, b));
}

// ---- pairs ------------------------------------------------------------------

std::vector<PairIndex> make_pair_indices(std::span<const IdentityImages> ids,
                                         std::optional<double> negatives_per_positive,
                                         std::uint64_t seed) {
  const bool any_multi = std::any_of(ids.begin(), ids.end(),
                                     [](const IdentityImages& i) { return i.images.size() >= 2; });
  if (ids.size() < 2 || !any_multi) {
    throw Error(ErrorCode::TooFewIdentities,
                "pairing needs at least 2 identities and one with 2+ images");
  }
  std::vector<PairIndex> positives;
  std::vector<PairIndex> negatives;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::size_t ni = ids[i].images.size();
    for (std::size_t a = 0; a < ni; ++a) {
      for (std::size_t b = a + 1; b < ni; ++b) positives.push_back({i, a, i, b, 1});
      for (std::size_t j = i + 1; j < ids.size(); ++j) {
        for (std::size_t b = 0; b < ids[j].images.size(); ++b) negatives.push_back({i, a, j, b, 0});
      }
    }
  }
  if (negatives_per_positive) {
    const auto want = static_cast<std::size_t>(
        std::llround(*negatives_per_positive * static_cast<double>(positives.size())));
    const std::size_t keep = std::min(want, negatives.size());
    Rng rng(derive_seed(seed, 0x5041495253ULL));
    // Partial Fisher-Yates: the first `keep` slots become a uniform sample.
    for (std::size_t k = 0; k < keep; ++k) {
      const std::size_t r = k + static_cast<std::size_t>(rng.below(negatives.size() - k));
      std::swap(negatives[k], negatives[r]);
    }
    negatives.resize(keep);
  }
  positives.insert(positives.end(), negatives.begin(), negatives.end());
  return positives;
}

std::vector<LabeledPair> make_pairs(std::span<const IdentityImages> ids,
                                    std::optional<double> negatives_per_positive,
                                    std::uint64_t seed) {
  std::vector<LabeledPair> out;
  for (const PairIndex& p : make_pair_indices(ids, negatives_per_positive, seed)) {
    out.push_back({ids[p.identity_a].images[p.image_a], ids[p.identity_b].images[p.image_b], p.label});
  }
  return out;
}

// ---- training ---------------------------------------------------------------

double pair_loss(IdentityModel& model, std::span<const LabeledPair> pairs, bool accumulate_grads) {
  const int n = static_cast<int>(pairs.size());
  std::vector<FingerprintImage> stacked;
  stacked.reserve(2 * pairs.size());
  for (const LabeledPair& p : pairs) stacked.push_back(p.a);
  for (const LabeledPair& p : pairs) stacked.push_back(p.b);
  std::vector<double> labels;
  for (const LabeledPair& p : pairs) labels.push_back(static_cast<double>(p.label));

  const nn::Tensor e = model.encode(stack_unit(stacked, model.resolution()));
  const int dim = model.embedding_dim();
  nn::Tensor d({n, dim, 1, 1});
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < dim; ++k) d.at(i, k, 0, 0) = std::abs(e.at(i, k, 0, 0) - e.at(n + i, k, 0, 0));
  }
  const nn::LossGrad loss = nn::bce_with_logits(model.head_logits(d), labels);
  if (accumulate_grads) {
    const nn::Tensor gd = model.head_backward(loss.grad);
    nn::Tensor ge(e.shape);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < dim; ++k) {
        const double g = gd.at(i, k, 0, 0) * sign(e.at(i, k, 0, 0) - e.at(n + i, k, 0, 0));
        ge.at(i, k, 0, 0) = g;
        ge.at(n + i, k, 0, 0) = -g;
      }
    }
    model.encode_backward(ge);
  }
  return loss.loss;
}

OneshotTrainer::OneshotTrainer(IdentityModel& model)
    : model_(model),
      opt_(model.parameters(), nn::AdamConfig{model.config().learning_rate, 0.9, 0.999, 1e-8}) {}

double OneshotTrainer::step(std::span<const LabeledPair> batch) {
  opt_.zero_grad();
  const double loss = pair_loss(model_, batch, true);
  if (!std::isfinite(loss)) throw Error(ErrorCode::NonFiniteLoss, "identity loss is not finite");
  opt_.step();
  return loss;
}

TrainReport train_oneshot(IdentityModel& model, std::span<const LabeledPair> pairs) {
  const bool has_pos = std::any_of(pairs.begin(), pairs.end(), [](const LabeledPair& p) { return p.label == 1; });
  const bool has_neg = std::any_of(pairs.begin(), pairs.end(), [](const LabeledPair& p) { return p.label == 0; });
  if (!has_pos || !has_neg) {
    throw Error(ErrorCode::DegeneratePairs, "training pairs must contain both labels");
  }
  const OneshotConfig& cfg = model.config();
  OneshotTrainer trainer(model);
  std::vector<std::size_t> order(pairs.size());
  TrainReport report;
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  std::vector<LabeledPair> batch;
  for (int ep = 0; ep < cfg.epochs; ++ep) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(cfg.seed, 0x5348554646ULL + static_cast<std::uint64_t>(ep)));
    rng.shuffle(std::span(order));
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(pairs[order[k]]);
      total += trainer.step(batch) * static_cast<double>(end - start);
    }
    report.epoch_loss.push_back(total / static_cast<double>(pairs.size()));
    model.epoch += 1;
  }
  report.checksum = model.checksum();
  return report;
}

// ---- identification ---------------------------------------------------------

nlohmann::json to_json(const Identification& id) {
  nlohmann::json ranking = nlohmann::json::array();
  for (const RankedEntry& r : id.ranking) ranking.push_back({{"key", r.key}, {"score", r.score}});
  return {{"best", id.best}, {"score", id.score}, {"ranking", ranking}};
}

std::vector<RankedEntry> rank_scores(std::vector<RankedEntry> scores) {
  std::sort(scores.begin(), scores.end(), [](const RankedEntry& a, const RankedEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.key < b.key;
  });
  return scores;
}

bool Gallery::contains(const std::string& key) const {
  return std::find(keys_.begin(), keys_.end(), key) != keys_.end();
}

std::span<const double> Gallery::embedding(std::size_t i) const {
  return std::span(data_).subspan(i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_));
}

void Gallery::add(const std::string& key, Embedding e) {
  if (static_cast<int>(e.size()) != dim_) {
    throw Error(ErrorCode::SchemaViolation, "embedding for '" + key + "' has dimension " +
                                                std::to_string(e.size()) + ", gallery uses " +
                                                std::to_string(dim_));
  }
  if (key.empty()) throw Error(ErrorCode::SchemaViolation, "identity key must not be empty");
  if (contains(key)) throw Error(ErrorCode::SchemaViolation, "identity '" + key + "' is already enrolled");
  keys_.push_back(key);
  data_.insert(data_.end(), e.begin(), e.end());
}

bool Gallery::remove(const std::string& key) {
  const auto it = std::find(keys_.begin(), keys_.end(), key);
  if (it == keys_.end()) return false;
  const auto i = static_cast<std::size_t>(it - keys_.begin());
  keys_.erase(it);
  const auto first = data_.begin() + static_cast<std::ptrdiff_t>(i * static_cast<std::size_t>(dim_));
  data_.erase(first, first + dim_);
  return true;
}

static_assert(std::endian::native == std::endian::little, "gallery files are little-endian");

void Gallery::save(const std::filesystem::path& path) const {
  nlohmann::json index = nlohmann::json::array();
  for (std::size_t i = 0; i < keys_.size(); ++i) index.push_back({{"key", keys_[i]}, {"row", i}});
  const nlohmann::json header = {{"format_version", kGalleryFormatVersion},
                                 {"model_checksum", model_checksum_},
                                 {"embedding_dim", dim_},
                                 {"entries", index}};
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write gallery " + path.string());
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(reinterpret_cast<const char*>(data_.data()),
            static_cast<std::streamsize>(data_.size() * sizeof(double)));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

Gallery Gallery::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, "gallery not found: " + path.string());
  auto corrupt = [&](const std::string& why) {
    return Error(ErrorCode::CorruptHeader, path.string() + ": " + why);
  };
  std::uint64_t len = 0;
  if (!in.read(reinterpret_cast<char*>(&len), sizeof len) || len > (1u << 30)) {
    throw corrupt("bad header length");
  }
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw corrupt("truncated header");
  try {
    const nlohmann::json header = nlohmann::json::parse(text);
    const int version = header.at("format_version").get<int>();
    if (version != kGalleryFormatVersion) {
      throw Error(ErrorCode::VersionMismatch, "gallery format_version " + std::to_string(version) +
                                                  " is not supported");
    }
    Gallery g(header.at("model_checksum").get<std::uint64_t>(), header.at("embedding_dim").get<int>());
    const auto& entries = header.at("entries");
    std::vector<double> row(static_cast<std::size_t>(g.dim_));
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].at("row").get<std::size_t>() != i) throw corrupt("entries out of order");
      if (!in.read(reinterpret_cast<char*>(row.data()),
                   static_cast<std::streamsize>(row.size() * sizeof(double)))) {
        throw corrupt("truncated embeddings");
      }
      g.add(entries[i].at("key").get<std::string>(), row);
    }
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw corrupt(e.what());
  }
}

void enroll(IdentityModel& model, Gallery& gallery, const std::string& key, const FingerprintImage& img) {
  if (gallery.model_checksum() != model.checksum() || gallery.embedding_dim() != model.embedding_dim()) {
    throw Error(ErrorCode::ShapeMismatch, "gallery was built with a different identity model");
  }
  gallery.add(key, embed(model, img));
}

Identification identify_embedding(const IdentityModel& model, std::span<const double> probe,
                                  const Gallery& gallery) {
  if (gallery.empty()) throw Error(ErrorCode::EmptyGallery, "gallery has no entries");
  if (gallery.embedding_dim() != model.embedding_dim() ||
      static_cast<int>(probe.size()) != model.embedding_dim()) {
    throw Error(ErrorCode::ShapeMismatch, "embedding dimension does not match the gallery");
  }
  std::vector<RankedEntry> scores;
  scores.reserve(gallery.size());
  for (std::size_t i = 0; i < gallery.size(); ++i) {
    scores.push_back({gallery.keys()[i], model.score(probe, gallery.embedding(i))});
  }
  Identification id;
  id.ranking = rank_scores(std::move(scores));
  id.best = id.ranking.front().key;
  id.score = id.ranking.front().score;
  return id;
}

Identification identify(IdentityModel& model, const FingerprintImage& probe, const Gallery& gallery) {
  if (gallery.empty()) throw Error(ErrorCode::EmptyGallery, "gallery has no entries");
  return identify_embedding(model, embed(model, probe), gallery);
}

// ---- checkpoints ------------------------------------------------------------

void save_checkpoint(const IdentityModel& model, const std::filesystem::path& path) {
  nn::write_weights(path, model.parameters());
  const nlohmann::json manifest = {{"format_version", 1},
                                   {"kind", "oneshot"},
                                   {"resolution", model.resolution()},
                                   {"layer_plan", model.layer_plan()},
                                   {"seed", model.config().seed},
                                   {"epoch", model.epoch},
                                   {"config", to_json(model.config())},
                                   {"checksum", model.checksum()}};
  const std::filesystem::path mpath(path.string() + ".json");
  std::ofstream out(mpath, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + mpath.string());
  out << manifest.dump(2) << '\n';
}

IdentityModel load_identity_checkpoint(const std::filesystem::path& path) {
  const std::filesystem::path mpath(path.string() + ".json");
  std::ifstream in(mpath);
  if (!in) throw Error(ErrorCode::MissingCheckpoint, "missing checkpoint manifest " + mpath.string());
  try {
    const nlohmann::json manifest = nlohmann::json::parse(in);
    const int version = manifest.at("format_version").get<int>();
    if (version != 1) {
      throw Error(ErrorCode::VersionMismatch,
                  "checkpoint format_version " + std::to_string(version) + " is not supported");
    }
    if (manifest.at("kind").get<std::string>() != "oneshot") {
      throw Error(ErrorCode::CorruptCheckpoint, mpath.string() + " is not an identity checkpoint");
    }
    OneshotConfig cfg;
    try {
      cfg = oneshot_config_from_json(manifest.at("config"));
    } catch (const Error& e) {
      throw Error(ErrorCode::CorruptCheckpoint, mpath.string() + ": " + e.what());
    }
    IdentityModel model(manifest.at("resolution").get<int>(), cfg);
    model.epoch = manifest.at("epoch").get<int>();
    nn::read_weights(path, model.parameters());
    if (model.checksum() != manifest.at("checksum").get<std::uint64_t>()) {
      throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": weight checksum mismatch");
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptCheckpoint, mpath.string() + ": " + e.what());
  }
}

}  // namespace figo
