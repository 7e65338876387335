#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "figo/config.hpp"
#include "figo/dataset.hpp"
#include "figo/degrade.hpp"
#include "figo/error.hpp"
#include "figo/gabor.hpp"
#include "figo/image.hpp"
#include "figo/oneshot.hpp"
#include "figo/pipeline.hpp"
#include "figo/pix2pix.hpp"
#include "figo/rng.hpp"
#include "figo/synth.hpp"

namespace figo::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
  auto logger = std::make_shared<spdlog::logger>("figo", sink);
  logger->set_pattern("[%l] %v");
  spdlog::level::level_enum level = spdlog::level::info;
  if (const char* env = std::getenv("FIGO_LOG")) {
    const std::string name = env;
    if (name == "error") level = spdlog::level::err;
    else if (name == "warn") level = spdlog::level::warn;
    else if (name == "info") level = spdlog::level::info;
    else if (name == "debug") level = spdlog::level::debug;
    else logger->warn("ignoring FIGO_LOG={}, expected error|warn|info|debug", name);
  }
  logger->set_level(level);
  return logger;
}

// Flags shared by the commands that build or train from a run configuration.
struct RunFlags {
  std::string config;
  std::string data;

  RunConfig resolve() const {
    RunConfig cfg = config.empty() ? run_config_from_json(json::object()) : load_config(config);
    if (!data.empty()) cfg.paths.data_root = fs::path(data);
    cfg.sync_seeds();
    cfg.validate();
    return cfg;
  }
};

void add_run_flags(CLI::App* cmd, RunFlags& flags) {
  cmd->add_option("--config", flags.config, "Run configuration (JSON); defaults when omitted");
  cmd->add_option("--data", flags.data, "SOCOFing-style dataset root; synthetic data when omitted");
}

json provenance(const RunConfig& cfg) {
  return {{"figo_version", FIGO_VERSION}, {"config", to_json(cfg)}};
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

FingerprintImage at_resolution(const FingerprintImage& img, int resolution) {
  if (img.width() == resolution && img.height() == resolution) return img;
  return resize(img, resolution, resolution);
}

/// "none", "gabor", "gabor_then_pix2pix:<ckpt>" or a pix2pix checkpoint path.
EnhancerSpec parse_enhancer_arg(const std::string& arg) {
  EnhancerSpec spec;
  const std::string chained = "gabor_then_pix2pix:";
  if (arg == "none") {
    spec.method = EnhanceMethod::None;
  } else if (arg == "gabor") {
    spec.method = EnhanceMethod::Gabor;
  } else if (arg.rfind(chained, 0) == 0) {
    spec.method = EnhanceMethod::GaborThenPix2Pix;
    spec.checkpoint = arg.substr(chained.size());
  } else {
    spec.method = EnhanceMethod::Pix2Pix;
    spec.checkpoint = arg;
  }
  return spec;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  auto log = make_logger(err);

  CLI::App app{"figo: fingerprint enhancement and one-shot identification", "figo"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  // version
  auto* version_cmd = app.add_subcommand("version", "Print the version");

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "Catalogue a dataset and write a subject split");
  std::string ingest_root, ingest_manifest, ingest_out, ingest_config;
  auto* ingest_root_opt = ingest_cmd->add_option("--data", ingest_root, "Dataset root (Real/, Altered/)");
  auto* ingest_manifest_opt =
      ingest_cmd->add_option("--manifest", ingest_manifest, "Manifest CSV instead of a directory tree");
  ingest_root_opt->excludes(ingest_manifest_opt);
  ingest_cmd->add_option("--config", ingest_config, "Run configuration for split ratios and seed");
  ingest_cmd->add_option("--out", ingest_out, "Split JSON to write")->required();

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Write the synthetic set as a SOCOFing-style tree");
  RunFlags synth_flags;
  synth_cmd->add_option("--config", synth_flags.config, "Run configuration (JSON)");
  std::string synth_out;
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();

  // degrade
  auto* degrade_cmd = app.add_subcommand("degrade", "Apply one alteration operator");
  std::string degrade_kind, degrade_level, degrade_in, degrade_out, degrade_config;
  std::uint64_t degrade_seed = 0;
  degrade_cmd->add_option("--kind", degrade_kind, "obliteration | central_rotation | z_cut")->required();
  degrade_cmd->add_option("--level", degrade_level, "easy | medium | hard")->required();
  degrade_cmd->add_option("--seed", degrade_seed, "Operator seed");
  degrade_cmd->add_option("--in", degrade_in, "Input image")->required();
  degrade_cmd->add_option("--out", degrade_out, "Output image")->required();
  degrade_cmd->add_option("--config", degrade_config, "Run configuration supplying the level table");

  // enhance
  auto* enhance_cmd = app.add_subcommand("enhance", "Enhance one image");
  std::string enhance_method = "gabor", enhance_in, enhance_out, enhance_ckpt, enhance_fields;
  enhance_cmd->add_option("--method", enhance_method, "none | gabor | pix2pix | gabor_then_pix2pix");
  enhance_cmd->add_option("--in", enhance_in, "Input image")->required();
  enhance_cmd->add_option("--out", enhance_out, "Output image")->required();
  enhance_cmd->add_option("--checkpoint", enhance_ckpt, "Pix2pix checkpoint for the pix2pix methods");
  enhance_cmd->add_option("--fields", enhance_fields, "Also write orientation/frequency fields as JSON");

  // train-pix2pix
  auto* tp_cmd = app.add_subcommand("train-pix2pix", "Train the enhancer on (degraded, clean) pairs");
  RunFlags tp_flags;
  add_run_flags(tp_cmd, tp_flags);
  std::string tp_out, tp_metrics;
  tp_cmd->add_option("--out", tp_out, "Checkpoint path (a .json manifest is written next to it)")->required();
  tp_cmd->add_option("--metrics", tp_metrics, "Per-epoch CSV (default <out>.metrics.csv)");

  // train-oneshot
  auto* to_cmd = app.add_subcommand("train-oneshot", "Train the siamese identifier");
  RunFlags to_flags;
  add_run_flags(to_cmd, to_flags);
  std::string to_out, to_metrics;
  bool to_faithful = false;
  to_cmd->add_option("--out", to_out, "Checkpoint path (a .json manifest is written next to it)")->required();
  to_cmd->add_option("--metrics", to_metrics, "Per-epoch CSV (default <out>.metrics.csv)");
  to_cmd->add_flag("--paper-faithful", to_faithful, "Use a 2-dimensional embedding");

  // enroll
  auto* enroll_cmd = app.add_subcommand("enroll", "Add (or remove) a gallery identity");
  std::string enroll_gallery, enroll_model, enroll_subject, enroll_image;
  bool enroll_remove = false;
  enroll_cmd->add_option("--gallery", enroll_gallery, "Gallery file; created when absent")->required();
  enroll_cmd->add_option("--model", enroll_model, "Identifier checkpoint");
  enroll_cmd->add_option("--subject", enroll_subject, "Identity key")->required();
  enroll_cmd->add_option("--image", enroll_image, "Reference image");
  enroll_cmd->add_flag("--remove", enroll_remove, "Remove the identity instead");

  // identify
  auto* identify_cmd = app.add_subcommand("identify", "Rank gallery identities against a probe");
  std::string id_gallery, id_model, id_probe, id_enhancer = "none";
  identify_cmd->add_option("--gallery", id_gallery, "Gallery file")->required();
  identify_cmd->add_option("--model", id_model, "Identifier checkpoint")->required();
  identify_cmd->add_option("--probe", id_probe, "Probe image")->required();
  identify_cmd->add_option("--enhancer", id_enhancer,
                           "none | gabor | <pix2pix checkpoint> | gabor_then_pix2pix:<checkpoint>");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Run the level x method experiment grid");
  RunFlags eval_flags;
  add_run_flags(eval_cmd, eval_flags);
  std::string eval_out = ".", eval_replay;
  bool eval_figs = false;
  eval_cmd->add_option("--out", eval_out, "Output directory for results.csv and summary.json");
  eval_cmd->add_option("--replay", eval_replay, "Rerun the configuration embedded in a results.csv")
      ->excludes(eval_cmd->get_option("--config"));
  eval_cmd->add_flag("--figs", eval_figs, "Also write <out>/figs/*.svg");

  // report
  auto* report_cmd = app.add_subcommand("report", "Render SVG bar charts from results.csv");
  std::string report_results, report_out = "figs";
  report_cmd->add_option("--results", report_results, "results.csv")->required();
  report_cmd->add_option("--out", report_out, "Output directory");

  std::vector<std::string> argv_store{"figo"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  auto usage = [&](CLI::App* cmd, const std::string& msg) {
    err << msg << "\n" << cmd->help();
    return kExitUsage;
  };

  try {
    if (version_cmd->parsed()) {
      out << FIGO_VERSION << '\n';
      return kExitOk;
    }

    if (ingest_cmd->parsed()) {
      if (ingest_root.empty() && ingest_manifest.empty()) {
        return usage(ingest_cmd, "one of --data or --manifest is required");
      }
      RunFlags flags{ingest_config, {}};
      const RunConfig cfg = flags.resolve();
      const Catalog catalog = ingest_root.empty() ? load_manifest(ingest_manifest) : build_catalog(ingest_root);
      for (const auto& issue : catalog.skipped) {
        log->warn("skipped {}: {}", issue.path.string(), issue.reason);
      }
      const SplitPlan split = make_split(catalog, cfg.split, cfg.seeds.data);
      json doc = to_json(split);
      doc["records"] = catalog.records.size();
      doc["skipped"] = catalog.skipped.size();
      doc["provenance"] = provenance(cfg);
      write_json(ingest_out, doc);
      out << json{{"records", catalog.records.size()},
                  {"skipped", catalog.skipped.size()},
                  {"subjects", catalog.subjects().size()},
                  {"train", split.train.size()},
                  {"test", split.test.size()},
                  {"verify", split.verify.size()}}
                 .dump()
          << '\n';
      return kExitOk;
    }

    if (synth_cmd->parsed()) {
      const RunConfig cfg = synth_flags.resolve();
      const fs::path root = synth_out;
      const std::string comment = "figo synth " + to_json(cfg).dump();
      std::size_t written = 0;
      for (int id = 1; id <= cfg.synthetic.subjects; ++id) {
        const auto images = synth_subject(cfg.seeds.data, id, 1, cfg.resolution);
        FilenameMeta meta;
        meta.subject_id = id;
        meta.gender = Gender::M;
        meta.hand = Hand::Left;
        meta.finger = Finger::Index;
        meta.extension = "pgm";
        fs::create_directories(root / "Real");
        save_image(images[0], root / "Real" / render_filename(meta), comment);
        ++written;
        for (Level level : {Level::Easy, Level::Medium, Level::Hard}) {
          const fs::path dir = root / "Altered" / ("Altered-" + std::string(to_string(level)));
          fs::create_directories(dir);
          for (AlterationKind kind : kAlterations) {
            DegradeParams p;
            p.kind = kind;
            p.level = level;
            p.level_table = cfg.level_table;
            p.seed = derive_seed(derive_seed(cfg.seeds.data, static_cast<std::uint64_t>(id)),
                                 static_cast<std::uint64_t>(kind) * 8 + static_cast<std::uint64_t>(level));
            meta.kind = kind;
            save_image(degrade(images[0], p), dir / render_filename(meta), comment);
            ++written;
          }
          meta.kind = AlterationKind::None;
        }
      }
      write_json(root / "provenance.json", provenance(cfg));
      log->info("wrote {} images under {}", written, root.string());
      out << json{{"images", written}, {"root", root.string()}}.dump() << '\n';
      return kExitOk;
    }

    if (degrade_cmd->parsed()) {
      RunFlags flags{degrade_config, {}};
      const RunConfig cfg = flags.resolve();
      DegradeParams p;
      p.kind = parse_kind(degrade_kind);
      p.level = parse_level(degrade_level);
      if (p.kind == AlterationKind::None || p.level == Level::Clean) {
        return usage(degrade_cmd, "--kind and --level must name an alteration");
      }
      p.seed = degrade_seed;
      p.level_table = cfg.level_table;
      const FingerprintImage img = load_image(degrade_in);
      const json meta = {{"kind", to_string(p.kind)},
                         {"level", to_string(p.level)},
                         {"seed", p.seed},
                         {"level_table", to_json(p.level_table)}};
      save_image(degrade(img, p), degrade_out, "figo degrade " + meta.dump());
      return kExitOk;
    }

    if (enhance_cmd->parsed()) {
      EnhancerSpec spec;
      spec.method = parse_method(enhance_method);
      if (!enhance_ckpt.empty()) spec.checkpoint = fs::path(enhance_ckpt);
      const FingerprintImage img = load_image(enhance_in);
      const FingerprintImage result = figo_enhance(spec, img);
      json meta = {{"method", to_string(spec.method)}};
      if (spec.checkpoint) meta["checkpoint"] = spec.checkpoint->string();
      save_image(result, enhance_out, "figo enhance " + meta.dump());
      if (!enhance_fields.empty()) {
        const GaborSettings settings;
        const FingerprintImage unit = normalize(img, RangeTag::Unit);
        const OrientationField orient = estimate_orientation(unit, settings.block_size, settings.coherence_threshold);
        const FrequencyField freq = estimate_frequency(unit, orient);
        write_json(enhance_fields, {{"orientation", to_json(orient)}, {"frequency", to_json(freq)}});
      }
      return kExitOk;
    }

    if (tp_cmd->parsed()) {
      const RunConfig cfg = tp_flags.resolve();
      const FingerprintSet set = load_fingerprint_set(cfg);
      const SplitPlan split = experiment_split(cfg, set);
      const auto pairs = enhancer_training_pairs(cfg, set, split);
      log->info("training pix2pix on {} pairs for {} epochs", pairs.size(), cfg.pix2pix.epochs);
      const fs::path metrics_path = tp_metrics.empty() ? fs::path(tp_out + ".metrics.csv") : fs::path(tp_metrics);
      if (metrics_path.has_parent_path()) fs::create_directories(metrics_path.parent_path());
      std::ofstream metrics(metrics_path, std::ios::trunc);
      if (!metrics) throw Error(ErrorCode::IoError, "cannot write " + metrics_path.string());
      metrics << "# config: " << to_json(cfg).dump() << "\nepoch,d_loss,g_adv,g_l1\n" << std::flush;
      Pix2PixModel model = build_models(cfg.resolution, cfg.pix2pix);
      train_pix2pix(model, pairs, [&](const EpochMetrics& m) {
        metrics << m.epoch << ',' << m.mean.d_loss << ',' << m.mean.g_adv_loss << ',' << m.mean.g_l1_loss
                << '\n'
                << std::flush;
        log->info("epoch {} d={:.4f} g_adv={:.4f} g_l1={:.4f}", m.epoch, m.mean.d_loss, m.mean.g_adv_loss,
                  m.mean.g_l1_loss);
      });
      if (fs::path(tp_out).has_parent_path()) fs::create_directories(fs::path(tp_out).parent_path());
      save_checkpoint(model, tp_out);
      out << json{{"checkpoint", tp_out}, {"checksum", model.checksum()}, {"epochs", model.epoch}}.dump() << '\n';
      return kExitOk;
    }

    if (to_cmd->parsed()) {
      RunConfig cfg = to_flags.resolve();
      if (to_faithful) cfg.oneshot.embedding_dim = 2;
      const FingerprintSet set = load_fingerprint_set(cfg);
      const SplitPlan split = experiment_split(cfg, set);
      const auto pairs = identity_training_pairs(cfg, set, split);
      log->info("training identifier on {} pairs for {} epochs", pairs.size(), cfg.oneshot.epochs);
      IdentityModel model = build_identity_model(cfg.resolution, cfg.oneshot);
      const TrainReport report = train_oneshot(model, pairs);
      const fs::path metrics_path = to_metrics.empty() ? fs::path(to_out + ".metrics.csv") : fs::path(to_metrics);
      if (metrics_path.has_parent_path()) fs::create_directories(metrics_path.parent_path());
      std::ofstream metrics(metrics_path, std::ios::trunc);
      if (!metrics) throw Error(ErrorCode::IoError, "cannot write " + metrics_path.string());
      metrics << "# config: " << to_json(cfg).dump() << "\nepoch,loss\n";
      for (std::size_t e = 0; e < report.epoch_loss.size(); ++e) {
        metrics << e + 1 << ',' << report.epoch_loss[e] << '\n';
        log->info("epoch {} loss={:.4f}", e + 1, report.epoch_loss[e]);
      }
      if (fs::path(to_out).has_parent_path()) fs::create_directories(fs::path(to_out).parent_path());
      save_checkpoint(model, to_out);
      out << json{{"checkpoint", to_out}, {"checksum", report.checksum}, {"epoch_loss", report.epoch_loss}}.dump()
          << '\n';
      return kExitOk;
    }

    if (enroll_cmd->parsed()) {
      const bool exists = fs::exists(enroll_gallery);
      if (enroll_remove) {
        if (!exists) throw Error(ErrorCode::FileNotFound, "no gallery at " + enroll_gallery);
        Gallery gallery = Gallery::load(enroll_gallery);
        const bool removed = gallery.remove(enroll_subject);
        if (!removed) log->warn("{} was not enrolled", enroll_subject);
        gallery.save(enroll_gallery);
        out << json{{"removed", removed}, {"size", gallery.size()}}.dump() << '\n';
        return kExitOk;
      }
      if (enroll_model.empty() || enroll_image.empty()) {
        return usage(enroll_cmd, "--model and --image are required to enroll");
      }
      IdentityModel model = load_identity_checkpoint(enroll_model);
      Gallery gallery = exists ? Gallery::load(enroll_gallery) : Gallery(model.checksum(), model.embedding_dim());
      enroll(model, gallery, enroll_subject, at_resolution(load_image(enroll_image), model.resolution()));
      gallery.save(enroll_gallery);
      out << json{{"enrolled", enroll_subject}, {"size", gallery.size()}}.dump() << '\n';
      return kExitOk;
    }

    if (identify_cmd->parsed()) {
      IdentityModel model = load_identity_checkpoint(id_model);
      const Gallery gallery = Gallery::load(id_gallery);
      Enhancer enhancer(parse_enhancer_arg(id_enhancer));
      const FingerprintImage probe = enhancer(at_resolution(load_image(id_probe), model.resolution()));
      out << to_json(identify(model, probe, gallery)).dump() << '\n';
      return kExitOk;
    }

    if (eval_cmd->parsed()) {
      RunConfig cfg;
      if (!eval_replay.empty()) {
        cfg = config_from_results(eval_replay);
        if (!eval_flags.data.empty()) cfg.paths.data_root = fs::path(eval_flags.data);
      } else {
        cfg = eval_flags.resolve();
      }
      const SuiteResult result = run_experiment_suite(cfg, [&](const std::string& msg) { log->info("{}", msg); });
      write_suite_outputs(result, eval_out);
      json report = {{"results", (fs::path(eval_out) / "results.csv").string()},
                     {"summary", (fs::path(eval_out) / "summary.json").string()}};
      if (eval_figs) {
        const auto rows = read_results_csv(fs::path(eval_out) / "results.csv");
        json figs = json::array();
        for (const auto& p : write_report_svgs(rows, fs::path(eval_out) / "figs")) figs.push_back(p.string());
        report["figs"] = figs;
      }
      out << report.dump() << '\n';
      return kExitOk;
    }

    if (report_cmd->parsed()) {
      const auto rows = read_results_csv(report_results);
      json figs = json::array();
      for (const auto& p : write_report_svgs(rows, report_out)) figs.push_back(p.string());
      out << json{{"figs", figs}}.dump() << '\n';
      return kExitOk;
    }
  } catch (const Error& e) {
    err << json{{"code", to_string(e.code())}, {"message", e.what()}}.dump() << '\n';
    return kExitDomainError;
  } catch (const std::exception& e) {
    err << json{{"code", "IoError"}, {"message", e.what()}}.dump() << '\n';
    return kExitDomainError;
  }
  return usage(&app, "no subcommand given");
}

}  // namespace figo::cli
