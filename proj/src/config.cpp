#include "figo/config.hpp"

#include <fstream>
#include <sstream>

#include "figo/error.hpp"

namespace figo {
namespace {

using json = nlohmann::json;

void reject_seed(const json& section, const std::string& name) {
  if (section.is_object() && section.contains("seed")) {
    throw Error(ErrorCode::SchemaViolation,
                "unknown key '" + name + ".seed' (seeds live in seeds." + name + ")");
  }
}

template <typename Fn>
void for_keys(const json& j, const std::string& where, Fn&& fn) {
  if (!j.is_object()) throw Error(ErrorCode::SchemaViolation, where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    try {
      if (!fn(key, value)) throw Error(ErrorCode::SchemaViolation, "unknown key '" + path + "'");
    } catch (const json::exception& e) {
      throw Error(ErrorCode::SchemaViolation, path + ": " + e.what());
    }
  }
}

std::optional<std::filesystem::path> opt_path(const json& v) {
  if (v.is_null()) return std::nullopt;
  return std::filesystem::path(v.get<std::string>());
}

json path_json(const std::optional<std::filesystem::path>& p) {
  return p ? json(p->generic_string()) : json(nullptr);
}

}  // namespace

void RunConfig::sync_seeds() {
  pix2pix.seed = seeds.pix2pix;
  oneshot.seed = seeds.oneshot;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::SchemaViolation, msg); };
  if (resolution < 64 || (resolution & (resolution - 1)) != 0) {
    fail("resolution must be a power of two ≥ 64");
  }
  pix2pix.validate();
  oneshot.validate();
  level_table.validate();
  for (double r : {split.train, split.test, split.verify}) {
    if (!(r >= 0.0 && r <= 1.0)) fail("split ratios must lie in [0, 1]");
  }
  if (split.train + split.test + split.verify > 1.0 + 1e-9) fail("split ratios must sum to ≤ 1");
  if (synthetic.subjects < 3) fail("synthetic.subjects ≥ 3");
  if (synthetic.impressions < 2) fail("synthetic.impressions ≥ 2");
}

json to_json(const RunConfig& c) {
  json p2p = to_json(c.pix2pix);
  p2p.erase("seed");
  json one = to_json(c.oneshot);
  one.erase("seed");
  return {{"resolution", c.resolution},
          {"seeds",
           {{"data", c.seeds.data},
            {"pix2pix", c.seeds.pix2pix},
            {"oneshot", c.seeds.oneshot},
            {"eval", c.seeds.eval}}},
          {"pix2pix", p2p},
          {"oneshot", one},
          {"degrade", {{"level_table", to_json(c.level_table)}}},
          {"split", {{"train", c.split.train}, {"test", c.split.test}, {"verify", c.split.verify}}},
          {"synthetic", {{"subjects", c.synthetic.subjects}, {"impressions", c.synthetic.impressions}}},
          {"paths",
           {{"data_root", path_json(c.paths.data_root)},
            {"pix2pix_checkpoint", path_json(c.paths.pix2pix_checkpoint)},
            {"oneshot_checkpoint", path_json(c.paths.oneshot_checkpoint)}}}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  for_keys(j, "", [&](const std::string& key, const json& v) {
    if (key == "resolution") {
      c.resolution = v.get<int>();
    } else if (key == "seeds") {
      for_keys(v, "seeds", [&](const std::string& k, const json& s) {
        if (k == "data") c.seeds.data = s.get<std::uint64_t>();
        else if (k == "pix2pix") c.seeds.pix2pix = s.get<std::uint64_t>();
        else if (k == "oneshot") c.seeds.oneshot = s.get<std::uint64_t>();
        else if (k == "eval") c.seeds.eval = s.get<std::uint64_t>();
        else return false;
        return true;
      });
    } else if (key == "pix2pix") {
      reject_seed(v, "pix2pix");
      c.pix2pix = pix2pix_config_from_json(v);
    } else if (key == "oneshot") {
      reject_seed(v, "oneshot");
      c.oneshot = oneshot_config_from_json(v);
    } else if (key == "degrade") {
      for_keys(v, "degrade", [&](const std::string& k, const json& t) {
        if (k != "level_table") return false;
        c.level_table = level_table_from_json(t);
        return true;
      });
    } else if (key == "split") {
      for_keys(v, "split", [&](const std::string& k, const json& r) {
        if (k == "train") c.split.train = r.get<double>();
        else if (k == "test") c.split.test = r.get<double>();
        else if (k == "verify") c.split.verify = r.get<double>();
        else return false;
        return true;
      });
    } else if (key == "synthetic") {
      for_keys(v, "synthetic", [&](const std::string& k, const json& n) {
        if (k == "subjects") c.synthetic.subjects = n.get<int>();
        else if (k == "impressions") c.synthetic.impressions = n.get<int>();
        else return false;
        return true;
      });
    } else if (key == "paths") {
      for_keys(v, "paths", [&](const std::string& k, const json& p) {
        if (k == "data_root") c.paths.data_root = opt_path(p);
        else if (k == "pix2pix_checkpoint") c.paths.pix2pix_checkpoint = opt_path(p);
        else if (k == "oneshot_checkpoint") c.paths.oneshot_checkpoint = opt_path(p);
        else return false;
        return true;
      });
    } else {
      return false;
    }
    return true;
  });
  c.sync_seeds();
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigNotFound, "config not found: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

RunConfig config_from_results(const std::filesystem::path& csv) {
  std::ifstream in(csv);
  if (!in) throw Error(ErrorCode::ConfigNotFound, "results file not found: " + csv.string());
  std::string line;
  while (std::getline(in, line) && line.starts_with('#')) {
    constexpr std::string_view tag = "# config: ";
    if (line.starts_with(tag)) {
      try {
        return run_config_from_json(json::parse(line.substr(tag.size())));
      } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, csv.string() + ": " + e.what());
      }
    }
  }
  throw Error(ErrorCode::SchemaViolation, csv.string() + ": no '# config:' header line");
}

}  // namespace figo
