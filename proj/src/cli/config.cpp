#include "artmetric/cli/config.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "artmetric/core/rng.hpp"

using nlohmann::json;

namespace artmetric::cli {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

TomlValue parse_scalar(const std::string& raw, int lineno) {
  TomlValue v;
  std::string s = trim(raw);
  if (s.empty()) throw std::runtime_error("line " + std::to_string(lineno) + ": empty value");
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"')
      throw std::runtime_error("line " + std::to_string(lineno) + ": unterminated string");
    v.kind = TomlValue::Kind::string;
    v.str = s.substr(1, s.size() - 2);
    return v;
  }
  if (s == "true" || s == "false") {
    v.kind = TomlValue::Kind::boolean;
    v.b = s == "true";
    return v;
  }
  try {
    size_t used = 0;
    v.num = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    v.kind = TomlValue::Kind::number;
    return v;
  } catch (...) {
    throw std::runtime_error("line " + std::to_string(lineno) + ": bad value '" + s + "'");
  }
}

}  // namespace

std::map<std::string, TomlValue> parse_toml(const std::string& text) {
  std::map<std::string, TomlValue> out;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    // strip comments, keeping '#' inside quoted strings
    bool in_string = false;
    for (size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') in_string = !in_string;
      if (line[i] == '#' && !in_string) {
        line = line.substr(0, i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::runtime_error("line " + std::to_string(lineno) + ": bad table header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    const std::string full = section.empty() ? key : section + "." + key;
    if (out.count(full))
      throw std::runtime_error("line " + std::to_string(lineno) + ": duplicate key " + full);
    if (!val.empty() && val.front() == '[') {
      if (val.back() != ']')
        throw std::runtime_error("line " + std::to_string(lineno) + ": unterminated array");
      TomlValue arr;
      arr.kind = TomlValue::Kind::array;
      std::string body = val.substr(1, val.size() - 2);
      std::string item;
      std::istringstream items(body);
      while (std::getline(items, item, ',')) {
        if (trim(item).empty()) continue;
        arr.items.push_back(parse_scalar(item, lineno));
      }
      out[full] = std::move(arr);
    } else {
      out[full] = parse_scalar(val, lineno);
    }
  }
  return out;
}

RunConfigDocument config_defaults() { return RunConfigDocument{}; }

namespace {

class Reader {
 public:
  explicit Reader(std::map<std::string, TomlValue> kv) : kv_(std::move(kv)) {}

  double number(const std::string& key, double fallback) {
    const TomlValue* v = take(key);
    if (!v) return fallback;
    if (v->kind != TomlValue::Kind::number)
      throw std::runtime_error("config key '" + key + "': expected a number");
    return v->num;
  }
  int integer(const std::string& key, int fallback) {
    const double d = number(key, fallback);
    if (d != static_cast<long long>(d))
      throw std::runtime_error("config key '" + key + "': expected an integer");
    return static_cast<int>(d);
  }
  std::string str(const std::string& key, const std::string& fallback) {
    const TomlValue* v = take(key);
    if (!v) return fallback;
    if (v->kind != TomlValue::Kind::string)
      throw std::runtime_error("config key '" + key + "': expected a string");
    return v->str;
  }
  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) {
    const TomlValue* v = take(key);
    if (!v) return fallback;
    if (v->kind != TomlValue::Kind::array)
      throw std::runtime_error("config key '" + key + "': expected an array");
    std::vector<double> out;
    for (const auto& item : v->items) {
      if (item.kind != TomlValue::Kind::number)
        throw std::runtime_error("config key '" + key + "': expected numeric array");
      out.push_back(item.num);
    }
    return out;
  }

  void reject_unknown() const {
    for (const auto& [key, _] : kv_)
      if (!consumed_.count(key))
        throw std::runtime_error("unknown config key '" + key + "'");
  }

 private:
  const TomlValue* take(const std::string& key) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return nullptr;
    consumed_.insert(key);
    return &it->second;
  }
  std::map<std::string, TomlValue> kv_;
  std::set<std::string> consumed_;
};

void read_run(Reader& r, const std::string& prefix, backbone::TrainRunConfig& rc) {
  rc.epochs = r.integer(prefix + ".epochs", rc.epochs);
  rc.batch_size = r.integer(prefix + ".batch_size", rc.batch_size);
  rc.learning_rate = r.number(prefix + ".learning_rate", rc.learning_rate);
  rc.weight_decay = r.number(prefix + ".weight_decay", rc.weight_decay);
  rc.optimizer_tag = r.str(prefix + ".optimizer", rc.optimizer_tag);
}

}  // namespace

RunConfigDocument config_load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  Reader r(parse_toml(ss.str()));

  RunConfigDocument doc;
  doc.baseline.epochs = 50;
  doc.baseline.batch_size = 32;
  doc.siamese.run.epochs = 250;
  doc.siamese.run.batch_size = 64;

  doc.seed = static_cast<uint64_t>(r.number("seed", 0));
  doc.out_root = r.str("out", doc.out_root);

  doc.corpus.manifest = r.str("corpus.manifest", "");
  doc.corpus.image_root = r.str("corpus.image_root", "");
  doc.corpus.train_fraction = r.number("corpus.train_fraction", doc.corpus.train_fraction);
  doc.corpus.quota = r.integer("corpus.quota", doc.corpus.quota);
  doc.corpus.images_per_prompt =
      r.integer("corpus.images_per_prompt", doc.corpus.images_per_prompt);

  doc.backbone.architecture_tag =
      r.str("backbone.architecture_tag", doc.backbone.architecture_tag);
  doc.backbone.embedding_dim = r.integer(
      "backbone.embedding_dim", nn::ConvNet::embedding_dim_for(doc.backbone.architecture_tag));
  doc.backbone.input_edge = r.integer("backbone.input_edge", doc.backbone.input_edge);
  auto mean = r.numbers("backbone.mean",
                        {doc.backbone.mean[0], doc.backbone.mean[1], doc.backbone.mean[2]});
  auto stdev = r.numbers("backbone.stdev",
                         {doc.backbone.stdev[0], doc.backbone.stdev[1], doc.backbone.stdev[2]});
  if (mean.size() != 3 || stdev.size() != 3)
    throw std::runtime_error("config: backbone.mean/stdev must have 3 entries");
  for (int i = 0; i < 3; ++i) {
    doc.backbone.mean[i] = static_cast<float>(mean[i]);
    doc.backbone.stdev[i] = static_cast<float>(stdev[i]);
  }

  read_run(r, "train.baseline", doc.baseline);
  read_run(r, "train.siamese", doc.siamese.run);
  doc.siamese.pairs_per_epoch =
      r.integer("train.siamese.pairs_per_epoch", doc.siamese.pairs_per_epoch);
  doc.siamese.positive_fraction =
      r.number("train.siamese.positive_fraction", doc.siamese.positive_fraction);

  doc.loss.c_p = r.number("loss.c_p", doc.loss.c_p);
  doc.loss.c_n = r.number("loss.c_n", doc.loss.c_n);
  doc.loss.margin = r.number("loss.margin", doc.loss.margin);
  doc.loss.variant = r.str("loss.variant", doc.loss.variant);

  doc.attribution.reference_kind = attribution::reference_kind_from_string(
      r.str("attribution.reference_kind", to_string(doc.attribution.reference_kind)));
  doc.attribution.threshold = r.number("attribution.threshold", doc.attribution.threshold);

  doc.evaluation.thresholds = r.numbers("evaluation.thresholds", doc.evaluation.thresholds);
  doc.evaluation.n_max = r.integer("evaluation.n_max", doc.evaluation.n_max);
  doc.evaluation.repeats = r.integer("evaluation.repeats", doc.evaluation.repeats);

  r.reject_unknown();

  doc.loss.validate();
  doc.backbone.validate();
  doc.baseline.validate();
  doc.siamese.run.validate();
  if (!(doc.attribution.threshold > 0.0 && doc.attribution.threshold < 1.0))
    throw std::runtime_error("config: attribution.threshold must lie in (0, 1)");
  if (!(doc.corpus.train_fraction > 0.0 && doc.corpus.train_fraction < 1.0))
    throw std::runtime_error("config: corpus.train_fraction must lie in (0, 1)");
  for (double t : doc.evaluation.thresholds)
    if (!(t > 0.0 && t <= 1.0))
      throw std::runtime_error("config: evaluation.thresholds must lie in (0, 1]");
  if (doc.evaluation.n_max < 1) throw std::runtime_error("config: evaluation.n_max must be >= 1");
  return doc;
}

std::string config_echo(const RunConfigDocument& doc) {
  json j;
  j["seed"] = doc.seed;
  j["out"] = doc.out_root;
  j["stage_seeds"] = {
      {"split", derive_seed("split", doc.seed)},
      {"mix", derive_seed("mix", doc.seed)},
      {"baseline", derive_seed("baseline", doc.seed)},
      {"siamese", derive_seed("siamese", doc.seed)},
  };
  j["corpus"] = {{"manifest", doc.corpus.manifest},
                 {"image_root", doc.corpus.image_root},
                 {"train_fraction", doc.corpus.train_fraction},
                 {"quota", doc.corpus.quota},
                 {"images_per_prompt", doc.corpus.images_per_prompt}};
  j["backbone"] = {{"architecture_tag", doc.backbone.architecture_tag},
                   {"embedding_dim", doc.backbone.embedding_dim},
                   {"input_edge", doc.backbone.input_edge}};
  j["train"]["baseline"] = {{"epochs", doc.baseline.epochs},
                            {"batch_size", doc.baseline.batch_size},
                            {"learning_rate", doc.baseline.learning_rate},
                            {"weight_decay", doc.baseline.weight_decay},
                            {"optimizer", doc.baseline.optimizer_tag}};
  j["train"]["siamese"] = {{"epochs", doc.siamese.run.epochs},
                           {"batch_size", doc.siamese.run.batch_size},
                           {"learning_rate", doc.siamese.run.learning_rate},
                           {"weight_decay", doc.siamese.run.weight_decay},
                           {"pairs_per_epoch", doc.siamese.pairs_per_epoch},
                           {"positive_fraction", doc.siamese.positive_fraction}};
  j["loss"] = {{"c_p", doc.loss.c_p},       {"c_n", doc.loss.c_n},
               {"alpha", doc.loss.alpha()}, {"beta", doc.loss.beta()},
               {"gamma", doc.loss.gamma()}, {"margin", doc.loss.margin},
               {"margin_used", doc.loss.variant == "margin_hinge"},
               {"variant", doc.loss.variant}};
  j["attribution"] = {{"reference_kind", to_string(doc.attribution.reference_kind)},
                      {"threshold", doc.attribution.threshold}};
  j["evaluation"] = {{"thresholds", doc.evaluation.thresholds},
                     {"n_max", doc.evaluation.n_max},
                     {"repeats", doc.evaluation.repeats}};
  // fingerprints of the configured stages
  j["fingerprints"] = {
      {"baseline", backbone::config_fingerprint(doc.backbone, doc.baseline,
                                                backbone::CheckpointKind::discriminative,
                                                "seeded_random")},
      {"siamese",
       backbone::config_fingerprint(doc.backbone, doc.siamese.run,
                                    backbone::CheckpointKind::siamese, "from:baseline")}};
  return j.dump(2);
}

}  // namespace artmetric::cli
