#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "artmetric/attribution.hpp"
#include "artmetric/backbone.hpp"
#include "artmetric/siamese.hpp"

namespace artmetric::cli {

// Minimal TOML reader covering the config surface: [a.b] tables, strings,
// ints, floats, bools, flat scalar arrays, # comments. Unknown keys are the
// caller's job to reject.
struct TomlValue {
  enum class Kind { string, number, boolean, array } kind = Kind::string;
  std::string str;
  double num = 0.0;
  bool b = false;
  std::vector<TomlValue> items;
};

// Keys flattened as "section.subsection.key".
std::map<std::string, TomlValue> parse_toml(const std::string& text);

struct CorpusConfig {
  std::string manifest;
  std::string image_root;
  double train_fraction = 0.8;
  int quota = 470;
  int images_per_prompt = 2;
};

struct SiameseRunConfig {
  backbone::TrainRunConfig run{250, 64};  // epochs 250, batch 64 defaults
  int pairs_per_epoch = 0;                // 0: one pair per training record
  double positive_fraction = 0.5;
};

struct AttributionConfig {
  attribution::ReferenceKind reference_kind = attribution::ReferenceKind::original;
  double threshold = 0.5;
};

struct EvaluationConfig {
  std::vector<double> thresholds{0.1, 0.2, 0.3, 0.4, 0.5};
  int n_max = 20;
  int repeats = 1;
};

struct RunConfigDocument {
  CorpusConfig corpus;
  backbone::BackboneConfig backbone;
  backbone::TrainRunConfig baseline;  // epochs 50, batch 32, lr 1e-4, wd 1e-4
  SiameseRunConfig siamese;
  siamese::LossConfig loss;
  AttributionConfig attribution;
  EvaluationConfig evaluation;
  uint64_t seed = 0;
  std::string out_root = "out";
};

// Published hyperparameters as defaults; unknown keys rejected with the key name.
RunConfigDocument config_load(const std::string& path);
RunConfigDocument config_defaults();

// Fully resolved echo (JSON), including derived loss fields and the
// per-stage seeds fanned out from the global seed.
std::string config_echo(const RunConfigDocument& doc);

}  // namespace artmetric::cli
