#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "artmetric/corpus.hpp"
#include "artmetric/nn/model.hpp"

namespace artmetric::backbone {

struct BackboneConfig {
  int embedding_dim = 512;
  int input_edge = 224;
  std::array<float, 3> mean{0.485f, 0.456f, 0.406f};
  std::array<float, 3> stdev{0.229f, 0.224f, 0.225f};
  std::string architecture_tag = "resnet18";

  void validate() const;  // edge >= 32, dim >= 2, dim must match the tag
};

struct TrainRunConfig {
  int epochs = 50;
  int batch_size = 32;
  double learning_rate = 1e-4;
  double weight_decay = 1e-4;
  std::string optimizer_tag = "adam";
  uint64_t seed = 0;

  void validate() const;
};

struct EmbeddingVector {
  std::vector<float> values;
  std::string source_record_id;
};

enum class CheckpointKind { discriminative, siamese };

std::string to_string(CheckpointKind k);

struct Checkpoint {
  CheckpointKind kind = CheckpointKind::discriminative;
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  std::string fingerprint;
  BackboneConfig backbone;
  TrainRunConfig run;
  std::vector<std::string> artists;  // class order of the head
  std::string init_mode = "seeded_random";
  std::vector<float> weights;  // flattened model state blob
};

// Binds a checkpoint to the exact configs that produced it.
std::string config_fingerprint(const BackboneConfig& bc, const TrainRunConfig& rc,
                               CheckpointKind kind, const std::string& init_mode);

// Single-file archive: JSON metadata header then the raw weight blob, so
// metadata is readable without touching the weights.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);
std::string load_checkpoint_meta_json(const std::string& path);  // metadata only

std::vector<float> dump_weights(nn::ConvNet& model);
void load_weights(nn::ConvNet& model, const std::vector<float>& blob);

// Decode + resize to input_edge x input_edge, RGB, per-channel normalized.
// Grayscale inputs are replicated to three channels. Returns (1,3,E,E).
Tensor preprocess(const std::string& image_path, const BackboneConfig& cfg);
Tensor preprocess_decoded(const std::vector<float>& rgb, int h, int w,
                          const BackboneConfig& cfg);

// A loaded model ready for inference; read-only after construction.
class Session {
 public:
  explicit Session(const Checkpoint& ckpt);

  EmbeddingVector embed(const Tensor& preprocessed, const std::string& record_id = "");
  EmbeddingVector embed_file(const std::string& image_path);
  // Softmax scores over the checkpoint's artist list. Discriminative
  // checkpoints only.
  std::vector<double> classify(const Tensor& preprocessed);
  std::vector<double> classify_file(const std::string& image_path);

  const Checkpoint& checkpoint() const { return ckpt_; }
  nn::ConvNet& model() { return *model_; }

 private:
  Checkpoint ckpt_;
  std::unique_ptr<nn::ConvNet> model_;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  std::vector<Checkpoint> history;  // one per epoch
  std::vector<EpochStats> stats;
  int best_epoch = 0;  // 1-based; maximum validation accuracy, earliest on ties
};

// In-memory training set: preprocessed images + labels, built once from a
// manifest so epochs are cheap and batch composition is a pure function of
// (manifest, seed, epoch).
struct LoadedDataset {
  std::vector<Tensor> images;  // each (1,3,E,E)
  std::vector<int> labels;     // artist ids
  std::vector<std::string> record_ids;
  std::vector<std::string> artists;  // label order
};

LoadedDataset load_split(const corpus::DatasetManifest& manifest, const std::string& image_root,
                         corpus::Split split, const BackboneConfig& cfg);

TrainResult train_discriminative(const LoadedDataset& train, const LoadedDataset& val,
                                 const BackboneConfig& bc, const TrainRunConfig& rc,
                                 const std::string& metrics_csv_path = "");

// CSV `epoch,train_loss,val_loss,val_accuracy`
void write_metrics_csv(const std::vector<EpochStats>& stats, const std::string& path);

}  // namespace artmetric::backbone
