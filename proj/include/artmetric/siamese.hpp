#pragma once

#include <memory>
#include <string>
#include <vector>

#include "artmetric/backbone.hpp"

namespace artmetric::siamese {

// y = 0: same artist (similar), y = 1: different artist.
struct PairSample {
  std::string first;
  std::string second;
  int y = 0;
};

struct LossConfig {
  double c_p = 0.2;
  double c_n = 10.0;
  // The margin is recorded for provenance but unused by the default
  // exponential loss; the "margin_hinge" variant consumes it.
  double margin = 2.0;
  std::string variant = "exponential";  // "exponential" | "margin_hinge"

  double alpha() const { return 1.0 / c_p; }
  double beta() const { return c_n; }
  double gamma() const { return -2.77 / c_n; }

  void validate() const;
};

// L = (1-y) * alpha * D^2 + y * beta * exp(gamma * D)
double contrastive_loss(double distance, int y, const LossConfig& cfg);
// dL/dD
double contrastive_loss_grad(double distance, int y, const LossConfig& cfg);

// Euclidean distance between embeddings; throws on dimension mismatch.
double pair_distance(const std::vector<float>& e1, const std::vector<float>& e2);

struct PairItem {
  std::string id;
  std::string artist;
};

// Balanced, duplicate-free, deterministic in (seed, epoch).
std::vector<PairSample> sample_pairs(const std::vector<PairItem>& items, int pairs_per_epoch,
                                     double positive_fraction, uint64_t seed, int epoch);

std::vector<PairItem> pair_items_from(const corpus::DatasetManifest& manifest,
                                      corpus::Split split);

// JSON Lines {"first": id, "second": id, "y": 0|1}
void save_pairs(const std::vector<PairSample>& pairs, const std::string& path);
std::vector<PairSample> load_pairs(const std::string& path);

struct CurvePoint {
  int epoch = 0;  // 0 is the pre-training evaluation point
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct SiameseTrainResult {
  std::vector<backbone::Checkpoint> history;  // one per trained epoch (1..E)
  std::vector<CurvePoint> curve;              // length E+1, starts at epoch 0
  std::vector<PairSample> val_pairs;          // the frozen validation pair list
};

// Fine-tunes the base discriminative checkpoint with the pairwise loss.
// Both branches share one set of weights structurally: a single model
// instance sees the concatenated pair batch.
SiameseTrainResult train_siamese(const backbone::LoadedDataset& train,
                                 const backbone::LoadedDataset& val,
                                 const std::vector<PairSample>& val_pairs,
                                 const backbone::Checkpoint& base, const LossConfig& loss,
                                 const backbone::TrainRunConfig& rc, int pairs_per_epoch = 0,
                                 double positive_fraction = 0.5,
                                 const std::string& curve_csv = "");

enum class SelectionRule { min_val_loss, elbow };

// Default: global minimum of validation loss, earliest epoch on ties.
// Elbow: maximum distance from the chord of the validation-loss curve.
const backbone::Checkpoint& select_checkpoint(const std::vector<backbone::Checkpoint>& history,
                                              SelectionRule rule = SelectionRule::min_val_loss);
size_t select_checkpoint_index(const std::vector<double>& val_losses,
                               SelectionRule rule = SelectionRule::min_val_loss);

// A trained metric: twin branches over one shared backbone.
class MetricModel {
 public:
  MetricModel(backbone::Checkpoint ckpt, LossConfig loss);

  double distance(const Tensor& a, const Tensor& b);
  double distance_files(const std::string& path_a, const std::string& path_b);
  backbone::EmbeddingVector embed(const Tensor& preprocessed, const std::string& id = "");
  backbone::EmbeddingVector embed_file(const std::string& path);

  // Both branches resolve to the same model object (weight sharing is
  // structural, not copied).
  const nn::ConvNet* branch_model(int branch) const;

  const backbone::Checkpoint& checkpoint() const { return session_.checkpoint(); }
  const LossConfig& loss() const { return loss_; }
  const backbone::BackboneConfig& backbone_config() const {
    return session_.checkpoint().backbone;
  }

 private:
  backbone::Session session_;
  LossConfig loss_;
};

void write_curve_csv(const std::vector<CurvePoint>& curve, const std::string& path);

}  // namespace artmetric::siamese
