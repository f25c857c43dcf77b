#pragma once

#include <optional>
#include <string>
#include <vector>

#include "artmetric/attribution.hpp"
#include "artmetric/backbone.hpp"
#include "artmetric/siamese.hpp"

namespace artmetric::evaluation {

struct ConfusionMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<long long>> counts;  // rows: true, cols: predicted

  long long total() const;
  long long trace() const;
  double accuracy() const;
};

// Tally from parallel truth/prediction index lists.
ConfusionMatrix tally_confusion(const std::vector<std::string>& labels,
                                const std::vector<int>& truth,
                                const std::vector<int>& predicted);

// Run the discriminative checkpoint over a labeled dataset.
ConfusionMatrix confusion(const backbone::LoadedDataset& eval_set, backbone::Session& session);

struct TransferResult {
  ConfusionMatrix on_original_val;
  ConfusionMatrix on_synthetic;
  double accuracy_gap = 0.0;  // original - synthetic
  backbone::TrainResult training;
};

// Trains on the original-domain train split, evaluates on the original val
// split and on the synthetic-domain set.
TransferResult transfer_experiment(const backbone::LoadedDataset& orig_train,
                                   const backbone::LoadedDataset& orig_val,
                                   const backbone::LoadedDataset& synthetic,
                                   const backbone::BackboneConfig& bc,
                                   const backbone::TrainRunConfig& rc);

struct DistanceMatrix {
  std::vector<std::string> query_ids;
  std::vector<std::string> query_artists;
  std::vector<std::string> gallery_ids;
  std::vector<std::string> gallery_artists;
  std::vector<std::vector<double>> d;  // query x gallery
};

struct RetrievalEntry {
  int n = 0;
  long long successful = 0;             // Q_n
  long long answerable = 0;             // Q
  std::optional<double> probability;    // P_n = Q_n / Q, null when Q = 0
};

struct RetrievalSummary {
  double threshold = 0.0;
  std::vector<RetrievalEntry> per_n;  // n = 1..n_max
  long long unanswerable = 0;         // queries with no gallery item under T
  std::string query_fingerprint;
};

// Core retrieval rule over a precomputed distance matrix: a query's
// candidates are gallery items with d <= T sorted ascending (ties by id);
// it succeeds at n when one of the first n candidates shares its artist.
// Queries with no candidate under T are excluded from Q and reported as
// unanswerable.
std::vector<RetrievalSummary> retrieval_from_distances(const DistanceMatrix& matrix,
                                                       const std::vector<double>& thresholds,
                                                       int n_max);

DistanceMatrix build_distance_matrix(const std::vector<std::string>& query_ids,
                                     const std::vector<std::string>& gallery_ids,
                                     const corpus::DatasetManifest& manifest,
                                     const std::string& image_root,
                                     siamese::MetricModel& model);

std::vector<RetrievalSummary> retrieval_test(const std::vector<std::string>& query_ids,
                                             const std::vector<std::string>& gallery_ids,
                                             const corpus::DatasetManifest& manifest,
                                             const std::string& image_root,
                                             siamese::MetricModel& model,
                                             const std::vector<double>& thresholds, int n_max);

void save_distance_matrix_csv(const DistanceMatrix& matrix, const std::string& path);

struct ResultsBundle {
  std::optional<ConfusionMatrix> confusion;
  std::vector<siamese::CurvePoint> loss_curve;
  std::vector<RetrievalSummary> retrieval;
  std::vector<attribution::AttributionReport> attributions;

  bool empty() const {
    return !confusion && loss_curve.empty() && retrieval.empty() && attributions.empty();
  }
};

// Deterministic file set: every plot is backed by a CSV carrying the same
// numbers. Throws before writing anything when the bundle is empty or the
// directory is unwritable.
std::vector<std::string> emit_report(const ResultsBundle& bundle,
                                     const std::string& output_dir);

void save_confusion_csv(const ConfusionMatrix& m, const std::string& path);
void save_retrieval_csv(const RetrievalSummary& s, const std::string& path);

// PNG renderings of the same numbers the CSVs carry.
void plot_confusion(const ConfusionMatrix& m, const std::string& path);
void plot_loss_curve(const std::vector<siamese::CurvePoint>& curve, const std::string& path);
void plot_retrieval(const std::vector<RetrievalSummary>& summaries, const std::string& path);
void plot_evidence(const attribution::AttributionReport& report, const std::string& path);

}  // namespace artmetric::evaluation
