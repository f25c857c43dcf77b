#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "artmetric/siamese.hpp"

namespace artmetric::attribution {

enum class ReferenceKind { original, synthetic, both };

std::string to_string(ReferenceKind k);
ReferenceKind reference_kind_from_string(const std::string& s);

struct ReferenceSet {
  corpus::ArtistLabel artist;
  std::vector<std::string> records;  // record ids
  ReferenceKind kind = ReferenceKind::original;
};

struct ArtistFinding {
  std::string artist;
  double min_distance = 0.0;
  std::optional<double> probability;  // present iff min_distance <= 1
  int vote_count = 0;
  std::string nearest_reference;
};

struct AttributionReport {
  std::string query;
  std::vector<ArtistFinding> per_artist;
  std::string decision;  // artist name or "none"
  double threshold_used = 0.0;
};

// Pre-embedded reference gallery: distances against a query embedding are a
// plain scan, reusable across queries.
struct EmbeddedReferences {
  ReferenceSet set;
  std::vector<std::vector<float>> embeddings;  // parallel to set.records
};

ReferenceSet make_reference_set(const corpus::DatasetManifest& manifest,
                                const corpus::ArtistLabel& artist, ReferenceKind kind);

EmbeddedReferences embed_references(const ReferenceSet& set,
                                    const corpus::DatasetManifest& manifest,
                                    const std::string& image_root, siamese::MetricModel& model);

struct MinDistanceResult {
  double distance = 0.0;
  std::string argmin_record;
};

// Exact minimum over all references, earliest-id tie-break.
MinDistanceResult min_distance(const std::vector<float>& query_embedding,
                               const EmbeddedReferences& refs);

// Eq-style probability: 1 - min_d when min_d <= 1, otherwise "no support"
// (nullopt), never clamped.
std::optional<double> attribution_probability(double min_d);

// Vote rule: similarity S = 1 - min(d, 1); a reference votes when S > T.
// Decision: most votes, ties by smaller min distance, then artist id.
// All-zero votes -> "none".
AttributionReport vote_attribute(const std::vector<float>& query_embedding,
                                 const std::string& query_id,
                                 const std::vector<EmbeddedReferences>& all_refs,
                                 double similarity_threshold);

// Full report: probabilities + votes + nearest evidence.
AttributionReport attribute(const std::vector<float>& query_embedding,
                            const std::string& query_id,
                            const std::vector<EmbeddedReferences>& all_refs,
                            double similarity_threshold);

std::string report_to_json(const AttributionReport& report);
AttributionReport report_from_json(const std::string& text);

// Single-file embedding cache keyed by (checkpoint fingerprint, record id).
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::string path);
  void load();
  void save() const;
  const std::vector<float>* find(const std::string& fingerprint,
                                 const std::string& record_id) const;
  void put(const std::string& fingerprint, const std::string& record_id,
           std::vector<float> embedding);

 private:
  std::string path_;
  std::map<std::pair<std::string, std::string>, std::vector<float>> entries_;
};

}  // namespace artmetric::attribution
