#include "artmetric/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

using nlohmann::json;

namespace artmetric::attribution {

std::string to_string(ReferenceKind k) {
  switch (k) {
    case ReferenceKind::original: return "original";
    case ReferenceKind::synthetic: return "synthetic";
    default: return "both";
  }
}

ReferenceKind reference_kind_from_string(const std::string& s) {
  if (s == "original") return ReferenceKind::original;
  if (s == "synthetic") return ReferenceKind::synthetic;
  if (s == "both") return ReferenceKind::both;
  throw std::runtime_error("bad reference kind: " + s);
}

ReferenceSet make_reference_set(const corpus::DatasetManifest& manifest,
                                const corpus::ArtistLabel& artist, ReferenceKind kind) {
  ReferenceSet set;
  set.artist = artist;
  set.kind = kind;
  for (const auto& r : manifest.records) {
    if (r.excluded || r.artist != artist.name) continue;
    const bool want =
        kind == ReferenceKind::both ||
        (kind == ReferenceKind::original && r.provenance == corpus::Provenance::original) ||
        (kind == ReferenceKind::synthetic && r.provenance == corpus::Provenance::synthetic);
    if (want) set.records.push_back(r.id);
  }
  std::sort(set.records.begin(), set.records.end());
  if (set.records.empty())
    throw std::runtime_error("empty reference set for artist " + artist.name);
  return set;
}

EmbeddedReferences embed_references(const ReferenceSet& set,
                                    const corpus::DatasetManifest& manifest,
                                    const std::string& image_root, siamese::MetricModel& model) {
  std::map<std::string, const corpus::ArtworkRecord*> by_id;
  for (const auto& r : manifest.records) by_id[r.id] = &r;
  EmbeddedReferences out;
  out.set = set;
  out.embeddings.reserve(set.records.size());
  for (const auto& id : set.records) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw std::runtime_error("reference record not in manifest: " + id);
    out.embeddings.push_back(model.embed_file(image_root + "/" + it->second->path).values);
  }
  return out;
}

MinDistanceResult min_distance(const std::vector<float>& query_embedding,
                               const EmbeddedReferences& refs) {
  if (refs.set.records.empty()) throw std::runtime_error("min_distance: empty reference set");
  MinDistanceResult best;
  bool first = true;
  for (size_t i = 0; i < refs.set.records.size(); ++i) {
    const double d = siamese::pair_distance(query_embedding, refs.embeddings[i]);
    // exact ties resolve to the smallest record id regardless of storage order
    if (first || d < best.distance ||
        (d == best.distance && refs.set.records[i] < best.argmin_record)) {
      best.distance = d;
      best.argmin_record = refs.set.records[i];
      first = false;
    }
  }
  return best;
}

std::optional<double> attribution_probability(double min_d) {
  if (min_d < 0.0) throw std::invalid_argument("attribution_probability: negative distance");
  if (min_d > 1.0) return std::nullopt;  // no support
  return 1.0 - min_d;
}

static AttributionReport build_report(const std::vector<float>& query_embedding,
                                      const std::string& query_id,
                                      const std::vector<EmbeddedReferences>& all_refs,
                                      double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw std::invalid_argument("similarity threshold must lie in (0, 1)");
  AttributionReport report;
  report.query = query_id;
  report.threshold_used = threshold;
  for (const auto& refs : all_refs) {
    ArtistFinding f;
    f.artist = refs.set.artist.name;
    MinDistanceResult md = min_distance(query_embedding, refs);
    f.min_distance = md.distance;
    f.nearest_reference = md.argmin_record;
    f.probability = attribution_probability(md.distance);
    for (const auto& e : refs.embeddings) {
      const double d = siamese::pair_distance(query_embedding, e);
      const double similarity = 1.0 - std::min(d, 1.0);
      if (similarity > threshold) ++f.vote_count;
    }
    report.per_artist.push_back(std::move(f));
  }
  // Decision: most votes; ties by smaller min distance, then artist id.
  std::map<std::string, int> artist_ids;
  for (const auto& refs : all_refs) artist_ids[refs.set.artist.name] = refs.set.artist.id;
  const ArtistFinding* winner = nullptr;
  for (const auto& f : report.per_artist) {
    if (f.vote_count == 0) continue;
    if (!winner || f.vote_count > winner->vote_count ||
        (f.vote_count == winner->vote_count &&
         (f.min_distance < winner->min_distance ||
          (f.min_distance == winner->min_distance &&
           artist_ids[f.artist] < artist_ids[winner->artist]))))
      winner = &f;
  }
  report.decision = winner ? winner->artist : "none";
  return report;
}

AttributionReport vote_attribute(const std::vector<float>& query_embedding,
                                 const std::string& query_id,
                                 const std::vector<EmbeddedReferences>& all_refs,
                                 double similarity_threshold) {
  return build_report(query_embedding, query_id, all_refs, similarity_threshold);
}

AttributionReport attribute(const std::vector<float>& query_embedding,
                            const std::string& query_id,
                            const std::vector<EmbeddedReferences>& all_refs,
                            double similarity_threshold) {
  return build_report(query_embedding, query_id, all_refs, similarity_threshold);
}

std::string report_to_json(const AttributionReport& report) {
  json j;
  j["query"] = report.query;
  j["decision"] = report.decision;
  j["threshold_used"] = report.threshold_used;
  j["per_artist"] = json::array();
  for (const auto& f : report.per_artist) {
    json a;
    a["artist"] = f.artist;
    a["min_distance"] = f.min_distance;
    a["probability"] = f.probability ? json(*f.probability) : json(nullptr);
    a["vote_count"] = f.vote_count;
    a["nearest_reference"] = f.nearest_reference;
    j["per_artist"].push_back(std::move(a));
  }
  return j.dump(2);
}

AttributionReport report_from_json(const std::string& text) {
  json j = json::parse(text);
  AttributionReport report;
  report.query = j.at("query");
  report.decision = j.at("decision");
  report.threshold_used = j.at("threshold_used");
  for (const auto& a : j.at("per_artist")) {
    ArtistFinding f;
    f.artist = a.at("artist");
    f.min_distance = a.at("min_distance");
    if (!a.at("probability").is_null()) f.probability = a.at("probability").get<double>();
    f.vote_count = a.at("vote_count");
    f.nearest_reference = a.at("nearest_reference");
    report.per_artist.push_back(std::move(f));
  }
  return report;
}

// ----------------------------------------------------------- EmbeddingCache

EmbeddingCache::EmbeddingCache(std::string path) : path_(std::move(path)) {}

void EmbeddingCache::load() {
  std::ifstream in(path_, std::ios::binary);
  if (!in) return;  // absent cache is empty
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    entries_[{j.at("fingerprint"), j.at("record")}] =
        j.at("embedding").get<std::vector<float>>();
  }
}

void EmbeddingCache::save() const {
  const std::string tmp = path_ + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write embedding cache: " + path_);
    for (const auto& [key, emb] : entries_) {
      json j{{"fingerprint", key.first}, {"record", key.second}, {"embedding", emb}};
      out << j.dump() << "\n";
    }
  }
  std::filesystem::rename(tmp, path_);
}

const std::vector<float>* EmbeddingCache::find(const std::string& fingerprint,
                                               const std::string& record_id) const {
  auto it = entries_.find({fingerprint, record_id});
  return it == entries_.end() ? nullptr : &it->second;
}

void EmbeddingCache::put(const std::string& fingerprint, const std::string& record_id,
                         std::vector<float> embedding) {
  entries_[{fingerprint, record_id}] = std::move(embedding);
}

}  // namespace artmetric::attribution
