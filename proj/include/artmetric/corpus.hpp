#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace artmetric::corpus {

struct ArtistLabel {
  std::string name;
  int id = -1;
};

enum class Provenance { original, synthetic };

std::string to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

enum class Split { train, val, unassigned };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct ArtworkRecord {
  std::string id;
  std::string path;  // relative to the corpus root
  std::string artist;
  Provenance provenance = Provenance::original;
  std::optional<std::string> prompt;  // required iff synthetic
  Split split = Split::unassigned;
  bool excluded = false;
  std::string checksum;
};

struct DatasetManifest {
  std::vector<ArtworkRecord> records;
  std::vector<ArtistLabel> artists;
  uint64_t seed = 0;

  const ArtistLabel* find_artist(const std::string& name) const;
};

struct PromptLine {
  std::string context;
  ArtistLabel artist;
  std::string full_text;  // context + ", by " + artist.name
};

struct PromptBatch {
  std::vector<PromptLine> lines;
  long long generation_requests = 0;  // lines x images_per_prompt
};

struct GroupCount {
  std::string artist;
  Provenance provenance;
  long long count = 0;
};

struct ValidationReport {
  std::vector<GroupCount> counts;       // sorted by (artist, provenance)
  std::vector<std::string> violations;  // human-readable, deterministic order
  bool ok() const { return violations.empty(); }
};

// --- operations -----------------------------------------------------------

PromptBatch build_prompts(const std::vector<std::string>& contexts, const ArtistLabel& artist,
                          int images_per_prompt = 2);

ValidationReport validate_manifest(const DatasetManifest& manifest);

// Stratified per (artist, provenance); train count per group is
// floor(train_fraction * group size), remainder goes to val. Excluded
// records stay unassigned. Deterministic in (manifest, seed).
DatasetManifest split_dataset(const DatasetManifest& manifest, double train_fraction,
                              uint64_t seed);

// Exactly quota originals + quota synthetics per artist, sampled without
// replacement among non-excluded records.
DatasetManifest build_mixed_dataset(const DatasetManifest& manifest, int per_class_quota,
                                    uint64_t seed);

struct GallerySource {
  std::string kind = "local";  // "local" | "http"
  std::string path;            // local: directory to ingest
  std::string base_url;        // http: host prefix, e.g. http://host:port
  std::vector<std::string> files;  // http: remote paths to fetch
};

struct FetchResult {
  std::vector<ArtworkRecord> records;  // new or re-verified records
  std::vector<std::string> errors;
  int downloaded = 0;
  int skipped = 0;  // checksum already matched
};

// Ingests an artist gallery into destination_dir. Idempotent: files whose
// checksum already matches an existing record are skipped. Files that fail
// to decode are recorded with excluded=true.
FetchResult fetch_gallery(const ArtistLabel& artist, const std::string& destination_dir,
                          const GallerySource& source,
                          const std::vector<ArtworkRecord>& existing = {});

// --- manifest file I/O (JSON Lines, header line first) ---------------------

void save_manifest(const DatasetManifest& manifest, const std::string& path);  // atomic
DatasetManifest load_manifest(const std::string& path);

// One full_text per line, UTF-8, LF.
void save_prompts(const std::vector<PromptLine>& lines, const std::string& path);

}  // namespace artmetric::corpus
