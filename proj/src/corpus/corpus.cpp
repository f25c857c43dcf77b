#include "artmetric/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>

#include <json.hpp>

#include "artmetric/core/hash.hpp"
#include "artmetric/core/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace artmetric::corpus {

std::string to_string(Provenance p) {
  return p == Provenance::original ? "original" : "synthetic";
}

Provenance provenance_from_string(const std::string& s) {
  if (s == "original") return Provenance::original;
  if (s == "synthetic") return Provenance::synthetic;
  throw std::runtime_error("bad provenance: " + s);
}

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    default: return "unassigned";
  }
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "unassigned") return Split::unassigned;
  throw std::runtime_error("bad split: " + s);
}

const ArtistLabel* DatasetManifest::find_artist(const std::string& name) const {
  for (const auto& a : artists)
    if (a.name == name) return &a;
  return nullptr;
}

// ------------------------------------------------------------- prompts

static const std::string kByInfix = ", by ";

PromptBatch build_prompts(const std::vector<std::string>& contexts, const ArtistLabel& artist,
                          int images_per_prompt) {
  if (contexts.empty()) throw std::invalid_argument("build_prompts: empty context list");
  if (images_per_prompt <= 0)
    throw std::invalid_argument("build_prompts: images_per_prompt must be positive");
  if (artist.name.empty()) throw std::invalid_argument("build_prompts: empty artist name");
  PromptBatch out;
  out.lines.reserve(contexts.size());
  for (const auto& ctx : contexts) {
    if (ctx.empty() || ctx.find_first_not_of(" \t\r\n") == std::string::npos)
      throw std::invalid_argument("build_prompts: blank context");
    if (ctx.find(kByInfix) != std::string::npos)
      throw std::invalid_argument("build_prompts: context already carries a ', by ' suffix: " +
                                  ctx);
    out.lines.push_back({ctx, artist, ctx + kByInfix + artist.name});
  }
  out.generation_requests =
      static_cast<long long>(contexts.size()) * images_per_prompt;
  return out;
}

// ------------------------------------------------------------ validation

ValidationReport validate_manifest(const DatasetManifest& manifest) {
  ValidationReport report;
  std::set<std::string> names;
  std::set<int> ids;
  for (const auto& a : manifest.artists) {
    if (a.name.empty()) report.violations.push_back("artist with empty name");
    if (!names.insert(a.name).second)
      report.violations.push_back("duplicate artist name: " + a.name);
    if (!ids.insert(a.id).second)
      report.violations.push_back("duplicate artist id for: " + a.name);
  }

  std::map<std::pair<std::string, Provenance>, long long> counts;
  std::set<std::string> seen_ids;
  for (const auto& r : manifest.records) {
    if (!seen_ids.insert(r.id).second)
      report.violations.push_back("duplicate record id: " + r.id);
    if (!names.count(r.artist))
      report.violations.push_back("record " + r.id + ": unknown artist '" + r.artist + "'");
    if (r.checksum.empty())
      report.violations.push_back("record " + r.id + ": missing checksum");
    if (r.provenance == Provenance::synthetic) {
      if (!r.prompt)
        report.violations.push_back("record " + r.id + ": synthetic record missing prompt");
      else if (r.prompt->find(kByInfix + r.artist) == std::string::npos)
        report.violations.push_back("record " + r.id + ": prompt lacks '" + kByInfix +
                                    r.artist + "'");
    } else if (r.prompt) {
      report.violations.push_back("record " + r.id + ": original record carries a prompt");
    }
    counts[{r.artist, r.provenance}] += 1;
  }
  for (const auto& [key, n] : counts)
    report.counts.push_back({key.first, key.second, n});
  return report;
}

// ---------------------------------------------------------------- split

DatasetManifest split_dataset(const DatasetManifest& manifest, double train_fraction,
                              uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("split_dataset: train_fraction must lie in (0, 1)");

  DatasetManifest out = manifest;
  out.seed = seed;
  std::map<std::pair<std::string, Provenance>, std::vector<size_t>> groups;
  for (size_t i = 0; i < out.records.size(); ++i) {
    auto& r = out.records[i];
    if (r.excluded) {
      r.split = Split::unassigned;
      continue;
    }
    groups[{r.artist, r.provenance}].push_back(i);
  }
  for (const auto& a : manifest.artists) {
    if (groups.find({a.name, Provenance::original}) == groups.end() &&
        groups.find({a.name, Provenance::synthetic}) == groups.end())
      throw std::runtime_error("split_dataset: artist " + a.name +
                               " has no non-excluded records");
  }
  for (auto& [key, idxs] : groups) {
    std::sort(idxs.begin(), idxs.end(), [&](size_t x, size_t y) {
      return out.records[x].id < out.records[y].id;
    });
    SeededRng rng(derive_seed("split:" + key.first + ":" + to_string(key.second), seed));
    rng.shuffle(idxs);
    // floor(fraction * size), guarded against binary round-off on exact
    // rationals such as 0.7 * 10
    const size_t train_n = static_cast<size_t>(
        std::floor(train_fraction * static_cast<double>(idxs.size()) + 1e-9));
    for (size_t j = 0; j < idxs.size(); ++j)
      out.records[idxs[j]].split = j < train_n ? Split::train : Split::val;
  }
  return out;
}

// ---------------------------------------------------------------- mixing

DatasetManifest build_mixed_dataset(const DatasetManifest& manifest, int per_class_quota,
                                    uint64_t seed) {
  if (per_class_quota <= 0)
    throw std::invalid_argument("build_mixed_dataset: quota must be positive");

  DatasetManifest out;
  out.artists = manifest.artists;
  out.seed = seed;

  std::map<std::pair<std::string, Provenance>, std::vector<size_t>> groups;
  for (size_t i = 0; i < manifest.records.size(); ++i) {
    const auto& r = manifest.records[i];
    if (!r.excluded) groups[{r.artist, r.provenance}].push_back(i);
  }
  for (const auto& a : manifest.artists) {
    for (Provenance p : {Provenance::original, Provenance::synthetic}) {
      auto& idxs = groups[{a.name, p}];
      if (static_cast<int>(idxs.size()) < per_class_quota)
        throw std::runtime_error("build_mixed_dataset: artist " + a.name + " has only " +
                                 std::to_string(idxs.size()) + " " + to_string(p) +
                                 " records, quota " + std::to_string(per_class_quota) +
                                 " (shortfall " +
                                 std::to_string(per_class_quota -
                                                static_cast<long long>(idxs.size())) +
                                 ")");
      std::sort(idxs.begin(), idxs.end(), [&](size_t x, size_t y) {
        return manifest.records[x].id < manifest.records[y].id;
      });
      SeededRng rng(derive_seed("mix:" + a.name + ":" + to_string(p), seed));
      rng.shuffle(idxs);
      std::vector<size_t> pick(idxs.begin(), idxs.begin() + per_class_quota);
      std::sort(pick.begin(), pick.end(), [&](size_t x, size_t y) {
        return manifest.records[x].id < manifest.records[y].id;
      });
      for (size_t i : pick) {
        ArtworkRecord r = manifest.records[i];
        r.split = Split::unassigned;
        out.records.push_back(std::move(r));
      }
    }
  }
  return out;
}

// --------------------------------------------------------------- gallery

static bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

static std::string slugify(const std::string& s) {
  std::string out;
  for (char c : s)
    out += (std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::tolower(c))
                                                        : '_');
  return out;
}

FetchResult fetch_gallery(const ArtistLabel& artist, const std::string& destination_dir,
                          const GallerySource& source,
                          const std::vector<ArtworkRecord>& existing) {
  FetchResult result;
  fs::create_directories(destination_dir);

  std::set<std::string> known_checksums;
  for (const auto& r : existing) known_checksums.insert(r.checksum);

  std::vector<fs::path> local_files;
  if (source.kind == "local") {
    if (!fs::is_directory(source.path)) {
      result.errors.push_back("source directory unreachable: " + source.path);
      return result;
    }
    for (const auto& e : fs::directory_iterator(source.path))
      if (e.is_regular_file() && is_image_file(e.path())) local_files.push_back(e.path());
    std::sort(local_files.begin(), local_files.end());
  } else {
    result.errors.push_back("unsupported gallery source kind: " + source.kind);
    return result;
  }

  const std::string prefix = slugify(artist.name);
  for (const auto& src : local_files) {
    std::string checksum;
    try {
      checksum = file_checksum(src.string());
    } catch (const std::exception& e) {
      result.errors.push_back(e.what());
      continue;
    }
    if (known_checksums.count(checksum)) {
      ++result.skipped;
      continue;
    }
    const std::string fname = prefix + "_" + src.filename().string();
    const fs::path dst = fs::path(destination_dir) / fname;
    if (!fs::exists(dst) || file_checksum(dst.string()) != checksum) {
      fs::copy_file(src, dst, fs::copy_options::overwrite_existing);
      ++result.downloaded;
    } else {
      ++result.skipped;
    }
    ArtworkRecord rec;
    rec.id = prefix + ":" + checksum;
    rec.path = fname;
    rec.artist = artist.name;
    rec.provenance = Provenance::original;
    rec.checksum = checksum;
    // decode probe: unreadable image content is kept but flagged
    cv::Mat img = cv::imread(dst.string(), cv::IMREAD_COLOR);
    if (img.empty()) {
      rec.excluded = true;
      result.errors.push_back("undecodable image: " + fname);
    }
    known_checksums.insert(checksum);
    result.records.push_back(std::move(rec));
  }
  return result;
}

// ------------------------------------------------------------ file I/O

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    json header;
    header["artists"] = json::array();
    for (const auto& a : manifest.artists) header["artists"].push_back(a.name);
    header["seed"] = manifest.seed;
    header["version"] = 1;
    out << header.dump() << "\n";
    for (const auto& r : manifest.records) {
      json j;
      j["id"] = r.id;
      j["path"] = r.path;
      j["artist"] = r.artist;
      j["provenance"] = to_string(r.provenance);
      j["prompt"] = r.prompt ? json(*r.prompt) : json(nullptr);
      j["split"] = to_string(r.split);
      j["excluded"] = r.excluded;
      j["checksum"] = r.checksum;
      out << j.dump() << "\n";
    }
  }
  fs::rename(tmp, path);
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read manifest: " + path);
  DatasetManifest m;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("manifest missing header: " + path);
  json header = json::parse(line);
  int next_id = 0;
  for (const auto& name : header.at("artists"))
    m.artists.push_back({name.get<std::string>(), next_id++});
  m.seed = header.value("seed", 0ULL);

  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = json::parse(line);
    ArtworkRecord r;
    r.id = j.at("id").get<std::string>();
    r.path = j.at("path").get<std::string>();
    r.artist = j.at("artist").get<std::string>();
    r.provenance = provenance_from_string(j.at("provenance").get<std::string>());
    if (j.contains("prompt") && !j["prompt"].is_null())
      r.prompt = j["prompt"].get<std::string>();
    r.split = split_from_string(j.value("split", "unassigned"));
    r.excluded = j.value("excluded", false);
    r.checksum = j.value("checksum", "");
    m.records.push_back(std::move(r));
  }
  return m;
}

void save_prompts(const std::vector<PromptLine>& lines, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write prompt file: " + path);
  for (const auto& l : lines) out << l.full_text << "\n";
}

}  // namespace artmetric::corpus
