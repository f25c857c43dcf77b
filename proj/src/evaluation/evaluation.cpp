#include "artmetric/evaluation.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

#include "artmetric/core/hash.hpp"

namespace fs = std::filesystem;

namespace artmetric::evaluation {

long long ConfusionMatrix::total() const {
  long long t = 0;
  for (const auto& row : counts)
    for (long long v : row) t += v;
  return t;
}

long long ConfusionMatrix::trace() const {
  long long t = 0;
  for (size_t i = 0; i < counts.size(); ++i) t += counts[i][i];
  return t;
}

double ConfusionMatrix::accuracy() const {
  const long long n = total();
  return n == 0 ? 0.0 : static_cast<double>(trace()) / static_cast<double>(n);
}

ConfusionMatrix tally_confusion(const std::vector<std::string>& labels,
                                const std::vector<int>& truth,
                                const std::vector<int>& predicted) {
  if (truth.size() != predicted.size())
    throw std::invalid_argument("tally_confusion: length mismatch");
  ConfusionMatrix m;
  m.labels = labels;
  m.counts.assign(labels.size(), std::vector<long long>(labels.size(), 0));
  for (size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= static_cast<int>(labels.size()) || predicted[i] < 0 ||
        predicted[i] >= static_cast<int>(labels.size()))
      throw std::invalid_argument("tally_confusion: label index out of range");
    m.counts[static_cast<size_t>(truth[i])][static_cast<size_t>(predicted[i])] += 1;
  }
  return m;
}

ConfusionMatrix confusion(const backbone::LoadedDataset& eval_set, backbone::Session& session) {
  if (eval_set.images.empty()) throw std::runtime_error("confusion: empty evaluation set");
  std::vector<int> predicted;
  predicted.reserve(eval_set.images.size());
  for (const auto& img : eval_set.images) {
    std::vector<double> scores = session.classify(img);
    int arg = 0;
    for (size_t j = 1; j < scores.size(); ++j)
      if (scores[j] > scores[static_cast<size_t>(arg)]) arg = static_cast<int>(j);
    predicted.push_back(arg);
  }
  return tally_confusion(eval_set.artists, eval_set.labels, predicted);
}

TransferResult transfer_experiment(const backbone::LoadedDataset& orig_train,
                                   const backbone::LoadedDataset& orig_val,
                                   const backbone::LoadedDataset& synthetic,
                                   const backbone::BackboneConfig& bc,
                                   const backbone::TrainRunConfig& rc) {
  if (orig_train.artists != synthetic.artists)
    throw std::runtime_error("transfer_experiment: artist lists differ between domains");
  TransferResult out;
  out.training = backbone::train_discriminative(orig_train, orig_val, bc, rc);
  backbone::Session session(out.training.history[static_cast<size_t>(out.training.best_epoch - 1)]);
  out.on_original_val = confusion(orig_val, session);
  out.on_synthetic = confusion(synthetic, session);
  out.accuracy_gap = out.on_original_val.accuracy() - out.on_synthetic.accuracy();
  return out;
}

// --------------------------------------------------------------- retrieval

std::vector<RetrievalSummary> retrieval_from_distances(const DistanceMatrix& matrix,
                                                       const std::vector<double>& thresholds,
                                                       int n_max) {
  if (matrix.gallery_ids.empty()) throw std::runtime_error("retrieval: empty gallery");
  if (matrix.query_ids.empty()) throw std::runtime_error("retrieval: no queries");
  if (n_max <= 0) throw std::invalid_argument("retrieval: n_max must be positive");
  for (double t : thresholds)
    if (!(t > 0.0 && t <= 1.0))
      throw std::invalid_argument("retrieval: thresholds must lie in (0, 1]");

  std::string fp_src;
  for (const auto& id : matrix.query_ids) fp_src += id + "\n";
  const std::string fingerprint = to_hex(fnv1a64(fp_src));

  std::vector<RetrievalSummary> out;
  for (double t : thresholds) {
    RetrievalSummary s;
    s.threshold = t;
    s.query_fingerprint = fingerprint;
    // Per query: sorted candidate list under the threshold.
    std::vector<std::vector<size_t>> candidates(matrix.query_ids.size());
    long long answerable = 0;
    for (size_t q = 0; q < matrix.query_ids.size(); ++q) {
      std::vector<size_t>& c = candidates[q];
      for (size_t g = 0; g < matrix.gallery_ids.size(); ++g)
        if (matrix.d[q][g] <= t) c.push_back(g);
      std::sort(c.begin(), c.end(), [&](size_t a, size_t b) {
        if (matrix.d[q][a] != matrix.d[q][b]) return matrix.d[q][a] < matrix.d[q][b];
        return matrix.gallery_ids[a] < matrix.gallery_ids[b];
      });
      if (c.empty())
        ++s.unanswerable;
      else
        ++answerable;
    }
    for (int n = 1; n <= n_max; ++n) {
      RetrievalEntry e;
      e.n = n;
      e.answerable = answerable;
      for (size_t q = 0; q < matrix.query_ids.size(); ++q) {
        const auto& c = candidates[q];
        if (c.empty()) continue;
        const size_t upto = std::min(static_cast<size_t>(n), c.size());
        for (size_t k = 0; k < upto; ++k) {
          if (matrix.gallery_artists[c[k]] == matrix.query_artists[q]) {
            ++e.successful;
            break;
          }
        }
      }
      if (answerable > 0)
        e.probability = static_cast<double>(e.successful) / static_cast<double>(answerable);
      s.per_n.push_back(e);
    }
    out.push_back(std::move(s));
  }
  return out;
}

DistanceMatrix build_distance_matrix(const std::vector<std::string>& query_ids,
                                     const std::vector<std::string>& gallery_ids,
                                     const corpus::DatasetManifest& manifest,
                                     const std::string& image_root,
                                     siamese::MetricModel& model) {
  std::map<std::string, const corpus::ArtworkRecord*> by_id;
  for (const auto& r : manifest.records) by_id[r.id] = &r;
  auto need = [&](const std::string& id) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw std::runtime_error("record not in manifest: " + id);
    return it->second;
  };
  DistanceMatrix m;
  std::vector<std::vector<float>> query_emb, gallery_emb;
  for (const auto& id : query_ids) {
    const auto* r = need(id);
    m.query_ids.push_back(id);
    m.query_artists.push_back(r->artist);
    query_emb.push_back(model.embed_file(image_root + "/" + r->path).values);
  }
  for (const auto& id : gallery_ids) {
    const auto* r = need(id);
    m.gallery_ids.push_back(id);
    m.gallery_artists.push_back(r->artist);
    gallery_emb.push_back(model.embed_file(image_root + "/" + r->path).values);
  }
  m.d.assign(query_ids.size(), std::vector<double>(gallery_ids.size(), 0.0));
  for (size_t q = 0; q < query_emb.size(); ++q)
    for (size_t g = 0; g < gallery_emb.size(); ++g)
      m.d[q][g] = siamese::pair_distance(query_emb[q], gallery_emb[g]);
  return m;
}

std::vector<RetrievalSummary> retrieval_test(const std::vector<std::string>& query_ids,
                                             const std::vector<std::string>& gallery_ids,
                                             const corpus::DatasetManifest& manifest,
                                             const std::string& image_root,
                                             siamese::MetricModel& model,
                                             const std::vector<double>& thresholds, int n_max) {
  return retrieval_from_distances(
      build_distance_matrix(query_ids, gallery_ids, manifest, image_root, model), thresholds,
      n_max);
}

// ------------------------------------------------------------------- CSVs

static std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void save_distance_matrix_csv(const DistanceMatrix& matrix, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write distance matrix: " + path);
  out << "query_id";
  for (const auto& g : matrix.gallery_ids) out << "," << g;
  out << "\n";
  for (size_t q = 0; q < matrix.query_ids.size(); ++q) {
    out << matrix.query_ids[q];
    for (size_t g = 0; g < matrix.gallery_ids.size(); ++g) out << "," << fmt(matrix.d[q][g]);
    out << "\n";
  }
}

void save_confusion_csv(const ConfusionMatrix& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write confusion csv: " + path);
  out << "true_label";
  for (const auto& l : m.labels) out << "," << l;
  out << "\n";
  for (size_t i = 0; i < m.labels.size(); ++i) {
    out << m.labels[i];
    for (size_t j = 0; j < m.labels.size(); ++j) out << "," << m.counts[i][j];
    out << "\n";
  }
}

void save_retrieval_csv(const RetrievalSummary& s, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write retrieval csv: " + path);
  out << "n,Q_n,Q,P_n\n";
  for (const auto& e : s.per_n) {
    out << e.n << "," << e.successful << "," << e.answerable << ",";
    if (e.probability) out << fmt(*e.probability);
    out << "\n";
  }
}

static std::string threshold_tag(double t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", t);
  return buf;
}

std::vector<std::string> emit_report(const ResultsBundle& bundle,
                                     const std::string& output_dir) {
  if (bundle.empty()) throw std::runtime_error("emit_report: empty results bundle");
  fs::create_directories(output_dir);
  {  // writability probe before emitting anything
    const std::string probe = output_dir + "/.write_probe";
    std::ofstream p(probe, std::ios::binary);
    if (!p) throw std::runtime_error("emit_report: unwritable output directory: " + output_dir);
    p.close();
    fs::remove(probe);
  }

  std::vector<std::string> files;
  auto emit = [&](const std::string& name) { files.push_back(output_dir + "/" + name); };

  if (bundle.confusion) {
    save_confusion_csv(*bundle.confusion, output_dir + "/confusion.csv");
    emit("confusion.csv");
    plot_confusion(*bundle.confusion, output_dir + "/confusion.png");
    emit("confusion.png");
  }
  if (!bundle.loss_curve.empty()) {
    siamese::write_curve_csv(bundle.loss_curve, output_dir + "/loss_curve.csv");
    emit("loss_curve.csv");
    plot_loss_curve(bundle.loss_curve, output_dir + "/loss_curve.png");
    emit("loss_curve.png");
  }
  if (!bundle.retrieval.empty()) {
    for (const auto& s : bundle.retrieval) {
      const std::string name = "retrieval_T" + threshold_tag(s.threshold) + ".csv";
      save_retrieval_csv(s, output_dir + "/" + name);
      emit(name);
    }
    plot_retrieval(bundle.retrieval, output_dir + "/retrieval.png");
    emit("retrieval.png");
  }
  for (const auto& r : bundle.attributions) {
    const std::string slug = to_hex(fnv1a64(r.query)).substr(0, 8);
    const std::string name = "evidence_" + slug + ".json";
    std::ofstream out(output_dir + "/" + name, std::ios::binary);
    out << attribution::report_to_json(r) << "\n";
    emit(name);
    plot_evidence(r, output_dir + "/evidence_" + slug + ".png");
    emit("evidence_" + slug + ".png");
  }
  return files;
}

}  // namespace artmetric::evaluation
