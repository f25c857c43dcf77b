// Acceptance gate: one pass/fail line per criterion, exit 0 only when all
// criteria hold. Tolerances are part of the contract and must not be
// loosened.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "artmetric/attribution.hpp"
#include "artmetric/backbone.hpp"
#include "artmetric/core/rng.hpp"
#include "artmetric/corpus.hpp"
#include "artmetric/evaluation.hpp"
#include "artmetric/nn/model.hpp"
#include "artmetric/siamese.hpp"
#include "toy_corpus.hpp"

using namespace artmetric;
namespace fs = std::filesystem;

namespace {

struct Gate {
  int failed = 0;

  void run(const std::string& name, const std::function<void()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string error;
    try {
      body();
    } catch (const std::exception& e) {
      error = e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (error.empty()) {
      std::printf("PASS: %s (%.2fs)\n", name.c_str(), secs);
    } else {
      std::printf("FAIL: %s (%.2fs) -- %s\n", name.c_str(), secs, error.c_str());
      ++failed;
    }
    std::fflush(stdout);
  }
};

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ------------------------------------------------------------ shared state

struct ToyState {
  testsupport::ToyCorpus corpus;
  corpus::DatasetManifest split;          // both provenances
  backbone::BackboneConfig bc;
  backbone::LoadedDataset orig_train, orig_val, synth_all;
  backbone::LoadedDataset mixed_train, mixed_val;
  evaluation::TransferResult transfer;
  bool transfer_ready = false;
};

ToyState& toy() {
  static ToyState s;
  return s;
}

corpus::DatasetManifest filter_provenance(const corpus::DatasetManifest& m,
                                          corpus::Provenance p) {
  corpus::DatasetManifest out;
  out.artists = m.artists;
  out.seed = m.seed;
  for (const auto& r : m.records)
    if (r.provenance == p) out.records.push_back(r);
  return out;
}

// --------------------------------------------------------------- criteria

void loss_exactness() {
  siamese::LossConfig cfg;  // C_p = 0.2, C_n = 10
  const struct {
    double d;
    int y;
    double expect;
  } cases[] = {
      {0.5, 0, 1.25},
      {0.0, 1, 10.0},
      {10.0, 1, 10.0 * std::exp(-2.77)},
  };
  for (const auto& c : cases) {
    const double got = siamese::contrastive_loss(c.d, c.y, cfg);
    require(std::abs(got - c.expect) < 1e-9,
            "loss(" + fmt(c.d) + ", y=" + std::to_string(c.y) + ") = " + fmt(got) +
                ", expected " + fmt(c.expect));
  }
}

void gradient_check() {
  siamese::LossConfig cfg;
  const double step = 1e-5;
  for (double d : {0.1, 0.5, 1.0, 2.0, 5.0}) {
    for (int y : {0, 1}) {
      const double fd = (siamese::contrastive_loss(d + step, y, cfg) -
                         siamese::contrastive_loss(d - step, y, cfg)) /
                        (2.0 * step);
      const double an = siamese::contrastive_loss_grad(d, y, cfg);
      const double rel = std::abs(fd - an) / std::max(std::abs(fd), 1e-12);
      require(rel < 1e-4, "grad at D=" + fmt(d) + ", y=" + std::to_string(y) +
                              ": relative error " + fmt(rel));
    }
  }
}

void retrieval_oracle_equivalence() {
  // fixed 5-query x 8-gallery fixture
  evaluation::DistanceMatrix m;
  m.query_ids = {"q0", "q1", "q2", "q3", "q4"};
  m.query_artists = {"A", "A", "B", "B", "A"};
  m.gallery_ids = {"g0", "g1", "g2", "g3", "g4", "g5", "g6", "g7"};
  m.gallery_artists = {"A", "A", "A", "A", "B", "B", "B", "B"};
  m.d = {
      {0.05, 0.30, 0.90, 1.20, 0.10, 0.40, 0.80, 1.50},
      {0.35, 0.10, 0.60, 0.70, 0.08, 0.20, 0.90, 1.10},
      {0.45, 0.45, 0.45, 0.45, 0.45, 0.45, 0.45, 0.45},
      {2.00, 2.00, 2.00, 2.00, 2.00, 2.00, 2.00, 2.00},
      {0.50, 0.10, 0.10, 0.30, 0.10, 0.49, 0.20, 0.05},
  };
  const std::vector<double> thresholds{0.1, 0.2, 0.3, 0.4, 0.5};
  const int n_max = 8;
  auto got = evaluation::retrieval_from_distances(m, thresholds, n_max);

  // independent brute-force evaluation
  for (size_t t = 0; t < thresholds.size(); ++t) {
    const double T = thresholds[t];
    long long Q = 0, unanswerable = 0;
    std::vector<long long> success(static_cast<size_t>(n_max), 0);
    for (size_t q = 0; q < m.query_ids.size(); ++q) {
      std::vector<std::pair<double, std::string>> cand;
      for (size_t g = 0; g < m.gallery_ids.size(); ++g)
        if (m.d[q][g] <= T) cand.push_back({m.d[q][g], m.gallery_ids[g]});
      if (cand.empty()) {
        ++unanswerable;
        continue;
      }
      ++Q;
      std::sort(cand.begin(), cand.end());
      for (int n = 1; n <= n_max; ++n) {
        bool hit = false;
        for (int k = 0; k < n && k < static_cast<int>(cand.size()); ++k) {
          size_t g = 0;
          while (m.gallery_ids[g] != cand[static_cast<size_t>(k)].second) ++g;
          hit = hit || m.gallery_artists[g] == m.query_artists[q];
        }
        if (hit) success[static_cast<size_t>(n - 1)] += 1;
      }
    }
    require(got[t].unanswerable == unanswerable, "unanswerable mismatch at T=" + fmt(T));
    for (int n = 1; n <= n_max; ++n) {
      const auto& e = got[t].per_n[static_cast<size_t>(n - 1)];
      if (Q == 0) {
        require(!e.probability.has_value(), "expected null P at T=" + fmt(T));
      } else {
        const double want =
            static_cast<double>(success[static_cast<size_t>(n - 1)]) / static_cast<double>(Q);
        require(e.probability.has_value() && *e.probability == want,
                "P(" + std::to_string(n) + ") at T=" + fmt(T) + " differs from oracle");
      }
    }
  }
}

void probability_contract() {
  auto p0 = attribution::attribution_probability(0.0);
  require(p0 && *p0 == 1.0, "P at min_d=0 must be exactly 1");
  auto p3 = attribution::attribution_probability(0.3);
  require(p3 && std::abs(*p3 - 0.7) < 1e-12, "P at min_d=0.3 must be 0.7");
  require(!attribution::attribution_probability(1.0 + 1e-12).has_value(),
          "P above min_d=1 must be undefined");

  SeededRng rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const double d = rng.uniform() * 2.5;
    auto p = attribution::attribution_probability(d);
    if (d <= 1.0) {
      require(p.has_value(), "P undefined inside [0,1] at " + fmt(d));
      require(*p >= 0.0 && *p <= 1.0, "P out of range at " + fmt(d));
      require(std::abs(*p - (1.0 - d)) < 1e-12, "P not 1-d at " + fmt(d));
    } else {
      require(!p.has_value(), "P defined beyond 1 at " + fmt(d));
    }
  }
}

void build_toy_state() {
  auto& s = toy();
  testsupport::ToyCorpusSpec spec;
  spec.artists = 5;
  spec.originals_per_artist = 30;
  spec.synthetics_per_artist = 30;
  spec.edge = 40;
  spec.seed = 20240601;
  spec.perturb_blend = 0.55;
  spec.perturb_noise = 0.25;
  spec.dir = (fs::temp_directory_path() / "artmetric_acceptance_corpus").string();
  fs::remove_all(spec.dir);
  s.corpus = testsupport::make_toy_corpus(spec);
  s.split = corpus::split_dataset(s.corpus.manifest, 0.8, 4242);

  s.bc.architecture_tag = "resnet_micro";
  s.bc.embedding_dim = 64;
  s.bc.input_edge = 32;

  auto originals = corpus::split_dataset(filter_provenance(s.corpus.manifest,
                                                           corpus::Provenance::original),
                                         0.8, 4242);
  s.orig_train = backbone::load_split(originals, s.corpus.image_root, corpus::Split::train, s.bc);
  s.orig_val = backbone::load_split(originals, s.corpus.image_root, corpus::Split::val, s.bc);

  auto synth = filter_provenance(s.corpus.manifest, corpus::Provenance::synthetic);
  for (auto& r : synth.records) r.split = corpus::Split::val;
  s.synth_all = backbone::load_split(synth, s.corpus.image_root, corpus::Split::val, s.bc);

  s.mixed_train = backbone::load_split(s.split, s.corpus.image_root, corpus::Split::train, s.bc);
  s.mixed_val = backbone::load_split(s.split, s.corpus.image_root, corpus::Split::val, s.bc);
}

void toy_discriminative() {
  auto& s = toy();

  // independent separability oracle FIRST: nearest mean-RGB centroid
  const double oracle =
      testsupport::nearest_centroid_accuracy(s.corpus, s.split, corpus::Provenance::original);
  require(oracle >= 0.95,
          "nearest-centroid oracle accuracy " + fmt(oracle) + " < 0.95; corpus not separable");

  backbone::TrainRunConfig rc;
  rc.epochs = 10;
  rc.batch_size = 16;
  rc.learning_rate = 1e-3;
  rc.weight_decay = 1e-4;
  rc.seed = 77001;

  s.transfer = evaluation::transfer_experiment(s.orig_train, s.orig_val, s.synth_all, s.bc, rc);
  s.transfer_ready = true;

  const double acc = s.transfer.on_original_val.accuracy();
  require(acc >= 0.95, "discriminative validation accuracy " + fmt(acc) + " < 0.95");
}

void toy_transfer_asymmetry() {
  auto& s = toy();
  require(s.transfer_ready, "depends on the discriminative criterion");
  const double orig = s.transfer.on_original_val.accuracy();
  const double synth = s.transfer.on_synthetic.accuracy();
  require(synth < orig, "synthetic-domain accuracy " + fmt(synth) +
                            " not strictly below original-domain " + fmt(orig));
}

void toy_siamese() {
  auto& s = toy();

  // base: discriminative head trained on the mixed-provenance train split
  backbone::TrainRunConfig base_rc;
  base_rc.epochs = 8;
  base_rc.batch_size = 16;
  base_rc.learning_rate = 1e-3;
  base_rc.weight_decay = 1e-4;
  base_rc.seed = 88001;
  auto base_result = backbone::train_discriminative(s.mixed_train, s.mixed_val, s.bc, base_rc);
  const auto& base = base_result.history[static_cast<size_t>(base_result.best_epoch - 1)];

  auto val_items = siamese::pair_items_from(s.split, corpus::Split::val);
  auto val_pairs = siamese::sample_pairs(val_items, 200, 0.5, 9090, 0);

  siamese::LossConfig loss;
  backbone::TrainRunConfig rc;
  rc.epochs = 12;  // criterion allows up to 50
  rc.batch_size = 32;
  rc.learning_rate = 3e-4;
  rc.weight_decay = 1e-4;
  rc.seed = 88002;
  auto result = siamese::train_siamese(s.mixed_train, s.mixed_val, val_pairs, base, loss, rc,
                                       256, 0.5);
  const auto& best = siamese::select_checkpoint(result.history);

  siamese::MetricModel model(best, loss);
  std::map<std::string, size_t> val_index;
  for (size_t i = 0; i < s.mixed_val.record_ids.size(); ++i)
    val_index[s.mixed_val.record_ids[i]] = i;

  double pos = 0.0, neg = 0.0;
  long long npos = 0, nneg = 0;
  for (const auto& p : val_pairs) {
    const double d = model.distance(s.mixed_val.images[val_index.at(p.first)],
                                    s.mixed_val.images[val_index.at(p.second)]);
    if (p.y == 0) {
      pos += d;
      ++npos;
    } else {
      neg += d;
      ++nneg;
    }
  }
  pos /= static_cast<double>(npos);
  neg /= static_cast<double>(nneg);
  require(pos < neg, "mean positive-pair distance " + fmt(pos) +
                         " not below mean negative-pair distance " + fmt(neg));

  // retrieval P(1) >= 0.9 at T = 1.0: synthetic val queries against the
  // original-domain gallery
  std::vector<std::string> queries, gallery;
  for (const auto& r : s.split.records) {
    if (r.excluded) continue;
    if (r.split == corpus::Split::val && r.provenance == corpus::Provenance::synthetic)
      queries.push_back(r.id);
    if (r.provenance == corpus::Provenance::original && r.split == corpus::Split::train)
      gallery.push_back(r.id);
  }
  auto summaries = evaluation::retrieval_test(queries, gallery, s.split, s.corpus.image_root,
                                              model, {1.0}, 1);
  require(summaries.size() == 1 && !summaries[0].per_n.empty(), "empty retrieval result");
  const auto& p1 = summaries[0].per_n[0];
  require(p1.probability.has_value(),
          "P(1) undefined: all " + std::to_string(queries.size()) + " queries unanswerable");
  require(*p1.probability >= 0.9,
          "P(1) = " + fmt(*p1.probability) + " < 0.9 at T=1.0 (answerable " +
              std::to_string(p1.answerable) + ", unanswerable " +
              std::to_string(summaries[0].unanswerable) + ")");
}

void determinism_suite() {
  auto& s = toy();
  const auto dir = fs::temp_directory_path() / "artmetric_acceptance_det";
  fs::remove_all(dir);
  fs::create_directories(dir);

  // splits reproduce byte-exactly
  auto s1 = corpus::split_dataset(s.corpus.manifest, 0.8, 31337);
  auto s2 = corpus::split_dataset(s.corpus.manifest, 0.8, 31337);
  corpus::save_manifest(s1, (dir / "a.jsonl").string());
  corpus::save_manifest(s2, (dir / "b.jsonl").string());
  require(slurp((dir / "a.jsonl").string()) == slurp((dir / "b.jsonl").string()),
          "split manifests differ byte-wise for identical seeds");

  // pair lists reproduce byte-exactly
  auto items = siamese::pair_items_from(s.split, corpus::Split::train);
  auto pa = siamese::sample_pairs(items, 300, 0.5, 424242, 7);
  auto pb = siamese::sample_pairs(items, 300, 0.5, 424242, 7);
  siamese::save_pairs(pa, (dir / "a_pairs.jsonl").string());
  siamese::save_pairs(pb, (dir / "b_pairs.jsonl").string());
  require(slurp((dir / "a_pairs.jsonl").string()) == slurp((dir / "b_pairs.jsonl").string()),
          "pair lists differ byte-wise for identical seeds");

  // epoch-0 losses reproduce within 1e-5
  backbone::TrainRunConfig rc;
  rc.epochs = 1;
  rc.batch_size = 16;
  rc.learning_rate = 1e-3;
  rc.seed = 515151;
  auto base = backbone::train_discriminative(s.orig_train, s.orig_val, s.bc, rc);
  auto vp = siamese::sample_pairs(siamese::pair_items_from(s.split, corpus::Split::val), 40,
                                  0.5, 11, 0);
  siamese::LossConfig loss;
  auto r1 = siamese::train_siamese(s.mixed_train, s.mixed_val, vp, base.history.back(), loss,
                                   rc, 40);
  auto r2 = siamese::train_siamese(s.mixed_train, s.mixed_val, vp, base.history.back(), loss,
                                   rc, 40);
  require(std::abs(r1.curve[0].train_loss - r2.curve[0].train_loss) < 1e-5,
          "epoch-0 train losses differ: " + fmt(r1.curve[0].train_loss) + " vs " +
              fmt(r2.curve[0].train_loss));
  require(std::abs(r1.curve[0].val_loss - r2.curve[0].val_loss) < 1e-5,
          "epoch-0 validation losses differ: " + fmt(r1.curve[0].val_loss) + " vs " +
              fmt(r2.curve[0].val_loss));
}

void invariant_suite() {
  SeededRng rng(606060);

  // P(n) monotone non-decreasing in n on random distance matrices
  for (int trial = 0; trial < 5; ++trial) {
    evaluation::DistanceMatrix m;
    for (int q = 0; q < 10; ++q) {
      m.query_ids.push_back("q" + std::to_string(q));
      m.query_artists.push_back("a" + std::to_string(q % 3));
    }
    for (int g = 0; g < 18; ++g) {
      m.gallery_ids.push_back("g" + std::to_string(g));
      m.gallery_artists.push_back("a" + std::to_string(static_cast<int>(rng.index(3))));
    }
    m.d.assign(10, std::vector<double>(18));
    for (auto& row : m.d)
      for (auto& v : row) v = rng.uniform() * 1.2;
    for (const auto& summary : evaluation::retrieval_from_distances(m, {0.2, 0.5, 1.0}, 12)) {
      double prev = -1.0;
      for (const auto& e : summary.per_n) {
        if (!e.probability) continue;
        require(*e.probability >= prev, "P(n) decreased in n");
        prev = *e.probability;
      }
    }
  }

  // vote counts monotone non-increasing in T
  attribution::EmbeddedReferences refs;
  refs.set.artist = {"A", 0};
  for (int i = 0; i < 40; ++i) {
    refs.set.records.push_back("r" + std::to_string(i));
    refs.embeddings.push_back({static_cast<float>(rng.uniform() * 1.5), 0.f});
  }
  std::vector<float> q{0.f, 0.f};
  int prev_votes = 1 << 30;
  for (double t : {0.05, 0.2, 0.4, 0.6, 0.8, 0.95}) {
    auto report = attribution::vote_attribute(q, "q", {refs}, t);
    require(report.per_artist[0].vote_count <= prev_votes, "votes increased with T");
    prev_votes = report.per_artist[0].vote_count;
  }

  // distance symmetry and identity
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<float> a(16), b(16);
    for (auto& v : a) v = static_cast<float>(rng.normal());
    for (auto& v : b) v = static_cast<float>(rng.normal());
    require(siamese::pair_distance(a, b) == siamese::pair_distance(b, a),
            "distance not symmetric");
    require(siamese::pair_distance(a, a) == 0.0, "d(x,x) != 0");
  }

  // mixed dataset exact balance
  auto& s = toy();
  auto mixed = corpus::build_mixed_dataset(s.corpus.manifest, 12, 99);
  std::map<std::pair<std::string, corpus::Provenance>, int> tally;
  for (const auto& r : mixed.records) tally[{r.artist, r.provenance}] += 1;
  require(tally.size() == 10, "mixed dataset missing groups");
  for (const auto& [key, n] : tally) require(n == 12, "mixed dataset group not at quota");

  // softmax rows normalize to 1
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> logits(7);
    for (auto& v : logits) v = rng.normal() * 5.0;
    auto p = nn::softmax(logits);
    double sum = 0.0;
    for (double v : p) {
      require(v >= 0.0, "negative softmax output");
      sum += v;
    }
    require(std::abs(sum - 1.0) < 1e-9, "softmax row does not sum to 1");
  }
}

}  // namespace

int main() {
  Gate gate;
  gate.run("loss exactness (three hand-evaluated values, 1e-9)", loss_exactness);
  gate.run("loss gradient vs central differences (rel err < 1e-4, both branches)",
           gradient_check);
  gate.run("retrieval equals brute-force oracle (5x8 fixture, all T, all n)",
           retrieval_oracle_equivalence);
  gate.run("attribution probability contract (values + 1000-sample property)",
           probability_contract);
  gate.run("toy corpus generation + splits", build_toy_state);
  gate.run("toy discriminative accuracy >= 0.95 (nearest-centroid oracle first)",
           toy_discriminative);
  gate.run("toy transfer asymmetry (synthetic strictly below original)",
           toy_transfer_asymmetry);
  gate.run("toy siamese separation + retrieval P(1) >= 0.9 at T=1.0", toy_siamese);
  gate.run("determinism (byte-exact splits and pairs, epoch-0 losses < 1e-5)",
           determinism_suite);
  gate.run("invariants (P(n), votes, distance, balance, softmax)", invariant_suite);

  if (gate.failed == 0) {
    std::printf("ACCEPTANCE: all criteria passed\n");
    return 0;
  }
  std::printf("ACCEPTANCE: %d criteria FAILED\n", gate.failed);
  return 1;
}
