#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <opencv2/imgcodecs.hpp>

#include "artmetric/backbone.hpp"
#include "artmetric/corpus.hpp"
#include "artmetric/siamese.hpp"
#include "toy_corpus.hpp"

using namespace artmetric;
using namespace artmetric::backbone;
namespace fs = std::filesystem;

namespace {

std::string tmpdir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("artmetric_bb_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d.string();
}

BackboneConfig micro_config() {
  BackboneConfig bc;
  bc.architecture_tag = "resnet_micro";
  bc.embedding_dim = 64;
  bc.input_edge = 32;
  return bc;
}

Checkpoint tiny_checkpoint() {
  BackboneConfig bc = micro_config();
  nn::ConvNet model(bc.architecture_tag, 2);
  SeededRng rng(19);
  model.init(rng);
  Checkpoint ckpt;
  ckpt.kind = CheckpointKind::discriminative;
  ckpt.epoch = 3;
  ckpt.train_loss = 0.5;
  ckpt.val_loss = 0.6;
  ckpt.val_accuracy = 0.75;
  ckpt.backbone = bc;
  ckpt.run.seed = 19;
  ckpt.artists = {"A", "B"};
  ckpt.fingerprint = config_fingerprint(bc, ckpt.run, ckpt.kind, ckpt.init_mode);
  ckpt.weights = dump_weights(model);
  return ckpt;
}

// The generator and trainer share a fixture; built once because image
// encoding dominates the test runtime.
struct Fixture {
  testsupport::ToyCorpus corpus;
  corpus::DatasetManifest split;
  LoadedDataset train, val;
};

const Fixture& fixture() {
  static Fixture f = [] {
    testsupport::ToyCorpusSpec spec;
    spec.artists = 3;
    spec.originals_per_artist = 8;
    spec.synthetics_per_artist = 4;
    spec.edge = 40;
    spec.dir = tmpdir("fixture");
    Fixture out;
    out.corpus = testsupport::make_toy_corpus(spec);
    out.split = corpus::split_dataset(out.corpus.manifest, 0.75, 5);
    out.train = load_split(out.split, out.corpus.image_root, corpus::Split::train, micro_config());
    out.val = load_split(out.split, out.corpus.image_root, corpus::Split::val, micro_config());
    return out;
  }();
  return f;
}

}  // namespace

TEST_CASE("BackboneConfig validation enforces edge, dim, and tag consistency") {
  CHECK_NOTHROW(micro_config().validate());
  auto bad = micro_config();
  bad.input_edge = 16;
  CHECK_THROWS(bad.validate());
  bad = micro_config();
  bad.embedding_dim = 128;  // resnet_micro is 64-wide
  CHECK_THROWS(bad.validate());
  bad = micro_config();
  bad.architecture_tag = "unknown";
  CHECK_THROWS(bad.validate());
}

TEST_CASE("preprocess: shape, normalization, grayscale replication, too-small rejection") {
  auto dir = tmpdir("prep");
  auto bc = micro_config();
  bc.mean = {0.f, 0.f, 0.f};
  bc.stdev = {1.f, 1.f, 1.f};

  // constant-color image: every pixel must map to the same normalized RGB
  cv::Mat color(48, 48, CV_8UC3, cv::Scalar(25, 51, 102));  // BGR
  REQUIRE(cv::imwrite(dir + "/c.png", color));
  Tensor t = preprocess(dir + "/c.png", bc);
  REQUIRE(t.shape == std::vector<int>{1, 3, 32, 32});
  CHECK(t.at(0, 0, 7, 9) == doctest::Approx(102.0 / 255.0).epsilon(1e-3));  // R
  CHECK(t.at(0, 1, 7, 9) == doctest::Approx(51.0 / 255.0).epsilon(1e-3));   // G
  CHECK(t.at(0, 2, 7, 9) == doctest::Approx(25.0 / 255.0).epsilon(1e-3));   // B

  // normalization applies (v - mean) / std per channel
  auto bc_norm = micro_config();
  Tensor tn = preprocess(dir + "/c.png", bc_norm);
  CHECK(tn.at(0, 0, 3, 3) ==
        doctest::Approx((102.0 / 255.0 - bc_norm.mean[0]) / bc_norm.stdev[0]).epsilon(1e-3));

  // grayscale replicates into all three channels
  cv::Mat gray(48, 48, CV_8UC1, cv::Scalar(200));
  REQUIRE(cv::imwrite(dir + "/g.png", gray));
  Tensor tg = preprocess(dir + "/g.png", bc);
  CHECK(tg.at(0, 0, 5, 5) == tg.at(0, 1, 5, 5));
  CHECK(tg.at(0, 1, 5, 5) == tg.at(0, 2, 5, 5));

  // undersized input is an error
  cv::Mat small(16, 16, CV_8UC3, cv::Scalar(1, 2, 3));
  REQUIRE(cv::imwrite(dir + "/s.png", small));
  CHECK_THROWS(preprocess(dir + "/s.png", bc));
  CHECK_THROWS(preprocess(dir + "/missing.png", bc));
}

TEST_CASE("checkpoint archive round-trips and metadata is readable without weights") {
  auto ckpt = tiny_checkpoint();
  auto dir = tmpdir("ckpt");
  auto path = dir + "/model.ckpt";
  save_checkpoint(ckpt, path);

  auto loaded = load_checkpoint(path);
  CHECK(loaded.kind == ckpt.kind);
  CHECK(loaded.epoch == ckpt.epoch);
  CHECK(loaded.val_accuracy == doctest::Approx(ckpt.val_accuracy));
  CHECK(loaded.fingerprint == ckpt.fingerprint);
  CHECK(loaded.artists == ckpt.artists);
  CHECK(loaded.backbone.architecture_tag == "resnet_micro");
  CHECK(loaded.weights == ckpt.weights);

  auto meta = load_checkpoint_meta_json(path);
  CHECK(meta.find("\"kind\"") != std::string::npos);
  CHECK(meta.find("resnet_micro") != std::string::npos);
  CHECK(meta.find(ckpt.fingerprint) != std::string::npos);
  // the weight blob (>100KB of floats) must not be inside the metadata
  CHECK(meta.size() < 4096);

  CHECK_THROWS(load_checkpoint(dir + "/nope.ckpt"));
}

TEST_CASE("config_fingerprint distinguishes configs and is stable") {
  auto bc = micro_config();
  TrainRunConfig rc;
  auto f1 = config_fingerprint(bc, rc, CheckpointKind::discriminative, "seeded_random");
  auto f2 = config_fingerprint(bc, rc, CheckpointKind::discriminative, "seeded_random");
  CHECK(f1 == f2);
  rc.learning_rate = 2e-4;
  CHECK(config_fingerprint(bc, rc, CheckpointKind::discriminative, "seeded_random") != f1);
  CHECK(config_fingerprint(bc, TrainRunConfig{}, CheckpointKind::siamese, "seeded_random") != f1);
}

TEST_CASE("dump/load weights round-trip restores the exact forward pass") {
  auto bc = micro_config();
  nn::ConvNet a(bc.architecture_tag, 3);
  SeededRng rng(31);
  a.init(rng);
  auto blob = dump_weights(a);

  nn::ConvNet b(bc.architecture_tag, 3);
  SeededRng rng2(99);
  b.init(rng2);
  load_weights(b, blob);

  Tensor x({1, 3, 32, 32});
  SeededRng xr(7);
  for (auto& v : x.data) v = static_cast<float>(xr.normal());
  CHECK(a.forward_features(x, false).data == b.forward_features(x, false).data);
  std::vector<float> truncated(blob.begin(), blob.end() - 1);
  CHECK_THROWS(load_weights(b, truncated));
}

TEST_CASE("load_split picks the requested split and skips excluded records") {
  const auto& f = fixture();
  // 3 artists x (6 train originals + 3 train synthetics)
  CHECK(f.train.images.size() == 27);
  CHECK(f.val.images.size() == 9);
  CHECK(f.train.artists.size() == 3);
  for (int label : f.train.labels) {
    CHECK(label >= 0);
    CHECK(label < 3);
  }

  auto with_excluded = f.split;
  int dropped = 0;
  for (auto& r : with_excluded.records)
    if (r.split == corpus::Split::train && dropped < 2) {
      r.excluded = true;
      ++dropped;
    }
  auto ds = load_split(with_excluded, f.corpus.image_root, corpus::Split::train, micro_config());
  CHECK(ds.images.size() == 25);
}

TEST_CASE("discriminative training: deterministic, per-epoch history, best epoch rule") {
  const auto& f = fixture();
  TrainRunConfig rc;
  rc.epochs = 2;
  rc.batch_size = 8;
  rc.learning_rate = 1e-3;
  rc.seed = 77;

  auto dir = tmpdir("train");
  auto r1 = train_discriminative(f.train, f.val, micro_config(), rc, dir + "/metrics.csv");
  auto r2 = train_discriminative(f.train, f.val, micro_config(), rc, "");

  REQUIRE(r1.history.size() == 2);
  REQUIRE(r1.stats.size() == 2);
  CHECK(r1.history[0].epoch == 1);
  CHECK(r1.history[1].epoch == 2);
  CHECK(r1.history[1].kind == CheckpointKind::discriminative);

  // exact reproducibility from the same seed
  for (size_t e = 0; e < 2; ++e) {
    CHECK(r1.stats[e].train_loss == r2.stats[e].train_loss);
    CHECK(r1.stats[e].val_loss == r2.stats[e].val_loss);
    CHECK(r1.stats[e].val_accuracy == r2.stats[e].val_accuracy);
    CHECK(r1.history[e].weights == r2.history[e].weights);
  }

  // best epoch: maximum validation accuracy, earliest on ties
  int expect_best = 0;
  for (size_t e = 1; e < r1.stats.size(); ++e)
    if (r1.stats[e].val_accuracy > r1.stats[static_cast<size_t>(expect_best)].val_accuracy)
      expect_best = static_cast<int>(e);
  CHECK(r1.best_epoch == r1.stats[static_cast<size_t>(expect_best)].epoch);

  // metrics CSV: header + one row per epoch
  std::ifstream in(dir + "/metrics.csv");
  std::string header, row1, row2;
  std::getline(in, header);
  CHECK(header == "epoch,train_loss,val_loss,val_accuracy");
  CHECK(std::getline(in, row1));
  CHECK(std::getline(in, row2));
  CHECK(row1.substr(0, 2) == "1,");

  // a different seed changes the trajectory
  rc.seed = 78;
  auto r3 = train_discriminative(f.train, f.val, micro_config(), rc);
  CHECK(r3.stats[0].train_loss != r1.stats[0].train_loss);
}

TEST_CASE("train_discriminative rejects degenerate datasets") {
  const auto& f = fixture();
  TrainRunConfig rc;
  rc.epochs = 1;
  rc.batch_size = 4;
  LoadedDataset empty;
  CHECK_THROWS(train_discriminative(empty, f.val, micro_config(), rc));
  LoadedDataset single;
  single.images = {f.train.images[0]};
  single.labels = {0};
  single.record_ids = {"only"};
  single.artists = {"A"};
  CHECK_THROWS(train_discriminative(single, single, micro_config(), rc));
}

TEST_CASE("siamese training: curve starts at epoch 0 and matches offline recomputation") {
  const auto& f = fixture();
  TrainRunConfig rc;
  rc.epochs = 1;
  rc.batch_size = 8;
  rc.learning_rate = 1e-4;
  rc.seed = 55;

  auto base_run = rc;
  base_run.epochs = 1;
  auto base_result = train_discriminative(f.train, f.val, micro_config(), base_run);
  const auto& base = base_result.history.back();

  auto val_items = siamese::pair_items_from(f.split, corpus::Split::val);
  auto val_pairs = siamese::sample_pairs(val_items, 16, 0.5, 123, 0);

  siamese::LossConfig loss;
  auto dir = tmpdir("siam");
  auto result = siamese::train_siamese(f.train, f.val, val_pairs, base, loss, rc, 16, 0.5,
                                       dir + "/curve.csv");

  // one trained checkpoint, one pre-training curve point plus one per epoch
  REQUIRE(result.history.size() == 1);
  REQUIRE(result.curve.size() == 2);
  CHECK(result.curve[0].epoch == 0);
  CHECK(result.curve[1].epoch == 1);
  CHECK(result.history[0].kind == CheckpointKind::siamese);

  // offline oracle: embed every validation pair with the *base* weights and
  // average the contrastive loss; must match the epoch-0 curve point
  siamese::MetricModel model(base, loss);
  double total = 0.0;
  for (const auto& p : val_pairs) {
    auto find = [&](const std::string& id) {
      for (size_t i = 0; i < f.val.record_ids.size(); ++i)
        if (f.val.record_ids[i] == id) return i;
      throw std::runtime_error("pair id not in val split: " + id);
    };
    const double d = model.distance(f.val.images[find(p.first)], f.val.images[find(p.second)]);
    total += siamese::contrastive_loss(d, p.y, loss);
  }
  const double offline = total / static_cast<double>(val_pairs.size());
  CHECK(std::abs(result.curve[0].val_loss - offline) < 1e-4);

  // curve CSV written with the epoch-0 row first
  std::ifstream in(dir + "/curve.csv");
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "epoch,train_loss,val_loss");
  CHECK(row.substr(0, 2) == "0,");

  // weight sharing is structural: both branches are the same object
  CHECK(model.branch_model(0) == model.branch_model(1));

  // a siamese checkpoint cannot seed another siamese run
  CHECK_THROWS(siamese::train_siamese(f.train, f.val, val_pairs, result.history[0], loss, rc));
}

TEST_CASE("Session embed produces finite embeddings; classify requires a discriminative head") {
  auto ckpt = tiny_checkpoint();
  Session session(ckpt);
  Tensor x({1, 3, 32, 32});
  SeededRng rng(3);
  for (auto& v : x.data) v = static_cast<float>(rng.normal());
  auto emb = session.embed(x, "probe");
  CHECK(emb.values.size() == 64);
  CHECK(emb.source_record_id == "probe");
  for (float v : emb.values) CHECK(std::isfinite(v));
  auto scores = session.classify(x);
  CHECK(scores.size() == 2);
  CHECK(scores[0] + scores[1] == doctest::Approx(1.0).epsilon(1e-6));

  auto siam = ckpt;
  siam.kind = CheckpointKind::siamese;
  Session s2(siam);
  CHECK_THROWS(s2.classify(x));
}
