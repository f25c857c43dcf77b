#include "artmetric/backbone.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <json.hpp>

#include "artmetric/core/hash.hpp"
#include "artmetric/core/rng.hpp"
#include "artmetric/nn/adam.hpp"

using nlohmann::json;

namespace artmetric::backbone {

void BackboneConfig::validate() const {
  if (input_edge < 32) throw std::invalid_argument("BackboneConfig: input_edge must be >= 32");
  if (embedding_dim < 2) throw std::invalid_argument("BackboneConfig: embedding_dim must be >= 2");
  const int arch_dim = nn::ConvNet::embedding_dim_for(architecture_tag);
  if (arch_dim != embedding_dim)
    throw std::invalid_argument("BackboneConfig: embedding_dim " + std::to_string(embedding_dim) +
                                " does not match architecture " + architecture_tag + " (" +
                                std::to_string(arch_dim) + ")");
}

void TrainRunConfig::validate() const {
  if (epochs <= 0 || batch_size <= 0 || learning_rate <= 0.0 || weight_decay < 0.0)
    throw std::invalid_argument("TrainRunConfig: numeric fields must be positive");
}

std::string to_string(CheckpointKind k) {
  return k == CheckpointKind::discriminative ? "discriminative" : "siamese";
}

static json backbone_json(const BackboneConfig& c) {
  return json{{"embedding_dim", c.embedding_dim},
              {"input_edge", c.input_edge},
              {"mean", {c.mean[0], c.mean[1], c.mean[2]}},
              {"stdev", {c.stdev[0], c.stdev[1], c.stdev[2]}},
              {"architecture_tag", c.architecture_tag}};
}

static BackboneConfig backbone_from_json(const json& j) {
  BackboneConfig c;
  c.embedding_dim = j.at("embedding_dim");
  c.input_edge = j.at("input_edge");
  for (int i = 0; i < 3; ++i) {
    c.mean[i] = j.at("mean")[i];
    c.stdev[i] = j.at("stdev")[i];
  }
  c.architecture_tag = j.at("architecture_tag");
  return c;
}

static json run_json(const TrainRunConfig& c) {
  return json{{"epochs", c.epochs},          {"batch_size", c.batch_size},
              {"learning_rate", c.learning_rate}, {"weight_decay", c.weight_decay},
              {"optimizer_tag", c.optimizer_tag}, {"seed", c.seed}};
}

static TrainRunConfig run_from_json(const json& j) {
  TrainRunConfig c;
  c.epochs = j.at("epochs");
  c.batch_size = j.at("batch_size");
  c.learning_rate = j.at("learning_rate");
  c.weight_decay = j.at("weight_decay");
  c.optimizer_tag = j.at("optimizer_tag");
  c.seed = j.at("seed");
  return c;
}

std::string config_fingerprint(const BackboneConfig& bc, const TrainRunConfig& rc,
                               CheckpointKind kind, const std::string& init_mode) {
  json j{{"backbone", backbone_json(bc)},
         {"run", run_json(rc)},
         {"kind", to_string(kind)},
         {"init_mode", init_mode}};
  return to_hex(fnv1a64(j.dump()));
}

// ------------------------------------------------------------ checkpoint IO

static constexpr char kMagic[8] = {'A', 'M', 'C', 'K', 'P', 'T', '0', '1'};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  json meta{{"kind", to_string(ckpt.kind)},
            {"epoch", ckpt.epoch},
            {"train_loss", ckpt.train_loss},
            {"val_loss", ckpt.val_loss},
            {"val_accuracy", ckpt.val_accuracy},
            {"fingerprint", ckpt.fingerprint},
            {"backbone", backbone_json(ckpt.backbone)},
            {"run", run_json(ckpt.run)},
            {"artists", ckpt.artists},
            {"init_mode", ckpt.init_mode}};
  const std::string meta_s = meta.dump();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write(kMagic, 8);
    uint64_t meta_len = meta_s.size();
    uint64_t blob_len = ckpt.weights.size();
    out.write(reinterpret_cast<const char*>(&meta_len), 8);
    out.write(meta_s.data(), static_cast<std::streamsize>(meta_s.size()));
    out.write(reinterpret_cast<const char*>(&blob_len), 8);
    out.write(reinterpret_cast<const char*>(ckpt.weights.data()),
              static_cast<std::streamsize>(blob_len * sizeof(float)));
  }
  std::filesystem::rename(tmp, path);
}

static void read_header(std::ifstream& in, const std::string& path, std::string& meta_s) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != std::string(kMagic, 8))
    throw std::runtime_error("not a checkpoint file: " + path);
  uint64_t meta_len = 0;
  in.read(reinterpret_cast<char*>(&meta_len), 8);
  meta_s.resize(meta_len);
  in.read(meta_s.data(), static_cast<std::streamsize>(meta_len));
  if (!in) throw std::runtime_error("truncated checkpoint metadata: " + path);
}

std::string load_checkpoint_meta_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  std::string meta_s;
  read_header(in, path, meta_s);
  return meta_s;
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  std::string meta_s;
  read_header(in, path, meta_s);
  json meta = json::parse(meta_s);
  Checkpoint c;
  c.kind = meta.at("kind") == "siamese" ? CheckpointKind::siamese
                                        : CheckpointKind::discriminative;
  c.epoch = meta.at("epoch");
  c.train_loss = meta.at("train_loss");
  c.val_loss = meta.at("val_loss");
  c.val_accuracy = meta.at("val_accuracy");
  c.fingerprint = meta.at("fingerprint");
  c.backbone = backbone_from_json(meta.at("backbone"));
  c.run = run_from_json(meta.at("run"));
  c.artists = meta.at("artists").get<std::vector<std::string>>();
  c.init_mode = meta.at("init_mode");
  uint64_t blob_len = 0;
  in.read(reinterpret_cast<char*>(&blob_len), 8);
  c.weights.resize(blob_len);
  in.read(reinterpret_cast<char*>(c.weights.data()),
          static_cast<std::streamsize>(blob_len * sizeof(float)));
  if (!in) throw std::runtime_error("truncated checkpoint blob: " + path);
  return c;
}

std::vector<float> dump_weights(nn::ConvNet& model) {
  std::vector<float> blob;
  for (Tensor* t : model.state_tensors())
    blob.insert(blob.end(), t->data.begin(), t->data.end());
  return blob;
}

void load_weights(nn::ConvNet& model, const std::vector<float>& blob) {
  size_t off = 0;
  for (Tensor* t : model.state_tensors()) {
    if (off + t->size() > blob.size())
      throw std::runtime_error("weight blob too short for architecture");
    std::copy(blob.begin() + static_cast<long>(off),
              blob.begin() + static_cast<long>(off + t->size()), t->data.begin());
    off += t->size();
  }
  if (off != blob.size()) throw std::runtime_error("weight blob size mismatch");
}

// -------------------------------------------------------------- preprocess

Tensor preprocess_decoded(const std::vector<float>& rgb, int h, int w,
                          const BackboneConfig& cfg) {
  cv::Mat img(h, w, CV_32FC3, const_cast<float*>(rgb.data()));
  cv::Mat resized;
  cv::resize(img, resized, cv::Size(cfg.input_edge, cfg.input_edge), 0, 0, cv::INTER_LINEAR);
  Tensor out({1, 3, cfg.input_edge, cfg.input_edge});
  for (int y = 0; y < cfg.input_edge; ++y)
    for (int x = 0; x < cfg.input_edge; ++x) {
      const cv::Vec3f px = resized.at<cv::Vec3f>(y, x);
      for (int c = 0; c < 3; ++c)
        out.at(0, c, y, x) = (px[c] - cfg.mean[c]) / cfg.stdev[c];
    }
  return out;
}

Tensor preprocess(const std::string& image_path, const BackboneConfig& cfg) {
  cv::Mat raw = cv::imread(image_path, cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw std::runtime_error("undecodable image: " + image_path);
  if (raw.rows < 32 || raw.cols < 32)
    throw std::runtime_error("image smaller than 32px per side: " + image_path);
  cv::Mat bgr;
  if (raw.channels() == 1)
    cv::cvtColor(raw, bgr, cv::COLOR_GRAY2BGR);  // grayscale replicated
  else if (raw.channels() == 4)
    cv::cvtColor(raw, bgr, cv::COLOR_BGRA2BGR);
  else
    bgr = raw;
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  cv::Mat f;
  rgb.convertTo(f, CV_32FC3, 1.0 / 255.0);
  std::vector<float> buf(f.total() * 3);
  std::memcpy(buf.data(), f.ptr<float>(), buf.size() * sizeof(float));
  return preprocess_decoded(buf, f.rows, f.cols, cfg);
}

// ----------------------------------------------------------------- Session

Session::Session(const Checkpoint& ckpt) : ckpt_(ckpt) {
  ckpt_.backbone.validate();
  model_ = std::make_unique<nn::ConvNet>(ckpt_.backbone.architecture_tag,
                                         static_cast<int>(ckpt_.artists.size()));
  load_weights(*model_, ckpt_.weights);
}

EmbeddingVector Session::embed(const Tensor& preprocessed, const std::string& record_id) {
  Tensor f = model_->forward_features(preprocessed, /*train=*/false);
  EmbeddingVector v;
  v.values.assign(f.data.begin(), f.data.end());
  v.source_record_id = record_id;
  for (float x : v.values)
    if (!std::isfinite(x)) throw std::runtime_error("non-finite embedding entry");
  return v;
}

EmbeddingVector Session::embed_file(const std::string& image_path) {
  return embed(preprocess(image_path, ckpt_.backbone), image_path);
}

std::vector<double> Session::classify(const Tensor& preprocessed) {
  if (ckpt_.kind != CheckpointKind::discriminative)
    throw std::runtime_error("classify requires a discriminative checkpoint");
  Tensor f = model_->forward_features(preprocessed, false);
  Tensor logits = model_->forward_head(f, false);
  std::vector<double> row(logits.data.begin(), logits.data.end());
  return nn::softmax(row);
}

std::vector<double> Session::classify_file(const std::string& image_path) {
  return classify(preprocess(image_path, ckpt_.backbone));
}

// ----------------------------------------------------------------- training

LoadedDataset load_split(const corpus::DatasetManifest& manifest, const std::string& image_root,
                         corpus::Split split, const BackboneConfig& cfg) {
  LoadedDataset ds;
  for (const auto& a : manifest.artists) ds.artists.push_back(a.name);
  for (const auto& r : manifest.records) {
    if (r.excluded || r.split != split) continue;
    const corpus::ArtistLabel* a = manifest.find_artist(r.artist);
    if (!a) throw std::runtime_error("record " + r.id + " references unknown artist");
    ds.images.push_back(preprocess(image_root + "/" + r.path, cfg));
    ds.labels.push_back(a->id);
    ds.record_ids.push_back(r.id);
  }
  return ds;
}

void write_metrics_csv(const std::vector<EpochStats>& stats, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write metrics csv: " + path);
  out << "epoch,train_loss,val_loss,val_accuracy\n";
  char buf[160];
  for (const auto& s : stats) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g\n", s.epoch, s.train_loss, s.val_loss,
                  s.val_accuracy);
    out << buf;
  }
}

static Tensor gather_batch(const LoadedDataset& ds, const std::vector<size_t>& idx, size_t from,
                           size_t to, std::vector<int>* labels) {
  const Tensor& first = ds.images[idx[from]];
  const int c = first.dim(1), h = first.dim(2), w = first.dim(3);
  Tensor batch({static_cast<int>(to - from), c, h, w});
  for (size_t i = from; i < to; ++i) {
    const Tensor& img = ds.images[idx[i]];
    std::copy(img.data.begin(), img.data.end(),
              batch.data.begin() + static_cast<long>((i - from) * img.size()));
    if (labels) labels->push_back(ds.labels[idx[i]]);
  }
  return batch;
}

// Mean loss + accuracy over a dataset, eval mode, batched.
static void evaluate(nn::ConvNet& model, const LoadedDataset& ds, int batch_size, double* loss,
                     double* accuracy, std::vector<int>* predictions = nullptr) {
  std::vector<size_t> idx(ds.images.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  double total_loss = 0.0;
  long long correct = 0;
  for (size_t start = 0; start < idx.size(); start += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(idx.size(), start + static_cast<size_t>(batch_size));
    std::vector<int> labels;
    Tensor batch = gather_batch(ds, idx, start, end, &labels);
    Tensor logits = model.forward_head(model.forward_features(batch, false), false);
    Tensor probs;
    total_loss += nn::softmax_cross_entropy(logits, labels, nullptr, &probs) *
                  static_cast<double>(end - start);
    for (size_t i = 0; i < labels.size(); ++i) {
      int arg = 0;
      for (int j = 1; j < logits.dim(1); ++j)
        if (probs.at(static_cast<int>(i), j) > probs.at(static_cast<int>(i), arg)) arg = j;
      if (arg == labels[i]) ++correct;
      if (predictions) predictions->push_back(arg);
    }
  }
  if (loss) *loss = total_loss / static_cast<double>(idx.size());
  if (accuracy) *accuracy = static_cast<double>(correct) / static_cast<double>(idx.size());
}

TrainResult train_discriminative(const LoadedDataset& train, const LoadedDataset& val,
                                 const BackboneConfig& bc, const TrainRunConfig& rc,
                                 const std::string& metrics_csv_path) {
  bc.validate();
  rc.validate();
  {
    std::set<int> classes(train.labels.begin(), train.labels.end());
    if (classes.size() < 2)
      throw std::runtime_error("train_discriminative: need at least 2 artists in train set");
    std::map<int, int> per;
    for (int l : train.labels) per[l]++;
    for (auto [cls, n] : per)
      if (n < 2)
        throw std::runtime_error("train_discriminative: artist class " + std::to_string(cls) +
                                 " has fewer than 2 train records");
  }
  if (train.images.empty() || val.images.empty())
    throw std::runtime_error("train_discriminative: empty split");

  nn::ConvNet model(bc.architecture_tag, static_cast<int>(train.artists.size()));
  SeededRng init_rng(derive_seed("backbone-init", rc.seed));
  model.init(init_rng);
  nn::AdamConfig ac;
  ac.lr = rc.learning_rate;
  ac.weight_decay = rc.weight_decay;
  nn::Adam opt(model.params(), ac);

  const std::string fingerprint =
      config_fingerprint(bc, rc, CheckpointKind::discriminative, "seeded_random");

  TrainResult result;
  for (int epoch = 0; epoch < rc.epochs; ++epoch) {
    std::vector<size_t> order(train.images.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    SeededRng epoch_rng(derive_seed("backbone-epoch:" + std::to_string(epoch), rc.seed));
    epoch_rng.shuffle(order);

    double epoch_loss = 0.0;
    long long seen = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(rc.batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(rc.batch_size));
      std::vector<int> labels;
      Tensor batch = gather_batch(train, order, start, end, &labels);
      model.zero_grads();
      Tensor logits = model.forward_head(model.forward_features(batch, true), true);
      Tensor dlogits;
      const double loss = nn::softmax_cross_entropy(logits, labels, &dlogits, nullptr);
      model.backward_head(dlogits);
      opt.step();
      epoch_loss += loss * static_cast<double>(end - start);
      seen += static_cast<long long>(end - start);
    }

    EpochStats st;
    st.epoch = epoch + 1;  // epochs are numbered 1..E
    st.train_loss = epoch_loss / static_cast<double>(seen);
    evaluate(model, val, rc.batch_size, &st.val_loss, &st.val_accuracy);
    result.stats.push_back(st);

    Checkpoint ck;
    ck.kind = CheckpointKind::discriminative;
    ck.epoch = epoch + 1;
    ck.train_loss = st.train_loss;
    ck.val_loss = st.val_loss;
    ck.val_accuracy = st.val_accuracy;
    ck.fingerprint = fingerprint;
    ck.backbone = bc;
    ck.run = rc;
    ck.artists = train.artists;
    ck.weights = dump_weights(model);
    result.history.push_back(std::move(ck));
  }

  size_t best = 0;
  for (size_t i = 1; i < result.stats.size(); ++i)
    if (result.stats[i].val_accuracy > result.stats[best].val_accuracy) best = i;
  result.best_epoch = result.stats[best].epoch;

  if (!metrics_csv_path.empty()) write_metrics_csv(result.stats, metrics_csv_path);
  return result;
}

}  // namespace artmetric::backbone
