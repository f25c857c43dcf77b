#include "artmetric/siamese.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "artmetric/core/hash.hpp"
#include "artmetric/core/rng.hpp"
#include "artmetric/nn/adam.hpp"

using nlohmann::json;

namespace artmetric::siamese {

void LossConfig::validate() const {
  if (!(c_p > 0.0) || !(c_n > 0.0))
    throw std::invalid_argument("LossConfig: C_p and C_n must be positive");
  if (variant != "exponential" && variant != "margin_hinge")
    throw std::invalid_argument("LossConfig: unknown variant " + variant);
}

double contrastive_loss(double d, int y, const LossConfig& cfg) {
  if (d < 0.0) throw std::invalid_argument("contrastive_loss: negative distance");
  if (y != 0 && y != 1) throw std::invalid_argument("contrastive_loss: y must be 0 or 1");
  if (cfg.variant == "margin_hinge") {
    if (y == 0) return d * d;
    const double m = std::max(cfg.margin - d, 0.0);
    return m * m;
  }
  if (y == 0) return cfg.alpha() * d * d;
  return cfg.beta() * std::exp(cfg.gamma() * d);
}

double contrastive_loss_grad(double d, int y, const LossConfig& cfg) {
  if (d < 0.0) throw std::invalid_argument("contrastive_loss_grad: negative distance");
  if (cfg.variant == "margin_hinge") {
    if (y == 0) return 2.0 * d;
    return cfg.margin - d > 0.0 ? -2.0 * (cfg.margin - d) : 0.0;
  }
  if (y == 0) return 2.0 * cfg.alpha() * d;
  return cfg.beta() * cfg.gamma() * std::exp(cfg.gamma() * d);
}

double pair_distance(const std::vector<float>& e1, const std::vector<float>& e2) {
  if (e1.size() != e2.size())
    throw std::invalid_argument("pair_distance: dimension mismatch");
  double s = 0.0;
  for (size_t i = 0; i < e1.size(); ++i) {
    const double d = static_cast<double>(e1[i]) - e2[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// ----------------------------------------------------------------- pairs

std::vector<PairItem> pair_items_from(const corpus::DatasetManifest& manifest,
                                      corpus::Split split) {
  std::vector<PairItem> out;
  for (const auto& r : manifest.records)
    if (!r.excluded && r.split == split) out.push_back({r.id, r.artist});
  return out;
}

std::vector<PairSample> sample_pairs(const std::vector<PairItem>& items, int pairs_per_epoch,
                                     double positive_fraction, uint64_t seed, int epoch) {
  if (pairs_per_epoch <= 0) throw std::invalid_argument("sample_pairs: pair count must be positive");
  if (positive_fraction < 0.0 || positive_fraction > 1.0)
    throw std::invalid_argument("sample_pairs: positive_fraction outside [0,1]");

  std::map<std::string, std::vector<size_t>> by_artist;
  for (size_t i = 0; i < items.size(); ++i) by_artist[items[i].artist].push_back(i);
  if (by_artist.size() < 2)
    throw std::runtime_error("sample_pairs: need at least 2 artists");
  std::vector<std::string> artists;
  for (auto& [name, idxs] : by_artist) {
    if (idxs.size() < 2)
      throw std::runtime_error("sample_pairs: artist " + name +
                               " has a single record, positives impossible");
    artists.push_back(name);
  }

  const int want_pos = static_cast<int>(std::lround(positive_fraction * pairs_per_epoch));
  SeededRng rng(derive_seed("pairs:" + std::to_string(epoch), seed));
  std::set<std::pair<size_t, size_t>> used;  // unordered, stored (lo, hi)
  std::vector<PairSample> out;
  out.reserve(static_cast<size_t>(pairs_per_epoch));

  auto emit = [&](size_t a, size_t b, int y) {
    auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
    if (!used.insert(key).second) return false;
    out.push_back({items[a].id, items[b].id, y});
    return true;
  };

  const long long max_attempts = 1000LL * pairs_per_epoch + 10000;
  long long attempts = 0;
  int made_pos = 0;
  while (made_pos < want_pos) {
    if (++attempts > max_attempts)
      throw std::runtime_error("sample_pairs: could not place requested positive pairs");
    const auto& group = by_artist[artists[rng.index(artists.size())]];
    const size_t a = group[rng.index(group.size())];
    size_t b = group[rng.index(group.size())];
    if (a == b) continue;
    if (emit(a, b, 0)) ++made_pos;
  }
  int made_neg = 0;
  const int want_neg = pairs_per_epoch - want_pos;
  while (made_neg < want_neg) {
    if (++attempts > max_attempts)
      throw std::runtime_error("sample_pairs: could not place requested negative pairs");
    const size_t a = rng.index(items.size());
    const size_t b = rng.index(items.size());
    if (a == b || items[a].artist == items[b].artist) continue;
    if (emit(a, b, 1)) ++made_neg;
  }
  return out;
}

void save_pairs(const std::vector<PairSample>& pairs, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write pair list: " + path);
  for (const auto& p : pairs) {
    json j{{"first", p.first}, {"second", p.second}, {"y", p.y}};
    out << j.dump() << "\n";
  }
}

std::vector<PairSample> load_pairs(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read pair list: " + path);
  std::vector<PairSample> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    out.push_back({j.at("first"), j.at("second"), j.at("y")});
  }
  return out;
}

// -------------------------------------------------------------- training

namespace {

struct IndexedDataset {
  const backbone::LoadedDataset* ds;
  std::map<std::string, size_t> by_id;
};

IndexedDataset index_dataset(const backbone::LoadedDataset& ds) {
  IndexedDataset out{&ds, {}};
  for (size_t i = 0; i < ds.record_ids.size(); ++i) out.by_id[ds.record_ids[i]] = i;
  return out;
}

size_t lookup(const IndexedDataset& idx, const std::string& id) {
  auto it = idx.by_id.find(id);
  if (it == idx.by_id.end())
    throw std::runtime_error("pair references record not in dataset: " + id);
  return it->second;
}

// Forward a batch of pairs through the shared model; returns per-pair
// distances, and when train=true runs the backward pass as well.
double run_pair_batch(nn::ConvNet& model, const backbone::LoadedDataset& ds,
                      const IndexedDataset& idx, const std::vector<PairSample>& pairs,
                      size_t from, size_t to, const LossConfig& loss, bool train) {
  const size_t b = to - from;
  const Tensor& proto = ds.images[0];
  Tensor batch({static_cast<int>(2 * b), proto.dim(1), proto.dim(2), proto.dim(3)});
  const size_t img_sz = proto.size();
  for (size_t i = from; i < to; ++i) {
    const Tensor& a = ds.images[lookup(idx, pairs[i].first)];
    const Tensor& c = ds.images[lookup(idx, pairs[i].second)];
    std::copy(a.data.begin(), a.data.end(),
              batch.data.begin() + static_cast<long>((i - from) * img_sz));
    std::copy(c.data.begin(), c.data.end(),
              batch.data.begin() + static_cast<long>((b + i - from) * img_sz));
  }
  Tensor emb = model.forward_features(batch, train);
  const int dim = emb.dim(1);
  double total = 0.0;
  Tensor demb({static_cast<int>(2 * b), dim});
  for (size_t i = 0; i < b; ++i) {
    double d2 = 0.0;
    for (int j = 0; j < dim; ++j) {
      const double diff = emb.at(static_cast<int>(i), j) - emb.at(static_cast<int>(b + i), j);
      d2 += diff * diff;
    }
    const double d = std::sqrt(d2);
    const int y = pairs[from + i].y;
    total += contrastive_loss(d, y, loss);
    if (train) {
      const double g = contrastive_loss_grad(d, y, loss) / static_cast<double>(b);
      if (d > 0.0) {
        for (int j = 0; j < dim; ++j) {
          const float diff =
              emb.at(static_cast<int>(i), j) - emb.at(static_cast<int>(b + i), j);
          const float gj = static_cast<float>(g * diff / d);
          demb.at(static_cast<int>(i), j) = gj;
          demb.at(static_cast<int>(b + i), j) = -gj;
        }
      }
    }
  }
  if (train) model.backward_features(demb);
  return total / static_cast<double>(b);
}

double eval_pairs(nn::ConvNet& model, const backbone::LoadedDataset& ds,
                  const IndexedDataset& idx, const std::vector<PairSample>& pairs,
                  int batch_size, const LossConfig& loss) {
  double total = 0.0;
  size_t n = pairs.size();
  for (size_t start = 0; start < n; start += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(n, start + static_cast<size_t>(batch_size));
    total += run_pair_batch(model, ds, idx, pairs, start, end, loss, false) *
             static_cast<double>(end - start);
  }
  return total / static_cast<double>(n);
}

}  // namespace

void write_curve_csv(const std::vector<CurvePoint>& curve, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write loss curve csv: " + path);
  out << "epoch,train_loss,val_loss\n";
  char buf[128];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g\n", p.epoch, p.train_loss, p.val_loss);
    out << buf;
  }
}

SiameseTrainResult train_siamese(const backbone::LoadedDataset& train,
                                 const backbone::LoadedDataset& val,
                                 const std::vector<PairSample>& val_pairs,
                                 const backbone::Checkpoint& base, const LossConfig& loss,
                                 const backbone::TrainRunConfig& rc, int pairs_per_epoch,
                                 double positive_fraction, const std::string& curve_csv) {
  loss.validate();
  rc.validate();
  if (base.kind != backbone::CheckpointKind::discriminative)
    throw std::runtime_error(
        "train_siamese: base checkpoint must be a discriminative checkpoint (got " +
        backbone::to_string(base.kind) + ")");
  if (val_pairs.empty()) throw std::runtime_error("train_siamese: empty validation pair list");
  if (pairs_per_epoch <= 0) pairs_per_epoch = static_cast<int>(train.images.size());

  nn::ConvNet model(base.backbone.architecture_tag, static_cast<int>(base.artists.size()));
  backbone::load_weights(model, base.weights);
  nn::AdamConfig ac;
  ac.lr = rc.learning_rate;
  ac.weight_decay = rc.weight_decay;
  nn::Adam opt(model.params(), ac);

  const std::string fingerprint = backbone::config_fingerprint(
      base.backbone, rc, backbone::CheckpointKind::siamese, "from:" + base.fingerprint);

  std::vector<PairItem> train_items;
  for (size_t i = 0; i < train.record_ids.size(); ++i)
    train_items.push_back({train.record_ids[i],
                           train.artists[static_cast<size_t>(train.labels[i])]});

  IndexedDataset train_idx = index_dataset(train);
  IndexedDataset val_idx = index_dataset(val);

  SiameseTrainResult result;
  result.val_pairs = val_pairs;

  // Pre-training point: the untrained metric evaluated on the frozen pair
  // lists; epoch numbering starts the trained entries at 1.
  const std::vector<PairSample> probe_pairs =
      sample_pairs(train_items, pairs_per_epoch, positive_fraction, rc.seed, 0);
  CurvePoint p0;
  p0.epoch = 0;
  p0.train_loss = eval_pairs(model, train, train_idx, probe_pairs, rc.batch_size, loss);
  p0.val_loss = eval_pairs(model, val, val_idx, val_pairs, rc.batch_size, loss);
  result.curve.push_back(p0);

  for (int epoch = 1; epoch <= rc.epochs; ++epoch) {
    const std::vector<PairSample> pairs =
        sample_pairs(train_items, pairs_per_epoch, positive_fraction, rc.seed, epoch);
    double epoch_loss = 0.0;
    size_t seen = 0;
    for (size_t start = 0; start < pairs.size(); start += static_cast<size_t>(rc.batch_size)) {
      const size_t end = std::min(pairs.size(), start + static_cast<size_t>(rc.batch_size));
      model.zero_grads();
      const double l = run_pair_batch(model, train, train_idx, pairs, start, end, loss, true);
      opt.step();
      epoch_loss += l * static_cast<double>(end - start);
      seen += end - start;
    }
    CurvePoint p;
    p.epoch = epoch;
    p.train_loss = epoch_loss / static_cast<double>(seen);
    p.val_loss = eval_pairs(model, val, val_idx, val_pairs, rc.batch_size, loss);
    result.curve.push_back(p);

    backbone::Checkpoint ck;
    ck.kind = backbone::CheckpointKind::siamese;
    ck.epoch = epoch;
    ck.train_loss = p.train_loss;
    ck.val_loss = p.val_loss;
    ck.val_accuracy = 0.0;
    ck.fingerprint = fingerprint;
    ck.backbone = base.backbone;
    ck.run = rc;
    ck.artists = base.artists;
    ck.init_mode = "from:" + base.fingerprint;
    ck.weights = backbone::dump_weights(model);
    result.history.push_back(std::move(ck));
  }

  if (!curve_csv.empty()) write_curve_csv(result.curve, curve_csv);
  return result;
}

// -------------------------------------------------------------- selection

size_t select_checkpoint_index(const std::vector<double>& val_losses, SelectionRule rule) {
  if (val_losses.empty()) throw std::invalid_argument("select_checkpoint: empty history");
  if (rule == SelectionRule::min_val_loss) {
    size_t best = 0;
    for (size_t i = 1; i < val_losses.size(); ++i)
      if (val_losses[i] < val_losses[best]) best = i;  // strict: earliest wins ties
    return best;
  }
  // Elbow: point with maximum distance from the chord joining the first and
  // last curve points.
  const size_t n = val_losses.size();
  if (n < 3) return select_checkpoint_index(val_losses, SelectionRule::min_val_loss);
  const double x0 = 0.0, y0 = val_losses.front();
  const double x1 = static_cast<double>(n - 1), y1 = val_losses.back();
  const double dx = x1 - x0, dy = y1 - y0;
  const double norm = std::sqrt(dx * dx + dy * dy);
  size_t best = 0;
  double best_dist = -1.0;
  for (size_t i = 0; i < n; ++i) {
    const double d =
        std::abs(dy * static_cast<double>(i) - dx * val_losses[i] + x1 * y0 - y1 * x0) / norm;
    if (d > best_dist + 1e-15) {
      best_dist = d;
      best = i;
    }
  }
  return best;
}

const backbone::Checkpoint& select_checkpoint(const std::vector<backbone::Checkpoint>& history,
                                              SelectionRule rule) {
  std::vector<double> losses;
  losses.reserve(history.size());
  for (const auto& c : history) losses.push_back(c.val_loss);
  return history[select_checkpoint_index(losses, rule)];
}

// ------------------------------------------------------------- MetricModel

MetricModel::MetricModel(backbone::Checkpoint ckpt, LossConfig loss)
    : session_(ckpt), loss_(loss) {
  loss_.validate();
}

double MetricModel::distance(const Tensor& a, const Tensor& b) {
  return pair_distance(session_.embed(a).values, session_.embed(b).values);
}

double MetricModel::distance_files(const std::string& path_a, const std::string& path_b) {
  return pair_distance(embed_file(path_a).values, embed_file(path_b).values);
}

backbone::EmbeddingVector MetricModel::embed(const Tensor& preprocessed, const std::string& id) {
  return session_.embed(preprocessed, id);
}

backbone::EmbeddingVector MetricModel::embed_file(const std::string& path) {
  return session_.embed_file(path);
}

const nn::ConvNet* MetricModel::branch_model(int) const {
  // Single shared trunk: every branch resolves to the same object.
  return &const_cast<backbone::Session&>(session_).model();
}

}  // namespace artmetric::siamese
