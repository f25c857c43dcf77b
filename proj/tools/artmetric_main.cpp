// artmetric: prompt-name attribution for generated artworks.
// One subcommand per pipeline stage; every stage is a pure function of its
// declared inputs plus the global seed.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "artmetric/attribution.hpp"
#include "artmetric/backbone.hpp"
#include "artmetric/cli/config.hpp"
#include "artmetric/core/kernels.hpp"
#include "artmetric/core/rng.hpp"
#include "artmetric/corpus.hpp"
#include "artmetric/evaluation.hpp"
#include "artmetric/siamese.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace artmetric;

namespace {

struct GlobalArgs {
  std::string config_path;
  std::string out_override;
  bool dry_run = false;
  bool as_json = false;
  int workers = 0;
  uint64_t seed_override = 0;
  bool seed_set = false;
};

cli::RunConfigDocument resolve_config(const GlobalArgs& g) {
  cli::RunConfigDocument doc =
      g.config_path.empty() ? cli::config_defaults() : cli::config_load(g.config_path);
  if (g.seed_set) doc.seed = g.seed_override;
  if (!g.out_override.empty()) doc.out_root = g.out_override;
  return doc;
}

int plan_or_zero(const GlobalArgs& g, const cli::RunConfigDocument& doc,
                 const std::string& action, const json& detail) {
  if (!g.dry_run) return -1;
  json plan;
  plan["action"] = action;
  plan["detail"] = detail;
  plan["resolved_config"] = json::parse(cli::config_echo(doc));
  std::cout << plan.dump(2) << "\n";
  return 0;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read file: " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

backbone::TrainRunConfig staged(backbone::TrainRunConfig rc, const std::string& stage,
                                uint64_t global_seed) {
  rc.seed = derive_seed(stage, global_seed);
  return rc;
}

// -------------------------------------------------------------- subcommands

int cmd_corpus_validate(const GlobalArgs& g, const std::string& manifest_path) {
  auto doc = resolve_config(g);
  if (int rc = plan_or_zero(g, doc, "corpus validate", {{"manifest", manifest_path}}); rc >= 0)
    return rc;
  corpus::DatasetManifest m = corpus::load_manifest(manifest_path);
  corpus::ValidationReport report = corpus::validate_manifest(m);
  if (g.as_json) {
    json j;
    j["counts"] = json::array();
    for (const auto& c : report.counts)
      j["counts"].push_back({{"artist", c.artist},
                             {"provenance", corpus::to_string(c.provenance)},
                             {"count", c.count}});
    j["violations"] = report.violations;
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "artist,provenance,count\n";
    for (const auto& c : report.counts)
      std::cout << c.artist << "," << corpus::to_string(c.provenance) << "," << c.count << "\n";
    for (const auto& v : report.violations) std::cerr << "violation: " << v << "\n";
  }
  return report.ok() ? 0 : 1;
}

int cmd_corpus_prompts(const GlobalArgs& g, const std::string& contexts_path,
                       const std::string& artist, const std::string& out_path) {
  auto doc = resolve_config(g);
  if (int rc = plan_or_zero(g, doc, "corpus prompts",
                            {{"contexts", contexts_path}, {"artist", artist}, {"out", out_path}});
      rc >= 0)
    return rc;
  corpus::PromptBatch batch = corpus::build_prompts(read_lines(contexts_path), {artist, 0},
                                                    doc.corpus.images_per_prompt);
  corpus::save_prompts(batch.lines, out_path);
  std::cerr << "wrote " << batch.lines.size() << " prompts (" << batch.generation_requests
            << " generation requests) to " << out_path << "\n";
  return 0;
}

int cmd_corpus_split(const GlobalArgs& g, const std::string& manifest_path,
                     const std::string& out_path, double fraction) {
  auto doc = resolve_config(g);
  if (fraction <= 0.0) fraction = doc.corpus.train_fraction;
  if (int rc = plan_or_zero(
          g, doc, "corpus split",
          {{"manifest", manifest_path}, {"out", out_path}, {"fraction", fraction}});
      rc >= 0)
    return rc;
  corpus::DatasetManifest m = corpus::load_manifest(manifest_path);
  corpus::DatasetManifest split =
      corpus::split_dataset(m, fraction, derive_seed("split", doc.seed));
  corpus::save_manifest(split, out_path);
  std::cerr << "split manifest written to " << out_path << "\n";
  return 0;
}

int cmd_corpus_mix(const GlobalArgs& g, const std::string& manifest_path,
                   const std::string& out_path, int quota) {
  auto doc = resolve_config(g);
  if (quota <= 0) quota = doc.corpus.quota;
  if (int rc = plan_or_zero(g, doc, "corpus mix",
                            {{"manifest", manifest_path}, {"out", out_path}, {"quota", quota}});
      rc >= 0)
    return rc;
  corpus::DatasetManifest m = corpus::load_manifest(manifest_path);
  corpus::DatasetManifest mixed =
      corpus::build_mixed_dataset(m, quota, derive_seed("mix", doc.seed));
  corpus::save_manifest(mixed, out_path);
  std::cerr << "mixed manifest (" << mixed.records.size() << " records) written to " << out_path
            << "\n";
  return 0;
}

int cmd_corpus_fetch(const GlobalArgs& g, const std::string& artist, const std::string& source,
                     const std::string& dest, const std::string& manifest_path) {
  auto doc = resolve_config(g);
  if (int rc = plan_or_zero(
          g, doc, "corpus fetch",
          {{"artist", artist}, {"source", source}, {"dest", dest}, {"manifest", manifest_path}});
      rc >= 0)
    return rc;
  corpus::DatasetManifest m;
  if (fs::exists(manifest_path)) m = corpus::load_manifest(manifest_path);
  if (!m.find_artist(artist))
    m.artists.push_back({artist, static_cast<int>(m.artists.size())});
  corpus::GallerySource src;
  src.kind = "local";
  src.path = source;
  corpus::FetchResult result = corpus::fetch_gallery({artist, 0}, dest, src, m.records);
  for (auto& r : result.records) m.records.push_back(std::move(r));
  corpus::save_manifest(m, manifest_path);
  std::cerr << "fetched " << result.downloaded << " new, skipped " << result.skipped << ", "
            << result.errors.size() << " errors\n";
  for (const auto& e : result.errors) std::cerr << "error: " << e << "\n";
  return result.errors.empty() ? 0 : 1;
}

int cmd_train_baseline(const GlobalArgs& g, const std::string& manifest_path,
                       const std::string& image_root, const std::string& out_dir) {
  auto doc = resolve_config(g);
  backbone::TrainRunConfig rc = staged(doc.baseline, "baseline", doc.seed);
  if (int r = plan_or_zero(g, doc, "train baseline",
                           {{"manifest", manifest_path},
                            {"image_root", image_root},
                            {"out_dir", out_dir},
                            {"epochs", rc.epochs},
                            {"batch_size", rc.batch_size}});
      r >= 0)
    return r;
  corpus::DatasetManifest m = corpus::load_manifest(manifest_path);
  backbone::LoadedDataset train =
      backbone::load_split(m, image_root, corpus::Split::train, doc.backbone);
  backbone::LoadedDataset val =
      backbone::load_split(m, image_root, corpus::Split::val, doc.backbone);
  fs::create_directories(out_dir);
  backbone::TrainResult result = backbone::train_discriminative(
      train, val, doc.backbone, rc, out_dir + "/metrics.csv");
  const backbone::Checkpoint& best = result.history[static_cast<size_t>(result.best_epoch - 1)];
  backbone::save_checkpoint(best, out_dir + "/baseline.ckpt");
  std::cerr << "best epoch " << result.best_epoch << " val_accuracy "
            << best.val_accuracy << "; checkpoint " << out_dir << "/baseline.ckpt\n";
  return 0;
}

int cmd_train_siamese(const GlobalArgs& g, const std::string& manifest_path,
                      const std::string& image_root, const std::string& base_ckpt,
                      const std::string& out_dir, const std::string& val_pairs_path) {
  auto doc = resolve_config(g);
  backbone::TrainRunConfig rc = staged(doc.siamese.run, "siamese", doc.seed);
  if (int r = plan_or_zero(g, doc, "train siamese",
                           {{"manifest", manifest_path},
                            {"image_root", image_root},
                            {"base", base_ckpt},
                            {"out_dir", out_dir},
                            {"epochs", rc.epochs},
                            {"batch_size", rc.batch_size}});
      r >= 0)
    return r;
  corpus::DatasetManifest m = corpus::load_manifest(manifest_path);
  backbone::Checkpoint base = backbone::load_checkpoint(base_ckpt);
  backbone::LoadedDataset train =
      backbone::load_split(m, image_root, corpus::Split::train, base.backbone);
  backbone::LoadedDataset val =
      backbone::load_split(m, image_root, corpus::Split::val, base.backbone);

  std::vector<siamese::PairSample> val_pairs;
  if (!val_pairs_path.empty()) {
    val_pairs = siamese::load_pairs(val_pairs_path);
  } else {
    std::vector<siamese::PairItem> val_items =
        siamese::pair_items_from(m, corpus::Split::val);
    val_pairs = siamese::sample_pairs(val_items, static_cast<int>(val_items.size()),
                                      doc.siamese.positive_fraction,
                                      derive_seed("val-pairs", doc.seed), 0);
  }
  fs::create_directories(out_dir);
  siamese::save_pairs(val_pairs, out_dir + "/val_pairs.jsonl");

  siamese::SiameseTrainResult result = siamese::train_siamese(
      train, val, val_pairs, base, doc.loss, rc, doc.siamese.pairs_per_epoch,
      doc.siamese.positive_fraction, out_dir + "/loss_curve.csv");
  const backbone::Checkpoint& chosen = siamese::select_checkpoint(result.history);
  backbone::save_checkpoint(chosen, out_dir + "/siamese.ckpt");
  std::cerr << "selected epoch " << chosen.epoch << " val_loss " << chosen.val_loss
            << "; checkpoint " << out_dir << "/siamese.ckpt\n";
  return 0;
}

int cmd_eval_confusion(const GlobalArgs& g, const std::string& ckpt_path,
                       const std::string& manifest_path, const std::string& image_root,
                       const std::string& split, const std::string& out_dir) {
  auto doc = resolve_config(g);
  if (int r = plan_or_zero(g, doc, "eval confusion",
                           {{"checkpoint", ckpt_path},
                            {"manifest", manifest_path},
                            {"split", split},
                            {"out_dir", out_dir}});
      r >= 0)
    return r;
  corpus::DatasetManifest m = corpus::load_manifest(manifest_path);
  backbone::Checkpoint ckpt = backbone::load_checkpoint(ckpt_path);
  backbone::LoadedDataset eval_set =
      backbone::load_split(m, image_root, corpus::split_from_string(split), ckpt.backbone);
  backbone::Session session(ckpt);
  evaluation::ConfusionMatrix cm = evaluation::confusion(eval_set, session);
  evaluation::ResultsBundle bundle;
  bundle.confusion = cm;
  evaluation::emit_report(bundle, out_dir);
  std::cerr << "accuracy " << cm.accuracy() << "; report in " << out_dir << "\n";
  return 0;
}

int cmd_eval_transfer(const GlobalArgs& g, const std::string& orig_manifest,
                      const std::string& synth_manifest, const std::string& image_root,
                      const std::string& out_dir) {
  auto doc = resolve_config(g);
  backbone::TrainRunConfig rc = staged(doc.baseline, "baseline", doc.seed);
  if (int r = plan_or_zero(g, doc, "eval transfer",
                           {{"orig_manifest", orig_manifest},
                            {"synth_manifest", synth_manifest},
                            {"out_dir", out_dir}});
      r >= 0)
    return r;
  corpus::DatasetManifest orig = corpus::load_manifest(orig_manifest);
  corpus::DatasetManifest synth = corpus::load_manifest(synth_manifest);
  backbone::LoadedDataset orig_train =
      backbone::load_split(orig, image_root, corpus::Split::train, doc.backbone);
  backbone::LoadedDataset orig_val =
      backbone::load_split(orig, image_root, corpus::Split::val, doc.backbone);
  // the whole synthetic manifest acts as the cross-domain evaluation set
  corpus::DatasetManifest synth_all = synth;
  for (auto& r : synth_all.records) r.split = corpus::Split::val;
  backbone::LoadedDataset synth_set =
      backbone::load_split(synth_all, image_root, corpus::Split::val, doc.backbone);
  evaluation::TransferResult result =
      evaluation::transfer_experiment(orig_train, orig_val, synth_set, doc.backbone, rc);
  fs::create_directories(out_dir);
  evaluation::save_confusion_csv(result.on_original_val, out_dir + "/confusion_original.csv");
  evaluation::save_confusion_csv(result.on_synthetic, out_dir + "/confusion_synthetic.csv");
  evaluation::plot_confusion(result.on_original_val, out_dir + "/confusion_original.png");
  evaluation::plot_confusion(result.on_synthetic, out_dir + "/confusion_synthetic.png");
  json j{{"accuracy_original", result.on_original_val.accuracy()},
         {"accuracy_synthetic", result.on_synthetic.accuracy()},
         {"accuracy_gap", result.accuracy_gap}};
  std::ofstream(out_dir + "/transfer.json") << j.dump(2) << "\n";
  std::cout << j.dump(2) << "\n";
  return 0;
}

std::vector<std::string> default_retrieval_queries(const corpus::DatasetManifest& m,
                                                   int repeats, uint64_t seed) {
  std::vector<std::string> queries;
  for (const auto& a : m.artists) {
    std::vector<std::string> pool;
    for (const auto& r : m.records)
      if (!r.excluded && r.artist == a.name && r.provenance == corpus::Provenance::synthetic &&
          r.split == corpus::Split::val)
        pool.push_back(r.id);
    if (pool.empty())
      throw std::runtime_error("no synthetic val records for artist " + a.name);
    std::sort(pool.begin(), pool.end());
    SeededRng rng(derive_seed("retrieval-queries:" + a.name, seed));
    rng.shuffle(pool);
    for (int r = 0; r < repeats && r < static_cast<int>(pool.size()); ++r)
      queries.push_back(pool[static_cast<size_t>(r)]);
  }
  return queries;
}

int cmd_eval_retrieval(const GlobalArgs& g, const std::string& ckpt_path,
                       const std::string& manifest_path, const std::string& image_root,
                       const std::string& out_dir) {
  auto doc = resolve_config(g);
  if (int r = plan_or_zero(g, doc, "eval retrieval",
                           {{"checkpoint", ckpt_path},
                            {"manifest", manifest_path},
                            {"out_dir", out_dir},
                            {"thresholds", doc.evaluation.thresholds},
                            {"n_max", doc.evaluation.n_max}});
      r >= 0)
    return r;
  corpus::DatasetManifest m = corpus::load_manifest(manifest_path);
  backbone::Checkpoint ckpt = backbone::load_checkpoint(ckpt_path);
  siamese::MetricModel model(ckpt, doc.loss);

  std::vector<std::string> queries =
      default_retrieval_queries(m, doc.evaluation.repeats, doc.seed);
  std::vector<std::string> gallery;
  for (const auto& r : m.records)
    if (!r.excluded && r.provenance == corpus::Provenance::original &&
        r.split == corpus::Split::val)
      gallery.push_back(r.id);
  if (gallery.empty()) throw std::runtime_error("no original val records for the gallery");
  std::sort(gallery.begin(), gallery.end());

  evaluation::DistanceMatrix dm =
      evaluation::build_distance_matrix(queries, gallery, m, image_root, model);
  std::vector<evaluation::RetrievalSummary> summaries = evaluation::retrieval_from_distances(
      dm, doc.evaluation.thresholds, doc.evaluation.n_max);
  fs::create_directories(out_dir);
  evaluation::save_distance_matrix_csv(dm, out_dir + "/distances.csv");
  evaluation::ResultsBundle bundle;
  bundle.retrieval = summaries;
  evaluation::emit_report(bundle, out_dir);
  std::cerr << "retrieval report in " << out_dir << "\n";
  return 0;
}

int cmd_attribute(const GlobalArgs& g, const std::string& ckpt_path, const std::string& image,
                  const std::string& manifest_path, const std::string& image_root,
                  const std::string& refs_kind, double threshold) {
  auto doc = resolve_config(g);
  attribution::ReferenceKind kind = refs_kind.empty()
                                        ? doc.attribution.reference_kind
                                        : attribution::reference_kind_from_string(refs_kind);
  const double t = threshold > 0.0 ? threshold : doc.attribution.threshold;
  if (int r = plan_or_zero(g, doc, "attribute",
                           {{"checkpoint", ckpt_path},
                            {"image", image},
                            {"refs", attribution::to_string(kind)},
                            {"threshold", t}});
      r >= 0)
    return r;
  corpus::DatasetManifest m = corpus::load_manifest(manifest_path);
  backbone::Checkpoint ckpt = backbone::load_checkpoint(ckpt_path);
  siamese::MetricModel model(ckpt, doc.loss);
  std::vector<attribution::EmbeddedReferences> refs;
  for (const auto& a : m.artists)
    refs.push_back(attribution::embed_references(
        attribution::make_reference_set(m, a, kind), m, image_root, model));
  backbone::EmbeddingVector q = model.embed_file(image);
  attribution::AttributionReport report = attribution::attribute(q.values, image, refs, t);
  std::cout << attribution::report_to_json(report) << "\n";
  return 0;
}

int cmd_report(const GlobalArgs& g, const std::string& loss_curve_csv,
               const std::string& out_dir, bool echo_config) {
  auto doc = resolve_config(g);
  if (echo_config) {
    std::cout << cli::config_echo(doc) << "\n";
    return 0;
  }
  if (int r = plan_or_zero(g, doc, "report",
                           {{"loss_curve", loss_curve_csv}, {"out_dir", out_dir}});
      r >= 0)
    return r;
  evaluation::ResultsBundle bundle;
  if (!loss_curve_csv.empty()) {
    std::vector<std::string> lines = read_lines(loss_curve_csv);
    for (size_t i = 1; i < lines.size(); ++i) {
      siamese::CurvePoint p;
      if (std::sscanf(lines[i].c_str(), "%d,%lf,%lf", &p.epoch, &p.train_loss, &p.val_loss) == 3)
        bundle.loss_curve.push_back(p);
    }
  }
  evaluation::emit_report(bundle, out_dir);
  std::cerr << "report in " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"metric-learning attribution of artist names in generation prompts"};
  app.require_subcommand(1);

  GlobalArgs g;
  app.add_option("--config", g.config_path, "TOML run configuration");
  app.add_option("--out", g.out_override, "output root override");
  app.add_flag("--dry-run", g.dry_run, "validate and print the resolved plan, write nothing");
  app.add_flag("--json", g.as_json, "machine-readable stdout");
  app.add_option("--workers", g.workers, "thread count for parallel kernels");
  app.add_option("--seed", g.seed_override, "global seed override")
      ->each([&](const std::string&) { g.seed_set = true; });

  std::string manifest, out_path, image_root, contexts, artist, source, dest, ckpt, base_ckpt,
      split_name = "val", image, refs_kind, val_pairs, loss_curve_csv, out_dir = "out";
  double fraction = 0.0, threshold = 0.0;
  int quota = 0;

  auto* corpus_cmd = app.add_subcommand("corpus", "dataset contract operations");
  corpus_cmd->require_subcommand(1);
  auto* c_validate = corpus_cmd->add_subcommand("validate", "per-artist counts + violations");
  c_validate->add_option("--manifest", manifest)->required();
  auto* c_prompts = corpus_cmd->add_subcommand("prompts", "build generation prompt lines");
  c_prompts->add_option("--contexts", contexts)->required();
  c_prompts->add_option("--artist", artist)->required();
  c_prompts->add_option("--out-file", out_path)->required();
  auto* c_split = corpus_cmd->add_subcommand("split", "stratified train/val split");
  c_split->add_option("--manifest", manifest)->required();
  c_split->add_option("--out-file", out_path)->required();
  c_split->add_option("--fraction", fraction);
  auto* c_mix = corpus_cmd->add_subcommand("mix", "balanced originals + synthetics");
  c_mix->add_option("--manifest", manifest)->required();
  c_mix->add_option("--out-file", out_path)->required();
  c_mix->add_option("--quota", quota);
  auto* c_fetch = corpus_cmd->add_subcommand("fetch", "ingest a gallery directory");
  c_fetch->add_option("--artist", artist)->required();
  c_fetch->add_option("--source", source)->required();
  c_fetch->add_option("--dest", dest)->required();
  c_fetch->add_option("--manifest", manifest)->required();

  auto* train_cmd = app.add_subcommand("train", "model training");
  train_cmd->require_subcommand(1);
  auto* t_base = train_cmd->add_subcommand("baseline", "5-way discriminative trainer");
  t_base->add_option("--manifest", manifest)->required();
  t_base->add_option("--image-root", image_root)->required();
  t_base->add_option("--out-dir", out_dir);
  auto* t_siam = train_cmd->add_subcommand("siamese", "pairwise metric trainer");
  t_siam->add_option("--manifest", manifest)->required();
  t_siam->add_option("--image-root", image_root)->required();
  t_siam->add_option("--base", base_ckpt)->required();
  t_siam->add_option("--out-dir", out_dir);
  t_siam->add_option("--val-pairs", val_pairs, "frozen validation pair list (JSONL)");

  auto* eval_cmd = app.add_subcommand("eval", "experiment protocols");
  eval_cmd->require_subcommand(1);
  auto* e_conf = eval_cmd->add_subcommand("confusion", "confusion matrix on a split");
  e_conf->add_option("--checkpoint", ckpt)->required();
  e_conf->add_option("--manifest", manifest)->required();
  e_conf->add_option("--image-root", image_root)->required();
  e_conf->add_option("--split", split_name);
  e_conf->add_option("--out-dir", out_dir);
  auto* e_trans = eval_cmd->add_subcommand("transfer", "train on originals, test both domains");
  e_trans->add_option("--orig-manifest", manifest)->required();
  e_trans->add_option("--synth-manifest", source)->required();
  e_trans->add_option("--image-root", image_root)->required();
  e_trans->add_option("--out-dir", out_dir);
  auto* e_retr = eval_cmd->add_subcommand("retrieval", "P(n) under distance thresholds");
  e_retr->add_option("--checkpoint", ckpt)->required();
  e_retr->add_option("--manifest", manifest)->required();
  e_retr->add_option("--image-root", image_root)->required();
  e_retr->add_option("--out-dir", out_dir);

  auto* attr_cmd = app.add_subcommand("attribute", "per-artist probability + votes for a query");
  attr_cmd->add_option("--checkpoint", ckpt)->required();
  attr_cmd->add_option("--image", image)->required();
  attr_cmd->add_option("--manifest", manifest)->required();
  attr_cmd->add_option("--image-root", image_root)->required();
  attr_cmd->add_option("--refs", refs_kind, "original | synthetic | both");
  attr_cmd->add_option("--threshold", threshold);

  auto* report_cmd = app.add_subcommand("report", "render plots + tables from stage outputs");
  report_cmd->add_option("--loss-curve", loss_curve_csv);
  report_cmd->add_option("--out-dir", out_dir);
  bool echo_config = false;
  report_cmd->add_flag("--echo-config", echo_config, "print the resolved configuration and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help is a clean exit; genuine usage errors are exit code 2
    return app.exit(e) == 0 ? 0 : 2;
  }

  if (g.workers > 0) kernels::set_threads(g.workers);

  try {
    if (c_validate->parsed()) return cmd_corpus_validate(g, manifest);
    if (c_prompts->parsed()) return cmd_corpus_prompts(g, contexts, artist, out_path);
    if (c_split->parsed()) return cmd_corpus_split(g, manifest, out_path, fraction);
    if (c_mix->parsed()) return cmd_corpus_mix(g, manifest, out_path, quota);
    if (c_fetch->parsed()) return cmd_corpus_fetch(g, artist, source, dest, manifest);
    if (t_base->parsed()) return cmd_train_baseline(g, manifest, image_root, out_dir);
    if (t_siam->parsed())
      return cmd_train_siamese(g, manifest, image_root, base_ckpt, out_dir, val_pairs);
    if (e_conf->parsed())
      return cmd_eval_confusion(g, ckpt, manifest, image_root, split_name, out_dir);
    if (e_trans->parsed()) return cmd_eval_transfer(g, manifest, source, image_root, out_dir);
    if (e_retr->parsed()) return cmd_eval_retrieval(g, ckpt, manifest, image_root, out_dir);
    if (attr_cmd->parsed())
      return cmd_attribute(g, ckpt, image, manifest, image_root, refs_kind, threshold);
    if (report_cmd->parsed()) return cmd_report(g, loss_curve_csv, out_dir, echo_config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "unknown subcommand\n";
  return 2;
}
