// Command-line front end: generation, training, mining, scoring, and
// evaluation wired into reproducible pipelines over HSEB embedding files.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>

#include "cma/encoder.hpp"
#include "cma/experiment.hpp"
#include "cma/io.hpp"

namespace fs = std::filesystem;

namespace {

// Removes everything registered unless the subcommand commits, so failed runs
// leave no partial outputs behind.
class OutputGuard {
 public:
  ~OutputGuard() {
    if (committed_) return;
    for (const auto& path : paths_) {
      std::error_code ec;
      fs::remove(path, ec);
    }
  }

  fs::path track(fs::path path) {
    paths_.push_back(path);
    return path;
  }

  void track_sidecars(const fs::path& embedding_path) {
    paths_.push_back(fs::path(embedding_path.string() + ".labels"));
  }

  void commit() { committed_ = true; }

 private:
  std::vector<fs::path> paths_;
  bool committed_ = false;
};

void warn_non_unit(const cma::EmbeddingReadResult& result, const fs::path& path) {
  if (result.non_unit_rows.empty()) return;
  std::cerr << "warning: " << path.string() << ": " << result.non_unit_rows.size()
            << " rows with | ||row|| - 1 | > 1e-3 (first:";
  const std::size_t show = std::min<std::size_t>(result.non_unit_rows.size(), 8);
  for (std::size_t i = 0; i < show; ++i) {
    std::cerr << ' ' << result.non_unit_rows[i];
  }
  std::cerr << ")\n";
}

cma::EmbeddingSet read_unit_embeddings(const fs::path& path, bool renormalize) {
  cma::EmbeddingReadResult result = cma::read_embeddings_ex(path, renormalize);
  warn_non_unit(result, path);
  return std::move(result.set);
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  const auto range_pos = text.find("..");
  if (range_pos != std::string::npos) {
    const std::uint64_t lo = std::stoull(text.substr(0, range_pos));
    const std::uint64_t hi = std::stoull(text.substr(range_pos + 2));
    if (hi < lo) {
      cma::throw_error(cma::ErrorCode::InvalidConfig, "seed range is reversed");
    }
    for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
    return seeds;
  }
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const std::string field =
        text.substr(start, comma == std::string::npos ? comma : comma - start);
    if (!field.empty()) seeds.push_back(std::stoull(field));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (seeds.empty()) {
    cma::throw_error(cma::ErrorCode::InvalidConfig, "no seeds given");
  }
  return seeds;
}

// Sample files carry the class label per row; class ids are recovered from
// the prototype file's label order.
cma::SampleSet load_sample_set(
    const fs::path& path,
    const std::unordered_map<std::string, std::size_t>& class_index,
    std::size_t class_id_offset) {
  cma::EmbeddingReadResult result = cma::read_embeddings_ex(path);
  if (result.set.labels.empty()) {
    cma::throw_error(cma::ErrorCode::InvalidConfig,
                     "sample file needs a .labels sidecar: " + path.string());
  }
  cma::SampleSet set;
  set.class_ids.reserve(result.set.size());
  for (const auto& label : result.set.labels) {
    const auto it = class_index.find(label);
    if (it == class_index.end()) {
      cma::throw_error(cma::ErrorCode::InvalidSpec,
                       "sample class '" + label + "' has no prototype");
    }
    set.class_ids.push_back(it->second + class_id_offset);
  }
  set.features = std::move(result.set.rows);
  return set;
}

int run_gen_data(const fs::path& config_path, const fs::path& out_dir) {
  cma::RunConfig config = cma::load_run_config(config_path);
  const cma::SyntheticDataset dataset = cma::generate_synthetic(config.synthetic);
  fs::create_directories(out_dir);

  OutputGuard guard;
  const auto write_samples = [&](const cma::SampleSet& set,
                                 const std::vector<std::string>& class_labels,
                                 std::size_t offset, const char* name) {
    std::vector<std::string> labels;
    labels.reserve(set.size());
    for (const std::size_t cid : set.class_ids) {
      labels.push_back(class_labels[cid - offset]);
    }
    const fs::path path = guard.track(out_dir / name);
    guard.track_sidecars(path);
    cma::write_embeddings(
        cma::EmbeddingSet::from_matrix(set.features, std::move(labels)), path);
  };
  write_samples(dataset.id_train, dataset.id_class_labels, 0, "id_train.hseb");
  write_samples(dataset.id_val, dataset.id_class_labels, 0, "id_val.hseb");
  write_samples(dataset.ood_test, dataset.ood_class_labels,
                dataset.spec.num_id_classes, "ood_test.hseb");

  const auto write_texts = [&](const cma::Matrix& rows,
                               const std::vector<std::string>& labels,
                               const char* name) {
    const fs::path path = guard.track(out_dir / name);
    guard.track_sidecars(path);
    cma::write_embeddings(cma::EmbeddingSet::from_matrix(rows, labels), path);
  };
  write_texts(dataset.id_class_texts, dataset.id_class_labels,
              "class_texts_id.hseb");
  write_texts(dataset.ood_class_texts, dataset.ood_class_labels,
              "class_texts_ood.hseb");
  write_texts(dataset.candidate_class_texts, dataset.candidate_class_labels,
              "class_texts_candidates.hseb");

  cma::write_text_file(guard.track(out_dir / "config.resolved.json"),
                       cma::run_config_to_json(config));
  guard.commit();
  return 0;
}

int run_train(const fs::path& config_path, const fs::path& data_dir,
              const fs::path& out_dir) {
  cma::RunConfig config = cma::load_run_config(config_path);

  const cma::EmbeddingSet id_texts =
      cma::read_embeddings(data_dir / "class_texts_id.hseb");
  if (id_texts.labels.empty()) {
    cma::throw_error(cma::ErrorCode::InvalidConfig,
                     "class_texts_id.hseb needs a .labels sidecar");
  }
  std::unordered_map<std::string, std::size_t> class_index;
  for (std::size_t i = 0; i < id_texts.labels.size(); ++i) {
    class_index.emplace(id_texts.labels[i], i);
  }

  cma::SyntheticDataset dataset;
  dataset.spec = config.synthetic;
  dataset.id_train = load_sample_set(data_dir / "id_train.hseb", class_index, 0);
  dataset.id_val = load_sample_set(data_dir / "id_val.hseb", class_index, 0);
  dataset.id_class_texts = id_texts.rows;
  dataset.id_class_labels = id_texts.labels;

  const cma::TrainResult result = cma::train(dataset, config.train);

  fs::create_directories(out_dir);
  OutputGuard guard;
  cma::write_checkpoint(guard.track(out_dir / "checkpoint.bin"), result.params,
                        config.train);
  cma::write_history_csv(guard.track(out_dir / "history.csv"), result.history);
  cma::write_text_file(guard.track(out_dir / "config.resolved.json"),
                       cma::run_config_to_json(config));
  guard.commit();
  return 0;
}

int run_embed(const fs::path& ckpt_path, const fs::path& features_path,
              const std::string& modality, const fs::path& out_path) {
  fs::path checkpoint_file = ckpt_path;
  if (fs::is_directory(checkpoint_file)) checkpoint_file /= "checkpoint.bin";
  const cma::Checkpoint ckpt = cma::read_checkpoint(checkpoint_file);

  cma::EmbeddingReadResult features = cma::read_embeddings_ex(features_path);
  const cma::Modality m =
      modality == "image" ? cma::Modality::Image : cma::Modality::Text;
  cma::EmbeddingSet out =
      cma::encoder_forward(ckpt.params, m, features.set.rows);
  out.labels = features.set.labels;

  OutputGuard guard;
  guard.track(out_path);
  guard.track_sidecars(out_path);
  cma::write_embeddings(out, out_path);
  guard.commit();
  return 0;
}

int run_mine(const fs::path& id_path, const fs::path& candidates_path,
             double eta, std::size_t m, const fs::path& out_path,
             bool renormalize) {
  const cma::EmbeddingSet id_texts = read_unit_embeddings(id_path, renormalize);
  const cma::EmbeddingSet candidates =
      read_unit_embeddings(candidates_path, renormalize);

  cma::NegMiningConfig config;
  config.eta = eta;
  config.m = m;
  const cma::NegativeLabelSet negatives =
      cma::mine_negatives(candidates, id_texts, config);

  OutputGuard guard;
  guard.track(out_path);
  guard.track_sidecars(out_path);
  cma::write_embeddings(negatives.embeddings, out_path);
  cma::write_distances_csv(
      guard.track(fs::path(out_path.string() + ".distances.csv")), negatives);
  guard.commit();
  return 0;
}

int run_score(const fs::path& images_path, const fs::path& id_texts_path,
              const std::string& neg_texts_path, const std::string& method_name,
              std::size_t groups, double tau, bool tau_given,
              const fs::path& out_path, bool renormalize) {
  const cma::EmbeddingSet images = read_unit_embeddings(images_path, renormalize);
  const cma::EmbeddingSet id_texts =
      read_unit_embeddings(id_texts_path, renormalize);

  cma::ScoreConfig config;
  cma::ScoreMethod method;
  cma::EmbeddingSet negatives;
  const cma::EmbeddingSet* neg_ptr = nullptr;
  if (method_name == "mcm") {
    method = cma::ScoreMethod::Mcm;
    if (tau_given) config.temperature_mcm = tau;
  } else {
    method = groups > 0 ? cma::ScoreMethod::NegLabelGrouped
                        : cma::ScoreMethod::NegLabel;
    if (groups > 0) {
      config.groups = groups;
      config.grouping_enabled = true;
    }
    if (tau_given) config.temperature_neglabel = tau;
    negatives = read_unit_embeddings(neg_texts_path, renormalize);
    neg_ptr = &negatives;
  }

  const cma::ScoreVector scores =
      cma::score_batch(images, id_texts, neg_ptr, config, method);

  OutputGuard guard;
  cma::write_scores_csv(guard.track(out_path), scores.scores);
  guard.commit();
  return 0;
}

int run_eval(const fs::path& id_scores_path, const fs::path& ood_scores_path,
             const fs::path& out_path, double tpr, const std::string& roc_out) {
  const std::vector<double> id_scores = cma::read_scores_csv(id_scores_path);
  const std::vector<double> ood_scores = cma::read_scores_csv(ood_scores_path);
  const cma::DetectionReport report =
      cma::detection_report(id_scores, ood_scores, tpr);

  OutputGuard guard;
  cma::write_text_file(guard.track(out_path),
                       cma::detection_report_to_json(report));
  if (!roc_out.empty()) {
    const auto points = cma::roc_points(id_scores, ood_scores);
    cma::write_roc_csv(guard.track(roc_out), points);
  }
  guard.commit();
  return 0;
}

int run_gap(const fs::path& id_images_path, const fs::path& id_texts_path,
            const fs::path& ood_texts_path, const fs::path& out_path,
            bool renormalize) {
  const cma::EmbeddingSet id_images =
      read_unit_embeddings(id_images_path, renormalize);
  const cma::EmbeddingSet id_texts =
      read_unit_embeddings(id_texts_path, renormalize);
  const cma::EmbeddingSet ood_texts =
      read_unit_embeddings(ood_texts_path, renormalize);

  const cma::GapReport report = cma::gap_report(id_images, id_texts, ood_texts);
  OutputGuard guard;
  cma::write_text_file(guard.track(out_path), cma::gap_report_to_json(report));
  guard.commit();
  return 0;
}

int run_reproduce(const std::string& seeds_text, const fs::path& out_dir,
                  const std::string& config_path) {
  cma::ExperimentConfig config;
  if (!config_path.empty()) {
    const cma::RunConfig run = cma::load_run_config(config_path);
    config.synthetic = run.synthetic;
    config.train = run.train;
    config.score = run.score;
    config.negmining = run.negmining;
  }
  config.seeds = parse_seed_list(seeds_text);

  const std::vector<cma::ExperimentRow> rows = cma::run_lambda_comparison(config);
  const std::vector<cma::LambdaAverages> averages = cma::average_by_lambda(rows);

  fs::create_directories(out_dir);
  OutputGuard guard;
  std::string csv = cma::experiment_csv_header() + "\n";
  for (const auto& row : rows) csv += cma::experiment_csv_row(row) + "\n";
  cma::write_text_file(guard.track(out_dir / "results.csv"), csv);

  std::string summary = "lambda,runs,val_accuracy,auroc_neglabel,fpr95_neglabel,"
                        "auroc_mcm,uni_cmm,uni_cm,align_ood\n";
  for (const auto& avg : averages) {
    summary += cma::format_double(avg.lambda);
    summary += ',' + std::to_string(avg.runs);
    for (const double v : {avg.val_accuracy, avg.auroc_neglabel,
                           avg.fpr95_neglabel, avg.auroc_mcm, avg.uni_cmm,
                           avg.uni_cm, avg.align_ood}) {
      summary += ',';
      summary += cma::format_double(v);
    }
    summary += '\n';
  }
  cma::write_text_file(guard.track(out_dir / "summary.csv"), summary);

  cma::RunConfig resolved;
  resolved.synthetic = config.synthetic;
  resolved.train = config.train;
  resolved.score = config.score;
  resolved.negmining = config.negmining;
  resolved.output_dir = out_dir.string();
  cma::write_text_file(guard.track(out_dir / "config.resolved.json"),
                       cma::run_config_to_json(resolved));
  guard.commit();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-modal alignment fine-tuning, NegLabel OoD scoring, and "
               "modality-gap diagnostics on hyperspherical embeddings"};
  app.require_subcommand(1);

  int threads = 1;
  app.add_option("--threads", threads, "Worker threads (current build runs 1)")
      ->check(CLI::PositiveNumber);

  std::string config_path, data_dir, out_path, ckpt_path, features_path;
  std::string modality = "image", method, neg_texts, id_scores, ood_scores;
  std::string images_path, id_texts_path, ood_texts_path, candidates_path;
  std::string seeds = "0..4", roc_out;
  double eta = 0.05, tau = 0.0, tpr = 0.95;
  std::size_t m = 10000, groups = 0;
  bool renormalize = false;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen->add_option("--config", config_path, "Run config JSON")->required();
  gen->add_option("--out", out_path, "Output directory")->required();

  auto* train_cmd = app.add_subcommand("train", "Fine-tune the toy dual encoder");
  train_cmd->add_option("--config", config_path)->required();
  train_cmd->add_option("--data", data_dir, "Directory from gen-data")->required();
  train_cmd->add_option("--out", out_path, "Checkpoint directory")->required();

  auto* embed = app.add_subcommand("embed", "Run the encoder forward pass");
  embed->add_option("--ckpt", ckpt_path)->required();
  embed->add_option("--features", features_path)->required();
  embed->add_option("--modality", modality)
      ->check(CLI::IsMember({"image", "text"}));
  embed->add_option("--out", out_path)->required();

  auto* mine = app.add_subcommand("mine-negatives",
                                  "Select negative labels by percentile distance");
  mine->add_option("--id", id_texts_path)->required();
  mine->add_option("--candidates", candidates_path)->required();
  mine->add_option("--eta", eta, "Percentile level");
  mine->add_option("--m", m, "Number of negatives to keep");
  mine->add_flag("--normalize", renormalize, "Renormalize rows on read");
  mine->add_option("--out", out_path)->required();

  auto* score = app.add_subcommand("score", "Score images against ID texts");
  score->add_option("--images", images_path)->required();
  score->add_option("--id-texts", id_texts_path)->required();
  score->add_option("--neg-texts", neg_texts);
  score->add_option("--method", method)
      ->required()
      ->check(CLI::IsMember({"mcm", "neglabel"}));
  score->add_option("--groups", groups, "Group count for the grouped variant");
  auto* tau_opt = score->add_option("--tau", tau, "Temperature override");
  score->add_flag("--normalize", renormalize, "Renormalize rows on read");
  score->add_option("--out", out_path)->required();

  auto* eval = app.add_subcommand("eval", "FPR95/AUROC from score files");
  eval->add_option("--id-scores", id_scores)->required();
  eval->add_option("--ood-scores", ood_scores)->required();
  eval->add_option("--tpr", tpr, "TPR target");
  eval->add_option("--roc-out", roc_out, "Optional (fpr,tpr) CSV");
  eval->add_option("--out", out_path)->required();

  auto* gap = app.add_subcommand("gap-metrics",
                                 "Uniformity and alignment diagnostics");
  gap->add_option("--id-images", images_path)->required();
  gap->add_option("--id-texts", id_texts_path)->required();
  gap->add_option("--ood-texts", ood_texts_path)->required();
  gap->add_flag("--normalize", renormalize, "Renormalize rows on read");
  gap->add_option("--out", out_path)->required();

  auto* repro = app.add_subcommand(
      "reproduce-synthetic",
      "Train with lambda 0 vs 1e-3 across seeds and compare metrics");
  repro->add_option("--seeds", seeds, "Range a..b or comma list");
  repro->add_option("--config", config_path, "Optional run config overrides");
  repro->add_option("--out", out_path, "Results directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (threads > 1) {
    std::cerr << "note: this build is single-threaded; --threads ignored\n";
  }

  try {
    if (gen->parsed()) return run_gen_data(config_path, out_path);
    if (train_cmd->parsed()) return run_train(config_path, data_dir, out_path);
    if (embed->parsed()) {
      return run_embed(ckpt_path, features_path, modality, out_path);
    }
    if (mine->parsed()) {
      return run_mine(id_texts_path, candidates_path, eta, m, out_path,
                      renormalize);
    }
    if (score->parsed()) {
      if (method == "neglabel" && neg_texts.empty()) {
        std::cerr << "error: InvalidConfig: --method neglabel requires "
                     "--neg-texts\n";
        return 2;
      }
      if (groups > 0 && method != "neglabel") {
        std::cerr << "error: InvalidConfig: --groups applies to neglabel only\n";
        return 2;
      }
      return run_score(images_path, id_texts_path, neg_texts, method, groups,
                       tau, !tau_opt->empty(), out_path, renormalize);
    }
    if (eval->parsed()) {
      return run_eval(id_scores, ood_scores, out_path, tpr, roc_out);
    }
    if (gap->parsed()) {
      return run_gap(images_path, id_texts_path, ood_texts_path, out_path,
                     renormalize);
    }
    if (repro->parsed()) return run_reproduce(seeds, out_path, config_path);
  } catch (const cma::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
