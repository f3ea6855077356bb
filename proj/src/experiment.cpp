#include "cma/experiment.hpp"

#include <algorithm>

#include "cma/encoder.hpp"
#include "cma/io.hpp"

namespace cma {
namespace {

ExperimentRow run_single(const ExperimentConfig& config, std::uint64_t seed,
                         double lambda) {
  SyntheticSpec spec = config.synthetic;
  spec.seed = seed;
  const SyntheticDataset dataset = generate_synthetic(spec);

  TrainConfig train_config = config.train;
  train_config.seed = seed;
  train_config.lambda = lambda;
  const TrainResult trained = train(dataset, train_config);
  const EncoderParams& params = trained.params;

  const EmbeddingSet id_images =
      encoder_forward(params.image, dataset.id_val.features);
  const EmbeddingSet ood_images =
      encoder_forward(params.image, dataset.ood_test.features);
  const EmbeddingSet id_prototypes =
      encoder_forward(params.text, dataset.id_class_texts);
  const EmbeddingSet ood_prototypes =
      encoder_forward(params.text, dataset.ood_class_texts);
  const EmbeddingSet candidate_prototypes =
      encoder_forward(params.text, dataset.candidate_class_texts);

  // Matched text per validation sample: its class prototype embedding.
  Matrix matched(dataset.id_val.size(), id_prototypes.dim());
  for (std::size_t i = 0; i < dataset.id_val.size(); ++i) {
    const auto proto = id_prototypes.row(dataset.id_val.class_ids[i]);
    std::copy(proto.begin(), proto.end(), matched.row(i).begin());
  }
  const EmbeddingSet matched_texts = EmbeddingSet::from_matrix(std::move(matched));

  const NegativeLabelSet negatives =
      mine_negatives(candidate_prototypes, id_prototypes, config.negmining);

  const ScoreMethod neg_method = config.score.grouping_enabled
                                     ? ScoreMethod::NegLabelGrouped
                                     : ScoreMethod::NegLabel;
  const ScoreVector id_neg = score_batch(id_images, id_prototypes,
                                         &negatives.embeddings, config.score,
                                         neg_method);
  const ScoreVector ood_neg = score_batch(ood_images, id_prototypes,
                                          &negatives.embeddings, config.score,
                                          neg_method);
  const ScoreVector id_mcm =
      score_batch(id_images, id_prototypes, nullptr, config.score,
                  ScoreMethod::Mcm);
  const ScoreVector ood_mcm =
      score_batch(ood_images, id_prototypes, nullptr, config.score,
                  ScoreMethod::Mcm);

  ExperimentRow row;
  row.seed = seed;
  row.lambda = lambda;
  row.val_accuracy = trained.best_accuracy;
  row.neglabel = detection_report(id_neg.scores, ood_neg.scores);
  row.mcm = detection_report(id_mcm.scores, ood_mcm.scores);
  row.gap = gap_report(id_images, matched_texts, ood_prototypes);
  return row;
}

}  // namespace

std::vector<ExperimentRow> run_lambda_comparison(const ExperimentConfig& config) {
  std::vector<ExperimentRow> rows;
  rows.reserve(config.seeds.size() * config.lambdas.size());
  for (const std::uint64_t seed : config.seeds) {
    for (const double lambda : config.lambdas) {
      rows.push_back(run_single(config, seed, lambda));
    }
  }
  return rows;
}

std::vector<LambdaAverages> average_by_lambda(
    const std::vector<ExperimentRow>& rows) {
  std::vector<LambdaAverages> out;
  for (const auto& row : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const LambdaAverages& a) {
      return a.lambda == row.lambda;
    });
    if (it == out.end()) {
      out.push_back(LambdaAverages{});
      it = out.end() - 1;
      it->lambda = row.lambda;
    }
    it->runs += 1;
    it->val_accuracy += row.val_accuracy;
    it->auroc_neglabel += row.neglabel.auroc;
    it->fpr95_neglabel += row.neglabel.fpr_at_95_tpr;
    it->auroc_mcm += row.mcm.auroc;
    it->uni_cmm += row.gap.uni_cmm;
    it->uni_cm += row.gap.uni_cm;
    it->align_ood += row.gap.align_ood;
  }
  for (auto& a : out) {
    const double n = static_cast<double>(a.runs);
    a.val_accuracy /= n;
    a.auroc_neglabel /= n;
    a.fpr95_neglabel /= n;
    a.auroc_mcm /= n;
    a.uni_cmm /= n;
    a.uni_cm /= n;
    a.align_ood /= n;
  }
  return out;
}

std::string experiment_csv_header() {
  return "seed,lambda,val_accuracy,auroc_neglabel,fpr95_neglabel,auroc_mcm,"
         "fpr95_mcm,uni_all,uni_i,uni_t,uni_cm,uni_cmm,align_id,align_ood";
}

std::string experiment_csv_row(const ExperimentRow& row) {
  std::string out = std::to_string(row.seed);
  for (const double v :
       {row.lambda, row.val_accuracy, row.neglabel.auroc,
        row.neglabel.fpr_at_95_tpr, row.mcm.auroc, row.mcm.fpr_at_95_tpr,
        row.gap.uni_all, row.gap.uni_i, row.gap.uni_t, row.gap.uni_cm,
        row.gap.uni_cmm, row.gap.align_id, row.gap.align_ood}) {
    out += ',';
    out += format_double(v);
  }
  return out;
}

}  // namespace cma
