#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cma/metrics.hpp"
#include "cma/negmining.hpp"
#include "cma/scoring.hpp"
#include "cma/synthetic.hpp"
#include "cma/train.hpp"

namespace cma {

// gen -> train -> mine -> score -> eval for a grid of seeds and alignment
// strengths, on one synthetic dataset spec. Used by the CLI and the
// acceptance suite.
struct ExperimentConfig {
  SyntheticSpec synthetic;
  TrainConfig train;
  ScoreConfig score;
  NegMiningConfig negmining;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::vector<double> lambdas = {0.0, 1e-3};
};

struct ExperimentRow {
  std::uint64_t seed = 0;
  double lambda = 0.0;
  double val_accuracy = 0.0;
  DetectionReport neglabel;
  DetectionReport mcm;
  GapReport gap;
};

std::vector<ExperimentRow> run_lambda_comparison(const ExperimentConfig& config);

// Seed-averaged metrics for one lambda value.
struct LambdaAverages {
  double lambda = 0.0;
  std::size_t runs = 0;
  double val_accuracy = 0.0;
  double auroc_neglabel = 0.0;
  double fpr95_neglabel = 0.0;
  double auroc_mcm = 0.0;
  double uni_cmm = 0.0;
  double uni_cm = 0.0;
  double align_ood = 0.0;
};

std::vector<LambdaAverages> average_by_lambda(
    const std::vector<ExperimentRow>& rows);

std::string experiment_csv_header();
std::string experiment_csv_row(const ExperimentRow& row);

}  // namespace cma
