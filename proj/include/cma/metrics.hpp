#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cma/hypersphere.hpp"

namespace cma {

struct DetectionReport {
  double fpr_at_95_tpr = 0.0;
  double auroc = 0.0;
  double threshold_used = 0.0;
  std::size_t n_id = 0;
  std::size_t n_ood = 0;
  double tpr_target = 0.95;
};

struct GapReport {
  double uni_all = 0.0;
  double uni_i = 0.0;
  double uni_t = 0.0;
  double uni_cm = 0.0;
  double uni_cmm = 0.0;
  double align_id = 0.0;
  double align_ood = 0.0;
};

// Mann-Whitney: P(id > ood) + 0.5 P(tie). ID scores are the positive class.
double auroc(std::span<const double> id_scores, std::span<const double> ood_scores);

struct FprResult {
  double fpr = 0.0;
  double threshold = 0.0;
};

// Threshold is the largest observed ID score keeping TPR >= tpr_target;
// fpr is the fraction of OoD scores at or above it.
FprResult fpr_at_tpr(std::span<const double> id_scores,
                     std::span<const double> ood_scores, double tpr_target = 0.95);

DetectionReport detection_report(std::span<const double> id_scores,
                                 std::span<const double> ood_scores,
                                 double tpr_target = 0.95);

// (fpr, tpr) point per distinct threshold, for external plotting.
struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};
std::vector<RocPoint> roc_points(std::span<const double> id_scores,
                                 std::span<const double> ood_scores);

// -log E[exp(-2 ||e_i - e_j||^2)] over a pair population:
//   ALL     unordered pairs of the union of both sets (self-pairs excluded)
//   INTRA   unordered pairs within a single set
//   CROSS   the full left x right product
//   MATCHED positional pairs only
enum class UniformityMode { All, Intra, Cross, Matched };

double uniformity(const EmbeddingSet& left, const EmbeddingSet& right,
                  UniformityMode mode);
double uniformity(const EmbeddingSet& set, UniformityMode mode);

// -E_i[ ||i_i - t_i||^2 - min_j ||i_i - competitor_j||^2 ]; positive when the
// matching text is closer than every competitor. exclude_positional_match
// implements the j != i rule when the competitors are the ID texts themselves.
double alignment(const EmbeddingSet& id_images, const EmbeddingSet& id_texts,
                 const EmbeddingSet& competitors, bool exclude_positional_match);

double align_id(const EmbeddingSet& id_images, const EmbeddingSet& id_texts);
double align_ood(const EmbeddingSet& id_images, const EmbeddingSet& id_texts,
                 const EmbeddingSet& ood_texts);

GapReport gap_report(const EmbeddingSet& id_images, const EmbeddingSet& id_texts,
                     const EmbeddingSet& ood_texts);

}  // namespace cma
