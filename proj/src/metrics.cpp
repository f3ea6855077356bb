#include "cma/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cma {
namespace {

void check_scores(std::span<const double> id_scores,
                  std::span<const double> ood_scores) {
  if (id_scores.empty() || ood_scores.empty()) {
    throw_error(ErrorCode::EmptyInput, "need both ID and OoD scores");
  }
  for (const double s : id_scores) {
    if (!std::isfinite(s)) throw_error(ErrorCode::NonFinite, "non-finite ID score");
  }
  for (const double s : ood_scores) {
    if (!std::isfinite(s)) throw_error(ErrorCode::NonFinite, "non-finite OoD score");
  }
}

}  // namespace

double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
  check_scores(id_scores, ood_scores);
  // Rank-sum with average ranks for ties; exact in doubles at these sizes.
  struct Tagged {
    double value;
    bool is_id;
  };
  std::vector<Tagged> all;
  all.reserve(id_scores.size() + ood_scores.size());
  for (const double s : id_scores) all.push_back({s, true});
  for (const double s : ood_scores) all.push_back({s, false});
  std::stable_sort(all.begin(), all.end(),
                   [](const Tagged& a, const Tagged& b) { return a.value < b.value; });

  double id_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].value == all[i].value) ++j;
    // 1-based ranks i+1 .. j share the average rank.
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].is_id) id_rank_sum += avg_rank;
    }
    i = j;
  }
  const double n1 = static_cast<double>(id_scores.size());
  const double n0 = static_cast<double>(ood_scores.size());
  const double u = id_rank_sum - n1 * (n1 + 1.0) / 2.0;
  return u / (n1 * n0);
}

FprResult fpr_at_tpr(std::span<const double> id_scores,
                     std::span<const double> ood_scores, double tpr_target) {
  check_scores(id_scores, ood_scores);
  if (!(tpr_target > 0.0) || tpr_target > 1.0) {
    throw_error(ErrorCode::InvalidConfig, "tpr_target must lie in (0, 1]");
  }
  std::vector<double> sorted(id_scores.begin(), id_scores.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const double n = static_cast<double>(sorted.size());
  std::size_t k = sorted.size();
  for (std::size_t q = 1; q <= sorted.size(); ++q) {
    if (static_cast<double>(q) / n >= tpr_target) {
      k = q;
      break;
    }
  }
  const double threshold = sorted[k - 1];
  std::size_t above = 0;
  for (const double s : ood_scores) {
    if (s >= threshold) ++above;
  }
  return {static_cast<double>(above) / static_cast<double>(ood_scores.size()),
          threshold};
}

DetectionReport detection_report(std::span<const double> id_scores,
                                 std::span<const double> ood_scores,
                                 double tpr_target) {
  DetectionReport report;
  report.auroc = auroc(id_scores, ood_scores);
  const FprResult fpr = fpr_at_tpr(id_scores, ood_scores, tpr_target);
  report.fpr_at_95_tpr = fpr.fpr;
  report.threshold_used = fpr.threshold;
  report.n_id = id_scores.size();
  report.n_ood = ood_scores.size();
  report.tpr_target = tpr_target;
  return report;
}

std::vector<RocPoint> roc_points(std::span<const double> id_scores,
                                 std::span<const double> ood_scores) {
  check_scores(id_scores, ood_scores);
  std::vector<double> thresholds(id_scores.begin(), id_scores.end());
  thresholds.insert(thresholds.end(), ood_scores.begin(), ood_scores.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());

  std::vector<RocPoint> points;
  points.reserve(thresholds.size());
  for (const double t : thresholds) {
    RocPoint p;
    p.threshold = t;
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (const double s : id_scores) tp += (s >= t) ? 1 : 0;
    for (const double s : ood_scores) fp += (s >= t) ? 1 : 0;
    p.tpr = static_cast<double>(tp) / static_cast<double>(id_scores.size());
    p.fpr = static_cast<double>(fp) / static_cast<double>(ood_scores.size());
    points.push_back(p);
  }
  return points;
}

namespace {

double pair_kernel(std::span<const double> a, std::span<const double> b) {
  return std::exp(-2.0 * squared_distance(a, b));
}

double finish_uniformity(double kernel_sum, std::size_t pair_count) {
  if (pair_count == 0) {
    throw_error(ErrorCode::EmptyPairPopulation,
                "uniformity needs at least one pair");
  }
  return -std::log(kernel_sum / static_cast<double>(pair_count));
}

double uniformity_intra_rows(const Matrix& rows) {
  double acc = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < rows.rows; ++i) {
    for (std::size_t j = i + 1; j < rows.rows; ++j) {
      acc += pair_kernel(rows.row(i), rows.row(j));
      ++pairs;
    }
  }
  return finish_uniformity(acc, pairs);
}

}  // namespace

double uniformity(const EmbeddingSet& left, const EmbeddingSet& right,
                  UniformityMode mode) {
  if (left.size() == 0 || right.size() == 0) {
    throw_error(ErrorCode::EmptyInput, "uniformity requires non-empty sets");
  }
  if (left.dim() != right.dim()) {
    throw_error(ErrorCode::DimensionMismatch, "uniformity dimensions differ");
  }
  switch (mode) {
    case UniformityMode::Intra:
      return uniformity_intra_rows(left.rows);
    case UniformityMode::All: {
      Matrix merged(left.size() + right.size(), left.dim());
      std::copy(left.rows.data.begin(), left.rows.data.end(),
                merged.data.begin());
      std::copy(right.rows.data.begin(), right.rows.data.end(),
                merged.data.begin() + static_cast<std::ptrdiff_t>(
                                          left.rows.data.size()));
      return uniformity_intra_rows(merged);
    }
    case UniformityMode::Cross: {
      double acc = 0.0;
      for (std::size_t i = 0; i < left.size(); ++i) {
        for (std::size_t j = 0; j < right.size(); ++j) {
          acc += pair_kernel(left.row(i), right.row(j));
        }
      }
      return finish_uniformity(acc, left.size() * right.size());
    }
    case UniformityMode::Matched: {
      if (left.size() != right.size()) {
        throw_error(ErrorCode::SizeMismatch,
                    "matched uniformity needs equal counts");
      }
      double acc = 0.0;
      for (std::size_t i = 0; i < left.size(); ++i) {
        acc += pair_kernel(left.row(i), right.row(i));
      }
      return finish_uniformity(acc, left.size());
    }
  }
  throw_error(ErrorCode::InvalidConfig, "unknown uniformity mode");
}

double uniformity(const EmbeddingSet& set, UniformityMode mode) {
  if (set.size() == 0) {
    throw_error(ErrorCode::EmptyInput, "uniformity requires a non-empty set");
  }
  if (mode == UniformityMode::Intra || mode == UniformityMode::All) {
    return uniformity_intra_rows(set.rows);
  }
  throw_error(ErrorCode::InvalidConfig,
              "single-set uniformity supports INTRA/ALL only");
}

double alignment(const EmbeddingSet& id_images, const EmbeddingSet& id_texts,
                 const EmbeddingSet& competitors, bool exclude_positional_match) {
  if (id_images.size() == 0) {
    throw_error(ErrorCode::EmptyInput, "alignment requires ID pairs");
  }
  if (id_images.size() != id_texts.size()) {
    throw_error(ErrorCode::SizeMismatch, "ID images and texts must pair up");
  }
  if (competitors.size() == 0 ||
      (exclude_positional_match && competitors.size() == 1)) {
    throw_error(ErrorCode::NoCompetitors, "alignment needs a competitor per image");
  }
  if (id_images.dim() != id_texts.dim() ||
      id_images.dim() != competitors.dim()) {
    throw_error(ErrorCode::DimensionMismatch, "alignment dimensions differ");
  }
  if (exclude_positional_match && competitors.size() != id_texts.size()) {
    throw_error(ErrorCode::SizeMismatch,
                "the j != i rule needs competitors aligned with the ID texts");
  }

  double acc = 0.0;
  for (std::size_t i = 0; i < id_images.size(); ++i) {
    const auto image = id_images.row(i);
    const double match = squared_distance(image, id_texts.row(i));
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < competitors.size(); ++j) {
      if (exclude_positional_match && j == i) continue;
      best = std::min(best, squared_distance(image, competitors.row(j)));
    }
    acc += match - best;
  }
  return -acc / static_cast<double>(id_images.size());
}

double align_id(const EmbeddingSet& id_images, const EmbeddingSet& id_texts) {
  return alignment(id_images, id_texts, id_texts, true);
}

double align_ood(const EmbeddingSet& id_images, const EmbeddingSet& id_texts,
                 const EmbeddingSet& ood_texts) {
  return alignment(id_images, id_texts, ood_texts, false);
}

GapReport gap_report(const EmbeddingSet& id_images, const EmbeddingSet& id_texts,
                     const EmbeddingSet& ood_texts) {
  GapReport report;
  report.uni_all = uniformity(id_images, id_texts, UniformityMode::All);
  report.uni_i = uniformity(id_images, UniformityMode::Intra);
  report.uni_t = uniformity(id_texts, UniformityMode::Intra);
  report.uni_cm = uniformity(id_images, id_texts, UniformityMode::Cross);
  report.uni_cmm = uniformity(id_images, id_texts, UniformityMode::Matched);
  report.align_id = align_id(id_images, id_texts);
  report.align_ood = align_ood(id_images, id_texts, ood_texts);
  return report;
}

}  // namespace cma
