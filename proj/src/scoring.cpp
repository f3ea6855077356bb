#include "cma/scoring.hpp"

#include <algorithm>
#include <cmath>

namespace cma {
namespace {

void scaled_similarities(std::span<const double> image, const EmbeddingSet& texts,
                         double inv_tau, std::vector<double>& out) {
  out.resize(texts.size());
  for (std::size_t k = 0; k < texts.size(); ++k) {
    out[k] = std::clamp(dot(image, texts.row(k)), -1.0, 1.0) * inv_tau;
  }
}

double check_tau(double tau) {
  if (!(tau > 0.0)) {
    throw_error(ErrorCode::InvalidConfig, "tau must be positive");
  }
  return 1.0 / tau;
}

// Score over id logits vs one contiguous slice of negative logits.
double evidence_ratio(std::span<const double> id_logits,
                      std::span<const double> neg_logits) {
  const double lse_id = log_sum_exp(id_logits);
  const double lse_neg = log_sum_exp(neg_logits);
  return 1.0 / (1.0 + std::exp(lse_neg - lse_id));
}

double neglabel_core(std::span<const double> image, const EmbeddingSet& id_texts,
                     const EmbeddingSet& neg_texts, double tau,
                     std::size_t groups) {
  if (id_texts.size() == 0) {
    throw_error(ErrorCode::EmptyIdSet, "NegLabel score needs ID texts");
  }
  if (neg_texts.size() == 0) {
    throw_error(ErrorCode::EmptyNegativeSet, "NegLabel score needs negatives");
  }
  if (image.size() != id_texts.dim() || id_texts.dim() != neg_texts.dim()) {
    throw_error(ErrorCode::DimensionMismatch, "score input dimensions differ");
  }
  if (groups < 1 || groups > neg_texts.size()) {
    throw_error(ErrorCode::TooManyGroups,
                "groups must lie in [1, negative count]");
  }
  const double inv_tau = check_tau(tau);
  std::vector<double> id_logits;
  std::vector<double> neg_logits;
  scaled_similarities(image, id_texts, inv_tau, id_logits);
  scaled_similarities(image, neg_texts, inv_tau, neg_logits);

  const std::size_t m = neg_logits.size();
  const std::size_t base = m / groups;
  const std::size_t larger = m % groups;  // first `larger` groups get +1

  double acc = 0.0;
  std::size_t start = 0;
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t len = base + (g < larger ? 1 : 0);
    acc += evidence_ratio(id_logits,
                          std::span<const double>(neg_logits).subspan(start, len));
    start += len;
  }
  return acc / static_cast<double>(groups);
}

double mcm_core(std::span<const double> image, const EmbeddingSet& id_texts,
                double tau) {
  if (id_texts.size() == 0) {
    throw_error(ErrorCode::EmptyIdSet, "MCM score needs ID texts");
  }
  if (image.size() != id_texts.dim()) {
    throw_error(ErrorCode::DimensionMismatch, "score input dimensions differ");
  }
  const double inv_tau = check_tau(tau);
  std::vector<double> logits;
  scaled_similarities(image, id_texts, inv_tau, logits);
  const double lse = log_sum_exp(logits);
  const double top = *std::max_element(logits.begin(), logits.end());
  return std::exp(top - lse);
}

}  // namespace

const char* score_method_name(ScoreMethod method) {
  switch (method) {
    case ScoreMethod::Mcm: return "MCM";
    case ScoreMethod::NegLabel: return "NegLabel";
    case ScoreMethod::NegLabelGrouped: return "NegLabel-grouped";
  }
  return "unknown";
}

void ScoreConfig::validate() const {
  if (!(temperature_mcm > 0.0) || !(temperature_neglabel > 0.0)) {
    throw_error(ErrorCode::InvalidConfig, "score temperatures must be positive");
  }
  if (groups < 1) {
    throw_error(ErrorCode::InvalidConfig, "groups must be >= 1");
  }
}

double neglabel_score(const UnitEmbedding& image, const EmbeddingSet& id_texts,
                      const EmbeddingSet& neg_texts, double tau) {
  return neglabel_core(image.view(), id_texts, neg_texts, tau, 1);
}

double neglabel_score_grouped(const UnitEmbedding& image,
                              const EmbeddingSet& id_texts,
                              const EmbeddingSet& neg_texts, double tau,
                              std::size_t groups) {
  return neglabel_core(image.view(), id_texts, neg_texts, tau, groups);
}

double mcm_score(const UnitEmbedding& image, const EmbeddingSet& id_texts,
                 double tau) {
  return mcm_core(image.view(), id_texts, tau);
}

ScoreVector score_batch(const EmbeddingSet& images, const EmbeddingSet& id_texts,
                        const EmbeddingSet* neg_texts, const ScoreConfig& config,
                        ScoreMethod method) {
  config.validate();
  const bool needs_negatives = method != ScoreMethod::Mcm;
  if (needs_negatives && neg_texts == nullptr) {
    throw_error(ErrorCode::EmptyNegativeSet,
                "NegLabel scoring needs a negative text set");
  }

  ScoreVector out;
  out.method = method;
  out.config = config;
  out.scores.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto row = images.row(i);
    if (method == ScoreMethod::Mcm) {
      out.scores.push_back(mcm_core(row, id_texts, config.temperature_mcm));
    } else {
      const std::size_t groups =
          method == ScoreMethod::NegLabelGrouped ? config.groups : 1;
      out.scores.push_back(neglabel_core(row, id_texts, *neg_texts,
                                         config.temperature_neglabel, groups));
    }
  }
  return out;
}

}  // namespace cma
