#include "cma/negmining.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cma {

void NegMiningConfig::validate() const {
  if (!(eta > 0.0) || eta > 1.0) {
    throw_error(ErrorCode::EtaOutOfRange, "eta must lie in (0, 1]");
  }
  if (m < 1) {
    throw_error(ErrorCode::InvalidConfig, "m must be >= 1");
  }
}

double percentile(std::span<const double> xs, double eta) {
  if (xs.empty()) {
    throw_error(ErrorCode::EmptyInput, "percentile of empty vector");
  }
  if (!(eta > 0.0) || eta > 1.0) {
    throw_error(ErrorCode::EtaOutOfRange, "eta must lie in (0, 1]");
  }
  std::vector<double> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  const double rank = eta * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(rank));
  if (lo == hi) return sorted[lo];
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

NegativeLabelSet mine_negatives(const EmbeddingSet& candidates,
                                const EmbeddingSet& id_texts,
                                const NegMiningConfig& config) {
  config.validate();
  if (candidates.size() == 0 || id_texts.size() == 0) {
    throw_error(ErrorCode::EmptyInput,
                "mine_negatives needs candidates and ID labels");
  }
  if (candidates.dim() != id_texts.dim()) {
    throw_error(ErrorCode::DimensionMismatch,
                "candidate and ID embedding dimensions differ");
  }

  const SimilarityMatrix sims = cosine_matrix(candidates, id_texts);
  const std::size_t n = candidates.size();
  std::vector<double> distance(n);
  std::vector<double> neg_sims(id_texts.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < id_texts.size(); ++k) {
      neg_sims[k] = -sims.entries.at(i, k);
    }
    distance[i] = percentile(neg_sims, config.eta);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (distance[a] != distance[b]) return distance[a] > distance[b];
    return a < b;
  });

  const std::size_t keep = std::min(config.m, n);
  NegativeLabelSet out;
  Matrix rows(keep, candidates.dim());
  std::vector<std::string> labels;
  labels.reserve(keep);
  out.distances.reserve(keep);
  out.source_indices.reserve(keep);
  char fallback[32];
  for (std::size_t r = 0; r < keep; ++r) {
    const std::size_t src = order[r];
    const auto row = candidates.row(src);
    std::copy(row.begin(), row.end(), rows.row(r).begin());
    if (!candidates.labels.empty()) {
      labels.push_back(candidates.labels[src]);
    } else {
      std::snprintf(fallback, sizeof(fallback), "candidate_%zu", src);
      labels.push_back(fallback);
    }
    out.distances.push_back(distance[src]);
    out.source_indices.push_back(src);
  }
  out.embeddings = EmbeddingSet::from_matrix(std::move(rows), std::move(labels));
  return out;
}

}  // namespace cma
