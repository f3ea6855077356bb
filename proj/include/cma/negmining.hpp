#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cma/hypersphere.hpp"

namespace cma {

struct NegMiningConfig {
  double eta = 0.05;      // percentile level
  std::size_t m = 10000;  // negatives to keep, clipped to the corpus size

  void validate() const;
};

// Mined negatives in descending-distance order. source_indices point back
// into the candidate corpus.
struct NegativeLabelSet {
  EmbeddingSet embeddings;          // m x d, labels carried inside
  std::vector<double> distances;    // d_i, non-increasing
  std::vector<std::size_t> source_indices;

  std::size_t size() const { return embeddings.size(); }
};

// Linear-interpolation percentile at fractional rank eta * (K - 1) of the
// ascending sort. A single element is returned for any eta.
double percentile(std::span<const double> xs, double eta);

// For each candidate e~: d = percentile_eta over ID labels of -cos(e~, e_k);
// keep the m largest d, ties broken by candidate index ascending.
NegativeLabelSet mine_negatives(const EmbeddingSet& candidates,
                                const EmbeddingSet& id_texts,
                                const NegMiningConfig& config);

}  // namespace cma
