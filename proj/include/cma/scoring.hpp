#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cma/hypersphere.hpp"

namespace cma {

enum class ScoreMethod { Mcm, NegLabel, NegLabelGrouped };

const char* score_method_name(ScoreMethod method);

struct ScoreConfig {
  double temperature_mcm = 1.0;
  double temperature_neglabel = 0.01;
  std::size_t groups = 100;
  bool grouping_enabled = false;

  void validate() const;
};

struct ScoreVector {
  std::vector<double> scores;
  ScoreMethod method = ScoreMethod::Mcm;
  ScoreConfig config;
};

// Evidence ratio, computed with a paired log-sum-exp so tau as small as
// 0.01 cannot overflow:
//   S = sum_k exp(sim_id_k/tau) / (same + sum_k exp(sim_neg_k/tau)).
// Higher means more ID-like.
double neglabel_score(const UnitEmbedding& image, const EmbeddingSet& id_texts,
                      const EmbeddingSet& neg_texts, double tau);

// Mean of the per-group score over G contiguous groups of the mined-order
// negatives, sized ceil(M/G) first then floor(M/G).
double neglabel_score_grouped(const UnitEmbedding& image,
                              const EmbeddingSet& id_texts,
                              const EmbeddingSet& neg_texts, double tau,
                              std::size_t groups);

// Max of softmax(sim/tau) over the ID classes.
double mcm_score(const UnitEmbedding& image, const EmbeddingSet& id_texts,
                 double tau);

// Elementwise, order-preserving application of one scorer to an image set.
ScoreVector score_batch(const EmbeddingSet& images, const EmbeddingSet& id_texts,
                        const EmbeddingSet* neg_texts, const ScoreConfig& config,
                        ScoreMethod method);

}  // namespace cma
