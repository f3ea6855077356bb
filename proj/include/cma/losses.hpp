#pragma once

#include <cmath>
#include <vector>

#include "cma/hypersphere.hpp"

namespace cma {

// Similarity scaling parameterized as a learnable log-inverse-scale s with
// 1/tau = exp(s), capped at max_inverse_scale. The cap is enforced when the
// value is set or updated, not in the forward pass, so finite-difference
// probes of s stay smooth.
struct Temperature {
  double log_inverse_scale = 0.0;
  bool learnable = true;
  double max_inverse_scale = 100.0;

  double inverse_scale() const { return std::exp(log_inverse_scale); }
  double tau() const { return 1.0 / inverse_scale(); }

  static Temperature from_inverse_scale(double inv_scale, bool learnable = true,
                                        double cap = 100.0);
  static Temperature from_tau(double tau, bool learnable = true,
                              double cap = 100.0);
  // CLIP convention: 1/tau initialized at the cap of 100, learnable.
  static Temperature clip_default() { return from_inverse_scale(100.0); }
};

// B positionally matched image/text embedding pairs.
struct PairedBatch {
  EmbeddingSet images;
  EmbeddingSet texts;

  std::size_t size() const { return images.size(); }
  std::size_t dim() const { return images.dim(); }

  static PairedBatch create(EmbeddingSet images, EmbeddingSet texts);
};

struct CmaConfig {
  double lambda = 0.0;  // alignment strength; 0 reproduces the plain CLIP loss
  Temperature temperature = Temperature::clip_default();

  static CmaConfig create(double lambda, Temperature temperature);
};

// Per-pair terms are always kept alongside the scalar so the cross-term
// identities can be checked directly.
struct LossBreakdown {
  double total = 0.0;
  std::vector<double> clip_image_terms;
  std::vector<double> clip_text_terms;
  std::vector<double> cma_image_terms;
  std::vector<double> cma_text_terms;
};

struct CmaRegularizerTerms {
  std::vector<double> image_terms;
  std::vector<double> text_terms;
};

struct LossGradients {
  Matrix d_images;  // B x d, w.r.t. raw coordinates (normalization chain included)
  Matrix d_texts;   // B x d
  double d_log_inverse_scale = 0.0;
};

// Symmetric contrastive loss over the batch:
//   image term k = -log softmax_j(sim(i_k, t_j)/tau)[k], text term analogous
//   over the column, total = mean over both modalities.
LossBreakdown clip_loss(const PairedBatch& batch, const Temperature& temperature);

// image term k = -log sum_j exp(sim(i_k, t_j)/tau); text term mirrors over
// the other modality. Negated, these are the empirical log marginal densities.
CmaRegularizerTerms cma_regularizer(const PairedBatch& batch,
                                    const Temperature& temperature);

// clip_loss.total + (lambda / 2B) * sum_k (cma image + text terms).
LossBreakdown cma_objective(const PairedBatch& batch, const CmaConfig& config);

// Same objective folded per pair:
//   (1/2B) sum_k,both modalities [ -sim_kk/tau + (1-lambda) log sum_j exp(sim/tau) ].
double cma_objective_rewritten(const PairedBatch& batch, const CmaConfig& config);

// Analytic gradients of cma_objective.total w.r.t. raw embedding coordinates
// (through the projection-to-sphere Jacobian) and the log-inverse-scale.
LossGradients loss_gradients(const PairedBatch& batch, const CmaConfig& config);

// log sum_t exp(sim(image, t)/tau): the empirical estimate of the log marginal
// density up to its additive constant. Equals the negated CMA image term.
double log_marginal_estimate(const UnitEmbedding& image, const EmbeddingSet& texts,
                             const Temperature& temperature);

}  // namespace cma
