#include "cma/losses.hpp"

#include <cmath>

namespace cma {
namespace {

// Shared per-batch state: scaled logits plus row/column log-sum-exp. Every
// loss variant reads from one of these so the cross-op identities hold
// bit-for-bit, not just within tolerance.
struct LossWorkspace {
  Matrix logits;  // B x B, entry (k, j) = sim(i_k, t_j) * exp(s)
  std::vector<double> row_lse;
  std::vector<double> col_lse;
};

LossWorkspace build_workspace(const PairedBatch& batch,
                              const Temperature& temperature) {
  const std::size_t b = batch.size();
  if (b == 0) {
    throw_error(ErrorCode::DegenerateBatch, "batch has no pairs");
  }
  const double inv_scale = temperature.inverse_scale();
  const SimilarityMatrix sims = cosine_matrix(batch.images, batch.texts);

  LossWorkspace ws;
  ws.logits = Matrix(b, b);
  for (std::size_t k = 0; k < b; ++k) {
    for (std::size_t j = 0; j < b; ++j) {
      const double logit = sims.entries.at(k, j) * inv_scale;
      if (!std::isfinite(logit)) {
        throw_error(ErrorCode::NonFiniteSimilarity,
                    "non-finite similarity in contrastive batch");
      }
      ws.logits.at(k, j) = logit;
    }
  }

  ws.row_lse.resize(b);
  ws.col_lse.resize(b);
  std::vector<double> column(b);
  for (std::size_t k = 0; k < b; ++k) {
    ws.row_lse[k] = log_sum_exp(ws.logits.row(k));
    for (std::size_t j = 0; j < b; ++j) column[j] = ws.logits.at(j, k);
    ws.col_lse[k] = log_sum_exp(column);
  }
  return ws;
}

LossBreakdown clip_from_workspace(const LossWorkspace& ws) {
  const std::size_t b = ws.row_lse.size();
  LossBreakdown out;
  out.clip_image_terms.resize(b);
  out.clip_text_terms.resize(b);
  double acc = 0.0;
  for (std::size_t k = 0; k < b; ++k) {
    const double diag = ws.logits.at(k, k);
    out.clip_image_terms[k] = ws.row_lse[k] - diag;
    out.clip_text_terms[k] = ws.col_lse[k] - diag;
    acc += out.clip_image_terms[k] + out.clip_text_terms[k];
  }
  out.total = acc / (2.0 * static_cast<double>(b));
  return out;
}

}  // namespace

Temperature Temperature::from_inverse_scale(double inv_scale, bool learnable,
                                            double cap) {
  if (!(cap > 0.0)) {
    throw_error(ErrorCode::InvalidConfig, "max_inverse_scale must be positive");
  }
  if (!(inv_scale > 0.0) || inv_scale > cap) {
    throw_error(ErrorCode::InvalidConfig,
                "inverse scale must lie in (0, max_inverse_scale]");
  }
  Temperature t;
  t.log_inverse_scale = std::log(inv_scale);
  t.learnable = learnable;
  t.max_inverse_scale = cap;
  return t;
}

Temperature Temperature::from_tau(double tau, bool learnable, double cap) {
  if (!(tau > 0.0)) {
    throw_error(ErrorCode::InvalidConfig, "tau must be positive");
  }
  return from_inverse_scale(1.0 / tau, learnable, cap);
}

PairedBatch PairedBatch::create(EmbeddingSet images, EmbeddingSet texts) {
  if (images.size() == 0 || texts.size() == 0) {
    throw_error(ErrorCode::DegenerateBatch, "paired batch must have B >= 1");
  }
  if (images.size() != texts.size()) {
    throw_error(ErrorCode::SizeMismatch,
                "paired batch needs equal image and text counts");
  }
  if (images.dim() != texts.dim()) {
    throw_error(ErrorCode::DimensionMismatch,
                "paired batch needs equal embedding dimensions");
  }
  return PairedBatch{std::move(images), std::move(texts)};
}

CmaConfig CmaConfig::create(double lambda, Temperature temperature) {
  if (!(lambda >= 0.0)) {
    throw_error(ErrorCode::InvalidConfig, "lambda must be >= 0");
  }
  return CmaConfig{lambda, temperature};
}

LossBreakdown clip_loss(const PairedBatch& batch, const Temperature& temperature) {
  return clip_from_workspace(build_workspace(batch, temperature));
}

CmaRegularizerTerms cma_regularizer(const PairedBatch& batch,
                                    const Temperature& temperature) {
  const LossWorkspace ws = build_workspace(batch, temperature);
  const std::size_t b = ws.row_lse.size();
  CmaRegularizerTerms out;
  out.image_terms.resize(b);
  out.text_terms.resize(b);
  for (std::size_t k = 0; k < b; ++k) {
    out.image_terms[k] = -ws.row_lse[k];
    out.text_terms[k] = -ws.col_lse[k];
  }
  return out;
}

LossBreakdown cma_objective(const PairedBatch& batch, const CmaConfig& config) {
  const LossWorkspace ws = build_workspace(batch, config.temperature);
  const std::size_t b = ws.row_lse.size();
  LossBreakdown out = clip_from_workspace(ws);
  out.cma_image_terms.resize(b);
  out.cma_text_terms.resize(b);
  double cma_acc = 0.0;
  for (std::size_t k = 0; k < b; ++k) {
    out.cma_image_terms[k] = -ws.row_lse[k];
    out.cma_text_terms[k] = -ws.col_lse[k];
    cma_acc += out.cma_image_terms[k] + out.cma_text_terms[k];
  }
  out.total += config.lambda / (2.0 * static_cast<double>(b)) * cma_acc;
  return out;
}

double cma_objective_rewritten(const PairedBatch& batch, const CmaConfig& config) {
  const LossWorkspace ws = build_workspace(batch, config.temperature);
  const std::size_t b = ws.row_lse.size();
  const double keep = 1.0 - config.lambda;
  double acc = 0.0;
  for (std::size_t k = 0; k < b; ++k) {
    const double diag = ws.logits.at(k, k);
    acc += (-diag + keep * ws.row_lse[k]) + (-diag + keep * ws.col_lse[k]);
  }
  return acc / (2.0 * static_cast<double>(b));
}

LossGradients loss_gradients(const PairedBatch& batch, const CmaConfig& config) {
  const LossWorkspace ws = build_workspace(batch, config.temperature);
  const std::size_t b = ws.row_lse.size();
  const std::size_t d = batch.dim();
  const double inv_scale = config.temperature.inverse_scale();
  const double keep = 1.0 - config.lambda;
  const double scale = 1.0 / (2.0 * static_cast<double>(b));

  // dL/d(logit_kj): softmax rows and columns against the diagonal targets,
  // with the CMA term folded in as the (1-lambda) factor of the rewrite.
  Matrix logit_grad(b, b);
  double d_s = 0.0;
  for (std::size_t k = 0; k < b; ++k) {
    for (std::size_t j = 0; j < b; ++j) {
      const double p_row = std::exp(ws.logits.at(k, j) - ws.row_lse[k]);
      const double p_col = std::exp(ws.logits.at(k, j) - ws.col_lse[j]);
      double g = keep * (p_row + p_col);
      if (k == j) g -= 2.0;
      logit_grad.at(k, j) = scale * g;
      d_s += logit_grad.at(k, j) * ws.logits.at(k, j);
    }
  }

  LossGradients out;
  out.d_images = Matrix(b, d);
  out.d_texts = Matrix(b, d);
  for (std::size_t k = 0; k < b; ++k) {
    auto gi = out.d_images.row(k);
    for (std::size_t j = 0; j < b; ++j) {
      const double w = logit_grad.at(k, j) * inv_scale;
      const auto text = batch.texts.row(j);
      for (std::size_t c = 0; c < d; ++c) gi[c] += w * text[c];
    }
  }
  for (std::size_t j = 0; j < b; ++j) {
    auto gt = out.d_texts.row(j);
    for (std::size_t k = 0; k < b; ++k) {
      const double w = logit_grad.at(k, j) * inv_scale;
      const auto image = batch.images.row(k);
      for (std::size_t c = 0; c < d; ++c) gt[c] += w * image[c];
    }
  }

  // Chain through v -> v/||v|| at a unit-norm point: subtract the radial part.
  for (std::size_t k = 0; k < b; ++k) {
    auto gi = out.d_images.row(k);
    const auto image = batch.images.row(k);
    const double radial = dot(gi, image);
    for (std::size_t c = 0; c < d; ++c) gi[c] -= radial * image[c];

    auto gt = out.d_texts.row(k);
    const auto text = batch.texts.row(k);
    const double radial_t = dot(gt, text);
    for (std::size_t c = 0; c < d; ++c) gt[c] -= radial_t * text[c];
  }

  out.d_log_inverse_scale = config.temperature.learnable ? d_s : 0.0;
  return out;
}

double log_marginal_estimate(const UnitEmbedding& image, const EmbeddingSet& texts,
                             const Temperature& temperature) {
  if (texts.size() == 0) {
    throw_error(ErrorCode::EmptyInput, "log_marginal_estimate needs texts");
  }
  EmbeddingSet single = EmbeddingSet::from_unit_embeddings({image});
  const SimilarityMatrix sims = cosine_matrix(single, texts);
  const double inv_scale = temperature.inverse_scale();
  std::vector<double> logits(texts.size());
  for (std::size_t j = 0; j < texts.size(); ++j) {
    logits[j] = sims.entries.at(0, j) * inv_scale;
  }
  return log_sum_exp(logits);
}

}  // namespace cma
