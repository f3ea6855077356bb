#include "cma/encoder.hpp"

#include <cmath>

namespace cma {

ModalityParams init_modality_params(std::size_t input_dim, std::size_t hidden_dim,
                                    std::size_t embed_dim, Rng& rng) {
  ModalityParams p;
  p.w1 = Matrix(hidden_dim, input_dim);
  p.b1.assign(hidden_dim, 0.0);
  p.w2 = Matrix(embed_dim, hidden_dim);
  p.b2.assign(embed_dim, 0.0);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
  for (auto& w : p.w1.data) w = rng.normal() * s1;
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  for (auto& w : p.w2.data) w = rng.normal() * s2;
  return p;
}

ForwardCache encoder_forward_cached(const ModalityParams& params,
                                    const Matrix& features) {
  if (features.cols != params.input_dim()) {
    throw_error(ErrorCode::DimensionMismatch,
                "feature dimension does not match encoder input");
  }
  const std::size_t n = features.rows;
  const std::size_t h = params.hidden_dim();
  const std::size_t d = params.embed_dim();

  ForwardCache cache;
  cache.hidden = Matrix(n, h);
  cache.prenorm = Matrix(n, d);
  cache.prenorm_norm.resize(n);
  Matrix unit(n, d);

  for (std::size_t i = 0; i < n; ++i) {
    const auto x = features.row(i);
    auto hid = cache.hidden.row(i);
    for (std::size_t r = 0; r < h; ++r) {
      hid[r] = std::tanh(dot(params.w1.row(r), x) + params.b1[r]);
    }
    auto pre = cache.prenorm.row(i);
    for (std::size_t r = 0; r < d; ++r) {
      pre[r] = dot(params.w2.row(r), hid) + params.b2[r];
    }
    const UnitEmbedding u = normalize(pre);
    cache.prenorm_norm[i] = l2_norm(pre);
    std::copy(u.values.begin(), u.values.end(), unit.row(i).begin());
  }
  cache.embeddings = EmbeddingSet::from_matrix(std::move(unit));
  return cache;
}

EmbeddingSet encoder_forward(const ModalityParams& params, const Matrix& features) {
  return encoder_forward_cached(params, features).embeddings;
}

EmbeddingSet encoder_forward(const EncoderParams& params, Modality modality,
                             const Matrix& features) {
  return encoder_forward(params.side(modality), features);
}

ModalityGradients ModalityGradients::zeros_like(const ModalityParams& params) {
  ModalityGradients g;
  g.w1 = Matrix(params.w1.rows, params.w1.cols);
  g.b1.assign(params.b1.size(), 0.0);
  g.w2 = Matrix(params.w2.rows, params.w2.cols);
  g.b2.assign(params.b2.size(), 0.0);
  return g;
}

void encoder_backward(const ModalityParams& params, const Matrix& features,
                      const ForwardCache& cache, const Matrix& d_embeddings,
                      ModalityGradients& grads) {
  const std::size_t n = features.rows;
  const std::size_t h = params.hidden_dim();
  const std::size_t d = params.embed_dim();

  std::vector<double> d_pre(d);
  std::vector<double> d_hidden(h);
  for (std::size_t i = 0; i < n; ++i) {
    const auto u = cache.embeddings.row(i);
    const auto g_u = d_embeddings.row(i);
    const double norm = cache.prenorm_norm[i];

    // d/d(prenorm) of v/||v||: (I - u u^T) / ||v||.
    const double radial = dot(g_u, u);
    for (std::size_t r = 0; r < d; ++r) {
      d_pre[r] = (g_u[r] - radial * u[r]) / norm;
    }

    const auto hid = cache.hidden.row(i);
    for (std::size_t r = 0; r < d; ++r) {
      auto w2_row = grads.w2.row(r);
      for (std::size_t c = 0; c < h; ++c) w2_row[c] += d_pre[r] * hid[c];
      grads.b2[r] += d_pre[r];
    }
    for (std::size_t c = 0; c < h; ++c) {
      double acc = 0.0;
      for (std::size_t r = 0; r < d; ++r) acc += params.w2.at(r, c) * d_pre[r];
      d_hidden[c] = acc * (1.0 - hid[c] * hid[c]);
    }

    const auto x = features.row(i);
    for (std::size_t r = 0; r < h; ++r) {
      auto w1_row = grads.w1.row(r);
      for (std::size_t c = 0; c < x.size(); ++c) w1_row[c] += d_hidden[r] * x[c];
      grads.b1[r] += d_hidden[r];
    }
  }
}

}  // namespace cma
