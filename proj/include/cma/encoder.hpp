#pragma once

#include <cstdint>
#include <vector>

#include "cma/hypersphere.hpp"
#include "cma/losses.hpp"
#include "cma/rng.hpp"

namespace cma {

enum class Modality { Image, Text };

// One-hidden-layer network: x -> W2 tanh(W1 x + b1) + b2, then projected to
// the unit sphere.
struct ModalityParams {
  Matrix w1;               // hidden x input
  std::vector<double> b1;  // hidden
  Matrix w2;               // embed x hidden
  std::vector<double> b2;  // embed

  std::size_t input_dim() const { return w1.cols; }
  std::size_t hidden_dim() const { return w1.rows; }
  std::size_t embed_dim() const { return w2.rows; }
};

struct EncoderParams {
  ModalityParams image;
  ModalityParams text;
  Temperature temperature = Temperature::clip_default();

  const ModalityParams& side(Modality m) const {
    return m == Modality::Image ? image : text;
  }
  ModalityParams& side(Modality m) {
    return m == Modality::Image ? image : text;
  }
};

// Scaled 1/sqrt(fan_in) Gaussian weights, zero biases.
ModalityParams init_modality_params(std::size_t input_dim, std::size_t hidden_dim,
                                    std::size_t embed_dim, Rng& rng);

// Intermediate activations kept for the hand-derived backward pass.
struct ForwardCache {
  Matrix hidden;                     // n x h, tanh outputs
  Matrix prenorm;                    // n x d, pre-normalization embeddings
  std::vector<double> prenorm_norm;  // n
  EmbeddingSet embeddings;           // n x d, unit rows
};

ForwardCache encoder_forward_cached(const ModalityParams& params,
                                    const Matrix& features);

EmbeddingSet encoder_forward(const ModalityParams& params, const Matrix& features);

EmbeddingSet encoder_forward(const EncoderParams& params, Modality modality,
                             const Matrix& features);

struct ModalityGradients {
  Matrix w1;
  std::vector<double> b1;
  Matrix w2;
  std::vector<double> b2;

  static ModalityGradients zeros_like(const ModalityParams& params);
};

// Accumulates parameter gradients given dL/d(unit embedding) per row. The
// incoming gradient may be pre-projected; projection is idempotent.
void encoder_backward(const ModalityParams& params, const Matrix& features,
                      const ForwardCache& cache, const Matrix& d_embeddings,
                      ModalityGradients& grads);

}  // namespace cma
