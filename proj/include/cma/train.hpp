#pragma once

#include <cstdint>
#include <vector>

#include "cma/encoder.hpp"
#include "cma/losses.hpp"
#include "cma/synthetic.hpp"

namespace cma {

struct TrainConfig {
  std::size_t batch_size = 512;
  double learning_rate = 3e-3;
  double lambda = 0.0;
  std::size_t max_epochs = 40;
  std::size_t patience = 8;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double weight_decay = 0.0;
  std::size_t hidden_dim = 64;
  std::size_t embed_dim = 16;
  bool learnable_temperature = true;
  double init_inverse_scale = 100.0;
  double max_inverse_scale = 100.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  EncoderParams params;  // best-validation snapshot
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_accuracy = 0.0;
};

struct EncoderGradients {
  ModalityGradients image;
  ModalityGradients text;
  double log_inverse_scale = 0.0;
};

struct BatchEvaluation {
  LossBreakdown loss;
  EncoderGradients gradients;
  EmbeddingSet image_embeddings;
  EmbeddingSet text_embeddings;
};

// Forward + objective + full backward through both encoders and the
// temperature, for one batch of raw image/text features.
BatchEvaluation evaluate_batch(const EncoderParams& params,
                               const Matrix& image_features,
                               const Matrix& text_features, double lambda);

// Adam over every encoder parameter plus the log-inverse-scale; the scale is
// clamped back to its cap after each step.
class AdamOptimizer {
 public:
  AdamOptimizer(const EncoderParams& params, const TrainConfig& config);

  void step(EncoderParams& params, const EncoderGradients& grads);

 private:
  void update_span(std::span<double> values, std::span<const double> grads,
                   std::size_t state_offset);

  double lr_, beta1_, beta2_, eps_, weight_decay_;
  double cap_log_inverse_scale_;
  std::size_t num_params_;
  std::vector<double> m_, v_;
  std::uint64_t t_ = 0;
};

// Fraction of samples whose nearest encoded ID class prototype (by cosine)
// matches their class. Ties resolve to the lowest class index; the argmax is
// invariant to the temperature.
double id_accuracy(const EncoderParams& params, const SampleSet& samples,
                   const Matrix& class_text_features);

// Mini-batch fine-tuning with early stopping on ID validation accuracy.
// Deterministic for a fixed seed.
TrainResult train(const SyntheticDataset& dataset, const TrainConfig& config);

}  // namespace cma
