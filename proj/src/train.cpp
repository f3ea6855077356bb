#include "cma/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cma/rng.hpp"

namespace cma {

void TrainConfig::validate() const {
  if (batch_size < 2) {
    throw_error(ErrorCode::InvalidConfig,
                "batch_size must be >= 2 for contrastive terms");
  }
  if (patience < 1) {
    throw_error(ErrorCode::InvalidConfig, "patience must be >= 1");
  }
  if (!(learning_rate >= 0.0) || !(lambda >= 0.0) || !(weight_decay >= 0.0)) {
    throw_error(ErrorCode::InvalidConfig,
                "learning_rate, lambda, weight_decay must be >= 0");
  }
  if (hidden_dim < 1 || embed_dim < 2) {
    throw_error(ErrorCode::InvalidConfig, "hidden_dim >= 1 and embed_dim >= 2");
  }
  if (!(init_inverse_scale > 0.0) || init_inverse_scale > max_inverse_scale) {
    throw_error(ErrorCode::InvalidConfig,
                "init_inverse_scale must lie in (0, max_inverse_scale]");
  }
}

BatchEvaluation evaluate_batch(const EncoderParams& params,
                               const Matrix& image_features,
                               const Matrix& text_features, double lambda) {
  const ForwardCache image_cache =
      encoder_forward_cached(params.image, image_features);
  const ForwardCache text_cache =
      encoder_forward_cached(params.text, text_features);

  PairedBatch batch =
      PairedBatch::create(image_cache.embeddings, text_cache.embeddings);
  const CmaConfig config = CmaConfig::create(lambda, params.temperature);

  BatchEvaluation eval;
  eval.loss = cma_objective(batch, config);
  const LossGradients lg = loss_gradients(batch, config);

  eval.gradients.image = ModalityGradients::zeros_like(params.image);
  eval.gradients.text = ModalityGradients::zeros_like(params.text);
  encoder_backward(params.image, image_features, image_cache, lg.d_images,
                   eval.gradients.image);
  encoder_backward(params.text, text_features, text_cache, lg.d_texts,
                   eval.gradients.text);
  eval.gradients.log_inverse_scale = lg.d_log_inverse_scale;

  eval.image_embeddings = std::move(batch.images);
  eval.text_embeddings = std::move(batch.texts);
  return eval;
}

namespace {

std::size_t modality_param_count(const ModalityParams& p) {
  return p.w1.data.size() + p.b1.size() + p.w2.data.size() + p.b2.size();
}

}  // namespace

AdamOptimizer::AdamOptimizer(const EncoderParams& params, const TrainConfig& config)
    : lr_(config.learning_rate),
      beta1_(config.adam_beta1),
      beta2_(config.adam_beta2),
      eps_(config.adam_epsilon),
      weight_decay_(config.weight_decay),
      cap_log_inverse_scale_(std::log(config.max_inverse_scale)) {
  num_params_ = modality_param_count(params.image) +
                modality_param_count(params.text) + 1;  // + temperature
  m_.assign(num_params_, 0.0);
  v_.assign(num_params_, 0.0);
}

void AdamOptimizer::update_span(std::span<double> values,
                                std::span<const double> grads,
                                std::size_t state_offset) {
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double g = grads[i] + weight_decay_ * values[i];
    double& m = m_[state_offset + i];
    double& v = v_[state_offset + i];
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g * g;
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    values[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
  }
}

void AdamOptimizer::step(EncoderParams& params, const EncoderGradients& grads) {
  ++t_;
  std::size_t offset = 0;
  const auto apply = [&](ModalityParams& p, const ModalityGradients& g) {
    update_span(p.w1.data, g.w1.data, offset);
    offset += p.w1.data.size();
    update_span(p.b1, g.b1, offset);
    offset += p.b1.size();
    update_span(p.w2.data, g.w2.data, offset);
    offset += p.w2.data.size();
    update_span(p.b2, g.b2, offset);
    offset += p.b2.size();
  };
  apply(params.image, grads.image);
  apply(params.text, grads.text);

  if (params.temperature.learnable) {
    double s[1] = {params.temperature.log_inverse_scale};
    const double g[1] = {grads.log_inverse_scale};
    update_span(std::span<double>(s, 1), std::span<const double>(g, 1), offset);
    params.temperature.log_inverse_scale =
        std::min(s[0], cap_log_inverse_scale_);
  }
}

double id_accuracy(const EncoderParams& params, const SampleSet& samples,
                   const Matrix& class_text_features) {
  if (samples.size() == 0 || class_text_features.rows == 0) {
    throw_error(ErrorCode::EmptyInput, "id_accuracy needs samples and prototypes");
  }
  const EmbeddingSet prototypes =
      encoder_forward(params.text, class_text_features);
  const EmbeddingSet embeddings =
      encoder_forward(params.image, samples.features);

  std::size_t correct = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples.class_ids[i] >= prototypes.size()) {
      throw_error(ErrorCode::InvalidSpec,
                  "sample class id outside prototype set");
    }
    const auto emb = embeddings.row(i);
    std::size_t best = 0;
    double best_sim = dot(emb, prototypes.row(0));
    for (std::size_t c = 1; c < prototypes.size(); ++c) {
      const double sim = dot(emb, prototypes.row(c));
      if (sim > best_sim) {  // strict: ties keep the lowest class index
        best_sim = sim;
        best = c;
      }
    }
    if (best == samples.class_ids[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

TrainResult train(const SyntheticDataset& dataset, const TrainConfig& config) {
  config.validate();
  if (dataset.id_train.size() < config.batch_size) {
    throw_error(ErrorCode::InsufficientData,
                "need at least batch_size ID training samples");
  }

  const std::size_t q = dataset.id_train.features.cols;
  Rng rng(config.seed);
  EncoderParams params;
  params.image =
      init_modality_params(q, config.hidden_dim, config.embed_dim, rng);
  params.text =
      init_modality_params(q, config.hidden_dim, config.embed_dim, rng);
  params.temperature = Temperature::from_inverse_scale(
      config.init_inverse_scale, config.learnable_temperature,
      config.max_inverse_scale);

  TrainResult result;
  result.params = params;
  if (config.max_epochs == 0) return result;

  AdamOptimizer optimizer(params, config);
  const std::size_t n = dataset.id_train.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  bool have_best = false;
  std::size_t epochs_since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t batch_count = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t b = std::min(config.batch_size, n - start);
      Matrix image_features(b, q);
      Matrix text_features(b, q);
      for (std::size_t i = 0; i < b; ++i) {
        const std::size_t idx = order[start + i];
        const auto src = dataset.id_train.features.row(idx);
        std::copy(src.begin(), src.end(), image_features.row(i).begin());
        // Text side of a pair is the sample's class prototype, re-encoded
        // every step.
        const auto proto =
            dataset.id_class_texts.row(dataset.id_train.class_ids[idx]);
        std::copy(proto.begin(), proto.end(), text_features.row(i).begin());
      }
      const BatchEvaluation eval =
          evaluate_batch(params, image_features, text_features, config.lambda);
      optimizer.step(params, eval.gradients);
      loss_sum += eval.loss.total;
      ++batch_count;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.mean_loss = loss_sum / static_cast<double>(batch_count);
    record.val_accuracy =
        id_accuracy(params, dataset.id_val, dataset.id_class_texts);
    result.history.push_back(record);

    if (!have_best || record.val_accuracy > result.best_accuracy) {
      have_best = true;
      result.best_accuracy = record.val_accuracy;
      result.best_epoch = epoch;
      result.params = params;
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
      if (epochs_since_best >= config.patience) break;
    }
  }
  return result;
}

}  // namespace cma
