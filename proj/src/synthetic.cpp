#include "cma/synthetic.hpp"

#include <cmath>
#include <cstdio>

#include "cma/rng.hpp"

namespace cma {
namespace {

std::string class_label(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%03zu", prefix, i);
  return std::string(buf);
}

Matrix random_linear_map(std::size_t out_dim, std::size_t in_dim, Rng& rng) {
  Matrix m(out_dim, in_dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
  for (auto& v : m.data) v = rng.normal() * scale;
  return m;
}

void map_latent(const Matrix& map, std::span<const double> latent,
                std::span<double> out) {
  for (std::size_t r = 0; r < map.rows; ++r) {
    out[r] = dot(map.row(r), latent);
  }
}

}  // namespace

void SyntheticSpec::validate() const {
  if (latent_dim < 2 || embed_input_dim < 2) {
    throw_error(ErrorCode::InvalidSpec, "latent and feature dims must be >= 2");
  }
  if (num_id_classes < 1 || num_ood_classes < 1 || num_candidate_classes < 1) {
    throw_error(ErrorCode::InvalidSpec, "all class counts must be >= 1");
  }
  if (samples_per_class_train < 1 || samples_per_class_val < 1 ||
      samples_per_class_test < 1) {
    throw_error(ErrorCode::InvalidSpec, "all samples-per-class must be >= 1");
  }
  if (!(noise_sigma_image >= 0.0) || !(noise_sigma_text >= 0.0)) {
    throw_error(ErrorCode::InvalidSpec, "noise sigmas must be >= 0");
  }
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  const std::size_t p = spec.latent_dim;
  const std::size_t q = spec.embed_input_dim;
  const std::size_t total_classes =
      spec.num_id_classes + spec.num_ood_classes + spec.num_candidate_classes;

  SyntheticDataset ds;
  ds.spec = spec;

  // Fixed draw order: modality maps, then per-class latent directions, then
  // samples. Anything reordered here breaks the determinism contract.
  const Matrix a_img = random_linear_map(q, p, rng);
  const Matrix a_txt = random_linear_map(q, p, rng);

  Matrix latents(total_classes, p);
  for (std::size_t c = 0; c < total_classes; ++c) {
    const UnitEmbedding mu = normalize(rng.normal_vector(p));
    std::copy(mu.values.begin(), mu.values.end(), latents.row(c).begin());
  }

  ds.id_class_texts = Matrix(spec.num_id_classes, q);
  ds.ood_class_texts = Matrix(spec.num_ood_classes, q);
  ds.candidate_class_texts = Matrix(spec.num_candidate_classes, q);
  ds.id_image_means = Matrix(spec.num_id_classes, q);
  ds.ood_image_means = Matrix(spec.num_ood_classes, q);

  for (std::size_t c = 0; c < spec.num_id_classes; ++c) {
    map_latent(a_txt, latents.row(c), ds.id_class_texts.row(c));
    map_latent(a_img, latents.row(c), ds.id_image_means.row(c));
    ds.id_class_labels.push_back(class_label("id", c));
  }
  for (std::size_t c = 0; c < spec.num_ood_classes; ++c) {
    const std::size_t global = spec.num_id_classes + c;
    map_latent(a_txt, latents.row(global), ds.ood_class_texts.row(c));
    map_latent(a_img, latents.row(global), ds.ood_image_means.row(c));
    ds.ood_class_labels.push_back(class_label("ood", c));
  }
  for (std::size_t c = 0; c < spec.num_candidate_classes; ++c) {
    const std::size_t global = spec.num_id_classes + spec.num_ood_classes + c;
    map_latent(a_txt, latents.row(global), ds.candidate_class_texts.row(c));
    ds.candidate_class_labels.push_back(class_label("cand", c));
  }

  const auto draw_samples = [&](const Matrix& means, std::size_t num_classes,
                                std::size_t class_id_base, std::size_t per_class,
                                double sigma) {
    SampleSet set;
    set.features = Matrix(num_classes * per_class, q);
    set.class_ids.reserve(num_classes * per_class);
    std::size_t row = 0;
    for (std::size_t c = 0; c < num_classes; ++c) {
      const auto mean = means.row(c);
      for (std::size_t s = 0; s < per_class; ++s, ++row) {
        auto out = set.features.row(row);
        for (std::size_t k = 0; k < q; ++k) {
          out[k] = mean[k] + sigma * rng.normal();
        }
        set.class_ids.push_back(class_id_base + c);
      }
    }
    return set;
  };

  ds.id_train = draw_samples(ds.id_image_means, spec.num_id_classes, 0,
                             spec.samples_per_class_train, spec.noise_sigma_image);
  ds.id_val = draw_samples(ds.id_image_means, spec.num_id_classes, 0,
                           spec.samples_per_class_val, spec.noise_sigma_image);
  ds.ood_test =
      draw_samples(ds.ood_image_means, spec.num_ood_classes, spec.num_id_classes,
                   spec.samples_per_class_test, spec.noise_sigma_image);

  return ds;
}

}  // namespace cma
