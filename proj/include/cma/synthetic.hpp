#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cma/hypersphere.hpp"

namespace cma {

// Desk-scale stand-in for an ID corpus plus OoD and negative-label corpora.
// Class identities live on the latent sphere S^{p-1}; each modality sees them
// through its own fixed linear map plus isotropic noise.
struct SyntheticSpec {
  std::size_t latent_dim = 8;
  std::size_t embed_input_dim = 32;  // feature dimension q per modality
  std::size_t num_id_classes = 16;
  std::size_t num_ood_classes = 16;
  std::size_t num_candidate_classes = 200;
  std::size_t samples_per_class_train = 100;
  std::size_t samples_per_class_val = 20;
  std::size_t samples_per_class_test = 20;
  double noise_sigma_image = 0.15;
  double noise_sigma_text = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Image-feature samples with their class ids (global ids: ID classes first,
// then OoD, then candidates).
struct SampleSet {
  Matrix features;  // n x q
  std::vector<std::size_t> class_ids;

  std::size_t size() const { return features.rows; }
};

struct SyntheticDataset {
  SyntheticSpec spec;

  SampleSet id_train;
  SampleSet id_val;
  SampleSet ood_test;

  // Canonical (noise-free) text feature per class.
  Matrix id_class_texts;         // num_id x q
  Matrix ood_class_texts;        // num_ood x q
  Matrix candidate_class_texts;  // num_candidate x q

  std::vector<std::string> id_class_labels;
  std::vector<std::string> ood_class_labels;
  std::vector<std::string> candidate_class_labels;

  // Noise-free image-feature means per class; used by diagnostics and tests.
  Matrix id_image_means;   // num_id x q
  Matrix ood_image_means;  // num_ood x q
};

SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace cma
