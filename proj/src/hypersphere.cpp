#include "cma/hypersphere.hpp"

#include <algorithm>
#include <cmath>

namespace cma {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::DegenerateBatch: return "DegenerateBatch";
    case ErrorCode::NonFiniteSimilarity: return "NonFiniteSimilarity";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::EtaOutOfRange: return "EtaOutOfRange";
    case ErrorCode::EmptyIdSet: return "EmptyIdSet";
    case ErrorCode::EmptyNegativeSet: return "EmptyNegativeSet";
    case ErrorCode::TooManyGroups: return "TooManyGroups";
    case ErrorCode::EmptyPairPopulation: return "EmptyPairPopulation";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::NoCompetitors: return "NoCompetitors";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::IoFailure: return "IoFailure";
  }
  return "UnknownError";
}

EmbeddingSet EmbeddingSet::from_matrix(Matrix m, std::vector<std::string> labels) {
  if (!labels.empty() && labels.size() != m.rows) {
    throw_error(ErrorCode::SizeMismatch,
                "label count does not match row count");
  }
  EmbeddingSet set;
  set.rows = std::move(m);
  set.labels = std::move(labels);
  return set;
}

EmbeddingSet EmbeddingSet::from_unit_embeddings(
    const std::vector<UnitEmbedding>& rows, std::vector<std::string> labels) {
  if (rows.empty()) {
    return from_matrix(Matrix{}, std::move(labels));
  }
  const std::size_t d = rows.front().dim();
  Matrix m(rows.size(), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].dim() != d) {
      throw_error(ErrorCode::DimensionMismatch,
                  "embeddings in a set must share one dimension");
    }
    std::copy(rows[i].values.begin(), rows[i].values.end(),
              m.row(i).begin());
  }
  return from_matrix(std::move(m), std::move(labels));
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    acc += diff * diff;
  }
  return acc;
}

UnitEmbedding normalize(std::span<const double> v) {
  if (v.size() < 2) {
    throw_error(ErrorCode::InvalidSpec, "embedding dimension must be >= 2");
  }
  for (const double x : v) {
    if (!std::isfinite(x)) {
      throw_error(ErrorCode::NonFinite, "normalize input has non-finite entry");
    }
  }
  const double norm = l2_norm(v);
  if (norm <= 1e-12) {
    throw_error(ErrorCode::ZeroVector, "cannot normalize near-zero vector");
  }
  UnitEmbedding out;
  out.values.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out.values[i] = v[i] / norm;
  return out;
}

SimilarityMatrix cosine_matrix(const EmbeddingSet& a, const EmbeddingSet& b,
                               std::string row_source, std::string col_source) {
  if (a.dim() != b.dim()) {
    throw_error(ErrorCode::DimensionMismatch,
                "cosine_matrix requires equal embedding dimensions");
  }
  SimilarityMatrix sim;
  sim.entries = Matrix(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto lhs = a.row(i);
    for (std::size_t j = 0; j < b.size(); ++j) {
      // Clamp: rounding can push unit-vector dots epsilon past +-1.
      sim.entries.at(i, j) = std::clamp(dot(lhs, b.row(j)), -1.0, 1.0);
    }
  }
  sim.row_source = std::move(row_source);
  sim.col_source = std::move(col_source);
  return sim;
}

double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) {
    throw_error(ErrorCode::EmptyInput, "log_sum_exp of empty vector");
  }
  double m = xs[0];
  for (const double x : xs) {
    if (!std::isfinite(x)) {
      throw_error(ErrorCode::NonFinite, "log_sum_exp input has non-finite entry");
    }
    m = std::max(m, x);
  }
  double sum = 0.0;
  for (const double x : xs) sum += std::exp(x - m);
  return m + std::log(sum);
}

}  // namespace cma
