#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cma/errors.hpp"

namespace cma {

// Dense row-major matrix of doubles. All heavier linear algebra in this
// project is hand-rolled on top of it with a fixed left-to-right reduction
// order so that every run of the pipeline is bit-reproducible.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) {
    return std::span<double>(data).subspan(r * cols, cols);
  }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data).subspan(r * cols, cols);
  }
};

// A point on S^{d-1}. Construct through normalize() so the unit-norm
// invariant holds (|norm - 1| <= 1e-9, d >= 2).
struct UnitEmbedding {
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
  std::span<const double> view() const { return values; }
};

// n embeddings of common dimension, optionally labeled. n = 0 is permitted at
// the container level; operations that need data reject empty sets themselves.
struct EmbeddingSet {
  Matrix rows;                      // n x d
  std::vector<std::string> labels;  // empty, or one label per row

  std::size_t size() const { return rows.rows; }
  std::size_t dim() const { return rows.cols; }
  std::span<const double> row(std::size_t i) const { return rows.row(i); }

  static EmbeddingSet from_matrix(Matrix m, std::vector<std::string> labels = {});
  static EmbeddingSet from_unit_embeddings(const std::vector<UnitEmbedding>& rows,
                                           std::vector<std::string> labels = {});
};

// Pairwise cosine similarities with entries clamped to [-1, 1].
struct SimilarityMatrix {
  Matrix entries;  // n x m
  std::string row_source;
  std::string col_source;
};

// Left-to-right dot product; the shared reduction primitive.
double dot(std::span<const double> a, std::span<const double> b);

double l2_norm(std::span<const double> v);

double squared_distance(std::span<const double> a, std::span<const double> b);

// v / ||v||_2. Throws ZeroVector if ||v|| <= 1e-12, NonFinite on NaN/inf
// input, InvalidSpec if d < 2.
UnitEmbedding normalize(std::span<const double> v);

SimilarityMatrix cosine_matrix(const EmbeddingSet& a, const EmbeddingSet& b,
                               std::string row_source = {},
                               std::string col_source = {});

// max(xs) + log(sum(exp(xs - max))). Exact for a single element; no overflow
// for entries up to +-1e4.
double log_sum_exp(std::span<const double> xs);

}  // namespace cma
