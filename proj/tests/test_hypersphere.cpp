#include <doctest.h>

#include <cmath>

#include "cma/hypersphere.hpp"
#include "cma/rng.hpp"
#include "test_util.hpp"

using namespace cma;
using testutil::random_unit_set;
using testutil::thrown_code;

TEST_CASE("normalize basic cases") {
  const UnitEmbedding a = normalize(std::vector<double>{3.0, 4.0});
  CHECK(a.values[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(a.values[1] == doctest::Approx(0.8).epsilon(1e-12));

  const UnitEmbedding b = normalize(std::vector<double>{1.0, 0.0, 0.0});
  CHECK(b.values[0] == 1.0);
  CHECK(b.values[1] == 0.0);
  CHECK(b.values[2] == 0.0);

  CHECK(thrown_code([] { normalize(std::vector<double>{0.0, 0.0}); }) ==
        ErrorCode::ZeroVector);
  CHECK(thrown_code([] { normalize(std::vector<double>{1e-13, 0.0}); }) ==
        ErrorCode::ZeroVector);
}

TEST_CASE("normalize rejects non-finite and scalar input") {
  CHECK_THROWS_AS(normalize(std::vector<double>{std::nan(""), 1.0}), Error);
  CHECK_THROWS_AS(normalize(std::vector<double>{5.0}), Error);
}

TEST_CASE("normalize produces unit vectors and is idempotent") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 2 + rng.uniform_index(30);
    std::vector<double> v = rng.normal_vector(d);
    for (auto& x : v) x *= std::exp(rng.uniform(-6.0, 6.0));
    const UnitEmbedding u = normalize(v);
    CHECK(std::abs(l2_norm(u.values) - 1.0) <= 1e-9);
    const UnitEmbedding uu = normalize(u.values);
    for (std::size_t i = 0; i < d; ++i) {
      CHECK(std::abs(uu.values[i] - u.values[i]) <= 1e-12);
    }
  }
}

TEST_CASE("cosine_matrix small fixtures") {
  Matrix a(1, 2);
  a.at(0, 0) = 1.0;
  Matrix b(1, 2);
  b.at(0, 1) = 1.0;
  const auto orth = cosine_matrix(EmbeddingSet::from_matrix(a),
                                  EmbeddingSet::from_matrix(b));
  CHECK(orth.entries.at(0, 0) == 0.0);

  Matrix c(2, 2);
  c.at(0, 0) = 1.0;
  c.at(1, 0) = -1.0;
  const auto anti = cosine_matrix(EmbeddingSet::from_matrix(a),
                                  EmbeddingSet::from_matrix(c));
  CHECK(anti.entries.at(0, 0) == 1.0);
  CHECK(anti.entries.at(0, 1) == -1.0);
}

TEST_CASE("cosine_matrix matches per-entry dot oracle") {
  Rng rng(3);
  const EmbeddingSet set = testutil::random_unit_set(5, 7, rng);
  const auto sim = cosine_matrix(set, set);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      double expected = 0.0;
      for (std::size_t k = 0; k < 7; ++k) {
        expected += set.rows.at(i, k) * set.rows.at(j, k);
      }
      expected = std::min(1.0, std::max(-1.0, expected));
      CHECK(std::abs(sim.entries.at(i, j) - expected) <= 1e-12);
    }
    CHECK(std::abs(sim.entries.at(i, i) - 1.0) <= 1e-9);
  }
}

TEST_CASE("cosine_matrix rejects mismatched dimensions") {
  Rng rng(4);
  const EmbeddingSet a = random_unit_set(2, 4, rng);
  const EmbeddingSet b = random_unit_set(2, 5, rng);
  CHECK_THROWS_AS(cosine_matrix(a, b), Error);
}

TEST_CASE("log_sum_exp fixtures") {
  CHECK(log_sum_exp(std::vector<double>{-3.25}) == -3.25);
  CHECK(log_sum_exp(std::vector<double>{0.0, 0.0}) ==
        doctest::Approx(0.69314718055994530942).epsilon(1e-14));
  // Shifted-form value verified with arbitrary-precision arithmetic.
  const double big = log_sum_exp(std::vector<double>{1000.0, 1000.0});
  CHECK(std::isfinite(big));
  CHECK(big == doctest::Approx(1000.69314718055994530942).epsilon(1e-14));

  CHECK_THROWS_AS(log_sum_exp(std::vector<double>{}), Error);
  CHECK_THROWS_AS(
      log_sum_exp(std::vector<double>{1.0, std::numeric_limits<double>::infinity()}),
      Error);
}

TEST_CASE("log_sum_exp shift and permutation invariance") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(12);
    std::vector<double> xs(n);
    for (auto& x : xs) x = rng.uniform(-50.0, 50.0);
    const double base = log_sum_exp(xs);

    const double c = rng.uniform(-100.0, 100.0);
    std::vector<double> shifted = xs;
    for (auto& x : shifted) x += c;
    CHECK(std::abs(log_sum_exp(shifted) - (base + c)) <= 1e-10);

    std::vector<double> permuted = xs;
    rng.shuffle(permuted);
    CHECK(std::abs(log_sum_exp(permuted) - base) <= 1e-12);
  }
}
