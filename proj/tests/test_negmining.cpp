#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cma/negmining.hpp"
#include "test_util.hpp"

using namespace cma;
using testutil::random_unit_set;
using testutil::thrown_code;

namespace {

// Independent re-implementation of the mining rule used as the oracle:
// full similarity table, percentile per candidate, stable top-m.
std::vector<std::size_t> brute_force_selection(const EmbeddingSet& candidates,
                                               const EmbeddingSet& id_texts,
                                               double eta, std::size_t m) {
  const std::size_t n = candidates.size();
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> neg;
    for (std::size_t k = 0; k < id_texts.size(); ++k) {
      double s = 0.0;
      for (std::size_t c = 0; c < candidates.dim(); ++c) {
        s += candidates.rows.at(i, c) * id_texts.rows.at(k, c);
      }
      neg.push_back(-std::clamp(s, -1.0, 1.0));
    }
    std::sort(neg.begin(), neg.end());
    const double rank = eta * static_cast<double>(neg.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = static_cast<std::size_t>(std::ceil(rank));
    dist[i] = lo == hi ? neg[lo] : neg[lo] + (rank - lo) * (neg[hi] - neg[lo]);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dist[a] > dist[b];
  });
  order.resize(std::min(m, n));
  return order;
}

}  // namespace

TEST_CASE("percentile fixtures") {
  CHECK(percentile(std::vector<double>{5.0}, 0.05) == 5.0);
  CHECK(percentile(std::vector<double>{5.0}, 1.0) == 5.0);
  CHECK(percentile(std::vector<double>{0.0, 1.0}, 0.5) == 0.5);
  CHECK(percentile(std::vector<double>{10.0, 0.0, 20.0, 30.0}, 0.05) ==
        doctest::Approx(1.5).epsilon(1e-14));

  CHECK(thrown_code([] { percentile(std::vector<double>{}, 0.5); }) ==
        ErrorCode::EmptyInput);
  CHECK(thrown_code([] { percentile(std::vector<double>{1.0}, 0.0); }) ==
        ErrorCode::EtaOutOfRange);
  CHECK(thrown_code([] { percentile(std::vector<double>{1.0}, 1.5); }) ==
        ErrorCode::EtaOutOfRange);
}

TEST_CASE("antipode is mined first") {
  Matrix id_rows(1, 2);
  id_rows.at(0, 0) = 1.0;
  Matrix cand_rows(3, 2);
  cand_rows.at(0, 0) = -1.0;
  cand_rows.at(1, 1) = 1.0;
  cand_rows.at(2, 0) = 1.0;
  const EmbeddingSet id_texts = EmbeddingSet::from_matrix(id_rows);
  const EmbeddingSet candidates =
      EmbeddingSet::from_matrix(cand_rows, {"anti", "orth", "same"});

  NegMiningConfig config;
  config.m = 1;
  const NegativeLabelSet mined = mine_negatives(candidates, id_texts, config);
  CHECK(mined.size() == 1);
  CHECK(mined.embeddings.labels[0] == "anti");
  CHECK(mined.distances[0] == 1.0);
}

TEST_CASE("m larger than the corpus keeps everything, sorted by distance") {
  Rng rng(73);
  const EmbeddingSet id_texts = random_unit_set(4, 6, rng);
  const EmbeddingSet candidates = random_unit_set(12, 6, rng);
  NegMiningConfig config;
  config.m = 10000;
  const NegativeLabelSet mined = mine_negatives(candidates, id_texts, config);
  CHECK(mined.size() == 12);
  CHECK(std::is_sorted(mined.distances.begin(), mined.distances.end(),
                       std::greater<>()));
}

TEST_CASE("mining matches the brute-force oracle") {
  Rng rng(79);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 4 + rng.uniform_index(6);
    const EmbeddingSet id_texts = random_unit_set(3, d, rng);
    const EmbeddingSet candidates = random_unit_set(20, d, rng);
    NegMiningConfig config;
    config.eta = 0.05;
    config.m = 5;
    const NegativeLabelSet mined = mine_negatives(candidates, id_texts, config);
    const auto expected = brute_force_selection(candidates, id_texts, 0.05, 5);
    REQUIRE(mined.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
      CHECK(mined.source_indices[i] == expected[i]);
    }
  }
}

TEST_CASE("tie-breaks go to the lower candidate index") {
  Rng rng(83);
  const EmbeddingSet id_texts = random_unit_set(2, 5, rng);
  EmbeddingSet base = random_unit_set(4, 5, rng);
  // Duplicate row 1 at the end: identical distance, higher index.
  Matrix rows(5, 5);
  std::copy(base.rows.data.begin(), base.rows.data.end(), rows.data.begin());
  std::copy(base.row(1).begin(), base.row(1).end(), rows.row(4).begin());
  const EmbeddingSet candidates = EmbeddingSet::from_matrix(rows);

  NegMiningConfig config;
  config.m = 5;
  const NegativeLabelSet mined = mine_negatives(candidates, id_texts, config);
  const auto pos_1 = std::find(mined.source_indices.begin(),
                               mined.source_indices.end(), 1u);
  const auto pos_4 = std::find(mined.source_indices.begin(),
                               mined.source_indices.end(), 4u);
  CHECK(pos_1 < pos_4);
}

TEST_CASE("selected distances dominate rejected ones") {
  Rng rng(89);
  const EmbeddingSet id_texts = random_unit_set(5, 8, rng);
  const EmbeddingSet candidates = random_unit_set(30, 8, rng);
  NegMiningConfig config;
  config.m = 7;
  const NegativeLabelSet mined = mine_negatives(candidates, id_texts, config);

  NegMiningConfig all;
  all.m = 30;
  const NegativeLabelSet everything = mine_negatives(candidates, id_texts, all);
  const double worst_selected = mined.distances.back();
  for (std::size_t i = 7; i < everything.size(); ++i) {
    CHECK(everything.distances[i] <= worst_selected);
  }
}

TEST_CASE("candidate permutation preserves the selected label set") {
  Rng rng(97);
  const EmbeddingSet id_texts = random_unit_set(4, 6, rng);
  EmbeddingSet candidates = random_unit_set(15, 6, rng);
  candidates.labels.clear();
  for (std::size_t i = 0; i < 15; ++i) {
    candidates.labels.push_back("c" + std::to_string(i));
  }

  NegMiningConfig config;
  config.m = 6;
  const NegativeLabelSet base = mine_negatives(candidates, id_texts, config);

  std::vector<std::size_t> perm(15);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  Matrix rows(15, 6);
  std::vector<std::string> labels(15);
  for (std::size_t i = 0; i < 15; ++i) {
    std::copy(candidates.row(perm[i]).begin(), candidates.row(perm[i]).end(),
              rows.row(i).begin());
    labels[i] = candidates.labels[perm[i]];
  }
  const NegativeLabelSet permuted = mine_negatives(
      EmbeddingSet::from_matrix(std::move(rows), std::move(labels)), id_texts,
      config);
  CHECK(base.embeddings.labels == permuted.embeddings.labels);
}

TEST_CASE("a common rotation leaves the selection unchanged") {
  Rng rng(101);
  const std::size_t d = 7;
  const EmbeddingSet id_texts = random_unit_set(4, d, rng);
  EmbeddingSet candidates = random_unit_set(18, d, rng);
  candidates.labels.clear();
  for (std::size_t i = 0; i < 18; ++i) {
    candidates.labels.push_back("c" + std::to_string(i));
  }
  NegMiningConfig config;
  config.m = 6;
  const NegativeLabelSet base = mine_negatives(candidates, id_texts, config);

  const Matrix rotation = testutil::random_rotation(d, rng);
  const NegativeLabelSet rotated =
      mine_negatives(testutil::rotate_set(candidates, rotation),
                     testutil::rotate_set(id_texts, rotation), config);
  CHECK(base.embeddings.labels == rotated.embeddings.labels);
}

TEST_CASE("eta one takes the farthest ID label; single ID makes eta moot") {
  Rng rng(103);
  const EmbeddingSet id_texts = random_unit_set(6, 5, rng);
  const EmbeddingSet candidates = random_unit_set(10, 5, rng);

  NegMiningConfig config;
  config.eta = 1.0;
  config.m = 10;
  const NegativeLabelSet mined = mine_negatives(candidates, id_texts, config);
  const SimilarityMatrix sims = cosine_matrix(candidates, id_texts);
  for (std::size_t r = 0; r < mined.size(); ++r) {
    const std::size_t i = mined.source_indices[r];
    double max_neg = -2.0;
    for (std::size_t k = 0; k < id_texts.size(); ++k) {
      max_neg = std::max(max_neg, -sims.entries.at(i, k));
    }
    CHECK(mined.distances[r] == doctest::Approx(max_neg).epsilon(1e-14));
  }

  const EmbeddingSet one_id = random_unit_set(1, 5, rng);
  NegMiningConfig low;
  low.eta = 0.05;
  low.m = 10;
  NegMiningConfig high;
  high.eta = 0.9;
  high.m = 10;
  const NegativeLabelSet a = mine_negatives(candidates, one_id, low);
  const NegativeLabelSet b = mine_negatives(candidates, one_id, high);
  CHECK(a.source_indices == b.source_indices);
  CHECK(a.distances == b.distances);
}
