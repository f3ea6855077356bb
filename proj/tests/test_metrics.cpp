#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cma/metrics.hpp"
#include "test_util.hpp"

using namespace cma;
using testutil::random_unit_set;
using testutil::thrown_code;

namespace {

double pair_count_auroc(std::span<const double> id_scores,
                        std::span<const double> ood_scores) {
  double wins = 0.0;
  for (const double a : id_scores) {
    for (const double b : ood_scores) {
      if (a > b) wins += 1.0;
      else if (a == b) wins += 0.5;
    }
  }
  return wins / (static_cast<double>(id_scores.size()) *
                 static_cast<double>(ood_scores.size()));
}

// Scan every observed score as a candidate threshold, highest first.
FprResult scan_fpr(std::span<const double> id_scores,
                   std::span<const double> ood_scores, double tpr_target) {
  std::vector<double> candidates(id_scores.begin(), id_scores.end());
  std::sort(candidates.begin(), candidates.end(), std::greater<>());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());
  const double n = static_cast<double>(id_scores.size());
  for (const double t : candidates) {
    std::size_t hits = 0;
    for (const double s : id_scores) hits += (s >= t) ? 1 : 0;
    if (static_cast<double>(hits) / n >= tpr_target) {
      std::size_t fp = 0;
      for (const double s : ood_scores) fp += (s >= t) ? 1 : 0;
      return {static_cast<double>(fp) / static_cast<double>(ood_scores.size()), t};
    }
  }
  // tpr_target <= 1 always admits the minimum score.
  return {1.0, candidates.back()};
}

std::vector<double> random_scores(std::size_t n, Rng& rng, bool quantized) {
  std::vector<double> out(n);
  for (auto& v : out) {
    v = quantized ? std::floor(rng.uniform(0.0, 10.0)) / 10.0
                  : rng.uniform(0.0, 1.0);
  }
  return out;
}

}  // namespace

TEST_CASE("auroc fixtures") {
  CHECK(auroc(std::vector<double>{2.0, 3.0}, std::vector<double>{0.0, 1.0}) ==
        1.0);
  CHECK(auroc(std::vector<double>{1.0, 1.0}, std::vector<double>{1.0, 1.0}) ==
        0.5);
  CHECK(auroc(std::vector<double>{0.9, 0.4, 0.7}, std::vector<double>{0.5, 0.3}) ==
        doctest::Approx(5.0 / 6.0).epsilon(1e-14));
  CHECK(thrown_code([] { auroc({}, std::vector<double>{1.0}); }) ==
        ErrorCode::EmptyInput);
  CHECK(thrown_code([] {
          auroc(std::vector<double>{std::nan("")}, std::vector<double>{1.0});
        }) == ErrorCode::NonFinite);
}

TEST_CASE("auroc equals brute-force pair counting, with and without ties") {
  Rng rng(139);
  for (int trial = 0; trial < 100; ++trial) {
    const bool quantized = trial % 2 == 0;  // quantized scores force ties
    const auto id_scores = random_scores(1 + rng.uniform_index(50), rng, quantized);
    const auto ood_scores =
        random_scores(1 + rng.uniform_index(50), rng, quantized);
    const double fast = auroc(id_scores, ood_scores);
    CHECK(std::abs(fast - pair_count_auroc(id_scores, ood_scores)) <= 1e-12);
    CHECK(std::abs(fast + auroc(ood_scores, id_scores) - 1.0) <= 1e-12);
  }
}

TEST_CASE("auroc and fpr are invariant under increasing transforms") {
  Rng rng(149);
  const auto id_scores = random_scores(40, rng, false);
  const auto ood_scores = random_scores(30, rng, false);
  const double base_auroc = auroc(id_scores, ood_scores);
  const FprResult base_fpr = fpr_at_tpr(id_scores, ood_scores, 0.95);

  const auto transform = [](double x) { return std::exp(3.0 * x) - 7.0; };
  std::vector<double> tid(id_scores.size());
  std::vector<double> tood(ood_scores.size());
  std::transform(id_scores.begin(), id_scores.end(), tid.begin(), transform);
  std::transform(ood_scores.begin(), ood_scores.end(), tood.begin(), transform);

  CHECK(std::abs(auroc(tid, tood) - base_auroc) <= 1e-12);
  CHECK(fpr_at_tpr(tid, tood, 0.95).fpr == base_fpr.fpr);
}

TEST_CASE("fpr_at_tpr fixtures") {
  // Perfect separation.
  CHECK(fpr_at_tpr(std::vector<double>{0.9, 0.8}, std::vector<double>{0.1, 0.2})
            .fpr == 0.0);

  // 20 ID scores 1.00 down to 0.81; threshold lands on the 19th (0.82).
  std::vector<double> id_scores;
  for (int i = 0; i < 20; ++i) id_scores.push_back(1.0 - 0.01 * i);
  const std::vector<double> ood_scores{0.90, 0.50};
  const FprResult result = fpr_at_tpr(id_scores, ood_scores, 0.95);
  CHECK(result.threshold == doctest::Approx(0.82).epsilon(1e-14));
  CHECK(result.fpr == 0.5);

  // OoD above everything.
  CHECK(fpr_at_tpr(std::vector<double>{0.3, 0.2}, std::vector<double>{0.8, 0.9})
            .fpr == 1.0);
}

TEST_CASE("fpr_at_tpr equals the threshold-scan oracle") {
  Rng rng(151);
  for (int trial = 0; trial < 100; ++trial) {
    const bool quantized = trial % 2 == 0;
    const auto id_scores = random_scores(1 + rng.uniform_index(40), rng, quantized);
    const auto ood_scores =
        random_scores(1 + rng.uniform_index(40), rng, quantized);
    const double tpr = 0.05 + 0.95 * rng.uniform();
    const FprResult fast = fpr_at_tpr(id_scores, ood_scores, tpr);
    const FprResult slow = scan_fpr(id_scores, ood_scores, tpr);
    CHECK(fast.fpr == slow.fpr);
    CHECK(fast.threshold == slow.threshold);
  }
}

TEST_CASE("uniformity fixtures") {
  // Identical embeddings: every kernel value is exp(0).
  Matrix rows(3, 4);
  for (std::size_t i = 0; i < 3; ++i) rows.at(i, 0) = 1.0;
  const EmbeddingSet identical = EmbeddingSet::from_matrix(rows);
  CHECK(uniformity(identical, UniformityMode::Intra) == 0.0);
  CHECK(uniformity(identical, identical, UniformityMode::Cross) == 0.0);
  CHECK(uniformity(identical, identical, UniformityMode::Matched) == 0.0);

  // Two antipodal unit vectors: squared distance 4, -log(exp(-8)) = 8.
  Matrix anti(2, 3);
  anti.at(0, 0) = 1.0;
  anti.at(1, 0) = -1.0;
  const EmbeddingSet pair = EmbeddingSet::from_matrix(anti);
  CHECK(uniformity(pair, UniformityMode::All) ==
        doctest::Approx(8.0).epsilon(1e-14));

  CHECK(thrown_code([&] {
          Matrix one(1, 3);
          one.at(0, 0) = 1.0;
          uniformity(EmbeddingSet::from_matrix(one), UniformityMode::Intra);
        }) == ErrorCode::EmptyPairPopulation);
}

TEST_CASE("uniformity matches pair-enumeration oracles in every mode") {
  Rng rng(157);
  const EmbeddingSet left = random_unit_set(6, 5, rng);
  const EmbeddingSet right = random_unit_set(6, 5, rng);

  double acc = 0.0;
  std::size_t count = 0;
  // ALL over the union.
  std::vector<std::span<const double>> all_rows;
  for (std::size_t i = 0; i < 6; ++i) all_rows.push_back(left.row(i));
  for (std::size_t i = 0; i < 6; ++i) all_rows.push_back(right.row(i));
  for (std::size_t i = 0; i < all_rows.size(); ++i) {
    for (std::size_t j = i + 1; j < all_rows.size(); ++j) {
      acc += std::exp(-2.0 * squared_distance(all_rows[i], all_rows[j]));
      ++count;
    }
  }
  CHECK(std::abs(uniformity(left, right, UniformityMode::All) -
                 (-std::log(acc / count))) <= 1e-12);

  acc = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = i + 1; j < 6; ++j) {
      acc += std::exp(-2.0 * squared_distance(left.row(i), left.row(j)));
    }
  }
  CHECK(std::abs(uniformity(left, UniformityMode::Intra) -
                 (-std::log(acc / 15.0))) <= 1e-12);

  acc = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      acc += std::exp(-2.0 * squared_distance(left.row(i), right.row(j)));
    }
  }
  CHECK(std::abs(uniformity(left, right, UniformityMode::Cross) -
                 (-std::log(acc / 36.0))) <= 1e-12);

  acc = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    acc += std::exp(-2.0 * squared_distance(left.row(i), right.row(i)));
  }
  CHECK(std::abs(uniformity(left, right, UniformityMode::Matched) -
                 (-std::log(acc / 6.0))) <= 1e-12);
}

TEST_CASE("uniformity properties") {
  Rng rng(163);
  const EmbeddingSet left = random_unit_set(5, 6, rng);
  const EmbeddingSet right = random_unit_set(5, 6, rng);
  const Matrix rotation = testutil::random_rotation(6, rng);
  const EmbeddingSet rl = testutil::rotate_set(left, rotation);
  const EmbeddingSet rr = testutil::rotate_set(right, rotation);
  for (const UniformityMode mode :
       {UniformityMode::All, UniformityMode::Cross, UniformityMode::Matched}) {
    CHECK(std::abs(uniformity(left, right, mode) - uniformity(rl, rr, mode)) <=
          1e-10);
  }

  // Identical matched pairs, then one distant pair appended: value rises.
  Matrix same(4, 3);
  for (std::size_t i = 0; i < 4; ++i) same.at(i, 0) = 1.0;
  const EmbeddingSet base = EmbeddingSet::from_matrix(same);
  Matrix img(5, 3);
  Matrix txt(5, 3);
  for (std::size_t i = 0; i < 5; ++i) {
    img.at(i, 0) = 1.0;
    txt.at(i, 0) = 1.0;
  }
  txt.at(4, 0) = -1.0;  // one far pair
  CHECK(uniformity(base, base, UniformityMode::Matched) == 0.0);
  CHECK(uniformity(EmbeddingSet::from_matrix(img),
                   EmbeddingSet::from_matrix(txt),
                   UniformityMode::Matched) > 0.0);

  CHECK(thrown_code([&] { uniformity(left, random_unit_set(3, 6, rng),
                                     UniformityMode::Matched); }) ==
        ErrorCode::SizeMismatch);
}

TEST_CASE("alignment fixtures") {
  // Matching distance equal to the best competitor distance: zero.
  Matrix images(2, 4);
  images.at(0, 0) = 1.0;
  images.at(1, 1) = 1.0;
  const EmbeddingSet image_set = EmbeddingSet::from_matrix(images);
  Matrix texts(2, 4);
  texts.at(0, 2) = 1.0;
  texts.at(1, 3) = 1.0;
  const EmbeddingSet text_set = EmbeddingSet::from_matrix(texts);
  // All four image-text distances are equal (orthogonal pairs), so the
  // matched distance equals the best competitor distance.
  CHECK(align_id(image_set, text_set) == 0.0);

  // One image: match dist^2 0.1, best competitor dist^2 0.5.
  Matrix one_image(1, 3);
  one_image.at(0, 0) = 1.0;
  Matrix matched_text(1, 3);
  matched_text.at(0, 0) = 0.95;
  matched_text.at(0, 1) = std::sqrt(1.0 - 0.95 * 0.95);
  Matrix competitor(1, 3);
  competitor.at(0, 0) = 0.75;
  competitor.at(0, 1) = std::sqrt(1.0 - 0.75 * 0.75);
  const double value = align_ood(EmbeddingSet::from_matrix(one_image),
                                 EmbeddingSet::from_matrix(matched_text),
                                 EmbeddingSet::from_matrix(competitor));
  CHECK(value == doctest::Approx(0.4).epsilon(1e-12));

  CHECK(thrown_code([&] {
          align_id(EmbeddingSet::from_matrix(one_image),
                   EmbeddingSet::from_matrix(matched_text));
        }) == ErrorCode::NoCompetitors);
  CHECK(thrown_code([&] {
          align_ood(EmbeddingSet::from_matrix(one_image),
                    EmbeddingSet::from_matrix(matched_text), EmbeddingSet{});
        }) == ErrorCode::NoCompetitors);
}

TEST_CASE("alignment matches the exhaustive-min oracle") {
  Rng rng(167);
  const EmbeddingSet images = random_unit_set(5, 6, rng);
  const EmbeddingSet texts = random_unit_set(5, 6, rng);
  const EmbeddingSet competitors = random_unit_set(7, 6, rng);

  double acc = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    const double match = squared_distance(images.row(i), texts.row(i));
    double best = 1e300;
    for (std::size_t j = 0; j < 7; ++j) {
      best = std::min(best, squared_distance(images.row(i), competitors.row(j)));
    }
    acc += match - best;
  }
  CHECK(std::abs(align_ood(images, texts, competitors) - (-acc / 5.0)) <= 1e-12);

  // Align-ID with n = 2: each image has exactly one competitor.
  const EmbeddingSet two_images = random_unit_set(2, 6, rng);
  const EmbeddingSet two_texts = random_unit_set(2, 6, rng);
  const double t0 = squared_distance(two_images.row(0), two_texts.row(0)) -
                    squared_distance(two_images.row(0), two_texts.row(1));
  const double t1 = squared_distance(two_images.row(1), two_texts.row(1)) -
                    squared_distance(two_images.row(1), two_texts.row(0));
  CHECK(std::abs(align_id(two_images, two_texts) - (-(t0 + t1) / 2.0)) <= 1e-12);

  // Rotation invariance.
  const Matrix rotation = testutil::random_rotation(6, rng);
  CHECK(std::abs(align_ood(testutil::rotate_set(images, rotation),
                           testutil::rotate_set(texts, rotation),
                           testutil::rotate_set(competitors, rotation)) -
                 align_ood(images, texts, competitors)) <= 1e-10);
}

TEST_CASE("gap_report collapsed configuration") {
  // Every ID embedding at one point; OoD texts elsewhere.
  Matrix point(3, 4);
  for (std::size_t i = 0; i < 3; ++i) point.at(i, 0) = 1.0;
  const EmbeddingSet id_set = EmbeddingSet::from_matrix(point);

  Matrix ood(2, 4);
  ood.at(0, 1) = 1.0;
  ood.at(1, 0) = -1.0;
  const EmbeddingSet ood_set = EmbeddingSet::from_matrix(ood);

  const GapReport report = gap_report(id_set, id_set, ood_set);
  CHECK(report.uni_all == 0.0);
  CHECK(report.uni_i == 0.0);
  CHECK(report.uni_t == 0.0);
  CHECK(report.uni_cm == 0.0);
  CHECK(report.uni_cmm == 0.0);
  CHECK(report.align_id == 0.0);
  // Minimum squared distance to the OoD texts: ||e1 - e2||^2 = 2.
  CHECK(report.align_ood == doctest::Approx(2.0).epsilon(1e-14));
}
