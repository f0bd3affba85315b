#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "touchauth/classify.hpp"
#include "touchauth/rng.hpp"

using namespace touchauth;

namespace {

Matrix gaussian_blob(Rng& rng, std::size_t n, std::size_t dims, double center, double spread) {
  Matrix rows(n, std::vector<double>(dims));
  for (auto& r : rows) {
    for (auto& v : r) v = rng.normal(center, spread);
  }
  return rows;
}

}  // namespace

TEST_CASE("standardizer golden on a three-point column", "[classify]") {
  const Standardizer s = Standardizer::fit({{1.0}, {2.0}, {3.0}});
  REQUIRE(s.means[0] == 2.0);
  REQUIRE(s.stddevs[0] == Catch::Approx(std::sqrt(2.0 / 3.0)).margin(1e-15));
  const double unit = std::sqrt(1.5);  // (1 - 2) / sqrt(2/3)
  REQUIRE(s.apply(std::vector<double>{1.0})[0] == Catch::Approx(-unit).margin(1e-12));
  REQUIRE(s.apply(std::vector<double>{2.0})[0] == 0.0);
  REQUIRE(s.apply(std::vector<double>{3.0})[0] == Catch::Approx(unit).margin(1e-12));
}

TEST_CASE("standardizer maps zero-spread features to zero", "[classify]") {
  const Standardizer s = Standardizer::fit({{5.0, 1.0}, {5.0, 3.0}});
  REQUIRE(s.apply(std::vector<double>{5.0, 2.0})[0] == 0.0);
  REQUIRE(s.apply(std::vector<double>{99.0, 2.0})[0] == 0.0);  // still zero off-sample
  REQUIRE(s.apply(std::vector<double>{5.0, 3.0})[1] > 0.0);
}

TEST_CASE("standardizer min-max option squeezes before z-scoring", "[classify]") {
  const Matrix rows = {{0.0, 10.0}, {5.0, 20.0}, {10.0, 30.0}};
  const Standardizer s = Standardizer::fit(rows, /*use_minmax=*/true);
  REQUIRE(s.use_minmax);
  REQUIRE(s.mins == std::vector<double>{0.0, 10.0});
  REQUIRE(s.maxs == std::vector<double>{10.0, 30.0});
  // Min-maxed column 0 is {0, 0.5, 1}: mean 0.5, population sd sqrt(1/6).
  const double sd = std::sqrt(1.0 / 6.0);
  REQUIRE(s.apply(std::vector<double>{0.0, 10.0})[0] == Catch::Approx(-0.5 / sd).margin(1e-12));
  REQUIRE(s.apply(std::vector<double>{5.0, 20.0})[0] == Catch::Approx(0.0).margin(1e-12));

  // Values outside the fitted range extrapolate linearly.
  REQUIRE(s.apply(std::vector<double>{20.0, 10.0})[0] == Catch::Approx(1.5 / sd).margin(1e-12));
}

TEST_CASE("standardizer validates its input", "[classify]") {
  REQUIRE_THROWS_AS(Standardizer::fit({}), std::invalid_argument);
  REQUIRE_THROWS_AS(Standardizer::fit({{1.0, 2.0}, {1.0}}), std::invalid_argument);
  const Standardizer s = Standardizer::fit({{1.0}, {2.0}});
  REQUIRE_THROWS_AS(s.apply(std::vector<double>{1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("apply_all matches per-row apply", "[classify]") {
  Rng rng(7);
  const Matrix rows = gaussian_blob(rng, 10, 3, 0.0, 2.0);
  const Standardizer s = Standardizer::fit(rows);
  const Matrix all = s.apply_all(rows);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    REQUIRE(all[i] == s.apply(rows[i]));
  }
}

TEST_CASE("z-scoring is invariant under per-feature affine maps", "[classify]") {
  Rng rng(21);
  const Matrix rows = gaussian_blob(rng, 40, 4, 1.0, 2.0);
  Matrix scaled = rows;
  for (auto& r : scaled) {
    for (std::size_t j = 0; j < r.size(); ++j) r[j] = r[j] * 3.0 - 10.0;
  }
  const Standardizer a = Standardizer::fit(rows);
  const Standardizer b = Standardizer::fit(scaled);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto za = a.apply(rows[i]);
    const auto zb = b.apply(scaled[i]);
    for (std::size_t j = 0; j < za.size(); ++j) {
      REQUIRE(za[j] == Catch::Approx(zb[j]).margin(1e-9));
    }
  }
}

TEST_CASE("class balancing subsamples negatives to the positive count", "[classify]") {
  Rng rng(101);
  const BalanceResult r = balance_classes(5, 40, rng);
  REQUIRE(!r.underfull);
  REQUIRE(r.negative_indices.size() == 5);
  std::set<std::size_t> seen;
  std::size_t prev = 0;
  bool first = true;
  for (std::size_t idx : r.negative_indices) {
    REQUIRE(idx < 40);
    REQUIRE(seen.insert(idx).second);
    if (!first) REQUIRE(idx > prev);
    prev = idx;
    first = false;
  }

  // Too few negatives: keep everything and flag it.
  Rng rng2(101);
  const BalanceResult u = balance_classes(9, 4, rng2);
  REQUIRE(u.underfull);
  REQUIRE(u.negative_indices == std::vector<std::size_t>{0, 1, 2, 3});

  Rng rng3(101);
  REQUIRE_THROWS_AS(balance_classes(0, 4, rng3), std::invalid_argument);
}

TEST_CASE("class balancing is deterministic per seed and near-uniform", "[classify][statistical]") {
  Rng a(55), b(55);
  REQUIRE(balance_classes(6, 30, a).negative_indices == balance_classes(6, 30, b).negative_indices);

  std::vector<std::size_t> hits(4, 0);
  Rng rng(77);
  const int reps = 20000;
  for (int i = 0; i < reps; ++i) {
    for (std::size_t idx : balance_classes(2, 4, rng).negative_indices) hits[idx] += 1;
  }
  for (std::size_t h : hits) {
    REQUIRE(h > reps / 2 * 0.9);
    REQUIRE(h < reps / 2 * 1.1);
  }
}

TEST_CASE("stratified folds partition each class evenly", "[classify]") {
  Rng rng(13);
  const StratifiedFolds f = stratified_folds(23, 17, 5, rng);
  REQUIRE(f.n_folds == 5);
  REQUIRE(!f.reduced);
  auto check = [&](const std::vector<std::size_t>& fold, std::size_t n) {
    REQUIRE(fold.size() == n);
    std::vector<std::size_t> counts(f.n_folds, 0);
    for (std::size_t id : fold) {
      REQUIRE(id < f.n_folds);
      counts[id] += 1;
    }
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    REQUIRE(*hi - *lo <= 1);
  };
  check(f.fold_of_pos, 23);
  check(f.fold_of_neg, 17);
}

TEST_CASE("stratified folds shrink to fit small classes", "[classify]") {
  Rng rng(14);
  const StratifiedFolds f = stratified_folds(3, 50, 5, rng);
  REQUIRE(f.n_folds == 3);
  REQUIRE(f.reduced);

  Rng rng2(14);
  REQUIRE_THROWS_AS(stratified_folds(1, 50, 5, rng2), std::invalid_argument);
  REQUIRE_THROWS_AS(stratified_folds(10, 10, 1, rng2), std::invalid_argument);
}

TEST_CASE("stratified folds are deterministic per seed", "[classify]") {
  Rng a(5), b(5), c(6);
  const auto fa = stratified_folds(20, 20, 5, a);
  const auto fb = stratified_folds(20, 20, 5, b);
  const auto fc = stratified_folds(20, 20, 5, c);
  REQUIRE(fa.fold_of_pos == fb.fold_of_pos);
  REQUIRE(fa.fold_of_neg == fb.fold_of_neg);
  REQUIRE(fa.fold_of_pos != fc.fold_of_pos);
}

TEST_CASE("knn positive count and score on a hand-built model", "[classify]") {
  KnnModel m;
  m.tree = KdTree({{0.0}, {2.0}, {10.0}});
  m.labels = {1, -1, 1};
  m.k = 2;
  const std::vector<double> q = {0.5};
  REQUIRE(knn_positive_count(m, q) == 1);  // neighbors: index 0 (+), index 1 (-)
  REQUIRE(knn_score(m, q) == 0.5);
  const std::vector<double> far = {10.0};
  REQUIRE(knn_score(m, far) == 0.5);  // neighbors: index 2 (+), index 1 (-)

  // k capped by the store size in the score denominator.
  m.k = 9;
  REQUIRE(knn_score(m, q) == Catch::Approx(2.0 / 3.0).margin(1e-15));
}

TEST_CASE("flipping stored labels complements the knn score", "[classify]") {
  Rng rng(3);
  const Matrix pts = gaussian_blob(rng, 30, 2, 0.0, 1.0);
  KnnModel m;
  m.tree = KdTree(pts);
  m.k = 5;
  m.labels.assign(30, 1);
  for (std::size_t i = 0; i < 30; i += 2) m.labels[i] = -1;
  KnnModel flipped = m;
  for (int& l : flipped.labels) l = -l;
  for (int rep = 0; rep < 25; ++rep) {
    const std::vector<double> q = {rng.normal(), rng.normal()};
    REQUIRE(knn_score(m, q) == Catch::Approx(1.0 - knn_score(flipped, q)).margin(1e-15));
  }
}

TEST_CASE("knn training on separated classes reaches zero CV EER", "[classify]") {
  Rng data_rng(1);
  Matrix pos = gaussian_blob(data_rng, 20, 2, 5.0, 0.1);
  Matrix neg = gaussian_blob(data_rng, 20, 2, -5.0, 0.1);
  Rng rng(42);
  const KnnModel model = knn_train(pos, neg, {}, rng);
  REQUIRE(model.cv_eer == 0.0);
  REQUIRE(!model.cv_reduced_folds);
  // Every k in the grid ties at zero EER; the tie resolves to the largest.
  REQUIRE(model.k == 7);
  REQUIRE(model.tree.size() == 40);
  const std::vector<double> probe_pos = {5.0, 5.0};
  const std::vector<double> probe_neg = {-5.0, -5.0};
  REQUIRE(knn_score(model, probe_pos) == 1.0);
  REQUIRE(knn_score(model, probe_neg) == 0.0);
}

TEST_CASE("knn training caps k at the smallest fold-training size", "[classify]") {
  Rng data_rng(2);
  Matrix pos = gaussian_blob(data_rng, 3, 1, 4.0, 0.1);
  Matrix neg = gaussian_blob(data_rng, 3, 1, -4.0, 0.1);
  Rng rng(7);
  const KnnModel model = knn_train(pos, neg, {}, rng);
  // 3 folds (reduced from 5); fold-train sets hold 4 points -> grid {1, 3}.
  REQUIRE(model.cv_reduced_folds);
  REQUIRE(model.k == 3);
  REQUIRE(model.cv_eer == 0.0);
}

TEST_CASE("knn training is deterministic per seed", "[classify]") {
  Rng data_rng(8);
  Matrix pos = gaussian_blob(data_rng, 12, 3, 1.0, 1.0);
  Matrix neg = gaussian_blob(data_rng, 12, 3, -1.0, 1.0);
  Rng a(9), b(9);
  const KnnModel ma = knn_train(pos, neg, {}, a);
  const KnnModel mb = knn_train(pos, neg, {}, b);
  REQUIRE(ma.k == mb.k);
  REQUIRE(ma.cv_eer == mb.cv_eer);
  REQUIRE(ma.labels == mb.labels);
  Rng probe(10);
  for (int rep = 0; rep < 10; ++rep) {
    const std::vector<double> q = {probe.normal(), probe.normal(), probe.normal()};
    REQUIRE(knn_score(ma, q) == knn_score(mb, q));
  }
}

TEST_CASE("knn training rejects empty classes", "[classify]") {
  Rng rng(1);
  Matrix pos = {{1.0}};
  REQUIRE_THROWS_AS(knn_train(pos, {}, {}, rng), std::invalid_argument);
  REQUIRE_THROWS_AS(knn_train({}, pos, {}, rng), std::invalid_argument);
}

TEST_CASE("svm grid search prefers the smallest tied cell", "[classify]") {
  Rng data_rng(3);
  Matrix pos = gaussian_blob(data_rng, 12, 2, 2.0, 0.2);
  Matrix neg = gaussian_blob(data_rng, 12, 2, -2.0, 0.2);
  SvmGrid grid;
  grid.Cs = {0.5, 2.0};
  grid.gammas = {0.5, 2.0};
  Rng rng(11);
  const SvmFitResult fit = svm_train(pos, neg, grid, rng, 3);
  REQUIRE(fit.cv_eer == 0.0);
  REQUIRE(fit.skipped_cells.empty());
  // All four cells separate perfectly; ties resolve to smaller C, then gamma.
  REQUIRE(fit.model.C == 0.5);
  REQUIRE(fit.model.gamma == 0.5);
  const std::vector<double> probe_pos = {2.0, 2.0};
  const std::vector<double> probe_neg = {-2.0, -2.0};
  REQUIRE(fit.model.score(probe_pos) > 0.0);
  REQUIRE(fit.model.score(probe_neg) < 0.0);
}

TEST_CASE("svm grid search surfaces total non-convergence", "[classify]") {
  Rng data_rng(4);
  Matrix pos = gaussian_blob(data_rng, 8, 2, 1.0, 1.0);
  Matrix neg = gaussian_blob(data_rng, 8, 2, -1.0, 1.0);
  SvmGrid grid;
  grid.Cs = {1.0};
  grid.gammas = {1.0};
  SvmTrainOptions base;
  base.max_pair_updates = 0;  // force every cell to fail
  Rng rng(12);
  REQUIRE_THROWS_AS(svm_train(pos, neg, grid, rng, 3, base), std::runtime_error);

  Rng rng2(12);
  REQUIRE_THROWS_AS(svm_train(pos, neg, SvmGrid{}, rng2, 3), std::invalid_argument);
}

TEST_CASE("svm default grid spans the documented powers of two", "[classify]") {
  const SvmGrid g = SvmGrid::defaults();
  REQUIRE(g.Cs.size() == 11);
  REQUIRE(g.gammas.size() == 11);
  REQUIRE(g.Cs.front() == 0.125);
  REQUIRE(g.Cs.back() == 128.0);
  REQUIRE(g.gammas.front() == Catch::Approx(1.0 / 128.0).margin(0.0));
  REQUIRE(g.gammas.back() == 8.0);
  REQUIRE(std::is_sorted(g.Cs.begin(), g.Cs.end()));
  REQUIRE(std::is_sorted(g.gammas.begin(), g.gammas.end()));
}

TEST_CASE("user model scores raw rows through the standardizer", "[classify]") {
  Rng data_rng(5);
  // Raw features on wildly different scales.
  Matrix pos_raw = gaussian_blob(data_rng, 15, 2, 0.0, 1.0);
  Matrix neg_raw = gaussian_blob(data_rng, 15, 2, 0.0, 1.0);
  for (auto& r : pos_raw) {
    r[0] = r[0] * 1000.0 + 5000.0;
    r[1] += 4.0;
  }
  for (auto& r : neg_raw) {
    r[0] = r[0] * 1000.0 + 5000.0;
    r[1] -= 4.0;
  }
  Matrix all = pos_raw;
  all.insert(all.end(), neg_raw.begin(), neg_raw.end());

  UserModel m;
  m.user_id = "u1";
  m.kind = ClassifierKind::knn;
  m.standardizer = Standardizer::fit(all);
  Rng rng(6);
  m.knn = knn_train(m.standardizer.apply_all(pos_raw), m.standardizer.apply_all(neg_raw), {}, rng);

  const std::vector<double> raw_probe = {5000.0, 4.0};
  REQUIRE(m.score(raw_probe) == knn_score(*m.knn, m.standardizer.apply(raw_probe)));
  REQUIRE(m.score(raw_probe) > 0.5);
  REQUIRE(m.knn_positives(raw_probe) == knn_positive_count(*m.knn, m.standardizer.apply(raw_probe)));
}

TEST_CASE("knn user model survives a JSON round trip bit-exactly", "[classify]") {
  Rng data_rng(15);
  Matrix pos = gaussian_blob(data_rng, 10, 3, 1.0, 1.0);
  Matrix neg = gaussian_blob(data_rng, 10, 3, -1.0, 1.0);
  UserModel m;
  m.user_id = "user-7";
  m.group = DirectionGroup::horizontal;
  m.kind = ClassifierKind::knn;
  m.feature_names = {"f0", "f1", "f2"};
  m.standardizer = Standardizer::fit(pos);
  m.cv_eer = 0.125;
  m.seed = 0xDEADBEEFCAFEF00Dull;
  Rng rng(16);
  m.knn = knn_train(m.standardizer.apply_all(pos), m.standardizer.apply_all(neg), {}, rng);

  const std::string dumped = to_json(m).dump();
  const UserModel r = user_model_from_json(nlohmann::json::parse(dumped));
  REQUIRE(r.user_id == m.user_id);
  REQUIRE(r.group == m.group);
  REQUIRE(r.kind == m.kind);
  REQUIRE(r.feature_names == m.feature_names);
  REQUIRE(r.seed == m.seed);
  REQUIRE(r.cv_eer == m.cv_eer);
  REQUIRE(r.knn->k == m.knn->k);
  REQUIRE(r.knn->labels == m.knn->labels);
  Rng probe(17);
  for (int rep = 0; rep < 30; ++rep) {
    const std::vector<double> q = {probe.normal(), probe.normal(), probe.normal()};
    REQUIRE(r.score(q) == m.score(q));
    REQUIRE(r.knn_positives(q) == m.knn_positives(q));
  }
}

TEST_CASE("svm user model survives a JSON round trip bit-exactly", "[classify]") {
  Rng data_rng(25);
  Matrix pos = gaussian_blob(data_rng, 10, 2, 1.5, 0.8);
  Matrix neg = gaussian_blob(data_rng, 10, 2, -1.5, 0.8);
  UserModel m;
  m.user_id = "user-9";
  m.group = DirectionGroup::vertical;
  m.kind = ClassifierKind::svm;
  m.feature_names = {"f0", "f1"};
  m.standardizer = Standardizer::fit(pos, /*use_minmax=*/true);
  SvmGrid grid;
  grid.Cs = {1.0};
  grid.gammas = {0.5};
  Rng rng(26);
  m.svm = svm_train(m.standardizer.apply_all(pos), m.standardizer.apply_all(neg), grid, rng, 3).model;

  const std::string dumped = to_json(m).dump();
  const UserModel r = user_model_from_json(nlohmann::json::parse(dumped));
  REQUIRE(r.svm->support_vectors == m.svm->support_vectors);
  REQUIRE(r.svm->coeffs == m.svm->coeffs);
  REQUIRE(r.svm->bias == m.svm->bias);
  REQUIRE(r.standardizer.use_minmax);
  REQUIRE(r.standardizer.mins == m.standardizer.mins);
  Rng probe(27);
  for (int rep = 0; rep < 30; ++rep) {
    const std::vector<double> q = {probe.normal(), probe.normal()};
    REQUIRE(r.score(q) == m.score(q));
  }
}

TEST_CASE("user model deserialization validates its input", "[classify]") {
  nlohmann::json j;
  j["format_version"] = 2;
  REQUIRE_THROWS_AS(user_model_from_json(j), std::runtime_error);

  UserModel m;
  m.user_id = "u";
  m.kind = ClassifierKind::knn;
  m.standardizer = Standardizer::fit({{0.0}, {1.0}});
  KnnModel knn;
  knn.tree = KdTree({{0.0}, {1.0}});
  knn.labels = {1, -1};
  knn.k = 1;
  m.knn = knn;
  nlohmann::json good = to_json(m);
  good["classifier"] = "forest";
  REQUIRE_THROWS_AS(user_model_from_json(good), std::runtime_error);
}

TEST_CASE("enum names parse back to themselves", "[classify]") {
  REQUIRE(parse_classifier_kind(classifier_kind_name(ClassifierKind::knn)) == ClassifierKind::knn);
  REQUIRE(parse_classifier_kind(classifier_kind_name(ClassifierKind::svm)) == ClassifierKind::svm);
  REQUIRE(parse_direction_group(direction_group_name(DirectionGroup::vertical)) ==
          DirectionGroup::vertical);
  REQUIRE(parse_direction_group(direction_group_name(DirectionGroup::horizontal)) ==
          DirectionGroup::horizontal);
  REQUIRE(!parse_classifier_kind("forest").has_value());
  REQUIRE(!parse_direction_group("diagonal").has_value());
}
