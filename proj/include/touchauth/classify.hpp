#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "touchauth/kdtree.hpp"
#include "touchauth/rng.hpp"
#include "touchauth/roc.hpp"
#include "touchauth/stats.hpp"
#include "touchauth/svm.hpp"

namespace touchauth {

using Matrix = std::vector<std::vector<double>>;

// Per-feature z-scoring with population (1/n) standard deviation; features
// with zero spread map to 0. An optional min-max step can squeeze each
// feature into [0,1] before z-scoring.
struct Standardizer {
  std::vector<double> means;
  std::vector<double> stddevs;
  bool use_minmax = false;
  std::vector<double> mins;
  std::vector<double> maxs;

  static Standardizer fit(const Matrix& rows, bool use_minmax = false) {
    if (rows.empty()) throw std::invalid_argument("Standardizer::fit: empty training matrix");
    const std::size_t d = rows.front().size();
    for (const auto& r : rows) {
      if (r.size() != d) throw std::invalid_argument("Standardizer::fit: ragged matrix");
    }
    Standardizer s;
    s.use_minmax = use_minmax;
    Matrix work = rows;
    if (use_minmax) {
      s.mins.assign(d, 0.0);
      s.maxs.assign(d, 0.0);
      for (std::size_t j = 0; j < d; ++j) {
        double lo = rows[0][j], hi = rows[0][j];
        for (const auto& r : rows) {
          lo = std::min(lo, r[j]);
          hi = std::max(hi, r[j]);
        }
        s.mins[j] = lo;
        s.maxs[j] = hi;
        for (auto& r : work) r[j] = hi > lo ? (r[j] - lo) / (hi - lo) : 0.0;
      }
    }
    s.means.assign(d, 0.0);
    s.stddevs.assign(d, 0.0);
    std::vector<double> column(work.size());
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t i = 0; i < work.size(); ++i) column[i] = work[i][j];
      s.means[j] = mean(column);
      s.stddevs[j] = population_stddev(column);
    }
    return s;
  }

  std::vector<double> apply(std::span<const double> row) const {
    if (row.size() != means.size()) throw std::invalid_argument("Standardizer::apply: dimension mismatch");
    std::vector<double> out(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) {
      double v = row[j];
      if (use_minmax) v = maxs[j] > mins[j] ? (v - mins[j]) / (maxs[j] - mins[j]) : 0.0;
      out[j] = stddevs[j] > 0.0 ? (v - means[j]) / stddevs[j] : 0.0;
    }
    return out;
  }

  Matrix apply_all(const Matrix& rows) const {
    Matrix out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(apply(r));
    return out;
  }
};

struct BalanceResult {
  std::vector<std::size_t> negative_indices;  // ascending, no duplicates
  bool underfull = false;                     // fewer negatives than positives
};

// Chooses a uniform without-replacement subsample of the negative class,
// sized to the positive class; keeps all negatives (flagged) when there are
// too few.
inline BalanceResult balance_classes(std::size_t n_pos, std::size_t n_neg, Rng& rng) {
  BalanceResult r;
  if (n_pos == 0) throw std::invalid_argument("balance_classes: no positive samples");
  if (n_neg < n_pos) {
    r.negative_indices.resize(n_neg);
    for (std::size_t i = 0; i < n_neg; ++i) r.negative_indices[i] = i;
    r.underfull = true;
    return r;
  }
  r.negative_indices = rng.sample_without_replacement(n_neg, n_pos);
  return r;
}

struct StratifiedFolds {
  // fold id per positive / negative sample, ids in [0, n_folds)
  std::vector<std::size_t> fold_of_pos;
  std::vector<std::size_t> fold_of_neg;
  std::size_t n_folds = 0;
  bool reduced = false;  // fold count was cut down to fit the data
};

// Deals each class round-robin across folds after a seeded shuffle, so every
// fold keeps the overall class ratio (sizes off by at most one).
inline StratifiedFolds stratified_folds(std::size_t n_pos, std::size_t n_neg, std::size_t n_folds,
                                        Rng& rng) {
  if (n_folds < 2) throw std::invalid_argument("stratified_folds: need at least 2 folds");
  StratifiedFolds f;
  f.n_folds = std::min({n_folds, n_pos, n_neg});
  if (f.n_folds < 2) throw std::invalid_argument("stratified_folds: need at least 2 samples per class");
  f.reduced = f.n_folds != n_folds;

  auto deal = [&](std::size_t n) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    std::vector<std::size_t> fold(n);
    for (std::size_t pos = 0; pos < n; ++pos) fold[order[pos]] = pos % f.n_folds;
    return fold;
  };
  f.fold_of_pos = deal(n_pos);
  f.fold_of_neg = deal(n_neg);
  return f;
}

// ---------- kNN ----------

struct KnnTrainOptions {
  std::vector<std::size_t> k_grid = {1, 3, 5, 7};
  std::size_t cv_folds = 5;
};

struct KnnModel {
  KdTree tree;              // stored standardized training vectors
  std::vector<int> labels;  // +1 / -1 aligned with tree point indices
  std::size_t k = 1;
  double cv_eer = 0.0;
  bool cv_reduced_folds = false;
};

// Positive neighbors among the k nearest stored points.
inline std::size_t knn_positive_count(const KnnModel& model, std::span<const double> x) {
  std::size_t positives = 0;
  for (const Neighbor& nb : model.tree.knn(x, model.k)) {
    if (model.labels[nb.index] > 0) ++positives;
  }
  return positives;
}

inline double knn_score(const KnnModel& model, std::span<const double> x) {
  const std::size_t k_eff = std::min(model.k, model.tree.size());
  return static_cast<double>(knn_positive_count(model, x)) / static_cast<double>(k_eff);
}

namespace detail {
inline double pooled_cv_eer(const std::vector<double>& scores, const std::vector<bool>& genuine) {
  return roc_and_eer(scores, genuine).eer;
}
}  // namespace detail

// Trains the kNN store: picks k from the odd grid by stratified
// cross-validation minimizing pooled EER (ties toward the larger, smoother
// k), then indexes all training vectors. Inputs must be standardized.
inline KnnModel knn_train(const Matrix& pos, const Matrix& neg, const KnnTrainOptions& opt,
                          Rng& rng) {
  if (pos.empty() || neg.empty()) throw std::invalid_argument("knn_train: need both classes");
  const std::size_t folds = opt.cv_folds;
  StratifiedFolds f = stratified_folds(pos.size(), neg.size(), folds, rng);

  // Feasible ks: odd grid values that fit the smallest fold-training set.
  std::size_t min_train = pos.size() + neg.size();
  for (std::size_t fold = 0; fold < f.n_folds; ++fold) {
    std::size_t train_count = 0;
    for (std::size_t i = 0; i < pos.size(); ++i) train_count += f.fold_of_pos[i] != fold;
    for (std::size_t i = 0; i < neg.size(); ++i) train_count += f.fold_of_neg[i] != fold;
    min_train = std::min(min_train, train_count);
  }
  std::vector<std::size_t> grid;
  for (std::size_t k : opt.k_grid) {
    if (k >= 1 && k <= min_train) grid.push_back(k);
  }
  if (grid.empty()) grid.push_back(1);
  std::sort(grid.begin(), grid.end(), std::greater<>());  // larger k wins ties

  std::vector<std::vector<double>> scores_per_k(grid.size());
  std::vector<bool> genuine_flags;
  for (std::size_t fold = 0; fold < f.n_folds; ++fold) {
    Matrix train_pts;
    std::vector<int> train_labels;
    Matrix val_pts;
    std::vector<bool> val_genuine;
    for (std::size_t i = 0; i < pos.size(); ++i) {
      if (f.fold_of_pos[i] == fold) {
        val_pts.push_back(pos[i]);
        val_genuine.push_back(true);
      } else {
        train_pts.push_back(pos[i]);
        train_labels.push_back(1);
      }
    }
    for (std::size_t i = 0; i < neg.size(); ++i) {
      if (f.fold_of_neg[i] == fold) {
        val_pts.push_back(neg[i]);
        val_genuine.push_back(false);
      } else {
        train_pts.push_back(neg[i]);
        train_labels.push_back(-1);
      }
    }
    KnnModel fold_model;
    fold_model.tree = KdTree(train_pts);
    fold_model.labels = train_labels;
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
      fold_model.k = std::min(grid[gi], train_pts.size());
      for (const auto& v : val_pts) scores_per_k[gi].push_back(knn_score(fold_model, v));
    }
    for (bool g : val_genuine) genuine_flags.push_back(g);
  }

  std::size_t best_gi = 0;
  double best_eer = std::numeric_limits<double>::infinity();
  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    const double eer = detail::pooled_cv_eer(scores_per_k[gi], genuine_flags);
    if (eer < best_eer) {
      best_eer = eer;
      best_gi = gi;
    }
  }

  KnnModel model;
  Matrix all_pts = pos;
  all_pts.insert(all_pts.end(), neg.begin(), neg.end());
  model.labels.assign(pos.size(), 1);
  model.labels.insert(model.labels.end(), neg.size(), -1);
  model.tree = KdTree(all_pts);
  model.k = std::min(grid[best_gi], all_pts.size());
  model.cv_eer = best_eer;
  model.cv_reduced_folds = f.reduced;
  return model;
}

// ---------- SVM grid search ----------

struct SvmGrid {
  std::vector<double> Cs;
  std::vector<double> gammas;

  static SvmGrid defaults() {
    SvmGrid g;
    for (int e = -3; e <= 7; ++e) g.Cs.push_back(std::ldexp(1.0, e));
    for (int e = -7; e <= 3; ++e) g.gammas.push_back(std::ldexp(1.0, e));
    return g;
  }
};

struct SvmFitResult {
  SvmModel model;
  double cv_eer = 0.0;
  bool cv_reduced_folds = false;
  std::vector<std::string> skipped_cells;  // non-convergent (C, gamma) cells
};

// Grid-searches (C, gamma) by stratified cross-validation minimizing pooled
// EER (ties toward smaller C, then smaller gamma), then trains on the full
// set. Inputs must be standardized and balanced.
inline SvmFitResult svm_train(const Matrix& pos, const Matrix& neg, const SvmGrid& grid,
                              Rng& rng, std::size_t cv_folds = 5,
                              const SvmTrainOptions& base = {}) {
  if (pos.empty() || neg.empty()) throw std::invalid_argument("svm_train: need both classes");
  if (grid.Cs.empty() || grid.gammas.empty()) throw std::invalid_argument("svm_train: empty grid");
  StratifiedFolds f = stratified_folds(pos.size(), neg.size(), cv_folds, rng);

  struct FoldData {
    Matrix train_pts;
    std::vector<int> train_labels;
    Matrix val_pts;
    std::vector<bool> val_genuine;
  };
  std::vector<FoldData> fold_data(f.n_folds);
  for (std::size_t fold = 0; fold < f.n_folds; ++fold) {
    auto& fd = fold_data[fold];
    for (std::size_t i = 0; i < pos.size(); ++i) {
      if (f.fold_of_pos[i] == fold) {
        fd.val_pts.push_back(pos[i]);
        fd.val_genuine.push_back(true);
      } else {
        fd.train_pts.push_back(pos[i]);
        fd.train_labels.push_back(1);
      }
    }
    for (std::size_t i = 0; i < neg.size(); ++i) {
      if (f.fold_of_neg[i] == fold) {
        fd.val_pts.push_back(neg[i]);
        fd.val_genuine.push_back(false);
      } else {
        fd.train_pts.push_back(neg[i]);
        fd.train_labels.push_back(-1);
      }
    }
  }

  SvmFitResult result;
  result.cv_reduced_folds = f.reduced;
  double best_eer = std::numeric_limits<double>::infinity();
  double best_c = 0.0, best_gamma = 0.0;
  bool any_cell = false;
  for (double c : grid.Cs) {
    for (double gamma : grid.gammas) {
      SvmTrainOptions opt = base;
      opt.C = c;
      opt.gamma = gamma;
      std::vector<double> scores;
      std::vector<bool> genuine;
      bool failed = false;
      for (const auto& fd : fold_data) {
        try {
          const SvmModel m = svm_train_single(fd.train_pts, fd.train_labels, opt);
          for (const auto& v : fd.val_pts) scores.push_back(m.score(v));
        } catch (const SvmConvergenceError& e) {
          result.skipped_cells.push_back(e.what());
          failed = true;
          break;
        }
        for (bool g : fd.val_genuine) genuine.push_back(g);
      }
      if (failed) continue;
      const double eer = detail::pooled_cv_eer(scores, genuine);
      any_cell = true;
      if (eer < best_eer) {
        best_eer = eer;
        best_c = c;
        best_gamma = gamma;
      }
    }
  }
  if (!any_cell) throw std::runtime_error("svm_train: every grid cell failed to converge");

  SvmTrainOptions opt = base;
  opt.C = best_c;
  opt.gamma = best_gamma;
  Matrix all_pts = pos;
  all_pts.insert(all_pts.end(), neg.begin(), neg.end());
  std::vector<int> labels(pos.size(), 1);
  labels.insert(labels.end(), neg.size(), -1);
  result.model = svm_train_single(all_pts, labels, opt);
  result.cv_eer = best_eer;
  return result;
}

// ---------- user models ----------

enum class ClassifierKind { knn, svm };
enum class DirectionGroup { vertical, horizontal };

inline std::string_view classifier_kind_name(ClassifierKind k) {
  return k == ClassifierKind::knn ? "knn" : "svm";
}
inline std::string_view direction_group_name(DirectionGroup g) {
  return g == DirectionGroup::vertical ? "vertical" : "horizontal";
}

inline std::optional<ClassifierKind> parse_classifier_kind(std::string_view s) {
  if (s == "knn") return ClassifierKind::knn;
  if (s == "svm") return ClassifierKind::svm;
  return std::nullopt;
}
inline std::optional<DirectionGroup> parse_direction_group(std::string_view s) {
  if (s == "vertical") return DirectionGroup::vertical;
  if (s == "horizontal") return DirectionGroup::horizontal;
  return std::nullopt;
}

// One trained per-user, per-direction classifier plus everything needed to
// score raw (unstandardized) classification-feature rows.
struct UserModel {
  std::string user_id;
  DirectionGroup group = DirectionGroup::vertical;
  ClassifierKind kind = ClassifierKind::knn;
  std::vector<std::string> feature_names;
  Standardizer standardizer;
  std::optional<KnnModel> knn;
  std::optional<SvmModel> svm;
  double cv_eer = 0.0;
  std::uint64_t seed = 0;

  double score(std::span<const double> raw_row) const {
    const std::vector<double> z = standardizer.apply(raw_row);
    if (kind == ClassifierKind::knn) return knn_score(*knn, z);
    return svm->score(z);
  }

  std::size_t knn_positives(std::span<const double> raw_row) const {
    return knn_positive_count(*knn, standardizer.apply(raw_row));
  }
};

// ---------- JSON serialization (format version 1) ----------

inline nlohmann::json to_json(const Standardizer& s) {
  nlohmann::json j;
  j["means"] = s.means;
  j["stddevs"] = s.stddevs;
  j["use_minmax"] = s.use_minmax;
  if (s.use_minmax) {
    j["mins"] = s.mins;
    j["maxs"] = s.maxs;
  }
  return j;
}

inline Standardizer standardizer_from_json(const nlohmann::json& j) {
  Standardizer s;
  s.means = j.at("means").get<std::vector<double>>();
  s.stddevs = j.at("stddevs").get<std::vector<double>>();
  s.use_minmax = j.at("use_minmax").get<bool>();
  if (s.use_minmax) {
    s.mins = j.at("mins").get<std::vector<double>>();
    s.maxs = j.at("maxs").get<std::vector<double>>();
  }
  return s;
}

inline nlohmann::json to_json(const UserModel& m) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["user_id"] = m.user_id;
  j["direction_group"] = std::string(direction_group_name(m.group));
  j["classifier"] = std::string(classifier_kind_name(m.kind));
  j["feature_names"] = m.feature_names;
  j["standardizer"] = to_json(m.standardizer);
  j["cv_eer"] = m.cv_eer;
  j["seed"] = m.seed;
  if (m.kind == ClassifierKind::knn) {
    nlohmann::json k;
    std::vector<std::vector<double>> pts;
    pts.reserve(m.knn->tree.size());
    for (std::size_t i = 0; i < m.knn->tree.size(); ++i) pts.push_back(m.knn->tree.point(i));
    k["points"] = pts;
    k["labels"] = m.knn->labels;
    k["k"] = m.knn->k;
    k["cv_eer"] = m.knn->cv_eer;
    j["knn"] = k;
  } else {
    nlohmann::json s;
    s["support_vectors"] = m.svm->support_vectors;
    s["coeffs"] = m.svm->coeffs;
    s["bias"] = m.svm->bias;
    s["gamma"] = m.svm->gamma;
    s["C"] = m.svm->C;
    j["svm"] = s;
  }
  return j;
}

inline UserModel user_model_from_json(const nlohmann::json& j) {
  if (j.at("format_version").get<int>() != 1) {
    throw std::runtime_error("user model: unsupported format version");
  }
  UserModel m;
  m.user_id = j.at("user_id").get<std::string>();
  const auto group = parse_direction_group(j.at("direction_group").get<std::string>());
  const auto kind = parse_classifier_kind(j.at("classifier").get<std::string>());
  if (!group || !kind) throw std::runtime_error("user model: bad enum value");
  m.group = *group;
  m.kind = *kind;
  m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  m.standardizer = standardizer_from_json(j.at("standardizer"));
  m.cv_eer = j.at("cv_eer").get<double>();
  m.seed = j.at("seed").get<std::uint64_t>();
  if (m.kind == ClassifierKind::knn) {
    const auto& k = j.at("knn");
    KnnModel knn;
    knn.tree = KdTree(k.at("points").get<std::vector<std::vector<double>>>());
    knn.labels = k.at("labels").get<std::vector<int>>();
    knn.k = k.at("k").get<std::size_t>();
    knn.cv_eer = k.at("cv_eer").get<double>();
    m.knn = std::move(knn);
  } else {
    const auto& s = j.at("svm");
    SvmModel svm;
    svm.support_vectors = s.at("support_vectors").get<std::vector<std::vector<double>>>();
    svm.coeffs = s.at("coeffs").get<std::vector<double>>();
    svm.bias = s.at("bias").get<double>();
    svm.gamma = s.at("gamma").get<double>();
    svm.C = s.at("C").get<double>();
    m.svm = std::move(svm);
  }
  return m;
}

}  // namespace touchauth
