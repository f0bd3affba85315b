#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "touchauth/analysis.hpp"
#include "touchauth/classify.hpp"
#include "touchauth/features.hpp"
#include "touchauth/rng.hpp"
#include "touchauth/roc.hpp"
#include "touchauth/stats.hpp"

namespace touchauth {

enum class Scenario { intra_session, inter_session, inter_week };

inline std::string_view scenario_name(Scenario s) {
  switch (s) {
    case Scenario::intra_session: return "intra-session";
    case Scenario::inter_session: return "inter-session";
    case Scenario::inter_week: return "inter-week";
  }
  return "intra-session";
}

inline std::optional<Scenario> parse_scenario(std::string_view s) {
  if (s == "intra-session") return Scenario::intra_session;
  if (s == "inter-session") return Scenario::inter_session;
  if (s == "inter-week") return Scenario::inter_week;
  return std::nullopt;
}

// Feature vectors plus the session-to-week tagging the scenario splits need.
// Sessions missing from week_of_doc default to week 1.
struct Dataset {
  std::vector<FeatureVector> features;
  std::map<std::string, int> week_of_doc;

  int week(const std::string& doc_id) const {
    const auto it = week_of_doc.find(doc_id);
    return it == week_of_doc.end() ? 1 : it->second;
  }
};

struct DecisionWindow {
  std::size_t n = 11;
  std::size_t stride = 1;

  void validate() const {
    if (n < 1 || stride < 1) throw std::invalid_argument("DecisionWindow: n and stride must be >= 1");
  }
};

struct ExperimentConfig {
  Scenario scenario = Scenario::intra_session;
  ClassifierKind classifier = ClassifierKind::knn;
  DirectionGroup direction = DirectionGroup::vertical;
  DecisionWindow window;
  std::uint64_t seed = 0;
  double train_fraction = 2.0 / 3.0;  // intra-session stroke-level split
  std::size_t cv_folds = 5;
  KnnTrainOptions knn_options;
  SvmGrid svm_grid = SvmGrid::defaults();
  SvmTrainOptions svm_base;
  bool standardize_minmax = false;
  // Execution knob only; never part of the experiment identity and never
  // echoed into reports (reports must be byte-identical across worker
  // counts).
  std::size_t workers = 1;
};

// ---------- decision fusion ----------

// SVM fusion: arithmetic mean of the window's decision values.
inline double fuse_svm(std::span<const double> scores) {
  if (scores.empty()) throw std::invalid_argument("fuse_svm: empty window");
  double s = 0.0;
  for (double v : scores) s += v;
  return s / static_cast<double>(scores.size());
}

// kNN fusion: positive neighbor labels over all neighbor labels in the
// window.
inline double fuse_knn(std::span<const double> positive_counts, std::size_t k) {
  if (positive_counts.empty()) throw std::invalid_argument("fuse_knn: empty window");
  if (k == 0) throw std::invalid_argument("fuse_knn: k must be positive");
  double s = 0.0;
  for (double c : positive_counts) s += c;
  return s / (static_cast<double>(positive_counts.size()) * static_cast<double>(k));
}

// ---------- scenario splits ----------

namespace detail {
struct SessionRef {
  std::string doc_id;
  std::vector<std::size_t> strokes;  // indices into Dataset::features, session order
};

struct UserData {
  std::string user_id;
  std::vector<SessionRef> sessions;  // sorted by doc_id
};

// Groups usable vectors (complete + matching direction group) per user and
// session. Users come out sorted by user_id.
inline std::vector<UserData> group_dataset(const Dataset& data, DirectionGroup direction) {
  std::map<std::string, std::map<std::string, std::vector<std::size_t>>> by_user;
  for (std::size_t i = 0; i < data.features.size(); ++i) {
    const FeatureVector& f = data.features[i];
    if (!f.is_complete()) continue;
    if (is_vertical(f.direction_class) != (direction == DirectionGroup::vertical)) continue;
    by_user[f.user_id][f.doc_id].push_back(i);
  }
  std::vector<UserData> users;
  users.reserve(by_user.size());
  for (auto& [user_id, sessions] : by_user) {
    UserData u;
    u.user_id = user_id;
    for (auto& [doc_id, strokes] : sessions) {
      std::sort(strokes.begin(), strokes.end(), [&](std::size_t a, std::size_t b) {
        return data.features[a].stroke_index_in_session < data.features[b].stroke_index_in_session;
      });
      u.sessions.push_back({doc_id, std::move(strokes)});
    }
    users.push_back(std::move(u));
  }
  return users;
}
}  // namespace detail

// One train/test rotation of one user: training strokes pooled, test strokes
// kept per session so decision windows never span session boundaries.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::vector<std::size_t>> test_sessions;
};

// Computes a user's split rotations for a scenario. Returns an empty list
// (with a reason) when the user lacks the sessions the scenario requires.
// The split rng must be derived from the experiment seed and the user id
// only, so every caller sees the same partition.
inline std::vector<Split> scenario_split(const detail::UserData& user, const Dataset& data,
                                         Scenario scenario, double train_fraction, Rng& rng,
                                         std::string* exclusion_reason = nullptr) {
  auto excluded = [&](std::string why) {
    if (exclusion_reason) *exclusion_reason = std::move(why);
    return std::vector<Split>{};
  };
  switch (scenario) {
    case Scenario::intra_session: {
      Split split;
      for (const auto& session : user.sessions) {
        const std::size_t m = session.strokes.size();
        if (m == 0) continue;
        std::vector<std::size_t> order(m);
        for (std::size_t i = 0; i < m; ++i) order[i] = i;
        rng.shuffle(order);
        const auto n_train = std::max<std::size_t>(
            1, static_cast<std::size_t>(static_cast<double>(m) * train_fraction));
        std::vector<bool> in_train(m, false);
        for (std::size_t i = 0; i < std::min(n_train, m); ++i) in_train[order[i]] = true;
        std::vector<std::size_t> test;
        for (std::size_t i = 0; i < m; ++i) {
          if (in_train[i]) {
            split.train.push_back(session.strokes[i]);
          } else {
            test.push_back(session.strokes[i]);
          }
        }
        if (!test.empty()) split.test_sessions.push_back(std::move(test));
      }
      if (split.train.empty() || split.test_sessions.empty()) {
        return excluded("too few strokes for an intra-session split");
      }
      return {std::move(split)};
    }
    case Scenario::inter_session: {
      std::vector<const detail::SessionRef*> week1;
      for (const auto& s : user.sessions) {
        if (data.week(s.doc_id) == 1 && !s.strokes.empty()) week1.push_back(&s);
      }
      if (week1.size() < 3) return excluded("needs at least 3 week-1 sessions");
      std::vector<Split> rotations;
      for (std::size_t i = 0; i < week1.size(); ++i) {
        Split split;
        split.test_sessions.push_back(week1[i]->strokes);
        const auto& a = week1[(i + 1) % week1.size()]->strokes;
        const auto& b = week1[(i + 2) % week1.size()]->strokes;
        split.train.insert(split.train.end(), a.begin(), a.end());
        split.train.insert(split.train.end(), b.begin(), b.end());
        rotations.push_back(std::move(split));
      }
      return rotations;
    }
    case Scenario::inter_week: {
      Split split;
      for (const auto& s : user.sessions) {
        if (s.strokes.empty()) continue;
        if (data.week(s.doc_id) == 1) {
          split.train.insert(split.train.end(), s.strokes.begin(), s.strokes.end());
        } else {
          split.test_sessions.push_back(s.strokes);
        }
      }
      if (split.train.empty()) return excluded("no week-1 training sessions");
      if (split.test_sessions.empty()) return excluded("no week-2 test session");
      return {std::move(split)};
    }
  }
  return excluded("unknown scenario");
}

// ---------- per-leg training and scoring ----------

struct LegMetadata {
  std::size_t knn_k = 0;
  double svm_C = 0.0;
  double svm_gamma = 0.0;
  double cv_eer = 0.0;
  bool balance_underfull = false;
};

// Per-stroke raw scores of one (user, rotation) leg. For kNN the stored
// value is the positive-neighbor count (fused as counts over n*k); for SVM
// it is the decision value (fused as the mean).
struct LegScores {
  std::vector<std::vector<double>> genuine_sessions;
  std::vector<std::vector<double>> impostor_sessions;
  std::size_t knn_k = 0;  // 0 for SVM legs
  LegMetadata meta;
};

namespace detail {
inline std::vector<double> classification_row(const FeatureVector& f,
                                              std::span<const std::size_t> indices) {
  std::vector<double> row(indices.size());
  for (std::size_t j = 0; j < indices.size(); ++j) row[j] = f.v[indices[j]];
  return row;
}

struct PreparedExperiment {
  std::vector<UserData> users;
  std::vector<std::vector<Split>> splits;  // aligned with users
  std::vector<std::string> warnings;
  std::vector<std::size_t> classification_indices;
};

inline PreparedExperiment prepare_experiment(const Dataset& data, const ExperimentConfig& config) {
  config.window.validate();
  PreparedExperiment prep;
  prep.classification_indices = classification_feature_indices();
  prep.users = group_dataset(data, config.direction);
  prep.splits.resize(prep.users.size());
  for (std::size_t ui = 0; ui < prep.users.size(); ++ui) {
    Rng split_rng(derive_seed(config.seed, "split:" + prep.users[ui].user_id));
    std::string reason;
    prep.splits[ui] = scenario_split(prep.users[ui], data, config.scenario, config.train_fraction,
                                     split_rng, &reason);
    if (prep.splits[ui].empty()) {
      prep.warnings.push_back("user " + prep.users[ui].user_id + " excluded from " +
                              std::string(scenario_name(config.scenario)) + ": " + reason);
    }
  }
  return prep;
}
}  // namespace detail

// Trains the model of one (user, rotation) leg: negatives come from the
// other users' train partitions of the corresponding rotation, never from
// any test partition.
inline UserModel train_leg_model(const Dataset& data, const ExperimentConfig& config,
                                 const detail::PreparedExperiment& prep, std::size_t user_index,
                                 std::size_t rotation, LegMetadata* meta = nullptr) {
  const auto& indices = prep.classification_indices;
  const auto& user = prep.users[user_index];
  const Split& split = prep.splits[user_index][rotation];

  Matrix pos;
  pos.reserve(split.train.size());
  for (std::size_t id : split.train) {
    pos.push_back(detail::classification_row(data.features[id], indices));
  }
  Matrix neg;
  for (std::size_t oi = 0; oi < prep.users.size(); ++oi) {
    if (oi == user_index || prep.splits[oi].empty()) continue;
    const Split& other = prep.splits[oi][rotation % prep.splits[oi].size()];
    for (std::size_t id : other.train) {
      neg.push_back(detail::classification_row(data.features[id], indices));
    }
  }
  if (pos.empty() || neg.empty()) {
    throw std::runtime_error("train_leg_model: user " + user.user_id +
                             " has no training data or no impostor training data");
  }

  const std::uint64_t leg_seed =
      derive_seed(config.seed, "leg:" + user.user_id + ":" + std::to_string(rotation));
  Rng balance_rng(derive_seed(leg_seed, "balance"));
  const BalanceResult balance = balance_classes(pos.size(), neg.size(), balance_rng);
  Matrix neg_balanced;
  neg_balanced.reserve(balance.negative_indices.size());
  for (std::size_t id : balance.negative_indices) neg_balanced.push_back(neg[id]);

  Matrix train_all = pos;
  train_all.insert(train_all.end(), neg_balanced.begin(), neg_balanced.end());
  const Standardizer standardizer = Standardizer::fit(train_all, config.standardize_minmax);
  const Matrix pos_z = standardizer.apply_all(pos);
  const Matrix neg_z = standardizer.apply_all(neg_balanced);

  UserModel model;
  model.user_id = user.user_id;
  model.group = config.direction;
  model.kind = config.classifier;
  model.standardizer = standardizer;
  model.seed = leg_seed;
  for (std::size_t idx : indices) model.feature_names.emplace_back(kFeatureNames[idx]);

  Rng cv_rng(derive_seed(leg_seed, "cv"));
  LegMetadata local_meta;
  local_meta.balance_underfull = balance.underfull;
  if (config.classifier == ClassifierKind::knn) {
    KnnTrainOptions opt = config.knn_options;
    opt.cv_folds = config.cv_folds;
    KnnModel knn = knn_train(pos_z, neg_z, opt, cv_rng);
    local_meta.knn_k = knn.k;
    local_meta.cv_eer = knn.cv_eer;
    model.cv_eer = knn.cv_eer;
    model.knn = std::move(knn);
  } else {
    SvmFitResult fit = svm_train(pos_z, neg_z, config.svm_grid, cv_rng, config.cv_folds,
                                 config.svm_base);
    local_meta.svm_C = fit.model.C;
    local_meta.svm_gamma = fit.model.gamma;
    local_meta.cv_eer = fit.cv_eer;
    model.cv_eer = fit.cv_eer;
    model.svm = std::move(fit.model);
  }
  if (meta) *meta = local_meta;
  return model;
}

// Scores every test stroke of one leg: the genuine user's test sessions and,
// as impostor streams, every other user's corresponding test sessions.
inline LegScores score_leg(const Dataset& data, const ExperimentConfig& config,
                           const detail::PreparedExperiment& prep, std::size_t user_index,
                           std::size_t rotation) {
  LegScores leg;
  const UserModel model = train_leg_model(data, config, prep, user_index, rotation, &leg.meta);
  const auto& indices = prep.classification_indices;
  const bool use_knn = config.classifier == ClassifierKind::knn;
  leg.knn_k = use_knn ? model.knn->k : 0;

  auto score_stroke = [&](std::size_t id) {
    const std::vector<double> row = detail::classification_row(data.features[id], indices);
    if (use_knn) return static_cast<double>(model.knn_positives(row));
    return model.score(row);
  };

  const Split& split = prep.splits[user_index][rotation];
  for (const auto& session : split.test_sessions) {
    std::vector<double> scores;
    scores.reserve(session.size());
    for (std::size_t id : session) scores.push_back(score_stroke(id));
    leg.genuine_sessions.push_back(std::move(scores));
  }
  for (std::size_t oi = 0; oi < prep.users.size(); ++oi) {
    if (oi == user_index || prep.splits[oi].empty()) continue;
    const Split& other = prep.splits[oi][rotation % prep.splits[oi].size()];
    for (const auto& session : other.test_sessions) {
      std::vector<double> scores;
      scores.reserve(session.size());
      for (std::size_t id : session) scores.push_back(score_stroke(id));
      leg.impostor_sessions.push_back(std::move(scores));
    }
  }
  return leg;
}

struct FusedCounts {
  std::size_t genuine = 0;
  std::size_t impostor = 0;
};

// Appends one leg's fused decisions (sliding windows within sessions,
// decisions at stroke n, n+stride, ...) to the given score/label vectors.
inline FusedCounts append_fused_decisions(const LegScores& leg, const DecisionWindow& window,
                                          std::vector<double>& scores,
                                          std::vector<bool>& genuine) {
  window.validate();
  FusedCounts counts;
  auto emit = [&](const std::vector<double>& session, bool is_genuine) {
    if (session.size() < window.n) return;
    for (std::size_t end = window.n - 1; end < session.size(); end += window.stride) {
      const std::span<const double> w(session.data() + (end + 1 - window.n), window.n);
      scores.push_back(leg.knn_k > 0 ? fuse_knn(w, leg.knn_k) : fuse_svm(w));
      genuine.push_back(is_genuine);
      (is_genuine ? counts.genuine : counts.impostor) += 1;
    }
  };
  for (const auto& s : leg.genuine_sessions) emit(s, true);
  for (const auto& s : leg.impostor_sessions) emit(s, false);
  return counts;
}

struct LegEvaluation {
  double eer = 0.0;
  bool flipped = false;
  std::size_t genuine_decisions = 0;
  std::size_t impostor_decisions = 0;
  RocCurve curve;
  bool valid = false;
  std::string skip_reason;
};

// Evaluates one leg at one window size from its cached per-stroke scores.
inline LegEvaluation evaluate_leg(const LegScores& leg, const DecisionWindow& window) {
  LegEvaluation out;
  std::vector<double> scores;
  std::vector<bool> genuine;
  const FusedCounts counts = append_fused_decisions(leg, window, scores, genuine);
  out.genuine_decisions = counts.genuine;
  out.impostor_decisions = counts.impostor;
  if (out.genuine_decisions == 0 || out.impostor_decisions == 0) {
    out.skip_reason = "window larger than available test strokes";
    return out;
  }
  const OrientedRoc roc = oriented_roc_and_eer(scores, genuine);
  out.eer = roc.curve.eer;
  out.flipped = roc.flipped;
  out.curve = roc.curve;
  out.valid = true;
  return out;
}

}  // namespace touchauth

#include "touchauth/evaluate_report.hpp"
