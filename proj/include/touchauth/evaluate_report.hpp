#pragma once

// Second half of the evaluate module: experiment drivers, sweeps, and report
// serialization. Include touchauth/evaluate.hpp, not this file.

#include "touchauth/evaluate.hpp"

namespace touchauth {

struct UserRotationResult {
  LegEvaluation eval;
  LegMetadata meta;
};

struct UserResult {
  std::string user_id;
  std::vector<UserRotationResult> rotations;
  bool valid = false;
  std::string skip_reason;
  double eer = 0.0;                    // mean over valid rotations
  double median_inter_stroke_ms = 0.0; // T_s over the user's test strokes
};

struct EvalSummary {
  BoxStats eer_box;                     // over per-user EERs
  double pooled_eer = 0.0;              // one EER over all pooled decisions
  double median_inter_stroke_s = 0.0;   // median of per-user T_s
  double time_to_first_decision_s = 0.0;
  bool relogin_infinite = false;
  double expected_relogin_s = 0.0;      // T_s / EER at the median-EER operating point
};

struct EvalReport {
  // Experiment identity (execution knobs like worker count excluded).
  Scenario scenario = Scenario::intra_session;
  ClassifierKind classifier = ClassifierKind::knn;
  DirectionGroup direction = DirectionGroup::vertical;
  DecisionWindow window;
  std::uint64_t seed = 0;
  double train_fraction = 2.0 / 3.0;
  std::size_t cv_folds = 5;
  bool standardize_minmax = false;

  std::vector<UserResult> users;
  EvalSummary summary;
  std::vector<std::string> warnings;
};

namespace detail {

struct ExperimentLegs {
  PreparedExperiment prep;
  // legs[user][rotation]; empty LegScores vector for excluded/failed users
  std::vector<std::vector<LegScores>> legs;
  std::vector<std::string> user_errors;  // aligned with prep.users, empty = ok
};

// Trains and scores every (user, rotation) leg. Workers only change the
// schedule: each leg derives its seeds from (config.seed, user, rotation),
// and results land in a position-indexed table, so the outcome is identical
// for any worker count.
inline ExperimentLegs run_legs(const Dataset& data, const ExperimentConfig& config) {
  ExperimentLegs out;
  out.prep = prepare_experiment(data, config);
  if (out.prep.users.size() < 2) {
    throw std::runtime_error("run_experiment: need at least 2 users (no impostors otherwise)");
  }
  out.legs.resize(out.prep.users.size());
  out.user_errors.assign(out.prep.users.size(), "");

  auto run_user = [&](std::size_t ui) {
    if (out.prep.splits[ui].empty()) return;
    try {
      std::vector<LegScores> legs;
      legs.reserve(out.prep.splits[ui].size());
      for (std::size_t r = 0; r < out.prep.splits[ui].size(); ++r) {
        legs.push_back(score_leg(data, config, out.prep, ui, r));
      }
      out.legs[ui] = std::move(legs);
    } catch (const std::exception& e) {
      out.legs[ui].clear();
      out.user_errors[ui] = e.what();
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, config.workers);
  if (workers == 1 || out.prep.users.size() <= 1) {
    for (std::size_t ui = 0; ui < out.prep.users.size(); ++ui) run_user(ui);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const std::size_t n_threads = std::min(workers, out.prep.users.size());
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) {
      pool.emplace_back([&]() {
        while (true) {
          const std::size_t ui = next.fetch_add(1);
          if (ui >= out.prep.users.size()) break;
          run_user(ui);
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  return out;
}

inline double user_median_inter_stroke_ms(const Dataset& data, const PreparedExperiment& prep,
                                          std::size_t ui) {
  std::vector<double> values;
  std::set<std::size_t> seen;
  for (const Split& split : prep.splits[ui]) {
    for (const auto& session : split.test_sessions) {
      for (std::size_t id : session) {
        if (seen.insert(id).second) values.push_back(data.features[id].v[feat::inter_stroke_time]);
      }
    }
  }
  return values.empty() ? 0.0 : median(values);
}

}  // namespace detail

// Assembles the per-user results and summary for one window size from
// precomputed legs.
inline EvalReport assemble_report(const Dataset& data, const ExperimentConfig& config,
                                  const detail::ExperimentLegs& legs) {
  EvalReport report;
  report.scenario = config.scenario;
  report.classifier = config.classifier;
  report.direction = config.direction;
  report.window = config.window;
  report.seed = config.seed;
  report.train_fraction = config.train_fraction;
  report.cv_folds = config.cv_folds;
  report.standardize_minmax = config.standardize_minmax;
  report.warnings = legs.prep.warnings;

  std::vector<double> user_eers;
  std::vector<double> user_ts;
  std::vector<double> pooled_scores;
  std::vector<bool> pooled_genuine;

  for (std::size_t ui = 0; ui < legs.prep.users.size(); ++ui) {
    UserResult user;
    user.user_id = legs.prep.users[ui].user_id;
    if (legs.prep.splits[ui].empty()) {
      continue;  // exclusion already recorded in warnings
    }
    if (!legs.user_errors[ui].empty()) {
      user.skip_reason = legs.user_errors[ui];
      report.warnings.push_back("user " + user.user_id + " failed: " + legs.user_errors[ui]);
      report.users.push_back(std::move(user));
      continue;
    }
    double eer_sum = 0.0;
    std::size_t eer_count = 0;
    for (const LegScores& leg : legs.legs[ui]) {
      UserRotationResult rot;
      rot.eval = evaluate_leg(leg, config.window);
      rot.meta = leg.meta;
      if (rot.eval.valid) {
        eer_sum += rot.eval.eer;
        ++eer_count;
        append_fused_decisions(leg, config.window, pooled_scores, pooled_genuine);
      }
      user.rotations.push_back(std::move(rot));
    }
    if (eer_count == 0) {
      user.skip_reason = "window larger than available test strokes";
      report.warnings.push_back("user " + user.user_id + " skipped at n=" +
                                std::to_string(config.window.n) + ": no complete decision window");
      report.users.push_back(std::move(user));
      continue;
    }
    user.valid = true;
    user.eer = eer_sum / static_cast<double>(eer_count);
    user.median_inter_stroke_ms = detail::user_median_inter_stroke_ms(data, legs.prep, ui);
    user_eers.push_back(user.eer);
    user_ts.push_back(user.median_inter_stroke_ms);
    report.users.push_back(std::move(user));
  }

  if (user_eers.empty()) {
    std::string msg = "run_experiment: no user produced a valid evaluation";
    for (const std::string& w : report.warnings) msg += "\n  " + w;
    throw std::runtime_error(msg);
  }
  report.summary.eer_box = box_stats(user_eers);
  {
    const OrientedRoc pooled = oriented_roc_and_eer(pooled_scores, pooled_genuine);
    report.summary.pooled_eer = pooled.curve.eer;
  }
  report.summary.median_inter_stroke_s = median(user_ts) / 1000.0;
  report.summary.time_to_first_decision_s =
      static_cast<double>(config.window.n) * report.summary.median_inter_stroke_s;
  const double frr_at_eer = report.summary.eer_box.median;
  if (frr_at_eer <= 0.0) {
    report.summary.relogin_infinite = true;
  } else {
    report.summary.expected_relogin_s = report.summary.median_inter_stroke_s / frr_at_eer;
  }
  return report;
}

// One full experiment: split, balance, standardize, tune, train, fuse, and
// report, per user.
inline EvalReport run_experiment(const Dataset& data, const ExperimentConfig& config) {
  const detail::ExperimentLegs legs = detail::run_legs(data, config);
  return assemble_report(data, config, legs);
}

// ---------- JSON / CSV serialization ----------

inline nlohmann::json config_to_json(const EvalReport& r) {
  nlohmann::json j;
  j["scenario"] = std::string(scenario_name(r.scenario));
  j["classifier"] = std::string(classifier_kind_name(r.classifier));
  j["direction"] = std::string(direction_group_name(r.direction));
  j["window_n"] = r.window.n;
  j["stride"] = r.window.stride;
  j["seed"] = r.seed;
  j["train_fraction"] = r.train_fraction;
  j["cv_folds"] = r.cv_folds;
  j["standardize_minmax"] = r.standardize_minmax;
  return j;
}

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json j;
  j["config"] = config_to_json(r);
  nlohmann::json users = nlohmann::json::array();
  for (const UserResult& u : r.users) {
    nlohmann::json ju;
    ju["user_id"] = u.user_id;
    ju["valid"] = u.valid;
    if (!u.valid) {
      ju["skip_reason"] = u.skip_reason;
    } else {
      ju["eer"] = u.eer;
      ju["median_inter_stroke_s"] = u.median_inter_stroke_ms / 1000.0;
    }
    nlohmann::json rotations = nlohmann::json::array();
    for (const UserRotationResult& rot : u.rotations) {
      nlohmann::json jr;
      jr["valid"] = rot.eval.valid;
      if (rot.eval.valid) {
        jr["eer"] = rot.eval.eer;
        jr["score_orientation_flipped"] = rot.eval.flipped;
        jr["genuine_decisions"] = rot.eval.genuine_decisions;
        jr["impostor_decisions"] = rot.eval.impostor_decisions;
        nlohmann::json points = nlohmann::json::array();
        for (const RocPoint& p : rot.eval.curve.points) {
          // +-infinity is not representable in JSON; the sentinel rows are
          // reconstructed from the acceptance rule anyway.
          if (!std::isfinite(p.threshold)) continue;
          points.push_back({{"threshold", p.threshold}, {"far", p.far}, {"frr", p.frr}});
        }
        jr["roc"] = points;
      } else {
        jr["skip_reason"] = rot.eval.skip_reason;
      }
      jr["cv_eer"] = rot.meta.cv_eer;
      if (rot.meta.knn_k > 0) {
        jr["knn_k"] = rot.meta.knn_k;
      } else {
        jr["svm_C"] = rot.meta.svm_C;
        jr["svm_gamma"] = rot.meta.svm_gamma;
      }
      if (rot.meta.balance_underfull) jr["balance_underfull"] = true;
      rotations.push_back(std::move(jr));
    }
    ju["rotations"] = std::move(rotations);
    users.push_back(std::move(ju));
  }
  j["users"] = std::move(users);

  nlohmann::json s;
  s["median_eer"] = r.summary.eer_box.median;
  s["q25_eer"] = r.summary.eer_box.q25;
  s["q75_eer"] = r.summary.eer_box.q75;
  s["whisker_lo"] = r.summary.eer_box.whisker_lo;
  s["whisker_hi"] = r.summary.eer_box.whisker_hi;
  s["outliers"] = r.summary.eer_box.outliers;
  s["pooled_eer"] = r.summary.pooled_eer;
  s["median_inter_stroke_s"] = r.summary.median_inter_stroke_s;
  s["time_to_first_decision_s"] = r.summary.time_to_first_decision_s;
  if (r.summary.relogin_infinite) {
    s["expected_relogin_infinite"] = true;
  } else {
    s["expected_relogin_s"] = r.summary.expected_relogin_s;
  }
  j["summary"] = std::move(s);
  j["warnings"] = r.warnings;
  return j;
}

// FRR at a FAR budget: the best (lowest) FRR among sweep points with
// FAR <= x. Curves are monotone, so this is the first qualifying point in
// threshold order.
inline double frr_at_far(const RocCurve& curve, double x) {
  for (const RocPoint& p : curve.points) {
    if (p.far <= x) return p.frr;
  }
  return 1.0;
}

// ROC summary across users as CSV: x is a FAR grid, the quartiles are taken
// over every valid (user, rotation) curve.
inline std::string roc_summary_csv(const EvalReport& r) {
  std::vector<const RocCurve*> curves;
  for (const UserResult& u : r.users) {
    for (const UserRotationResult& rot : u.rotations) {
      if (rot.eval.valid) curves.push_back(&rot.eval.curve);
    }
  }
  std::string out = "x,median,q25,q75\n";
  for (int step = 0; step <= 100; ++step) {
    const double x = static_cast<double>(step) / 100.0;
    std::vector<double> frrs;
    frrs.reserve(curves.size());
    for (const RocCurve* c : curves) frrs.push_back(frr_at_far(*c, x));
    out += format_double(x);
    out += ',';
    out += format_double(median(frrs));
    out += ',';
    out += format_double(percentile(frrs, 25.0));
    out += ',';
    out += format_double(percentile(frrs, 75.0));
    out += '\n';
  }
  return out;
}

// ---------- sweeps ----------

struct SweepPoint {
  double x = 0.0;
  double median_eer = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  std::size_t samples = 0;  // users (stroke sweep) or repetitions (subject sweep)
};

struct SweepReport {
  std::string x_name;
  std::vector<SweepPoint> points;
  std::vector<std::string> warnings;
  // stroke sweep only: per-user EER curves, user ids aligned with eers rows
  std::vector<std::string> user_ids;
  std::vector<std::vector<double>> user_eers;  // [user][point], NaN = skipped
};

inline std::string sweep_to_csv(const SweepReport& r) {
  std::string out = "x,median,q25,q75\n";
  for (const SweepPoint& p : r.points) {
    out += format_double(p.x);
    out += ',';
    out += format_double(p.median_eer);
    out += ',';
    out += format_double(p.q25);
    out += ',';
    out += format_double(p.q75);
    out += '\n';
  }
  return out;
}

inline nlohmann::json sweep_to_json(const SweepReport& r) {
  nlohmann::json j;
  j["x"] = r.x_name;
  nlohmann::json points = nlohmann::json::array();
  for (const SweepPoint& p : r.points) {
    points.push_back({{"x", p.x},
                      {"median_eer", p.median_eer},
                      {"q25", p.q25},
                      {"q75", p.q75},
                      {"samples", p.samples}});
  }
  j["points"] = std::move(points);
  j["warnings"] = r.warnings;
  if (!r.user_ids.empty()) {
    nlohmann::json per_user = nlohmann::json::object();
    for (std::size_t ui = 0; ui < r.user_ids.size(); ++ui) {
      nlohmann::json arr = nlohmann::json::array();
      for (double e : r.user_eers[ui]) {
        if (std::isnan(e)) {
          arr.push_back(nullptr);
        } else {
          arr.push_back(e);
        }
      }
      per_user[r.user_ids[ui]] = std::move(arr);
    }
    j["per_user_eer"] = std::move(per_user);
  }
  return j;
}

// EER as a function of strokes-per-decision. Models are trained once; only
// the fusion window varies.
inline SweepReport sweep_strokes(const Dataset& data, const ExperimentConfig& config,
                                 std::span<const std::size_t> n_values) {
  if (n_values.empty()) throw std::invalid_argument("sweep_strokes: empty n list");
  const detail::ExperimentLegs legs = detail::run_legs(data, config);
  SweepReport report;
  report.x_name = "strokes_per_decision";
  report.warnings = legs.prep.warnings;
  for (std::size_t ui = 0; ui < legs.prep.users.size(); ++ui) {
    if (legs.prep.splits[ui].empty()) continue;
    if (!legs.user_errors[ui].empty()) {
      report.warnings.push_back("user " + legs.prep.users[ui].user_id +
                                " failed: " + legs.user_errors[ui]);
      continue;
    }
    report.user_ids.push_back(legs.prep.users[ui].user_id);
    report.user_eers.emplace_back();
  }

  for (std::size_t pi = 0; pi < n_values.size(); ++pi) {
    DecisionWindow window = config.window;
    window.n = n_values[pi];
    std::vector<double> eers;
    std::size_t row = 0;
    for (std::size_t ui = 0; ui < legs.prep.users.size(); ++ui) {
      if (legs.prep.splits[ui].empty() || !legs.user_errors[ui].empty()) continue;
      double eer_sum = 0.0;
      std::size_t count = 0;
      for (const LegScores& leg : legs.legs[ui]) {
        const LegEvaluation eval = evaluate_leg(leg, window);
        if (eval.valid) {
          eer_sum += eval.eer;
          ++count;
        }
      }
      if (count == 0) {
        report.user_eers[row].push_back(std::numeric_limits<double>::quiet_NaN());
        report.warnings.push_back("user " + legs.prep.users[ui].user_id + " skipped at n=" +
                                  std::to_string(window.n) + ": no complete decision window");
      } else {
        const double eer = eer_sum / static_cast<double>(count);
        report.user_eers[row].push_back(eer);
        eers.push_back(eer);
      }
      ++row;
    }
    if (eers.empty()) {
      report.warnings.push_back("no user evaluable at n=" + std::to_string(window.n));
      continue;
    }
    SweepPoint point;
    point.x = static_cast<double>(window.n);
    point.median_eer = median(eers);
    point.q25 = percentile(eers, 25.0);
    point.q75 = percentile(eers, 75.0);
    point.samples = eers.size();
    report.points.push_back(point);
  }
  return report;
}

namespace detail {
inline Dataset restrict_to_users(const Dataset& data, const std::set<std::string>& keep) {
  Dataset out;
  out.week_of_doc = data.week_of_doc;
  for (const FeatureVector& f : data.features) {
    if (keep.count(f.user_id)) out.features.push_back(f);
  }
  return out;
}

inline std::vector<std::string> all_user_ids(const Dataset& data) {
  std::set<std::string> users;
  for (const FeatureVector& f : data.features) users.insert(f.user_id);
  return {users.begin(), users.end()};
}
}  // namespace detail

// EER as a function of subject count: `repetitions` seeded random subject
// collections per count, summarized by the median EER of each repetition.
inline SweepReport sweep_subjects(const Dataset& data, const ExperimentConfig& config,
                                  std::span<const std::size_t> counts,
                                  std::size_t repetitions = 10) {
  if (counts.empty()) throw std::invalid_argument("sweep_subjects: empty count list");
  if (repetitions == 0) throw std::invalid_argument("sweep_subjects: need at least 1 repetition");
  const std::vector<std::string> users = detail::all_user_ids(data);
  SweepReport report;
  report.x_name = "subjects";
  for (std::size_t count : counts) {
    if (count < 2) {
      report.warnings.push_back("subject count " + std::to_string(count) + " skipped: need >= 2");
      continue;
    }
    if (count > users.size()) {
      report.warnings.push_back("subject count " + std::to_string(count) +
                                " skipped: only " + std::to_string(users.size()) + " users");
      continue;
    }
    const std::size_t reps = count == users.size() ? 1 : repetitions;
    std::vector<double> rep_medians;
    for (std::size_t rep = 0; rep < reps; ++rep) {
      Rng rng(derive_seed(config.seed,
                          "subjects:" + std::to_string(count) + ":" + std::to_string(rep)));
      const std::vector<std::size_t> pick = rng.sample_without_replacement(users.size(), count);
      std::set<std::string> keep;
      for (std::size_t i : pick) keep.insert(users[i]);
      const Dataset subset = detail::restrict_to_users(data, keep);
      try {
        const EvalReport r = run_experiment(subset, config);
        rep_medians.push_back(r.summary.eer_box.median);
      } catch (const std::exception& e) {
        report.warnings.push_back("subject count " + std::to_string(count) + " repetition " +
                                  std::to_string(rep) + " failed: " + e.what());
      }
    }
    if (rep_medians.empty()) continue;
    SweepPoint point;
    point.x = static_cast<double>(count);
    point.median_eer = median(rep_medians);
    point.q25 = percentile(rep_medians, 25.0);
    point.q75 = percentile(rep_medians, 75.0);
    point.samples = rep_medians.size();
    report.points.push_back(point);
  }
  if (report.points.empty()) throw std::runtime_error("sweep_subjects: no evaluable subject count");
  return report;
}

struct DeviceArmResult {
  std::string label;  // phone id (same-phone arm) or draw index (mixed arm)
  double median_eer = 0.0;
};

struct DeviceInfluenceReport {
  std::size_t matched_user_count = 0;
  std::vector<DeviceArmResult> same_phone;
  std::vector<DeviceArmResult> mixed_phone;
  double same_phone_median = 0.0;
  double mixed_phone_median = 0.0;
  double gap = 0.0;  // same - mixed
  std::vector<std::string> warnings;
};

// Same-phone vs mixed-phone experiments with matched subject counts: both
// arms use the smallest per-phone user count.
inline DeviceInfluenceReport device_influence(const Dataset& data, const ExperimentConfig& config) {
  DeviceInfluenceReport report;
  std::map<std::string, std::set<std::string>> phone_users;
  for (const FeatureVector& f : data.features) phone_users[f.phone_id].insert(f.user_id);

  std::vector<std::pair<std::string, std::vector<std::string>>> phones;
  for (const auto& [phone, users] : phone_users) {
    if (users.size() < 2) {
      report.warnings.push_back("phone " + phone + " excluded: fewer than 2 users");
      continue;
    }
    phones.emplace_back(phone, std::vector<std::string>(users.begin(), users.end()));
  }
  if (phones.empty()) throw std::runtime_error("device_influence: no phone has 2 or more users");

  std::size_t m = phones.front().second.size();
  for (const auto& [phone, users] : phones) m = std::min(m, users.size());
  report.matched_user_count = m;

  const std::vector<std::string> population = detail::all_user_ids(data);
  auto run_subset = [&](const std::set<std::string>& keep) {
    const Dataset subset = detail::restrict_to_users(data, keep);
    return run_experiment(subset, config).summary.eer_box.median;
  };

  std::vector<double> same_medians, mixed_medians;
  for (std::size_t pi = 0; pi < phones.size(); ++pi) {
    const auto& [phone, users] = phones[pi];
    {
      Rng rng(derive_seed(config.seed, "device:same:" + phone));
      const auto pick = rng.sample_without_replacement(users.size(), m);
      std::set<std::string> keep;
      for (std::size_t i : pick) keep.insert(users[i]);
      const double eer = run_subset(keep);
      report.same_phone.push_back({phone, eer});
      same_medians.push_back(eer);
    }
    {
      Rng rng(derive_seed(config.seed, "device:mixed:" + std::to_string(pi)));
      const auto pick = rng.sample_without_replacement(population.size(), m);
      std::set<std::string> keep;
      for (std::size_t i : pick) keep.insert(population[i]);
      const double eer = run_subset(keep);
      report.mixed_phone.push_back({"draw" + std::to_string(pi), eer});
      mixed_medians.push_back(eer);
    }
  }
  report.same_phone_median = median(same_medians);
  report.mixed_phone_median = median(mixed_medians);
  report.gap = report.same_phone_median - report.mixed_phone_median;
  return report;
}

inline nlohmann::json device_influence_to_json(const DeviceInfluenceReport& r) {
  nlohmann::json j;
  j["matched_user_count"] = r.matched_user_count;
  auto arm = [](const std::vector<DeviceArmResult>& entries) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& e : entries) a.push_back({{"label", e.label}, {"median_eer", e.median_eer}});
    return a;
  };
  j["same_phone"] = arm(r.same_phone);
  j["mixed_phone"] = arm(r.mixed_phone);
  j["same_phone_median"] = r.same_phone_median;
  j["mixed_phone_median"] = r.mixed_phone_median;
  j["gap"] = r.gap;
  j["warnings"] = r.warnings;
  return j;
}

}  // namespace touchauth
