// touchauth command-line front end: wires ingestion, analysis, training,
// evaluation, sweeps, and the continuous-authentication simulator together.
//
// Exit codes: 0 success; 2 configuration or input validation failure;
// 1 runtime experiment failure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <list>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "touchauth/analysis.hpp"
#include "touchauth/authsim.hpp"
#include "touchauth/classify.hpp"
#include "touchauth/evaluate.hpp"
#include "touchauth/features.hpp"
#include "touchauth/ingest.hpp"
#include "touchauth/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace touchauth;

namespace {

// Validation failures that must exit with code 2 rather than 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------- resolved settings (defaults < config file < flags) ----------

struct Settings {
  // input/output paths
  std::string log;
  std::string screens;
  std::string features;
  std::string weeks;    // optional doc_id -> week JSON override
  std::string spec;     // synthetic corpus spec JSON
  std::string out = ".";

  // experiment semantics
  std::optional<std::uint64_t> seed;
  std::string scenario = "intra-session";
  std::string classifier = "knn";
  std::string direction = "vertical";
  std::size_t window_n = 11;
  std::size_t stride = 1;
  double train_fraction = 2.0 / 3.0;
  std::size_t cv_folds = 5;
  bool standardize_minmax = false;
  std::size_t workers = 1;
  double min_displacement_frac = 0.02;

  // sweeps
  std::string strokes_ns = "1..20";
  std::string subject_counts;
  std::size_t repetitions = 10;

  // simulate
  std::string user;
  std::size_t enrollment_target = 50;
  std::size_t t_threshold = 1;
  double accept_threshold = std::numeric_limits<double>::quiet_NaN();  // classifier default

  // gen-synthetic preset knobs
  std::string preset = "separated";
  std::size_t gen_users = 10;
  double separation = 2.0;
  std::size_t sessions_week1 = 3;
  std::size_t sessions_week2 = 1;
  std::size_t strokes_per_session = 60;
  std::size_t phones = 1;
  double phone_offset = 0.0;
  double vertical_fraction = 1.0;
  bool raw = false;

  bool per_class = false;
};

// Records every input file read, keyed by the path as given, so reports can
// embed content hashes.
struct InputTracker {
  json hashes = json::object();

  std::string read(const std::string& path, const char* what) {
    if (path.empty()) throw ConfigError(std::string(what) + ": no path configured");
    std::string content;
    try {
      content = read_file(path);
    } catch (const std::exception& e) {
      throw ConfigError(std::string(what) + ": " + e.what());
    }
    hashes[path] = file_hash_hex(content);
    return content;
  }
};

std::size_t to_size(const json& v, const std::string& key) {
  if (!v.is_number_unsigned() && !v.is_number_integer()) {
    throw ConfigError("config key '" + key + "' must be a non-negative integer");
  }
  const std::int64_t n = v.get<std::int64_t>();
  if (n < 0) throw ConfigError("config key '" + key + "' must be a non-negative integer");
  return static_cast<std::size_t>(n);
}

std::string list_to_string(const json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::string out;
    for (const auto& e : v) {
      if (!e.is_number_unsigned() && !e.is_number_integer()) {
        throw ConfigError("config key '" + key + "' must hold integers");
      }
      if (!out.empty()) out += ',';
      out += std::to_string(e.get<std::int64_t>());
    }
    return out;
  }
  throw ConfigError("config key '" + key + "' must be a string or integer array");
}

// Loads the single JSON config file; unknown keys are rejected so typos
// cannot silently fall back to defaults.
void overlay_config(Settings& s, const std::string& path, InputTracker& inputs) {
  const std::string text = inputs.read(path, "config");
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config '" + path + "': expected a JSON object");

  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "log") s.log = value.get<std::string>();
      else if (key == "screens") s.screens = value.get<std::string>();
      else if (key == "features") s.features = value.get<std::string>();
      else if (key == "weeks") s.weeks = value.get<std::string>();
      else if (key == "spec") s.spec = value.get<std::string>();
      else if (key == "out") s.out = value.get<std::string>();
      else if (key == "seed") s.seed = value.get<std::uint64_t>();
      else if (key == "scenario") s.scenario = value.get<std::string>();
      else if (key == "classifier") s.classifier = value.get<std::string>();
      else if (key == "direction") s.direction = value.get<std::string>();
      else if (key == "window_n") s.window_n = to_size(value, key);
      else if (key == "stride") s.stride = to_size(value, key);
      else if (key == "train_fraction") s.train_fraction = value.get<double>();
      else if (key == "cv_folds") s.cv_folds = to_size(value, key);
      else if (key == "standardize_minmax") s.standardize_minmax = value.get<bool>();
      else if (key == "workers") s.workers = to_size(value, key);
      else if (key == "min_displacement_frac") s.min_displacement_frac = value.get<double>();
      else if (key == "strokes_ns") s.strokes_ns = list_to_string(value, key);
      else if (key == "subject_counts") s.subject_counts = list_to_string(value, key);
      else if (key == "repetitions") s.repetitions = to_size(value, key);
      else if (key == "user") s.user = value.get<std::string>();
      else if (key == "enrollment_target") s.enrollment_target = to_size(value, key);
      else if (key == "t_threshold") s.t_threshold = to_size(value, key);
      else if (key == "accept_threshold") s.accept_threshold = value.get<double>();
      else if (key == "preset") s.preset = value.get<std::string>();
      else if (key == "gen_users") s.gen_users = to_size(value, key);
      else if (key == "separation") s.separation = value.get<double>();
      else if (key == "sessions_week1") s.sessions_week1 = to_size(value, key);
      else if (key == "sessions_week2") s.sessions_week2 = to_size(value, key);
      else if (key == "strokes_per_session") s.strokes_per_session = to_size(value, key);
      else if (key == "phones") s.phones = to_size(value, key);
      else if (key == "phone_offset") s.phone_offset = value.get<double>();
      else if (key == "vertical_fraction") s.vertical_fraction = value.get<double>();
      else if (key == "raw") s.raw = value.get<bool>();
      else if (key == "per_class") s.per_class = value.get<bool>();
      else throw ConfigError("config '" + path + "': unknown key '" + key + "'");
    } catch (const json::exception& e) {
      throw ConfigError("config '" + path + "' key '" + key + "': " + e.what());
    }
  }
}

// ---------- small shared helpers ----------

std::uint64_t require_seed(const Settings& s) {
  if (!s.seed) throw ConfigError("this command is seeded: pass --seed or set \"seed\" in the config");
  return *s.seed;
}

ClassifierKind resolve_classifier(const Settings& s) {
  const auto kind = parse_classifier_kind(s.classifier);
  if (!kind) throw ConfigError("unknown classifier '" + s.classifier + "' (knn|svm)");
  return *kind;
}

Scenario resolve_scenario(const Settings& s) {
  const auto sc = parse_scenario(s.scenario);
  if (!sc) {
    throw ConfigError("unknown scenario '" + s.scenario +
                      "' (intra-session|inter-session|inter-week)");
  }
  return *sc;
}

std::vector<DirectionGroup> resolve_directions(const Settings& s) {
  if (s.direction == "both") return {DirectionGroup::vertical, DirectionGroup::horizontal};
  const auto group = parse_direction_group(s.direction);
  if (!group) {
    throw ConfigError("unknown direction '" + s.direction + "' (vertical|horizontal|both)");
  }
  return {*group};
}

ExperimentConfig make_experiment_config(const Settings& s, DirectionGroup group) {
  ExperimentConfig config;
  config.scenario = resolve_scenario(s);
  config.classifier = resolve_classifier(s);
  config.direction = group;
  config.window.n = s.window_n;
  config.window.stride = s.stride;
  config.window.validate();
  config.seed = require_seed(s);
  if (!(s.train_fraction > 0.0 && s.train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie in (0, 1)");
  }
  config.train_fraction = s.train_fraction;
  if (s.cv_folds < 2) throw ConfigError("cv_folds must be >= 2");
  config.cv_folds = s.cv_folds;
  config.standardize_minmax = s.standardize_minmax;
  config.workers = std::max<std::size_t>(1, s.workers);
  return config;
}

int infer_week(const std::string& doc_id) {
  return doc_id.size() >= 3 && doc_id.compare(doc_id.size() - 3, 3, "_w2") == 0 ? 2 : 1;
}

// Features CSV + week map -> Dataset. Weeks come from the doc_id "_w2"
// suffix convention unless a weeks JSON override maps them explicitly.
Dataset load_dataset(const Settings& s, InputTracker& inputs) {
  const std::string text = inputs.read(s.features, "features");
  Dataset data;
  try {
    data.features = features_from_csv(text);
  } catch (const std::exception& e) {
    throw ConfigError("features '" + s.features + "': " + e.what());
  }
  for (const FeatureVector& f : data.features) {
    if (!data.week_of_doc.count(f.doc_id)) data.week_of_doc[f.doc_id] = infer_week(f.doc_id);
  }
  if (!s.weeks.empty()) {
    const std::string weeks_text = inputs.read(s.weeks, "weeks");
    json j;
    try {
      j = json::parse(weeks_text);
    } catch (const json::exception& e) {
      throw ConfigError("weeks '" + s.weeks + "': " + e.what());
    }
    if (!j.is_object()) throw ConfigError("weeks '" + s.weeks + "': expected {doc_id: week}");
    for (const auto& [doc, value] : j.items()) {
      if (!value.is_number_integer() && !value.is_number_unsigned()) {
        throw ConfigError("weeks '" + s.weeks + "': week of '" + doc + "' must be an integer");
      }
      const int week = value.get<int>();
      if (week != 1 && week != 2) {
        throw ConfigError("weeks '" + s.weeks + "': week of '" + doc + "' must be 1 or 2");
      }
      data.week_of_doc[doc] = week;
    }
  }
  return data;
}

// "1,2,4" / "4..8" / mixtures of both, always ascending per range.
std::vector<std::size_t> parse_size_list(const std::string& text, const char* what) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string token =
        text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!token.empty()) {
      const std::size_t dots = token.find("..");
      auto parse_one = [&](const std::string& piece) -> std::size_t {
        try {
          std::size_t pos = 0;
          const unsigned long long v = std::stoull(piece, &pos);
          if (pos != piece.size()) throw std::invalid_argument(piece);
          return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
          throw ConfigError(std::string(what) + ": cannot parse '" + piece + "'");
        }
      };
      if (dots == std::string::npos) {
        out.push_back(parse_one(token));
      } else {
        const std::size_t lo = parse_one(token.substr(0, dots));
        const std::size_t hi = parse_one(token.substr(dots + 2));
        if (hi < lo) throw ConfigError(std::string(what) + ": descending range '" + token + "'");
        for (std::size_t v = lo; v <= hi; ++v) out.push_back(v);
      }
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw ConfigError(std::string(what) + ": empty list");
  return out;
}

void write_artifact(const Settings& s, const std::string& name, const std::string& content) {
  std::error_code ec;
  fs::create_directories(s.out, ec);
  if (ec) throw ConfigError("cannot create output directory '" + s.out + "': " + ec.message());
  write_file_atomic(fs::path(s.out) / name, content);
  std::cout << "wrote " << (fs::path(s.out) / name).string() << '\n';
}

// Stamps provenance onto a report: the subcommand, the semantically resolved
// invocation (execution knobs like worker count excluded so reruns stay
// byte-identical), and the content hash of every input read.
json with_provenance(const char* command, json invocation, const InputTracker& inputs,
                     json body) {
  body["command"] = command;
  body["invocation"] = std::move(invocation);
  body["inputs"] = inputs.hashes;
  return body;
}

std::string sanitize_for_filename(const std::string& id) {
  std::string out = id;
  for (char& c : out) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_';
    if (!ok) c = '_';
  }
  return out;
}

// Full-corpus per-user model: positives are every stroke of the user,
// negatives a balanced sample of everyone else's strokes. Seed layout
// mirrors the evaluation legs ("balance" / "cv" streams under a per-user
// seed) so training is reproducible stroke-for-stroke.
UserModel train_full_model(const Matrix& pos, const Matrix& neg, ClassifierKind kind,
                           DirectionGroup group, const std::string& user_id,
                           std::uint64_t user_seed, std::size_t cv_folds, bool minmax,
                           LegMetadata* meta) {
  Rng balance_rng(derive_seed(user_seed, "balance"));
  const BalanceResult balance = balance_classes(pos.size(), neg.size(), balance_rng);
  Matrix neg_balanced;
  neg_balanced.reserve(balance.negative_indices.size());
  for (std::size_t id : balance.negative_indices) neg_balanced.push_back(neg[id]);

  Matrix train_all = pos;
  train_all.insert(train_all.end(), neg_balanced.begin(), neg_balanced.end());
  const Standardizer standardizer = Standardizer::fit(train_all, minmax);
  const Matrix pos_z = standardizer.apply_all(pos);
  const Matrix neg_z = standardizer.apply_all(neg_balanced);

  UserModel model;
  model.user_id = user_id;
  model.group = group;
  model.kind = kind;
  model.standardizer = standardizer;
  model.seed = user_seed;
  for (std::size_t idx : classification_feature_indices()) {
    model.feature_names.emplace_back(kFeatureNames[idx]);
  }

  Rng cv_rng(derive_seed(user_seed, "cv"));
  LegMetadata local;
  local.balance_underfull = balance.underfull;
  if (kind == ClassifierKind::knn) {
    KnnTrainOptions opt;
    opt.cv_folds = cv_folds;
    KnnModel knn = knn_train(pos_z, neg_z, opt, cv_rng);
    local.knn_k = knn.k;
    local.cv_eer = knn.cv_eer;
    model.cv_eer = knn.cv_eer;
    model.knn = std::move(knn);
  } else {
    SvmFitResult fit = svm_train(pos_z, neg_z, SvmGrid::defaults(), cv_rng, cv_folds);
    local.svm_C = fit.model.C;
    local.svm_gamma = fit.model.gamma;
    local.cv_eer = fit.cv_eer;
    model.cv_eer = fit.cv_eer;
    model.svm = std::move(fit.model);
  }
  if (meta) *meta = local;
  return model;
}

std::string events_to_csv(std::span<const TouchEvent> events) {
  std::string out(kLogHeader);
  out += '\n';
  for (const TouchEvent& e : events) {
    out += e.phone_id;
    out += ',';
    out += e.user_id;
    out += ',';
    out += e.doc_id;
    out += ',';
    out += std::to_string(e.t);
    out += ',';
    out += std::to_string(static_cast<int>(e.action));
    out += ',';
    out += std::to_string(static_cast<int>(e.phone_orientation));
    for (double v : {e.x, e.y, e.pressure, e.area, e.finger_orientation}) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

// ---------- subcommand bodies ----------

void cmd_ingest(const Settings& s, InputTracker& inputs) {
  const ScreenSpecMap specs = parse_screen_specs(inputs.read(s.screens, "screens"));
  if (specs.empty()) {
    throw ConfigError("screens '" + s.screens + "': no screen specs defined");
  }
  const ParseResult parsed = parse_log(inputs.read(s.log, "log"), specs);

  SegmentResult segmented = segment_log(parsed.events);
  std::vector<Stroke> normalized;
  normalized.reserve(segmented.strokes.size());
  for (Stroke& stroke : segmented.strokes) {
    const auto it = specs.find(stroke.phone_id);
    if (it == specs.end()) {
      throw ConfigError("no screen spec for phone '" + stroke.phone_id + "'");
    }
    normalized.push_back(normalize(std::move(stroke), it->second));
  }
  const std::size_t before_filter = normalized.size();
  const std::vector<Stroke> swipes =
      filter_clicks(std::move(normalized), s.min_displacement_frac);
  const std::vector<FeatureVector> features = extract_all(swipes);

  std::string diagnostics;
  for (const auto* source : {&parsed.diagnostics, &std::as_const(segmented).diagnostics}) {
    for (const Diagnostic& d : *source) {
      json line;
      line["row"] = d.row;
      line["context"] = d.context;
      line["reason"] = d.reason;
      diagnostics += line.dump();
      diagnostics += '\n';
    }
  }

  std::vector<std::string> warnings;
  if (parsed.events.empty()) warnings.push_back("log contains no usable events");
  if (features.empty()) warnings.push_back("no strokes survived segmentation and click filtering");
  for (const std::string& w : warnings) std::cerr << "warning: " << w << '\n';

  json invocation;
  invocation["min_displacement_frac"] = s.min_displacement_frac;
  json body;
  body["events_parsed"] = parsed.events.size();
  body["parse_diagnostics"] = parsed.diagnostics.size();
  body["strokes_segmented"] = before_filter;
  body["segment_diagnostics"] = segmented.diagnostics.size();
  body["clicks_removed"] = before_filter - swipes.size();
  body["features_written"] = features.size();
  body["warnings"] = warnings;

  write_artifact(s, "features.csv", to_csv(features));
  write_artifact(s, "diagnostics.jsonl", diagnostics);
  write_artifact(s, "ingest.json",
                 with_provenance("ingest", invocation, inputs, body).dump(2) + "\n");
}

json mi_ranking_to_json(const FeatureReport& report) {
  json ranking = json::array();
  for (const auto& [name, mi] : report.mi_ranking) {
    ranking.push_back({{"feature", name}, {"relative_mi", mi}});
  }
  return ranking;
}

void cmd_analyze(const Settings& s, InputTracker& inputs) {
  const Dataset data = load_dataset(s, inputs);
  if (data.features.empty()) throw std::runtime_error("analyze: features file holds no rows");
  const FeatureReport report = analyze_features(data.features);

  json invocation;
  invocation["per_class"] = s.per_class;

  json body;
  body["mi_ranking"] = mi_ranking_to_json(report);
  body["kept_features"] = report.pruned_names;
  json removed = json::array();
  const std::set<std::string> kept(report.pruned_names.begin(), report.pruned_names.end());
  for (const auto& name : kFeatureNames) {
    if (!kept.count(std::string(name))) removed.push_back(std::string(name));
  }
  body["removed_features"] = std::move(removed);
  body["warnings"] = report.warnings;

  if (s.per_class) {
    json per_class = json::object();
    for (DirectionGroup group : {DirectionGroup::vertical, DirectionGroup::horizontal}) {
      std::vector<FeatureVector> subset;
      for (const FeatureVector& f : data.features) {
        if (is_vertical(f.direction_class) == (group == DirectionGroup::vertical)) {
          subset.push_back(f);
        }
      }
      json entry;
      entry["rows"] = subset.size();
      if (subset.empty()) {
        entry["warnings"] = json::array({"no strokes in this direction class"});
        entry["mi_ranking"] = json::array();
      } else {
        const FeatureReport sub_report = analyze_features(subset);
        entry["mi_ranking"] = mi_ranking_to_json(sub_report);
        entry["warnings"] = sub_report.warnings;
      }
      per_class[std::string(direction_group_name(group))] = std::move(entry);
    }
    body["per_class"] = std::move(per_class);
  }

  std::string mi_csv = "feature,relative_mi\n";
  for (const auto& [name, mi] : report.mi_ranking) {
    mi_csv += name;
    mi_csv += ',';
    mi_csv += format_double(mi);
    mi_csv += '\n';
  }

  write_artifact(s, "analysis.json",
                 with_provenance("analyze", invocation, inputs, body).dump(2) + "\n");
  write_artifact(s, "mi_ranking.csv", mi_csv);
  write_artifact(s, "correlation.csv", correlation_to_csv(report));
}

void cmd_train(const Settings& s, InputTracker& inputs) {
  const Dataset data = load_dataset(s, inputs);
  const ClassifierKind kind = resolve_classifier(s);
  const std::uint64_t seed = require_seed(s);
  if (s.cv_folds < 2) throw ConfigError("cv_folds must be >= 2");
  const std::vector<std::size_t> indices = classification_feature_indices();

  json invocation;
  invocation["classifier"] = s.classifier;
  invocation["direction"] = s.direction;
  invocation["cv_folds"] = s.cv_folds;
  invocation["standardize_minmax"] = s.standardize_minmax;
  invocation["seed"] = seed;

  json models = json::array();
  std::size_t trained = 0, failed = 0;
  for (DirectionGroup group : resolve_directions(s)) {
    const std::vector<detail::UserData> users = detail::group_dataset(data, group);
    // Rows per user, in session order, restricted to this direction group.
    std::vector<Matrix> rows_by_user(users.size());
    for (std::size_t ui = 0; ui < users.size(); ++ui) {
      for (const auto& session : users[ui].sessions) {
        for (std::size_t id : session.strokes) {
          rows_by_user[ui].push_back(detail::classification_row(data.features[id], indices));
        }
      }
    }
    for (std::size_t ui = 0; ui < users.size(); ++ui) {
      const std::string& user_id = users[ui].user_id;
      json entry;
      entry["user_id"] = user_id;
      entry["direction"] = std::string(direction_group_name(group));
      Matrix neg;
      for (std::size_t oi = 0; oi < users.size(); ++oi) {
        if (oi == ui) continue;
        neg.insert(neg.end(), rows_by_user[oi].begin(), rows_by_user[oi].end());
      }
      try {
        if (rows_by_user[ui].empty()) throw std::runtime_error("user has no strokes");
        if (neg.empty()) throw std::runtime_error("no impostor strokes available");
        const std::uint64_t user_seed = derive_seed(
            seed, "train:" + std::string(direction_group_name(group)) + ":" + user_id);
        LegMetadata meta;
        const UserModel model =
            train_full_model(rows_by_user[ui], neg, kind, group, user_id, user_seed, s.cv_folds,
                             s.standardize_minmax, &meta);
        const std::string filename = "model_" + sanitize_for_filename(user_id) + "_" +
                                     std::string(direction_group_name(group)) + ".json";
        write_artifact(s, filename, to_json(model).dump(2) + "\n");
        entry["file"] = filename;
        entry["cv_eer"] = meta.cv_eer;
        if (meta.knn_k > 0) {
          entry["knn_k"] = meta.knn_k;
        } else {
          entry["svm_C"] = meta.svm_C;
          entry["svm_gamma"] = meta.svm_gamma;
        }
        if (meta.balance_underfull) entry["balance_underfull"] = true;
        ++trained;
      } catch (const std::exception& e) {
        entry["error"] = e.what();
        ++failed;
      }
      models.push_back(std::move(entry));
    }
  }
  if (trained == 0) throw std::runtime_error("train: no user could be trained");

  json body;
  body["models"] = std::move(models);
  body["trained"] = trained;
  body["failed"] = failed;
  write_artifact(s, "train.json",
                 with_provenance("train", invocation, inputs, body).dump(2) + "\n");
}

json eval_invocation(const Settings& s, std::uint64_t seed) {
  json invocation;
  invocation["scenario"] = s.scenario;
  invocation["classifier"] = s.classifier;
  invocation["direction"] = s.direction;
  invocation["window_n"] = s.window_n;
  invocation["stride"] = s.stride;
  invocation["train_fraction"] = s.train_fraction;
  invocation["cv_folds"] = s.cv_folds;
  invocation["standardize_minmax"] = s.standardize_minmax;
  invocation["seed"] = seed;
  return invocation;
}

void print_eval_summary(const EvalReport& r) {
  std::size_t valid = 0;
  for (const UserResult& u : r.users) valid += u.valid ? 1 : 0;
  std::printf("direction=%s scenario=%s classifier=%s n=%zu stride=%zu\n",
              std::string(direction_group_name(r.direction)).c_str(),
              std::string(scenario_name(r.scenario)).c_str(),
              std::string(classifier_kind_name(r.classifier)).c_str(), r.window.n,
              r.window.stride);
  std::printf("  users: %zu valid, %zu skipped\n", valid, r.users.size() - valid);
  std::printf("  EER median %.4f  q25 %.4f  q75 %.4f  whiskers [%.4f, %.4f]  outliers %zu\n",
              r.summary.eer_box.median, r.summary.eer_box.q25, r.summary.eer_box.q75,
              r.summary.eer_box.whisker_lo, r.summary.eer_box.whisker_hi,
              r.summary.eer_box.outliers.size());
  std::printf("  pooled EER %.4f\n", r.summary.pooled_eer);
  if (r.summary.relogin_infinite) {
    std::printf("  T_s %.2f s  time-to-first %.2f s  expected relogin: never\n",
                r.summary.median_inter_stroke_s, r.summary.time_to_first_decision_s);
  } else {
    std::printf("  T_s %.2f s  time-to-first %.2f s  expected relogin %.2f s\n",
                r.summary.median_inter_stroke_s, r.summary.time_to_first_decision_s,
                r.summary.expected_relogin_s);
  }
  for (const std::string& w : r.warnings) std::printf("  warning: %s\n", w.c_str());
}

void cmd_eval(const Settings& s, InputTracker& inputs) {
  const Dataset data = load_dataset(s, inputs);
  for (DirectionGroup group : resolve_directions(s)) {
    const ExperimentConfig config = make_experiment_config(s, group);
    const EvalReport report = run_experiment(data, config);
    print_eval_summary(report);
    const std::string suffix = std::string(direction_group_name(group));
    write_artifact(s, "eval_" + suffix + ".json",
                   with_provenance("eval", eval_invocation(s, config.seed), inputs,
                                   report_to_json(report))
                           .dump(2) +
                       "\n");
    write_artifact(s, "roc_" + suffix + ".csv", roc_summary_csv(report));
  }
}

void cmd_sweep_strokes(const Settings& s, InputTracker& inputs) {
  const Dataset data = load_dataset(s, inputs);
  const std::vector<std::size_t> ns = parse_size_list(s.strokes_ns, "strokes_ns");
  for (std::size_t n : ns) {
    if (n < 1) throw ConfigError("strokes_ns: window sizes must be >= 1");
  }
  for (DirectionGroup group : resolve_directions(s)) {
    const ExperimentConfig config = make_experiment_config(s, group);
    const SweepReport report = sweep_strokes(data, config, ns);
    json invocation = eval_invocation(s, config.seed);
    invocation["strokes_ns"] = ns;
    const std::string suffix = std::string(direction_group_name(group));
    write_artifact(s, "sweep_strokes_" + suffix + ".json",
                   with_provenance("sweep-strokes", invocation, inputs, sweep_to_json(report))
                           .dump(2) +
                       "\n");
    write_artifact(s, "sweep_strokes_" + suffix + ".csv", sweep_to_csv(report));
    for (const std::string& w : report.warnings) std::printf("  warning: %s\n", w.c_str());
  }
}

void cmd_sweep_subjects(const Settings& s, InputTracker& inputs) {
  const Dataset data = load_dataset(s, inputs);
  if (s.subject_counts.empty()) {
    throw ConfigError("sweep-subjects: pass --counts or set \"subject_counts\" in the config");
  }
  const std::vector<std::size_t> counts = parse_size_list(s.subject_counts, "subject_counts");
  if (s.repetitions < 1) throw ConfigError("repetitions must be >= 1");
  for (DirectionGroup group : resolve_directions(s)) {
    const ExperimentConfig config = make_experiment_config(s, group);
    const SweepReport report = sweep_subjects(data, config, counts, s.repetitions);
    json invocation = eval_invocation(s, config.seed);
    invocation["subject_counts"] = counts;
    invocation["repetitions"] = s.repetitions;
    const std::string suffix = std::string(direction_group_name(group));
    write_artifact(s, "sweep_subjects_" + suffix + ".json",
                   with_provenance("sweep-subjects", invocation, inputs, sweep_to_json(report))
                           .dump(2) +
                       "\n");
    write_artifact(s, "sweep_subjects_" + suffix + ".csv", sweep_to_csv(report));
    for (const std::string& w : report.warnings) std::printf("  warning: %s\n", w.c_str());
  }
}

void cmd_device_influence(const Settings& s, InputTracker& inputs) {
  const Dataset data = load_dataset(s, inputs);
  for (DirectionGroup group : resolve_directions(s)) {
    const ExperimentConfig config = make_experiment_config(s, group);
    const DeviceInfluenceReport report = device_influence(data, config);
    const std::string suffix = std::string(direction_group_name(group));
    write_artifact(s, "device_influence_" + suffix + ".json",
                   with_provenance("device-influence", eval_invocation(s, config.seed), inputs,
                                   device_influence_to_json(report))
                           .dump(2) +
                       "\n");
    std::printf("direction=%s same-phone median EER %.4f, mixed %.4f, gap %+.4f\n",
                suffix.c_str(), report.same_phone_median, report.mixed_phone_median, report.gap);
  }
}

void cmd_simulate(const Settings& s, InputTracker& inputs) {
  const Dataset data = load_dataset(s, inputs);
  const ClassifierKind kind = resolve_classifier(s);
  const std::uint64_t seed = require_seed(s);
  if (s.user.empty()) throw ConfigError("simulate: pass --user or set \"user\" in the config");
  if (s.enrollment_target < 1) throw ConfigError("simulate: enrollment_target must be >= 1");
  if (s.direction == "both") {
    throw ConfigError("simulate: pick one direction group (vertical|horizontal)");
  }
  const DirectionGroup group = resolve_directions(s).front();
  if (s.cv_folds < 2) throw ConfigError("cv_folds must be >= 2");

  const double accept_threshold =
      std::isnan(s.accept_threshold) ? (kind == ClassifierKind::knn ? 0.5 : 0.0)
                                     : s.accept_threshold;

  const std::vector<detail::UserData> users = detail::group_dataset(data, group);
  const auto genuine_it =
      std::find_if(users.begin(), users.end(),
                   [&](const detail::UserData& u) { return u.user_id == s.user; });
  if (genuine_it == users.end()) {
    throw ConfigError("simulate: user '" + s.user + "' has no complete strokes in direction " +
                      std::string(direction_group_name(group)));
  }
  if (users.size() < 2) throw std::runtime_error("simulate: need at least 2 users in the corpus");

  const std::vector<std::size_t> indices = classification_feature_indices();
  auto stream_of = [&](const detail::UserData& u) {
    std::vector<std::size_t> ids;
    for (const auto& session : u.sessions) {
      ids.insert(ids.end(), session.strokes.begin(), session.strokes.end());
    }
    return ids;
  };

  const std::vector<std::size_t> genuine_stream = stream_of(*genuine_it);
  if (genuine_stream.size() <= s.enrollment_target) {
    throw std::runtime_error("simulate: user '" + s.user + "' has " +
                             std::to_string(genuine_stream.size()) +
                             " strokes, not enough beyond the enrollment target of " +
                             std::to_string(s.enrollment_target));
  }

  // Model: enrollment strokes as positives, everyone else's strokes as the
  // impostor reference population.
  Matrix pos;
  for (std::size_t i = 0; i < s.enrollment_target; ++i) {
    pos.push_back(detail::classification_row(data.features[genuine_stream[i]], indices));
  }
  Matrix neg;
  for (const detail::UserData& u : users) {
    if (u.user_id == s.user) continue;
    for (std::size_t id : stream_of(u)) {
      neg.push_back(detail::classification_row(data.features[id], indices));
    }
  }
  const std::uint64_t user_seed = derive_seed(
      seed, "simulate:" + std::string(direction_group_name(group)) + ":" + s.user);
  LegMetadata meta;
  const UserModel model = train_full_model(pos, neg, kind, group, s.user, user_seed, s.cv_folds,
                                           s.standardize_minmax, &meta);

  AuthConfig auth;
  auth.window_n = s.window_n;
  auth.stride = s.stride;
  auth.t_threshold = s.t_threshold;
  auth.enrollment_target = s.enrollment_target;
  auth.accept_threshold = accept_threshold;
  auth.validate();

  std::string transcript;
  auto log_step = [&](const std::string& stream, std::size_t index, const AuthStep& step) {
    json line;
    line["stream"] = stream;
    line["stroke"] = index;
    line["phase"] = std::string(auth_phase_name(step.phase));
    line["event"] = std::string(auth_event_name(step.event));
    if (step.fused_score) {
      line["fused_score"] = *step.fused_score;
    } else {
      line["fused_score"] = nullptr;
    }
    line["consecutive_rejections"] = step.consecutive_rejections;
    transcript += line.dump();
    transcript += '\n';
  };

  // Genuine stream: the owner re-logs in after every lockout, so the stream
  // keeps running and re-logins are countable.
  AuthSession session = AuthSession::with_model(auth, model, indices);
  std::size_t genuine_decisions = 0, genuine_accepts = 0, relogins = 0;
  for (std::size_t i = 0; i < genuine_stream.size(); ++i) {
    const AuthStep step = session.step(data.features[genuine_stream[i]]);
    log_step("genuine", i, step);
    if (step.fused_score) ++genuine_decisions;
    if (step.event == AuthEvent::accepted) ++genuine_accepts;
    if (step.event == AuthEvent::lockout) {
      ++relogins;
      session.unlock();
    }
  }

  // Impostor streams: a fresh already-enrolled session per impostor; the
  // stream ends at the first lockout.
  json impostors = json::array();
  std::size_t impostor_decisions = 0, impostor_accepts = 0;
  AuthConfig impostor_auth = auth;
  impostor_auth.enrollment_target = 0;
  for (const detail::UserData& u : users) {
    if (u.user_id == s.user) continue;
    AuthSession attack = AuthSession::with_model(impostor_auth, model, indices);
    const std::vector<std::size_t> stream = stream_of(u);
    json entry;
    entry["user_id"] = u.user_id;
    entry["strokes"] = stream.size();
    entry["first_lockout_stroke"] = nullptr;
    std::size_t decisions = 0, accepts = 0;
    for (std::size_t i = 0; i < stream.size(); ++i) {
      const AuthStep step = attack.step(data.features[stream[i]]);
      log_step("impostor:" + u.user_id, i, step);
      if (step.fused_score) ++decisions;
      if (step.event == AuthEvent::accepted) ++accepts;
      if (step.event == AuthEvent::lockout) {
        entry["first_lockout_stroke"] = i + 1;  // 1-based stroke count
        break;
      }
    }
    entry["decisions"] = decisions;
    entry["accepts"] = accepts;
    impostor_decisions += decisions;
    impostor_accepts += accepts;
    impostors.push_back(std::move(entry));
  }

  // Post-enrollment inter-stroke median for the relogin-interval estimate.
  std::vector<double> inter;
  for (std::size_t i = s.enrollment_target; i < genuine_stream.size(); ++i) {
    const FeatureVector& f = data.features[genuine_stream[i]];
    if (f.has(feat::inter_stroke_time)) inter.push_back(f.v[feat::inter_stroke_time]);
  }
  const double ts_s = inter.empty() ? 0.0 : median(inter) / 1000.0;
  const double frr_hat =
      genuine_decisions == 0
          ? 0.0
          : static_cast<double>(genuine_decisions - genuine_accepts) /
                static_cast<double>(genuine_decisions);
  const double far_hat =
      impostor_decisions == 0
          ? 0.0
          : static_cast<double>(impostor_accepts) / static_cast<double>(impostor_decisions);

  json invocation;
  invocation["classifier"] = s.classifier;
  invocation["direction"] = std::string(direction_group_name(group));
  invocation["user"] = s.user;
  invocation["enrollment_target"] = s.enrollment_target;
  invocation["window_n"] = s.window_n;
  invocation["stride"] = s.stride;
  invocation["t_threshold"] = s.t_threshold;
  invocation["accept_threshold"] = accept_threshold;
  invocation["cv_folds"] = s.cv_folds;
  invocation["standardize_minmax"] = s.standardize_minmax;
  invocation["seed"] = seed;

  json body;
  body["model"] = {{"cv_eer", meta.cv_eer}};
  if (meta.knn_k > 0) {
    body["model"]["knn_k"] = meta.knn_k;
  } else {
    body["model"]["svm_C"] = meta.svm_C;
    body["model"]["svm_gamma"] = meta.svm_gamma;
  }
  body["genuine"] = {{"strokes", genuine_stream.size()},
                     {"decisions", genuine_decisions},
                     {"accepts", genuine_accepts},
                     {"relogins", relogins},
                     {"frr", frr_hat}};
  body["impostors"] = std::move(impostors);
  body["far"] = far_hat;
  body["median_inter_stroke_s"] = ts_s;
  if (frr_hat == 0.0) {
    body["expected_relogin_infinite"] = true;
  } else {
    body["expected_relogin_s"] = expected_relogin_interval(frr_hat, ts_s);
  }

  const std::string stem = "simulate_" + sanitize_for_filename(s.user);
  write_artifact(s, stem + ".jsonl", transcript);
  write_artifact(s, stem + ".json",
                 with_provenance("simulate", invocation, inputs, body).dump(2) + "\n");
  std::printf("user=%s decisions=%zu accepts=%zu relogins=%zu FRR=%.4f FAR=%.4f\n",
              s.user.c_str(), genuine_decisions, genuine_accepts, relogins, frr_hat, far_hat);
}

void cmd_gen_synthetic(const Settings& s, InputTracker& inputs) {
  SyntheticCorpusSpec spec;
  json invocation;
  if (!s.spec.empty()) {
    const std::string text = inputs.read(s.spec, "spec");
    try {
      spec = corpus_spec_from_json(json::parse(text));
    } catch (const std::exception& e) {
      throw ConfigError("spec '" + s.spec + "': " + e.what());
    }
    invocation["spec"] = s.spec;
  } else {
    if (s.preset != "separated") {
      throw ConfigError("unknown preset '" + s.preset + "' (only 'separated' exists)");
    }
    SeparatedCorpusOptions opt;
    opt.n_users = s.gen_users;
    opt.separation_sigma = s.separation;
    opt.seed = require_seed(s);
    opt.sessions_week1 = s.sessions_week1;
    opt.sessions_week2 = s.sessions_week2;
    opt.strokes_per_session = s.strokes_per_session;
    opt.phone_count = s.phones;
    opt.phone_offset_sigma = s.phone_offset;
    opt.vertical_fraction = s.vertical_fraction;
    try {
      spec = separated_corpus_spec(opt);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("gen-synthetic: ") + e.what());
    }
    invocation["preset"] = s.preset;
    invocation["users"] = s.gen_users;
    invocation["separation"] = s.separation;
    invocation["seed"] = opt.seed;
    invocation["sessions_week1"] = s.sessions_week1;
    invocation["sessions_week2"] = s.sessions_week2;
    invocation["strokes_per_session"] = s.strokes_per_session;
    invocation["phones"] = s.phones;
    invocation["phone_offset"] = s.phone_offset;
    invocation["vertical_fraction"] = s.vertical_fraction;
  }
  invocation["raw"] = s.raw;

  const Dataset data = generate_corpus(spec);
  write_artifact(s, "corpus_spec.json", to_json(spec).dump(2) + "\n");
  write_artifact(s, "features.csv", to_csv(data.features));

  json body;
  body["users"] = spec.users.size();
  body["sessions_per_user"] = spec.sessions_week1 + spec.sessions_week2;
  body["strokes_per_session"] = spec.strokes_per_session;
  body["feature_rows"] = data.features.size();

  if (s.raw) {
    ScreenSpec screen;
    screen.width_px = 480.0;
    screen.height_px = 800.0;
    const std::vector<TouchEvent> events = generate_raw_events(spec, screen);
    write_artifact(s, "log.csv", events_to_csv(events));
    std::set<std::string> phone_ids;
    for (const SyntheticUserSpec& u : spec.users) phone_ids.insert(u.phone_id);
    std::string screens(kScreenSpecHeader);
    screens += '\n';
    for (const std::string& phone : phone_ids) {
      screens += phone + ",480,800\n";
    }
    write_artifact(s, "screens.csv", screens);
    body["raw_events"] = events.size();
  }

  write_artifact(s, "gen_synthetic.json",
                 with_provenance("gen-synthetic", invocation, inputs, body).dump(2) + "\n");
}

// ---------- option plumbing ----------

// Options write into a per-subcommand Settings snapshot; only flags the user
// actually passed are copied over the config-file values.
struct SubcommandState {
  CLI::App* app = nullptr;
  Settings flags;
  std::string config_path;
  std::vector<std::pair<CLI::Option*, std::function<void(Settings&, const Settings&)>>> binds;
  std::function<void(const Settings&, InputTracker&)> run;

  void bind(CLI::Option* opt, std::function<void(Settings&, const Settings&)> apply) {
    binds.emplace_back(opt, std::move(apply));
  }

  Settings resolve(InputTracker& inputs) const {
    Settings s;
    if (!config_path.empty()) overlay_config(s, config_path, inputs);
    for (const auto& [opt, apply] : binds) {
      if (opt->count() > 0) apply(s, flags);
    }
    return s;
  }
};

void add_common(SubcommandState& st) {
  st.app->add_option("--config", st.config_path, "JSON config file; flags override its values");
  st.bind(st.app->add_option("--out", st.flags.out, "Output directory (default .)"),
          [](Settings& s, const Settings& f) { s.out = f.out; });
}

void add_seed(SubcommandState& st) {
  static std::list<std::uint64_t> storage;  // stable addresses for CLI11 bindings
  storage.push_back(0);
  std::uint64_t* slot = &storage.back();
  st.bind(st.app->add_option("--seed", *slot, "Master seed (required for seeded commands)"),
          [slot](Settings& s, const Settings&) { s.seed = *slot; });
}

void add_features_input(SubcommandState& st) {
  st.bind(st.app->add_option("--features", st.flags.features, "Feature CSV produced by ingest"),
          [](Settings& s, const Settings& f) { s.features = f.features; });
}

void add_weeks(SubcommandState& st) {
  st.bind(st.app->add_option("--weeks", st.flags.weeks,
                             "JSON {doc_id: week} overriding the _w2 suffix convention"),
          [](Settings& s, const Settings& f) { s.weeks = f.weeks; });
}

void add_experiment_knobs(SubcommandState& st) {
  st.bind(st.app->add_option("--scenario", st.flags.scenario,
                             "intra-session|inter-session|inter-week"),
          [](Settings& s, const Settings& f) { s.scenario = f.scenario; });
  st.bind(st.app->add_option("--classifier", st.flags.classifier, "knn|svm"),
          [](Settings& s, const Settings& f) { s.classifier = f.classifier; });
  st.bind(st.app->add_option("--direction", st.flags.direction, "vertical|horizontal|both"),
          [](Settings& s, const Settings& f) { s.direction = f.direction; });
  st.bind(st.app->add_option("--window-n", st.flags.window_n, "Strokes fused per decision"),
          [](Settings& s, const Settings& f) { s.window_n = f.window_n; });
  st.bind(st.app->add_option("--stride", st.flags.stride, "Decision stride"),
          [](Settings& s, const Settings& f) { s.stride = f.stride; });
  st.bind(st.app->add_option("--train-fraction", st.flags.train_fraction,
                             "Intra-session train fraction in (0,1)"),
          [](Settings& s, const Settings& f) { s.train_fraction = f.train_fraction; });
  st.bind(st.app->add_option("--cv-folds", st.flags.cv_folds, "Cross-validation folds"),
          [](Settings& s, const Settings& f) { s.cv_folds = f.cv_folds; });
  st.bind(st.app->add_flag("--minmax", st.flags.standardize_minmax,
                           "Min-max squash before z-scoring"),
          [](Settings& s, const Settings& f) { s.standardize_minmax = f.standardize_minmax; });
  st.bind(st.app->add_option("--workers", st.flags.workers,
                             "Worker threads (never changes results)"),
          [](Settings& s, const Settings& f) { s.workers = f.workers; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"touchauth: touchscreen behavioral-biometric authentication pipeline"};
  app.require_subcommand(1);
  std::list<SubcommandState> states;

  auto make_sub = [&](const char* name, const char* desc) -> SubcommandState& {
    states.emplace_back();
    SubcommandState& st = states.back();
    st.app = app.add_subcommand(name, desc);
    add_common(st);
    return st;
  };

  {
    SubcommandState& st = make_sub("ingest", "Raw touch log -> feature CSV");
    st.bind(st.app->add_option("--log", st.flags.log, "Raw touch log CSV"),
            [](Settings& s, const Settings& f) { s.log = f.log; });
    st.bind(st.app->add_option("--screens", st.flags.screens, "Screen spec CSV"),
            [](Settings& s, const Settings& f) { s.screens = f.screens; });
    st.bind(st.app->add_option("--min-displacement", st.flags.min_displacement_frac,
                               "Click filter threshold (fraction of diagonal)"),
            [](Settings& s, const Settings& f) {
              s.min_displacement_frac = f.min_displacement_frac;
            });
    st.run = cmd_ingest;
  }
  {
    SubcommandState& st = make_sub("analyze", "Feature informativeness and correlation");
    add_features_input(st);
    st.bind(st.app->add_flag("--per-class", st.flags.per_class,
                             "Also rank features per direction class"),
            [](Settings& s, const Settings& f) { s.per_class = f.per_class; });
    st.run = cmd_analyze;
  }
  {
    SubcommandState& st = make_sub("train", "Train per-user models on the full corpus");
    add_features_input(st);
    add_seed(st);
    st.bind(st.app->add_option("--classifier", st.flags.classifier, "knn|svm"),
            [](Settings& s, const Settings& f) { s.classifier = f.classifier; });
    st.bind(st.app->add_option("--direction", st.flags.direction, "vertical|horizontal|both"),
            [](Settings& s, const Settings& f) { s.direction = f.direction; });
    st.bind(st.app->add_option("--cv-folds", st.flags.cv_folds, "Cross-validation folds"),
            [](Settings& s, const Settings& f) { s.cv_folds = f.cv_folds; });
    st.bind(st.app->add_flag("--minmax", st.flags.standardize_minmax,
                             "Min-max squash before z-scoring"),
            [](Settings& s, const Settings& f) { s.standardize_minmax = f.standardize_minmax; });
    st.run = cmd_train;
  }
  {
    SubcommandState& st = make_sub("eval", "Scenario evaluation: per-user EER, ROC, summary");
    add_features_input(st);
    add_weeks(st);
    add_seed(st);
    add_experiment_knobs(st);
    st.run = cmd_eval;
  }
  {
    SubcommandState& st = make_sub("sweep-strokes", "EER vs strokes-per-decision curve");
    add_features_input(st);
    add_weeks(st);
    add_seed(st);
    add_experiment_knobs(st);
    st.bind(st.app->add_option("--ns", st.flags.strokes_ns,
                               "Window sizes, e.g. 1,2,4 or 1..20 (default 1..20)"),
            [](Settings& s, const Settings& f) { s.strokes_ns = f.strokes_ns; });
    st.run = cmd_sweep_strokes;
  }
  {
    SubcommandState& st = make_sub("sweep-subjects", "EER vs subject-count curve");
    add_features_input(st);
    add_weeks(st);
    add_seed(st);
    add_experiment_knobs(st);
    st.bind(st.app->add_option("--counts", st.flags.subject_counts,
                               "Subject counts, e.g. 2,4,8,16 or 2..10"),
            [](Settings& s, const Settings& f) { s.subject_counts = f.subject_counts; });
    st.bind(st.app->add_option("--repetitions", st.flags.repetitions,
                               "Seeded subject draws per count (default 10)"),
            [](Settings& s, const Settings& f) { s.repetitions = f.repetitions; });
    st.run = cmd_sweep_subjects;
  }
  {
    SubcommandState& st = make_sub("device-influence",
                                   "Same-phone vs mixed-phone EER comparison");
    add_features_input(st);
    add_weeks(st);
    add_seed(st);
    add_experiment_knobs(st);
    st.run = cmd_device_influence;
  }
  {
    SubcommandState& st = make_sub("simulate",
                                   "Continuous-authentication session transcript for one user");
    add_features_input(st);
    add_seed(st);
    st.bind(st.app->add_option("--user", st.flags.user, "Genuine user id"),
            [](Settings& s, const Settings& f) { s.user = f.user; });
    st.bind(st.app->add_option("--classifier", st.flags.classifier, "knn|svm"),
            [](Settings& s, const Settings& f) { s.classifier = f.classifier; });
    st.bind(st.app->add_option("--direction", st.flags.direction, "vertical|horizontal"),
            [](Settings& s, const Settings& f) { s.direction = f.direction; });
    st.bind(st.app->add_option("--enrollment", st.flags.enrollment_target,
                               "Enrollment strokes before authentication starts (default 50)"),
            [](Settings& s, const Settings& f) { s.enrollment_target = f.enrollment_target; });
    st.bind(st.app->add_option("--window-n", st.flags.window_n, "Strokes fused per decision"),
            [](Settings& s, const Settings& f) { s.window_n = f.window_n; });
    st.bind(st.app->add_option("--stride", st.flags.stride, "Decision stride"),
            [](Settings& s, const Settings& f) { s.stride = f.stride; });
    st.bind(st.app->add_option("--t", st.flags.t_threshold,
                               "Consecutive rejections forcing re-login (default 1)"),
            [](Settings& s, const Settings& f) { s.t_threshold = f.t_threshold; });
    st.bind(st.app->add_option("--threshold", st.flags.accept_threshold,
                               "Accept threshold (default 0.5 for knn, 0 for svm)"),
            [](Settings& s, const Settings& f) { s.accept_threshold = f.accept_threshold; });
    st.bind(st.app->add_option("--cv-folds", st.flags.cv_folds, "Cross-validation folds"),
            [](Settings& s, const Settings& f) { s.cv_folds = f.cv_folds; });
    st.bind(st.app->add_flag("--minmax", st.flags.standardize_minmax,
                             "Min-max squash before z-scoring"),
            [](Settings& s, const Settings& f) { s.standardize_minmax = f.standardize_minmax; });
    st.run = cmd_simulate;
  }
  {
    SubcommandState& st = make_sub("gen-synthetic", "Generate a synthetic corpus");
    add_seed(st);
    st.bind(st.app->add_option("--spec", st.flags.spec, "Corpus spec JSON (overrides preset)"),
            [](Settings& s, const Settings& f) { s.spec = f.spec; });
    st.bind(st.app->add_option("--preset", st.flags.preset, "Preset name (separated)"),
            [](Settings& s, const Settings& f) { s.preset = f.preset; });
    st.bind(st.app->add_option("--users", st.flags.gen_users, "User count (default 10)"),
            [](Settings& s, const Settings& f) { s.gen_users = f.gen_users; });
    st.bind(st.app->add_option("--separation", st.flags.separation,
                               "Signature separation in stddev units (default 2)"),
            [](Settings& s, const Settings& f) { s.separation = f.separation; });
    st.bind(st.app->add_option("--sessions-w1", st.flags.sessions_week1,
                               "Week-1 sessions per user (default 3)"),
            [](Settings& s, const Settings& f) { s.sessions_week1 = f.sessions_week1; });
    st.bind(st.app->add_option("--sessions-w2", st.flags.sessions_week2,
                               "Week-2 sessions per user (default 1)"),
            [](Settings& s, const Settings& f) { s.sessions_week2 = f.sessions_week2; });
    st.bind(st.app->add_option("--strokes", st.flags.strokes_per_session,
                               "Strokes per session (default 60)"),
            [](Settings& s, const Settings& f) { s.strokes_per_session = f.strokes_per_session; });
    st.bind(st.app->add_option("--phones", st.flags.phones, "Distinct phones (default 1)"),
            [](Settings& s, const Settings& f) { s.phones = f.phones; });
    st.bind(st.app->add_option("--phone-offset", st.flags.phone_offset,
                               "Per-phone mean offset in stddev units (default 0)"),
            [](Settings& s, const Settings& f) { s.phone_offset = f.phone_offset; });
    st.bind(st.app->add_option("--vertical-fraction", st.flags.vertical_fraction,
                               "Per-stroke probability of a vertical stroke (default 1)"),
            [](Settings& s, const Settings& f) { s.vertical_fraction = f.vertical_fraction; });
    st.bind(st.app->add_flag("--raw", st.flags.raw, "Also emit raw event log + screen specs"),
            [](Settings& s, const Settings& f) { s.raw = f.raw; });
    st.run = cmd_gen_synthetic;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  for (const SubcommandState& st : states) {
    if (!st.app->parsed()) continue;
    try {
      InputTracker inputs;
      const Settings s = st.resolve(inputs);
      st.run(s, inputs);
      return 0;
    } catch (const ConfigError& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return 2;
    } catch (const ParseError& e) {
      std::cerr << "input error: " << e.what() << '\n';
      return 2;
    } catch (const json::exception& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return 2;
    } catch (const std::invalid_argument& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
    }
  }
  return 0;
}
