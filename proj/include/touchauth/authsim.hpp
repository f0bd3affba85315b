#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "touchauth/classify.hpp"
#include "touchauth/evaluate.hpp"
#include "touchauth/features.hpp"
#include "touchauth/rng.hpp"
#include "touchauth/types.hpp"

namespace touchauth {

// ---------- continuous-authentication state machine ----------

enum class AuthPhase { challenge, enrolling, authenticating };

inline std::string_view auth_phase_name(AuthPhase p) {
  switch (p) {
    case AuthPhase::challenge: return "challenge";
    case AuthPhase::enrolling: return "enrolling";
    case AuthPhase::authenticating: return "authenticating";
  }
  return "challenge";
}

enum class AuthEvent {
  none,                 // stroke consumed, nothing decided
  enrollment_complete,  // enrollment buffer reached its target
  accepted,             // fused decision >= threshold
  rejected,             // fused decision below threshold
  lockout,              // t-th consecutive rejection; phase falls to challenge
  blocked,              // stroke ignored while challenged
};

inline std::string_view auth_event_name(AuthEvent e) {
  switch (e) {
    case AuthEvent::none: return "none";
    case AuthEvent::enrollment_complete: return "enrollment_complete";
    case AuthEvent::accepted: return "accepted";
    case AuthEvent::rejected: return "rejected";
    case AuthEvent::lockout: return "lockout";
    case AuthEvent::blocked: return "blocked";
  }
  return "none";
}

struct AuthConfig {
  std::size_t window_n = 11;
  std::size_t stride = 1;
  std::size_t t_threshold = 1;       // consecutive rejections forcing re-login
  std::size_t enrollment_target = 200;
  double accept_threshold = 0.5;

  void validate() const {
    if (window_n < 1 || stride < 1) throw std::invalid_argument("AuthConfig: n and stride must be >= 1");
    if (t_threshold < 1) throw std::invalid_argument("AuthConfig: t_threshold must be >= 1");
  }
};

struct AuthStep {
  AuthPhase phase = AuthPhase::enrolling;  // phase after the step
  AuthEvent event = AuthEvent::none;
  std::optional<double> fused_score;
  std::size_t consecutive_rejections = 0;
};

// Tracks one device session: enrollment until the target stroke count, then
// per-stroke sliding-window decisions (first decision exactly at stroke n,
// then every `stride`). A rejection run of length t locks the session into
// the challenge phase until unlock().
class AuthSession {
 public:
  // stroke_score turns a feature vector into the per-stroke score; fuse
  // turns a full window of those scores into the decision score.
  AuthSession(AuthConfig config, std::function<double(const FeatureVector&)> stroke_score,
              std::function<double(std::span<const double>)> fuse)
      : config_(config), stroke_score_(std::move(stroke_score)), fuse_(std::move(fuse)) {
    config_.validate();
    phase_ = config_.enrollment_target == 0 ? AuthPhase::authenticating : AuthPhase::enrolling;
  }

  // Wires a trained model's scoring and fusion rules in.
  static AuthSession with_model(AuthConfig config, const UserModel& model,
                                std::span<const std::size_t> feature_indices) {
    std::vector<std::size_t> indices(feature_indices.begin(), feature_indices.end());
    if (model.kind == ClassifierKind::knn) {
      const std::size_t k = model.knn->k;
      return AuthSession(
          config,
          [&model, indices](const FeatureVector& f) {
            std::vector<double> row(indices.size());
            for (std::size_t j = 0; j < indices.size(); ++j) row[j] = f.v[indices[j]];
            return static_cast<double>(model.knn_positives(row));
          },
          [k](std::span<const double> w) { return fuse_knn(w, k); });
    }
    return AuthSession(
        config,
        [&model, indices](const FeatureVector& f) {
          std::vector<double> row(indices.size());
          for (std::size_t j = 0; j < indices.size(); ++j) row[j] = f.v[indices[j]];
          return model.score(row);
        },
        [](std::span<const double> w) { return fuse_svm(w); });
  }

  AuthPhase phase() const { return phase_; }
  std::size_t consecutive_rejections() const { return rejections_; }
  const std::vector<FeatureVector>& enrollment_buffer() const { return enrollment_; }

  AuthStep step(const FeatureVector& stroke) {
    AuthStep result;
    result.consecutive_rejections = rejections_;
    switch (phase_) {
      case AuthPhase::challenge:
        result.phase = phase_;
        result.event = AuthEvent::blocked;
        return result;
      case AuthPhase::enrolling:
        enrollment_.push_back(stroke);
        if (enrollment_.size() >= config_.enrollment_target) {
          phase_ = AuthPhase::authenticating;
          result.event = AuthEvent::enrollment_complete;
        }
        result.phase = phase_;
        return result;
      case AuthPhase::authenticating:
        break;
    }

    window_.push_back(stroke_score_(stroke));
    if (window_.size() > config_.window_n) window_.pop_front();
    ++auth_strokes_;
    const bool due = auth_strokes_ >= config_.window_n &&
                     (auth_strokes_ - config_.window_n) % config_.stride == 0;
    if (!due) {
      result.phase = phase_;
      return result;
    }

    const std::vector<double> w(window_.begin(), window_.end());
    const double fused = fuse_(w);
    result.fused_score = fused;
    if (fused >= config_.accept_threshold) {
      rejections_ = 0;
      result.event = AuthEvent::accepted;
    } else {
      ++rejections_;
      if (rejections_ >= config_.t_threshold) {
        phase_ = AuthPhase::challenge;
        result.event = AuthEvent::lockout;
      } else {
        result.event = AuthEvent::rejected;
      }
    }
    result.phase = phase_;
    result.consecutive_rejections = rejections_;
    return result;
  }

  // Successful entry-point re-authentication: resume continuous mode with a
  // fresh window and counter.
  void unlock() {
    if (phase_ != AuthPhase::challenge) throw std::logic_error("unlock: session is not challenged");
    phase_ = AuthPhase::authenticating;
    window_.clear();
    auth_strokes_ = 0;
    rejections_ = 0;
  }

 private:
  AuthConfig config_;
  std::function<double(const FeatureVector&)> stroke_score_;
  std::function<double(std::span<const double>)> fuse_;
  AuthPhase phase_ = AuthPhase::enrolling;
  std::vector<FeatureVector> enrollment_;
  std::deque<double> window_;
  std::size_t auth_strokes_ = 0;
  std::size_t rejections_ = 0;
};

// Expected time until a legitimate user is falsely locked out and must
// re-enter the password: T_s / FRR; infinite at FRR = 0.
inline double expected_relogin_interval(double frr, double median_inter_stroke_time_s) {
  if (frr < 0.0 || frr > 1.0) throw std::invalid_argument("expected_relogin_interval: FRR outside [0,1]");
  if (median_inter_stroke_time_s < 0.0) {
    throw std::invalid_argument("expected_relogin_interval: negative inter-stroke time");
  }
  if (frr == 0.0) return std::numeric_limits<double>::infinity();
  return median_inter_stroke_time_s / frr;
}

// ---------- synthetic stroke-stream generator ----------

// Features drawn directly from the per-user distribution; the rest are
// derived from them (displacement geometry, trajectory, average velocity) or
// fixed (phone orientation).
inline const std::vector<std::size_t>& free_feature_indices() {
  static const std::vector<std::size_t> indices = [] {
    const std::set<std::size_t> derived = {
        feat::end_to_end_dist, feat::end_to_end_direction, feat::trajectory_length,
        feat::avg_velocity,    feat::avg_direction,        feat::direction_flag,
        feat::phone_orientation,
    };
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      if (!derived.count(i)) out.push_back(i);
    }
    return out;
  }();
  return indices;
}

struct FeatureRange {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
};

// Valid value range per feature; draws are clipped into these.
inline FeatureRange feature_range(std::size_t index) {
  switch (index) {
    case feat::start_x:
    case feat::start_y:
    case feat::stop_x:
    case feat::stop_y:
    case feat::mid_stroke_pressure:
    case feat::mid_stroke_area:
    case feat::mean_resultant_length:
      return {0.0, 1.0};
    case feat::ratio_dist_traj:
      return {0.05, 1.0};
    case feat::duration:
      return {1.0, std::numeric_limits<double>::infinity()};
    case feat::inter_stroke_time:
    case feat::vel_p20:
    case feat::vel_p50:
    case feat::vel_p80:
    case feat::median_vel_last3:
      return {0.0, std::numeric_limits<double>::infinity()};
    case feat::max_deviation:
      return {-0.7, 0.7};
    case feat::dev_p20:
    case feat::dev_p50:
    case feat::dev_p80:
      return {0.0, 0.7};
    default:
      return {};
  }
}

// Per-direction Gaussian feature distribution (diagonal covariance).
struct FeatureDistribution {
  std::array<double, kFeatureCount> mean{};
  std::array<double, kFeatureCount> stddev{};

  void validate() const {
    for (std::size_t i : free_feature_indices()) {
      const FeatureRange r = feature_range(i);
      if (!(stddev[i] > 0.0)) {
        throw std::invalid_argument("synthetic spec: stddev of '" + std::string(kFeatureNames[i]) +
                                    "' must be positive");
      }
      if (mean[i] < r.lo || mean[i] > r.hi) {
        throw std::invalid_argument("synthetic spec: mean of '" + std::string(kFeatureNames[i]) +
                                    "' lies outside its valid range");
      }
    }
  }
};

struct SyntheticUserSpec {
  std::string user_id;
  std::string phone_id = "phone0";
  PhoneOrientation orientation = PhoneOrientation::portrait;
  FeatureDistribution vertical;
  FeatureDistribution horizontal;
  double vertical_fraction = 1.0;  // probability that a stroke is vertical
  double direction_wobble = 0.05;  // stddev of avg_direction around the end-to-end line
};

struct SyntheticCorpusSpec {
  std::uint64_t seed = 0;
  std::size_t sessions_week1 = 3;
  std::size_t sessions_week2 = 1;
  std::size_t strokes_per_session = 60;
  std::vector<SyntheticUserSpec> users;
};

namespace detail {
inline double wrap_angle(double a) {
  while (a > kPi) a -= 2.0 * kPi;
  while (a <= -kPi) a += 2.0 * kPi;
  return a;
}

inline double clip_range(double v, const FeatureRange& r) { return std::clamp(v, r.lo, r.hi); }

// Keeps the drawn end points consistent with the intended direction class by
// shrinking the off-axis displacement when it dominates.
inline void repair_direction(bool vertical, double& start_x, double& start_y, double& stop_x,
                             double& stop_y) {
  const double dx = stop_x - start_x;
  const double fy = (stop_y - start_y) == 0.0 ? 0.0 : -(stop_y - start_y);
  if (vertical) {
    if (std::abs(fy) == 0.0) {
      stop_y = std::clamp(start_y - 0.3, 0.0, 1.0);
    }
    const double fy2 = (stop_y - start_y) == 0.0 ? 0.0 : -(stop_y - start_y);
    if (std::abs(dx) >= std::abs(fy2)) {
      stop_x = std::clamp(start_x + std::copysign(0.8 * std::abs(fy2), dx == 0.0 ? 1.0 : dx), 0.0, 1.0);
    }
  } else {
    if (std::abs(dx) == 0.0) {
      stop_x = std::clamp(start_x + 0.3, 0.0, 1.0);
    }
    const double dx2 = stop_x - start_x;
    if (std::abs(fy) >= std::abs(dx2)) {
      stop_y = std::clamp(start_y + std::copysign(0.8 * std::abs(dx2), (stop_y - start_y) == 0.0
                                                                           ? 1.0
                                                                           : stop_y - start_y),
                          0.0, 1.0);
    }
  }
}
}  // namespace detail

// Draws one session's feature vectors. Deterministic in (spec, doc_id,
// n_strokes, rng state). The first stroke's inter-stroke time is absent,
// mirroring real sessions.
inline std::vector<FeatureVector> generate_session(const SyntheticUserSpec& spec,
                                                   const std::string& doc_id,
                                                   std::size_t n_strokes, Rng& rng) {
  spec.vertical.validate();
  spec.horizontal.validate();
  std::vector<FeatureVector> out;
  out.reserve(n_strokes);
  for (std::size_t i = 0; i < n_strokes; ++i) {
    const bool vertical = rng.uniform() < spec.vertical_fraction;
    const FeatureDistribution& dist = vertical ? spec.vertical : spec.horizontal;

    FeatureVector f;
    f.user_id = spec.user_id;
    f.doc_id = doc_id;
    f.phone_id = spec.phone_id;
    f.stroke_index_in_session = i;

    for (std::size_t idx : free_feature_indices()) {
      const double raw = dist.mean[idx] + dist.stddev[idx] * rng.normal();
      f.v[idx] = detail::clip_range(raw, feature_range(idx));
    }

    double start_x = f.v[feat::start_x], start_y = f.v[feat::start_y];
    double stop_x = f.v[feat::stop_x], stop_y = f.v[feat::stop_y];
    detail::repair_direction(vertical, start_x, start_y, stop_x, stop_y);
    f.v[feat::start_x] = start_x;
    f.v[feat::start_y] = start_y;
    f.v[feat::stop_x] = stop_x;
    f.v[feat::stop_y] = stop_y;

    const double dx = stop_x - start_x;
    const double dy = stop_y - start_y;
    const double e2e = std::sqrt(dx * dx + dy * dy);
    f.v[feat::end_to_end_dist] = e2e;
    f.v[feat::end_to_end_direction] = detail::into_half_open_pi(detail::segment_angle(dx, dy));
    f.v[feat::trajectory_length] = e2e / f.v[feat::ratio_dist_traj];
    f.v[feat::avg_velocity] = e2e / (f.v[feat::duration] / 1000.0);
    f.v[feat::avg_direction] = detail::into_half_open_pi(detail::wrap_angle(
        f.v[feat::end_to_end_direction] + spec.direction_wobble * rng.normal()));
    f.v[feat::phone_orientation] = static_cast<double>(static_cast<int>(spec.orientation));

    const double fy = detail::flipped_dy(dy);
    if (std::abs(dx) >= std::abs(fy)) {
      f.direction_class = dx > 0.0 ? DirectionClass::right : DirectionClass::left;
    } else {
      f.direction_class = fy > 0.0 ? DirectionClass::up : DirectionClass::down;
    }
    f.v[feat::direction_flag] = static_cast<double>(static_cast<int>(f.direction_class));

    if (i == 0) f.v[feat::inter_stroke_time] = std::numeric_limits<double>::quiet_NaN();
    out.push_back(std::move(f));
  }
  return out;
}

inline std::string synthetic_doc_id(std::size_t session_number, int week) {
  std::string n = std::to_string(session_number + 1);
  if (n.size() < 2) n.insert(n.begin(), '0');
  return "s" + n + "_w" + std::to_string(week);
}

// Generates the full corpus: every user gets the same session layout
// (sessions_week1 week-1 docs, then sessions_week2 week-2 docs). Per-session
// seeds derive from (corpus seed, user, doc), so any subset regenerates
// identically.
inline Dataset generate_corpus(const SyntheticCorpusSpec& spec) {
  if (spec.users.empty()) throw std::invalid_argument("generate_corpus: no users");
  Dataset data;
  const std::size_t total_sessions = spec.sessions_week1 + spec.sessions_week2;
  for (const SyntheticUserSpec& user : spec.users) {
    for (std::size_t s = 0; s < total_sessions; ++s) {
      const int week = s < spec.sessions_week1 ? 1 : 2;
      const std::string doc = synthetic_doc_id(s, week);
      data.week_of_doc[doc] = week;
      Rng rng(derive_seed(spec.seed, "user:" + user.user_id + "/doc:" + doc));
      std::vector<FeatureVector> session =
          generate_session(user, doc, spec.strokes_per_session, rng);
      for (auto& f : session) data.features.push_back(std::move(f));
    }
  }
  return data;
}

// ---------- separated-population presets ----------

// Base population every synthetic user varies around.
inline FeatureDistribution base_feature_distribution(bool vertical) {
  FeatureDistribution d;
  auto set = [&](std::size_t i, double mean, double sd) {
    d.mean[i] = mean;
    d.stddev[i] = sd;
  };
  set(feat::mid_stroke_area, 0.45, 0.04);
  set(feat::vel_p20, 0.6, 0.06);
  set(feat::mid_stroke_pressure, 0.5, 0.04);
  set(feat::stop_x, vertical ? 0.5 : 0.85, 0.02);
  set(feat::start_x, vertical ? 0.5 : 0.15, 0.02);
  set(feat::start_y, vertical ? 0.85 : 0.5, 0.02);
  set(feat::stop_y, vertical ? 0.15 : 0.5, 0.02);
  set(feat::duration, 800.0, 60.0);
  set(feat::vel_p80, 1.5, 0.1);
  set(feat::median_vel_last3, 0.9, 0.08);
  set(feat::vel_p50, 1.0, 0.08);
  set(feat::acc_p20, -0.5, 0.1);
  set(feat::ratio_dist_traj, 0.92, 0.02);
  set(feat::max_deviation, 0.05, 0.01);
  set(feat::acc_p80, 0.8, 0.1);
  set(feat::mean_resultant_length, 0.95, 0.015);
  set(feat::median_acc_first5, 0.2, 0.1);
  set(feat::dev_p50, 0.04, 0.006);
  set(feat::inter_stroke_time, 3900.0, 300.0);
  set(feat::dev_p80, 0.07, 0.008);
  set(feat::dev_p20, 0.02, 0.003);
  set(feat::acc_p50, 0.1, 0.1);
  set(feat::mid_stroke_finger_orientation, 0.5, 0.1);
  set(feat::finger_orientation_change, 0.0, 0.05);
  return d;
}

// The features that carry per-user identity in separated presets: free,
// numeric, classification-relevant, and roomy enough that signature offsets
// survive range clipping.
inline const std::vector<std::size_t>& signature_feature_indices() {
  static const std::vector<std::size_t> indices = {
      feat::mid_stroke_area, feat::vel_p20,       feat::mid_stroke_pressure,
      feat::stop_x,          feat::start_x,       feat::start_y,
      feat::stop_y,          feat::duration,      feat::vel_p80,
      feat::median_vel_last3, feat::vel_p50,      feat::acc_p20,
      feat::max_deviation,   feat::acc_p80,       feat::median_acc_first5,
      feat::dev_p50,         feat::inter_stroke_time, feat::dev_p80,
      feat::dev_p20,         feat::acc_p50,
  };
  return indices;
}

struct SeparatedCorpusOptions {
  std::size_t n_users = 10;
  double separation_sigma = 2.0;  // mean offset between opposite signature codes
  std::uint64_t seed = 1;
  std::size_t sessions_week1 = 3;
  std::size_t sessions_week2 = 1;
  std::size_t strokes_per_session = 60;
  std::size_t phone_count = 1;
  // Per-phone mean offset, in units of each affected feature's stddev.
  double phone_offset_sigma = 0.0;
  double vertical_fraction = 1.0;  // per-stroke probability of a vertical stroke
};

// Users differ by random +-1 signature codes: each code shifts its feature's
// mean by separation_sigma * stddev / 2, so two users differ by
// separation_sigma * stddev on roughly half the signature features.
inline SyntheticCorpusSpec separated_corpus_spec(const SeparatedCorpusOptions& opt) {
  if (opt.n_users < 2) throw std::invalid_argument("separated_corpus_spec: need at least 2 users");
  if (opt.phone_count < 1) throw std::invalid_argument("separated_corpus_spec: need at least 1 phone");
  if (!(opt.vertical_fraction >= 0.0 && opt.vertical_fraction <= 1.0)) {
    throw std::invalid_argument("separated_corpus_spec: vertical_fraction outside [0,1]");
  }
  SyntheticCorpusSpec spec;
  spec.seed = opt.seed;
  spec.sessions_week1 = opt.sessions_week1;
  spec.sessions_week2 = opt.sessions_week2;
  spec.strokes_per_session = opt.strokes_per_session;

  // Device-characteristic features a phone shifts uniformly for its users.
  static const std::vector<std::size_t> device_features = {
      feat::mid_stroke_pressure, feat::mid_stroke_area, feat::vel_p50, feat::vel_p80,
      feat::duration,
  };

  for (std::size_t u = 0; u < opt.n_users; ++u) {
    SyntheticUserSpec user;
    std::string n = std::to_string(u + 1);
    if (n.size() < 2) n.insert(n.begin(), '0');
    user.user_id = "u" + n;
    const std::size_t phone_index = u % opt.phone_count;
    user.phone_id = "phone" + std::to_string(phone_index);
    user.vertical = base_feature_distribution(true);
    user.horizontal = base_feature_distribution(false);
    user.vertical_fraction = opt.vertical_fraction;

    Rng code_rng(derive_seed(opt.seed, "codes:" + user.user_id));
    for (std::size_t idx : signature_feature_indices()) {
      const double sign = code_rng.uniform() < 0.5 ? -1.0 : 1.0;
      const double offset_v = sign * opt.separation_sigma * user.vertical.stddev[idx] / 2.0;
      const double offset_h = sign * opt.separation_sigma * user.horizontal.stddev[idx] / 2.0;
      user.vertical.mean[idx] += offset_v;
      user.horizontal.mean[idx] += offset_h;
    }
    if (opt.phone_offset_sigma > 0.0) {
      Rng phone_rng(derive_seed(opt.seed, "phone:" + user.phone_id));
      for (std::size_t idx : device_features) {
        const double sign = phone_rng.uniform() < 0.5 ? -1.0 : 1.0;
        user.vertical.mean[idx] += sign * opt.phone_offset_sigma * user.vertical.stddev[idx];
        user.horizontal.mean[idx] += sign * opt.phone_offset_sigma * user.horizontal.stddev[idx];
      }
    }
    user.vertical.validate();
    user.horizontal.validate();
    spec.users.push_back(std::move(user));
  }
  return spec;
}

// ---------- raw-trace synthesis ----------

// Builds a straight-line constant-rate pixel trace whose extracted geometric
// features reproduce the vector's end points, duration, and timing. Used to
// exercise the full ingestion path against generated data.
inline Stroke generate_stroke_trace(const FeatureVector& f, const ScreenSpec& screen,
                                    std::int64_t start_t_ms, std::int64_t sample_period_ms = 20) {
  if (sample_period_ms < 1) throw std::invalid_argument("generate_stroke_trace: bad sample period");
  for (std::size_t required :
       {feat::start_x, feat::start_y, feat::stop_x, feat::stop_y, feat::duration}) {
    if (std::isnan(f.v[required])) {
      throw std::invalid_argument("generate_stroke_trace: vector lacks geometric features");
    }
  }
  const auto duration = static_cast<std::int64_t>(std::llround(f.v[feat::duration]));
  if (duration < 1) throw std::invalid_argument("generate_stroke_trace: non-positive duration");
  const auto n = static_cast<std::size_t>(
      std::max<std::int64_t>(2, duration / sample_period_ms + 1));

  const double fo_change =
      std::isnan(f.v[feat::finger_orientation_change]) ? 0.0 : f.v[feat::finger_orientation_change];
  const double fo_mid = std::isnan(f.v[feat::mid_stroke_finger_orientation])
                            ? 0.0
                            : f.v[feat::mid_stroke_finger_orientation];
  const double fo_start = fo_mid - fo_change / 2.0;

  Stroke s;
  s.user_id = f.user_id;
  s.doc_id = f.doc_id;
  s.phone_id = f.phone_id;
  s.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(n - 1);
    TouchEvent e;
    e.phone_id = f.phone_id;
    e.user_id = f.user_id;
    e.doc_id = f.doc_id;
    e.t = start_t_ms + static_cast<std::int64_t>(std::llround(u * static_cast<double>(duration)));
    e.action = i == 0 ? Action::down : (i + 1 == n ? Action::up : Action::move);
    e.phone_orientation = std::isnan(f.v[feat::phone_orientation])
                              ? PhoneOrientation::portrait
                              : static_cast<PhoneOrientation>(
                                    static_cast<int>(f.v[feat::phone_orientation]));
    e.x = (f.v[feat::start_x] + u * (f.v[feat::stop_x] - f.v[feat::start_x])) * screen.width_px;
    e.y = (f.v[feat::start_y] + u * (f.v[feat::stop_y] - f.v[feat::start_y])) * screen.height_px;
    e.pressure = std::isnan(f.v[feat::mid_stroke_pressure]) ? 0.5 : f.v[feat::mid_stroke_pressure];
    e.area = std::isnan(f.v[feat::mid_stroke_area]) ? 0.4 : f.v[feat::mid_stroke_area];
    e.finger_orientation = fo_start + u * fo_change;
    s.samples.push_back(std::move(e));
  }
  return s;
}

// Renders a generated corpus as raw touch events in the canonical log
// column order, sessions laid out on a per-session clock driven by each
// stroke's inter-stroke time.
inline std::vector<TouchEvent> generate_raw_events(const SyntheticCorpusSpec& spec,
                                                   const ScreenSpec& screen) {
  const Dataset data = generate_corpus(spec);
  std::vector<TouchEvent> events;
  std::map<std::pair<std::string, std::string>, std::int64_t> session_clock;
  for (const FeatureVector& f : data.features) {
    auto& clock = session_clock[{f.user_id, f.doc_id}];
    const std::int64_t gap =
        f.has(feat::inter_stroke_time)
            ? static_cast<std::int64_t>(std::llround(f.v[feat::inter_stroke_time]))
            : 0;
    const std::int64_t start_t = clock + std::max<std::int64_t>(gap, 1);
    const Stroke stroke = generate_stroke_trace(f, screen, start_t);
    clock = stroke.samples.back().t;
    for (const TouchEvent& e : stroke.samples) events.push_back(e);
  }
  return events;
}

// ---------- spec JSON ----------

inline nlohmann::json to_json(const FeatureDistribution& d) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t idx : free_feature_indices()) {
    j[std::string(kFeatureNames[idx])] = {{"mean", d.mean[idx]}, {"stddev", d.stddev[idx]}};
  }
  return j;
}

inline FeatureDistribution feature_distribution_from_json(const nlohmann::json& j) {
  FeatureDistribution d;
  for (std::size_t idx : free_feature_indices()) {
    const auto& e = j.at(std::string(kFeatureNames[idx]));
    d.mean[idx] = e.at("mean").get<double>();
    d.stddev[idx] = e.at("stddev").get<double>();
  }
  return d;
}

inline nlohmann::json to_json(const SyntheticCorpusSpec& spec) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["seed"] = spec.seed;
  j["sessions_week1"] = spec.sessions_week1;
  j["sessions_week2"] = spec.sessions_week2;
  j["strokes_per_session"] = spec.strokes_per_session;
  nlohmann::json users = nlohmann::json::array();
  for (const SyntheticUserSpec& u : spec.users) {
    nlohmann::json ju;
    ju["user_id"] = u.user_id;
    ju["phone_id"] = u.phone_id;
    ju["orientation"] = static_cast<int>(u.orientation);
    ju["vertical"] = to_json(u.vertical);
    ju["horizontal"] = to_json(u.horizontal);
    ju["vertical_fraction"] = u.vertical_fraction;
    ju["direction_wobble"] = u.direction_wobble;
    users.push_back(std::move(ju));
  }
  j["users"] = std::move(users);
  return j;
}

inline SyntheticCorpusSpec corpus_spec_from_json(const nlohmann::json& j) {
  if (j.at("format_version").get<int>() != 1) {
    throw std::runtime_error("corpus spec: unsupported format version");
  }
  SyntheticCorpusSpec spec;
  spec.seed = j.at("seed").get<std::uint64_t>();
  spec.sessions_week1 = j.at("sessions_week1").get<std::size_t>();
  spec.sessions_week2 = j.at("sessions_week2").get<std::size_t>();
  spec.strokes_per_session = j.at("strokes_per_session").get<std::size_t>();
  for (const auto& ju : j.at("users")) {
    SyntheticUserSpec u;
    u.user_id = ju.at("user_id").get<std::string>();
    u.phone_id = ju.at("phone_id").get<std::string>();
    u.orientation = static_cast<PhoneOrientation>(ju.at("orientation").get<int>());
    u.vertical = feature_distribution_from_json(ju.at("vertical"));
    u.horizontal = feature_distribution_from_json(ju.at("horizontal"));
    u.vertical_fraction = ju.at("vertical_fraction").get<double>();
    u.direction_wobble = ju.at("direction_wobble").get<double>();
    spec.users.push_back(std::move(u));
  }
  return spec;
}

}  // namespace touchauth
