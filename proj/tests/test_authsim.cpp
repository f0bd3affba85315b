#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "touchauth/authsim.hpp"
#include "touchauth/classify.hpp"
#include "touchauth/evaluate.hpp"
#include "touchauth/features.hpp"
#include "touchauth/ingest.hpp"
#include "oracles.hpp"

using namespace touchauth;

namespace {

// Feature vector whose only purpose is to carry a scripted per-stroke score
// (read back by a scorer that returns v[0]).
FeatureVector scripted(double score) {
  FeatureVector f;
  f.v[0] = score;
  return f;
}

double script_scorer(const FeatureVector& f) { return f.v[0]; }

double mean_fuse(std::span<const double> w) { return fuse_svm(w); }

AuthConfig immediate_config(std::size_t n, std::size_t stride, std::size_t t) {
  AuthConfig c;
  c.window_n = n;
  c.stride = stride;
  c.t_threshold = t;
  c.enrollment_target = 0;
  c.accept_threshold = 0.5;
  return c;
}

SyntheticUserSpec base_user(const std::string& id) {
  SyntheticUserSpec u;
  u.user_id = id;
  u.vertical = base_feature_distribution(true);
  u.horizontal = base_feature_distribution(false);
  return u;
}

}  // namespace

TEST_CASE("auth config validation", "[authsim]") {
  AuthConfig ok;
  REQUIRE_NOTHROW(ok.validate());

  AuthConfig bad_n;
  bad_n.window_n = 0;
  REQUIRE_THROWS_AS(bad_n.validate(), std::invalid_argument);

  AuthConfig bad_stride;
  bad_stride.stride = 0;
  REQUIRE_THROWS_AS(bad_stride.validate(), std::invalid_argument);

  AuthConfig bad_t;
  bad_t.t_threshold = 0;
  REQUIRE_THROWS_AS(bad_t.validate(), std::invalid_argument);

  REQUIRE_THROWS_AS(AuthSession(bad_n, script_scorer, mean_fuse), std::invalid_argument);
}

TEST_CASE("expected relogin interval", "[authsim]") {
  REQUIRE(expected_relogin_interval(0.5, 4.0) == Catch::Approx(8.0).margin(1e-12));
  REQUIRE(expected_relogin_interval(0.01, 3.9) == Catch::Approx(390.0).margin(1e-9));
  REQUIRE(expected_relogin_interval(1.0, 3.9) == Catch::Approx(3.9).margin(1e-12));
  REQUIRE(std::isinf(expected_relogin_interval(0.0, 3.9)));
  REQUIRE(expected_relogin_interval(0.0, 3.9) > 0.0);
  REQUIRE_THROWS_AS(expected_relogin_interval(-0.1, 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(expected_relogin_interval(1.5, 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(expected_relogin_interval(0.5, -1.0), std::invalid_argument);
}

TEST_CASE("enrollment completes exactly at the target stroke", "[authsim]") {
  AuthConfig config = immediate_config(1, 1, 1);
  config.enrollment_target = 3;
  AuthSession session(config, script_scorer, mean_fuse);
  REQUIRE(session.phase() == AuthPhase::enrolling);

  for (int i = 0; i < 2; ++i) {
    const AuthStep s = session.step(scripted(1.0));
    REQUIRE(s.phase == AuthPhase::enrolling);
    REQUIRE(s.event == AuthEvent::none);
    REQUIRE_FALSE(s.fused_score.has_value());
  }
  const AuthStep done = session.step(scripted(1.0));
  REQUIRE(done.phase == AuthPhase::authenticating);
  REQUIRE(done.event == AuthEvent::enrollment_complete);
  REQUIRE_FALSE(done.fused_score.has_value());
  REQUIRE(session.enrollment_buffer().size() == 3);

  // Enrollment strokes do not count toward the decision window: with n = 1
  // the very next stroke is the first decision.
  const AuthStep first = session.step(scripted(1.0));
  REQUIRE(first.event == AuthEvent::accepted);
  REQUIRE(first.fused_score.has_value());
}

TEST_CASE("zero enrollment target starts authenticating", "[authsim]") {
  AuthSession session(immediate_config(2, 1, 1), script_scorer, mean_fuse);
  REQUIRE(session.phase() == AuthPhase::authenticating);
  REQUIRE(session.enrollment_buffer().empty());
}

TEST_CASE("first decision lands exactly at stroke n", "[authsim]") {
  for (std::size_t n : {std::size_t{1}, std::size_t{2}, std::size_t{3}, std::size_t{5},
                        std::size_t{8}, std::size_t{11}}) {
    AuthSession session(immediate_config(n, 1, 3), script_scorer, mean_fuse);
    for (std::size_t i = 1; i < n; ++i) {
      const AuthStep s = session.step(scripted(1.0));
      INFO("n=" << n << " stroke=" << i);
      REQUIRE(s.event == AuthEvent::none);
      REQUIRE_FALSE(s.fused_score.has_value());
      REQUIRE(s.phase == AuthPhase::authenticating);
    }
    const AuthStep s = session.step(scripted(1.0));
    INFO("n=" << n << " decision stroke");
    REQUIRE(s.event == AuthEvent::accepted);
    REQUIRE(s.fused_score.has_value());
    REQUIRE(*s.fused_score == Catch::Approx(1.0).margin(1e-15));
  }
}

TEST_CASE("stride controls decision cadence after the first window", "[authsim]") {
  // n = 3, stride = 2: decisions at strokes 3, 5, 7, ...
  AuthSession session(immediate_config(3, 2, 99), script_scorer, mean_fuse);
  std::vector<std::size_t> decision_strokes;
  for (std::size_t stroke = 1; stroke <= 9; ++stroke) {
    const AuthStep s = session.step(scripted(1.0));
    if (s.fused_score.has_value()) decision_strokes.push_back(stroke);
  }
  REQUIRE(decision_strokes == std::vector<std::size_t>{3, 5, 7, 9});
}

TEST_CASE("sliding window fuses the most recent n scores", "[authsim]") {
  // n = 3, mean fusion, threshold 0.5. Scores 1,1,1,0,0,0 give window means
  // 1, 2/3, 1/3, 0 from stroke 3 on.
  AuthConfig config = immediate_config(3, 1, 99);
  AuthSession session(config, script_scorer, mean_fuse);
  session.step(scripted(1.0));
  session.step(scripted(1.0));

  AuthStep s = session.step(scripted(1.0));
  REQUIRE(*s.fused_score == Catch::Approx(1.0).margin(1e-15));
  REQUIRE(s.event == AuthEvent::accepted);

  s = session.step(scripted(0.0));
  REQUIRE(*s.fused_score == Catch::Approx(2.0 / 3.0).margin(1e-15));
  REQUIRE(s.event == AuthEvent::accepted);

  s = session.step(scripted(0.0));
  REQUIRE(*s.fused_score == Catch::Approx(1.0 / 3.0).margin(1e-15));
  REQUIRE(s.event == AuthEvent::rejected);
  REQUIRE(s.consecutive_rejections == 1);

  s = session.step(scripted(0.0));
  REQUIRE(*s.fused_score == Catch::Approx(0.0).margin(1e-15));
  REQUIRE(s.event == AuthEvent::rejected);
  REQUIRE(s.consecutive_rejections == 2);
}

TEST_CASE("acceptance resets the rejection counter", "[authsim]") {
  AuthSession session(immediate_config(1, 1, 3), script_scorer, mean_fuse);
  REQUIRE(session.step(scripted(0.0)).consecutive_rejections == 1);
  REQUIRE(session.step(scripted(0.0)).consecutive_rejections == 2);
  const AuthStep accept = session.step(scripted(1.0));
  REQUIRE(accept.event == AuthEvent::accepted);
  REQUIRE(accept.consecutive_rejections == 0);
  REQUIRE(session.consecutive_rejections() == 0);
  // The run starts over: two more rejections still do not lock out.
  REQUIRE(session.step(scripted(0.0)).event == AuthEvent::rejected);
  REQUIRE(session.step(scripted(0.0)).event == AuthEvent::rejected);
  REQUIRE(session.step(scripted(0.0)).event == AuthEvent::lockout);
}

TEST_CASE("lockout, blocked strokes, and unlock", "[authsim]") {
  AuthSession session(immediate_config(1, 1, 2), script_scorer, mean_fuse);
  REQUIRE(session.step(scripted(0.0)).event == AuthEvent::rejected);
  const AuthStep lock = session.step(scripted(0.0));
  REQUIRE(lock.event == AuthEvent::lockout);
  REQUIRE(lock.phase == AuthPhase::challenge);
  REQUIRE(lock.consecutive_rejections == 2);
  REQUIRE(session.phase() == AuthPhase::challenge);

  // Everything is refused until the explicit re-login, even perfect strokes.
  for (int i = 0; i < 4; ++i) {
    const AuthStep blocked = session.step(scripted(1.0));
    REQUIRE(blocked.event == AuthEvent::blocked);
    REQUIRE(blocked.phase == AuthPhase::challenge);
    REQUIRE_FALSE(blocked.fused_score.has_value());
  }

  session.unlock();
  REQUIRE(session.phase() == AuthPhase::authenticating);
  REQUIRE(session.consecutive_rejections() == 0);
  const AuthStep fresh = session.step(scripted(1.0));
  REQUIRE(fresh.event == AuthEvent::accepted);
}

TEST_CASE("unlock clears the score window", "[authsim]") {
  // n = 2: after unlock the session must see two fresh strokes before the
  // next decision, and old low scores must not linger in the window.
  AuthSession session(immediate_config(2, 1, 1), script_scorer, mean_fuse);
  session.step(scripted(0.0));
  REQUIRE(session.step(scripted(0.0)).event == AuthEvent::lockout);
  session.unlock();

  const AuthStep warmup = session.step(scripted(1.0));
  REQUIRE(warmup.event == AuthEvent::none);
  REQUIRE_FALSE(warmup.fused_score.has_value());
  const AuthStep decision = session.step(scripted(1.0));
  REQUIRE(decision.event == AuthEvent::accepted);
  REQUIRE(*decision.fused_score == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("unlock outside challenge is rejected", "[authsim]") {
  AuthSession authenticating(immediate_config(1, 1, 1), script_scorer, mean_fuse);
  REQUIRE_THROWS_AS(authenticating.unlock(), std::logic_error);

  AuthConfig enrolling_config = immediate_config(1, 1, 1);
  enrolling_config.enrollment_target = 5;
  AuthSession enrolling(enrolling_config, script_scorer, mean_fuse);
  REQUIRE_THROWS_AS(enrolling.unlock(), std::logic_error);
}

TEST_CASE("lockout position matches brute-force run scan for all short strings", "[authsim]") {
  // Exhaustive: every accept/reject string up to length 12, t in {1,2,3},
  // n = stride = 1 so each stroke is a decision. The session must lock out
  // exactly where a brute-force consecutive-run scanner says, and refuse
  // every stroke afterwards.
  for (std::size_t t = 1; t <= 3; ++t) {
    for (std::size_t len = 1; len <= 12; ++len) {
      for (std::uint32_t mask = 0; mask < (1u << len); ++mask) {
        std::vector<bool> accepts(len);
        for (std::size_t i = 0; i < len; ++i) accepts[i] = (mask >> i) & 1u;
        const std::size_t expected = oracle::lockout_index(accepts, t);

        AuthSession session(immediate_config(1, 1, t), script_scorer, mean_fuse);
        std::size_t got = static_cast<std::size_t>(-1);
        std::size_t run = 0;
        for (std::size_t i = 0; i < len; ++i) {
          const AuthStep s = session.step(scripted(accepts[i] ? 1.0 : 0.0));
          if (got != static_cast<std::size_t>(-1)) {
            INFO("t=" << t << " mask=" << mask << " len=" << len << " i=" << i);
            REQUIRE(s.event == AuthEvent::blocked);
            continue;
          }
          run = accepts[i] ? 0 : run + 1;
          INFO("t=" << t << " mask=" << mask << " len=" << len << " i=" << i);
          REQUIRE(s.consecutive_rejections == run);
          if (s.event == AuthEvent::lockout) {
            got = i;
          } else if (accepts[i]) {
            REQUIRE(s.event == AuthEvent::accepted);
          } else {
            REQUIRE(s.event == AuthEvent::rejected);
          }
        }
        INFO("t=" << t << " mask=" << mask << " len=" << len);
        REQUIRE(got == expected);
      }
    }
  }
}

TEST_CASE("session wired to a trained knn model", "[authsim]") {
  // Two clearly separated 2-d classes; the model is consulted through the
  // feature-index mapping, so scores must match the standalone classifier.
  Matrix genuine, impostor;
  Rng data_rng(7);
  for (int i = 0; i < 20; ++i) {
    genuine.push_back({data_rng.normal() * 0.1, data_rng.normal() * 0.1});
    impostor.push_back({10.0 + data_rng.normal() * 0.1, 10.0 + data_rng.normal() * 0.1});
  }
  Matrix all = genuine;
  all.insert(all.end(), impostor.begin(), impostor.end());

  UserModel model;
  model.user_id = "u1";
  model.kind = ClassifierKind::knn;
  model.standardizer = Standardizer::fit(all);
  Rng train_rng(42);
  model.knn = knn_train(model.standardizer.apply_all(genuine),
                        model.standardizer.apply_all(impostor), {}, train_rng);

  const std::vector<std::size_t> indices = {feat::mid_stroke_area, feat::vel_p20};
  AuthConfig config = immediate_config(2, 1, 1);
  AuthSession session = AuthSession::with_model(config, model, indices);

  auto stroke_at = [&](double a, double b) {
    FeatureVector f;
    f.v[feat::mid_stroke_area] = a;
    f.v[feat::vel_p20] = b;
    return f;
  };

  session.step(stroke_at(0.05, -0.02));
  const AuthStep good = session.step(stroke_at(-0.03, 0.04));
  REQUIRE(good.event == AuthEvent::accepted);
  REQUIRE(*good.fused_score == Catch::Approx(1.0).margin(1e-12));

  // Fresh session fed impostor strokes locks out on its first decision.
  AuthSession hostile = AuthSession::with_model(config, model, indices);
  hostile.step(stroke_at(10.1, 9.9));
  const AuthStep bad = hostile.step(stroke_at(9.8, 10.2));
  REQUIRE(bad.event == AuthEvent::lockout);
  REQUIRE(*bad.fused_score == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("session wired to a trained svm model", "[authsim]") {
  Matrix genuine, impostor;
  Rng data_rng(11);
  for (int i = 0; i < 15; ++i) {
    genuine.push_back({data_rng.normal() * 0.2, data_rng.normal() * 0.2});
    impostor.push_back({6.0 + data_rng.normal() * 0.2, 6.0 + data_rng.normal() * 0.2});
  }
  Matrix all = genuine;
  all.insert(all.end(), impostor.begin(), impostor.end());

  UserModel model;
  model.user_id = "u2";
  model.kind = ClassifierKind::svm;
  model.standardizer = Standardizer::fit(all, /*use_minmax=*/true);
  SvmGrid grid;
  grid.Cs = {1.0};
  grid.gammas = {0.5};
  Rng train_rng(26);
  model.svm = svm_train(model.standardizer.apply_all(genuine),
                        model.standardizer.apply_all(impostor), grid, train_rng, 3)
                  .model;

  const std::vector<std::size_t> indices = {feat::mid_stroke_area, feat::vel_p20};
  AuthConfig config = immediate_config(2, 1, 1);
  config.accept_threshold = 0.0;  // SVM fusion averages signed decision values
  AuthSession session = AuthSession::with_model(config, model, indices);

  auto stroke_at = [&](double a, double b) {
    FeatureVector f;
    f.v[feat::mid_stroke_area] = a;
    f.v[feat::vel_p20] = b;
    return f;
  };

  session.step(stroke_at(0.1, -0.1));
  const AuthStep good = session.step(stroke_at(-0.1, 0.1));
  REQUIRE(good.event == AuthEvent::accepted);
  REQUIRE(*good.fused_score > 0.0);

  AuthSession hostile = AuthSession::with_model(config, model, indices);
  hostile.step(stroke_at(6.1, 5.9));
  const AuthStep bad = hostile.step(stroke_at(5.9, 6.1));
  REQUIRE(bad.event == AuthEvent::lockout);
  REQUIRE(*bad.fused_score < 0.0);
}

TEST_CASE("phase and event names round-trip", "[authsim]") {
  REQUIRE(auth_phase_name(AuthPhase::enrolling) == "enrolling");
  REQUIRE(auth_phase_name(AuthPhase::authenticating) == "authenticating");
  REQUIRE(auth_phase_name(AuthPhase::challenge) == "challenge");
  REQUIRE(auth_event_name(AuthEvent::none) == "none");
  REQUIRE(auth_event_name(AuthEvent::enrollment_complete) == "enrollment_complete");
  REQUIRE(auth_event_name(AuthEvent::accepted) == "accepted");
  REQUIRE(auth_event_name(AuthEvent::rejected) == "rejected");
  REQUIRE(auth_event_name(AuthEvent::lockout) == "lockout");
  REQUIRE(auth_event_name(AuthEvent::blocked) == "blocked");
}

// ---------- synthetic generator ----------

TEST_CASE("free feature indices exclude derived features", "[authsim][synthetic]") {
  const std::vector<std::size_t>& free = free_feature_indices();
  REQUIRE(free.size() == kFeatureCount - 7);
  REQUIRE(std::is_sorted(free.begin(), free.end()));
  const std::set<std::size_t> as_set(free.begin(), free.end());
  REQUIRE(as_set.size() == free.size());
  for (std::size_t derived : {feat::end_to_end_dist, feat::end_to_end_direction,
                              feat::trajectory_length, feat::avg_velocity, feat::avg_direction,
                              feat::direction_flag, feat::phone_orientation}) {
    REQUIRE_FALSE(as_set.count(derived));
  }
  REQUIRE(as_set.count(feat::mid_stroke_area));
  REQUIRE(as_set.count(feat::duration));
  REQUIRE(as_set.count(feat::inter_stroke_time));
}

TEST_CASE("feature ranges", "[authsim][synthetic]") {
  REQUIRE(feature_range(feat::start_x).lo == 0.0);
  REQUIRE(feature_range(feat::start_x).hi == 1.0);
  REQUIRE(feature_range(feat::ratio_dist_traj).lo == 0.05);
  REQUIRE(feature_range(feat::ratio_dist_traj).hi == 1.0);
  REQUIRE(feature_range(feat::duration).lo == 1.0);
  REQUIRE(std::isinf(feature_range(feat::duration).hi));
  REQUIRE(feature_range(feat::max_deviation).lo == -0.7);
  REQUIRE(feature_range(feat::max_deviation).hi == 0.7);
  REQUIRE(feature_range(feat::dev_p50).lo == 0.0);
  REQUIRE(feature_range(feat::dev_p50).hi == 0.7);
  REQUIRE(std::isinf(feature_range(feat::acc_p20).lo));
  REQUIRE(std::isinf(feature_range(feat::acc_p20).hi));
}

TEST_CASE("distribution validation names the offending feature", "[authsim][synthetic]") {
  FeatureDistribution good = base_feature_distribution(true);
  REQUIRE_NOTHROW(good.validate());

  FeatureDistribution zero_sigma = good;
  zero_sigma.stddev[feat::duration] = 0.0;
  REQUIRE_THROWS_WITH(zero_sigma.validate(), Catch::Matchers::ContainsSubstring("duration"));

  FeatureDistribution bad_mean = good;
  bad_mean.mean[feat::ratio_dist_traj] = 1.5;
  REQUIRE_THROWS_WITH(bad_mean.validate(), Catch::Matchers::ContainsSubstring("ratio_dist_traj"));

  FeatureDistribution negative_pressure = good;
  negative_pressure.mean[feat::mid_stroke_pressure] = -0.2;
  REQUIRE_THROWS_WITH(negative_pressure.validate(),
                      Catch::Matchers::ContainsSubstring("mid_stroke_pressure"));
}

TEST_CASE("generated sessions are deterministic and well-formed", "[authsim][synthetic]") {
  const SyntheticUserSpec spec = base_user("u01");
  Rng rng_a(1234), rng_b(1234);
  const std::vector<FeatureVector> a = generate_session(spec, "s01_w1", 40, rng_a);
  const std::vector<FeatureVector> b = generate_session(spec, "s01_w1", 40, rng_b);
  REQUIRE(a.size() == 40);
  REQUIRE(b.size() == 40);
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].direction_class == b[i].direction_class);
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      if (std::isnan(a[i].v[j])) {
        REQUIRE(std::isnan(b[i].v[j]));
      } else {
        REQUIRE(a[i].v[j] == b[i].v[j]);
      }
    }
  }

  for (std::size_t i = 0; i < a.size(); ++i) {
    const FeatureVector& f = a[i];
    REQUIRE(f.user_id == "u01");
    REQUIRE(f.doc_id == "s01_w1");
    REQUIRE(f.phone_id == "phone0");
    REQUIRE(f.stroke_index_in_session == i);

    if (i == 0) {
      REQUIRE_FALSE(f.has(feat::inter_stroke_time));
      REQUIRE_FALSE(f.is_complete());
    } else {
      REQUIRE(f.is_complete());
      REQUIRE(f.v[feat::inter_stroke_time] >= 0.0);
    }

    for (std::size_t idx : free_feature_indices()) {
      if (idx == feat::inter_stroke_time && i == 0) continue;
      const FeatureRange r = feature_range(idx);
      REQUIRE(f.v[idx] >= r.lo);
      REQUIRE(f.v[idx] <= r.hi);
    }

    // Derived features reproduce their defining identities bit-for-bit.
    const double dx = f.v[feat::stop_x] - f.v[feat::start_x];
    const double dy = f.v[feat::stop_y] - f.v[feat::start_y];
    const double e2e = std::sqrt(dx * dx + dy * dy);
    REQUIRE(f.v[feat::end_to_end_dist] == e2e);
    REQUIRE(f.v[feat::trajectory_length] == e2e / f.v[feat::ratio_dist_traj]);
    REQUIRE(f.v[feat::trajectory_length] >= f.v[feat::end_to_end_dist]);
    REQUIRE(f.v[feat::avg_velocity] == e2e / (f.v[feat::duration] / 1000.0));
    REQUIRE(f.v[feat::direction_flag] ==
            static_cast<double>(static_cast<int>(f.direction_class)));
    REQUIRE(f.v[feat::avg_direction] > -kPi);
    REQUIRE(f.v[feat::avg_direction] <= kPi);
    REQUIRE(f.v[feat::phone_orientation] == 0.0);
    REQUIRE(f.v[feat::mean_resultant_length] >= 0.0);
    REQUIRE(f.v[feat::mean_resultant_length] <= 1.0);

    // Direction class matches the end points (vertical_fraction = 1).
    const double fy = -dy;
    REQUIRE(std::abs(fy) > std::abs(dx));
    REQUIRE((f.direction_class == DirectionClass::up || f.direction_class == DirectionClass::down));
    if (f.direction_class == DirectionClass::up) {
      REQUIRE(fy > 0.0);
    } else {
      REQUIRE(fy < 0.0);
    }
  }
}

TEST_CASE("horizontal sessions produce left/right strokes", "[authsim][synthetic]") {
  SyntheticUserSpec spec = base_user("u02");
  spec.vertical_fraction = 0.0;
  spec.orientation = PhoneOrientation::landscape;
  Rng rng(99);
  const std::vector<FeatureVector> session = generate_session(spec, "s01_w1", 30, rng);
  for (const FeatureVector& f : session) {
    const double dx = f.v[feat::stop_x] - f.v[feat::start_x];
    const double fy = -(f.v[feat::stop_y] - f.v[feat::start_y]);
    REQUIRE(std::abs(dx) >= std::abs(fy));
    REQUIRE((f.direction_class == DirectionClass::left ||
             f.direction_class == DirectionClass::right));
    REQUIRE(f.v[feat::phone_orientation] == 1.0);
  }
}

TEST_CASE("invalid user spec is rejected at generation time", "[authsim][synthetic]") {
  SyntheticUserSpec spec = base_user("u03");
  spec.vertical.stddev[feat::vel_p50] = -1.0;
  Rng rng(1);
  REQUIRE_THROWS_WITH(generate_session(spec, "s01_w1", 5, rng),
                      Catch::Matchers::ContainsSubstring("vel_p50"));
}

TEST_CASE("synthetic doc ids are zero-padded and week-tagged", "[authsim][synthetic]") {
  REQUIRE(synthetic_doc_id(0, 1) == "s01_w1");
  REQUIRE(synthetic_doc_id(3, 2) == "s04_w2");
  REQUIRE(synthetic_doc_id(9, 1) == "s10_w1");
  REQUIRE(synthetic_doc_id(10, 2) == "s11_w2");
}

TEST_CASE("corpus layout and week tagging", "[authsim][synthetic]") {
  SyntheticCorpusSpec spec;
  spec.seed = 555;
  spec.sessions_week1 = 2;
  spec.sessions_week2 = 1;
  spec.strokes_per_session = 5;
  spec.users.push_back(base_user("alice"));
  spec.users.push_back(base_user("bob"));

  const Dataset data = generate_corpus(spec);
  REQUIRE(data.features.size() == 2 * 3 * 5);
  REQUIRE(data.week_of_doc.size() == 3);
  REQUIRE(data.week_of_doc.at("s01_w1") == 1);
  REQUIRE(data.week_of_doc.at("s02_w1") == 1);
  REQUIRE(data.week_of_doc.at("s03_w2") == 2);

  // User-major, then session-major, then stroke order.
  REQUIRE(data.features[0].user_id == "alice");
  REQUIRE(data.features[0].doc_id == "s01_w1");
  REQUIRE(data.features[14].user_id == "alice");
  REQUIRE(data.features[14].doc_id == "s03_w2");
  REQUIRE(data.features[15].user_id == "bob");
  REQUIRE(data.features[15].doc_id == "s01_w1");
  for (std::size_t i = 0; i < data.features.size(); ++i) {
    REQUIRE(data.features[i].stroke_index_in_session == i % 5);
  }

  SyntheticCorpusSpec empty = spec;
  empty.users.clear();
  REQUIRE_THROWS_AS(generate_corpus(empty), std::invalid_argument);
}

TEST_CASE("any user subset regenerates identically", "[authsim][synthetic]") {
  SyntheticCorpusSpec full;
  full.seed = 777;
  full.sessions_week1 = 2;
  full.sessions_week2 = 1;
  full.strokes_per_session = 8;
  full.users.push_back(base_user("alice"));
  full.users.push_back(base_user("bob"));

  SyntheticCorpusSpec only_bob = full;
  only_bob.users = {base_user("bob")};

  const Dataset whole = generate_corpus(full);
  const Dataset rerun = generate_corpus(full);
  const Dataset subset = generate_corpus(only_bob);

  auto rows_of = [](const Dataset& d, const std::string& user) {
    std::vector<const FeatureVector*> rows;
    for (const FeatureVector& f : d.features) {
      if (f.user_id == user) rows.push_back(&f);
    }
    return rows;
  };

  const auto bob_full = rows_of(whole, "bob");
  const auto bob_rerun = rows_of(rerun, "bob");
  const auto bob_subset = rows_of(subset, "bob");
  REQUIRE(bob_full.size() == 3 * 8);
  REQUIRE(bob_subset.size() == bob_full.size());
  for (std::size_t i = 0; i < bob_full.size(); ++i) {
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      if (std::isnan(bob_full[i]->v[j])) {
        REQUIRE(std::isnan(bob_rerun[i]->v[j]));
        REQUIRE(std::isnan(bob_subset[i]->v[j]));
      } else {
        REQUIRE(bob_full[i]->v[j] == bob_rerun[i]->v[j]);
        REQUIRE(bob_full[i]->v[j] == bob_subset[i]->v[j]);
      }
    }
  }
}

TEST_CASE("separated corpus spec shifts signature features", "[authsim][synthetic]") {
  SeparatedCorpusOptions opt;
  opt.n_users = 4;
  opt.separation_sigma = 2.0;
  opt.seed = 1001;
  const SyntheticCorpusSpec spec = separated_corpus_spec(opt);

  REQUIRE(spec.users.size() == 4);
  REQUIRE(spec.users[0].user_id == "u01");
  REQUIRE(spec.users[3].user_id == "u04");
  for (const SyntheticUserSpec& u : spec.users) REQUIRE(u.phone_id == "phone0");

  const FeatureDistribution base_v = base_feature_distribution(true);
  const std::set<std::size_t> signature(signature_feature_indices().begin(),
                                        signature_feature_indices().end());
  for (const SyntheticUserSpec& u : spec.users) {
    for (std::size_t idx : free_feature_indices()) {
      const double diff = u.vertical.mean[idx] - base_v.mean[idx];
      if (signature.count(idx)) {
        // separation 2 shifts each signature mean by exactly one stddev.
        REQUIRE(std::abs(diff) == Catch::Approx(base_v.stddev[idx]).margin(1e-12));
      } else {
        REQUIRE(diff == 0.0);
      }
      REQUIRE(u.vertical.stddev[idx] == base_v.stddev[idx]);
    }
  }

  // Codes differ between users: not every pair may match, and per-user codes
  // are stable across calls.
  const SyntheticCorpusSpec again = separated_corpus_spec(opt);
  bool any_pair_differs = false;
  for (std::size_t idx : signature_feature_indices()) {
    REQUIRE(again.users[1].vertical.mean[idx] == spec.users[1].vertical.mean[idx]);
    if (spec.users[0].vertical.mean[idx] != spec.users[1].vertical.mean[idx]) {
      any_pair_differs = true;
    }
  }
  REQUIRE(any_pair_differs);

  REQUIRE_THROWS_AS(separated_corpus_spec(SeparatedCorpusOptions{.n_users = 1}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(separated_corpus_spec(SeparatedCorpusOptions{.phone_count = 0}),
                    std::invalid_argument);
}

TEST_CASE("phone offsets shift device features per phone", "[authsim][synthetic]") {
  SeparatedCorpusOptions flat;
  flat.n_users = 4;
  flat.phone_count = 2;
  flat.seed = 31337;
  SeparatedCorpusOptions shifted = flat;
  shifted.phone_offset_sigma = 1.0;

  const SyntheticCorpusSpec a = separated_corpus_spec(flat);
  const SyntheticCorpusSpec b = separated_corpus_spec(shifted);

  REQUIRE(a.users[0].phone_id == "phone0");
  REQUIRE(a.users[1].phone_id == "phone1");
  REQUIRE(a.users[2].phone_id == "phone0");
  REQUIRE(a.users[3].phone_id == "phone1");

  const std::set<std::size_t> device = {feat::mid_stroke_pressure, feat::mid_stroke_area,
                                        feat::vel_p50, feat::vel_p80, feat::duration};
  for (std::size_t u = 0; u < 4; ++u) {
    for (std::size_t idx : free_feature_indices()) {
      const double diff = b.users[u].vertical.mean[idx] - a.users[u].vertical.mean[idx];
      if (device.count(idx)) {
        REQUIRE(std::abs(diff) ==
                Catch::Approx(a.users[u].vertical.stddev[idx]).margin(1e-12));
      } else {
        REQUIRE(diff == 0.0);
      }
    }
  }

  // Users sharing a phone get the same device shift, sign included.
  for (std::size_t idx : device) {
    const double shift_u1 = b.users[0].vertical.mean[idx] - a.users[0].vertical.mean[idx];
    const double shift_u3 = b.users[2].vertical.mean[idx] - a.users[2].vertical.mean[idx];
    const double shift_u2 = b.users[1].vertical.mean[idx] - a.users[1].vertical.mean[idx];
    const double shift_u4 = b.users[3].vertical.mean[idx] - a.users[3].vertical.mean[idx];
    REQUIRE(shift_u1 == Catch::Approx(shift_u3).margin(1e-15));
    REQUIRE(shift_u2 == Catch::Approx(shift_u4).margin(1e-15));
  }
}

TEST_CASE("corpus spec json round-trip", "[authsim][synthetic]") {
  SeparatedCorpusOptions opt;
  opt.n_users = 3;
  opt.seed = 12;
  opt.phone_count = 2;
  opt.phone_offset_sigma = 0.5;
  const SyntheticCorpusSpec spec = separated_corpus_spec(opt);

  const nlohmann::json j = to_json(spec);
  REQUIRE(j.at("format_version").get<int>() == 1);
  const SyntheticCorpusSpec back = corpus_spec_from_json(j);
  REQUIRE(to_json(back).dump() == j.dump());
  REQUIRE(back.users.size() == 3);
  REQUIRE(back.users[1].phone_id == "phone1");
  REQUIRE(back.users[0].vertical.mean[feat::duration] ==
          spec.users[0].vertical.mean[feat::duration]);

  // Round-tripped specs generate the identical corpus.
  const Dataset d1 = generate_corpus(spec);
  const Dataset d2 = generate_corpus(back);
  REQUIRE(d1.features.size() == d2.features.size());
  for (std::size_t i = 0; i < d1.features.size(); i += 17) {
    for (std::size_t k = 0; k < kFeatureCount; ++k) {
      if (std::isnan(d1.features[i].v[k])) {
        REQUIRE(std::isnan(d2.features[i].v[k]));
      } else {
        REQUIRE(d1.features[i].v[k] == d2.features[i].v[k]);
      }
    }
  }

  nlohmann::json bad = j;
  bad["format_version"] = 2;
  REQUIRE_THROWS_AS(corpus_spec_from_json(bad), std::runtime_error);
}

// ---------- raw-trace synthesis ----------

TEST_CASE("stroke trace golden", "[authsim][synthetic]") {
  FeatureVector f;
  f.user_id = "u01";
  f.doc_id = "s01_w1";
  f.phone_id = "phoneA";
  f.v[feat::start_x] = 0.25;
  f.v[feat::start_y] = 0.75;
  f.v[feat::stop_x] = 0.75;
  f.v[feat::stop_y] = 0.25;
  f.v[feat::duration] = 100.0;
  f.v[feat::mid_stroke_pressure] = 0.6;
  f.v[feat::mid_stroke_area] = 0.3;
  f.v[feat::mid_stroke_finger_orientation] = 0.5;
  f.v[feat::finger_orientation_change] = 0.2;
  f.v[feat::phone_orientation] = 1.0;

  ScreenSpec screen;
  screen.phone_id = "phoneA";
  screen.width_px = 480.0;
  screen.height_px = 800.0;

  const Stroke s = generate_stroke_trace(f, screen, 1000);
  REQUIRE(s.samples.size() == 6);  // 100 ms / 20 ms + 1
  REQUIRE(s.user_id == "u01");
  REQUIRE(s.phone_id == "phoneA");

  REQUIRE(s.samples.front().action == Action::down);
  REQUIRE(s.samples.back().action == Action::up);
  for (std::size_t i = 1; i + 1 < s.samples.size(); ++i) {
    REQUIRE(s.samples[i].action == Action::move);
  }

  REQUIRE(s.samples.front().t == 1000);
  REQUIRE(s.samples[1].t == 1020);
  REQUIRE(s.samples.back().t == 1100);

  REQUIRE(s.samples.front().x == Catch::Approx(0.25 * 480.0).margin(1e-9));
  REQUIRE(s.samples.front().y == Catch::Approx(0.75 * 800.0).margin(1e-9));
  REQUIRE(s.samples.back().x == Catch::Approx(0.75 * 480.0).margin(1e-9));
  REQUIRE(s.samples.back().y == Catch::Approx(0.25 * 800.0).margin(1e-9));

  for (const TouchEvent& e : s.samples) {
    REQUIRE(e.pressure == 0.6);
    REQUIRE(e.area == 0.3);
    REQUIRE(e.phone_orientation == PhoneOrientation::landscape);
  }
  REQUIRE(s.samples.front().finger_orientation == Catch::Approx(0.4).margin(1e-12));
  REQUIRE(s.samples.back().finger_orientation == Catch::Approx(0.6).margin(1e-12));

  // A 1 ms stroke still produces the minimal down/up pair.
  FeatureVector tiny = f;
  tiny.v[feat::duration] = 1.0;
  const Stroke shortest = generate_stroke_trace(tiny, screen, 50);
  REQUIRE(shortest.samples.size() == 2);
  REQUIRE(shortest.samples.front().t == 50);
  REQUIRE(shortest.samples.back().t == 51);

  REQUIRE_THROWS_AS(generate_stroke_trace(f, screen, 0, 0), std::invalid_argument);
  FeatureVector no_geometry = f;
  no_geometry.v[feat::start_x] = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_THROWS_AS(generate_stroke_trace(no_geometry, screen, 0), std::invalid_argument);
  FeatureVector zero_duration = f;
  zero_duration.v[feat::duration] = 0.3;
  REQUIRE_THROWS_AS(generate_stroke_trace(zero_duration, screen, 0), std::invalid_argument);
}

TEST_CASE("trace extraction reproduces the generating vector", "[authsim][synthetic]") {
  // Generate feature vectors, render them as pixel traces, run the real
  // normalize + extract path, and compare the geometric features.
  ScreenSpec screen;
  screen.phone_id = "phone0";
  screen.width_px = 480.0;
  screen.height_px = 800.0;

  const SyntheticUserSpec user = base_user("u01");
  Rng rng(2024);
  const std::vector<FeatureVector> session = generate_session(user, "s01_w1", 25, rng);

  for (const FeatureVector& f : session) {
    const Stroke trace = generate_stroke_trace(f, screen, 5000);
    const Stroke normalized = normalize(trace, screen);
    const FeatureVector got = extract_features(normalized);

    REQUIRE(got.v[feat::start_x] == Catch::Approx(f.v[feat::start_x]).margin(1e-9));
    REQUIRE(got.v[feat::start_y] == Catch::Approx(f.v[feat::start_y]).margin(1e-9));
    REQUIRE(got.v[feat::stop_x] == Catch::Approx(f.v[feat::stop_x]).margin(1e-9));
    REQUIRE(got.v[feat::stop_y] == Catch::Approx(f.v[feat::stop_y]).margin(1e-9));
    REQUIRE(got.v[feat::duration] ==
            Catch::Approx(std::llround(f.v[feat::duration])).margin(1e-9));
    REQUIRE(got.v[feat::end_to_end_dist] ==
            Catch::Approx(f.v[feat::end_to_end_dist]).margin(1e-9));
    REQUIRE(got.v[feat::end_to_end_direction] ==
            Catch::Approx(f.v[feat::end_to_end_direction]).margin(1e-9));
    REQUIRE(got.v[feat::mid_stroke_pressure] ==
            Catch::Approx(f.v[feat::mid_stroke_pressure]).margin(1e-12));
    REQUIRE(got.v[feat::mid_stroke_area] ==
            Catch::Approx(f.v[feat::mid_stroke_area]).margin(1e-12));
    REQUIRE(got.v[feat::finger_orientation_change] ==
            Catch::Approx(f.v[feat::finger_orientation_change]).margin(1e-9));
    REQUIRE(got.v[feat::phone_orientation] == f.v[feat::phone_orientation]);
    REQUIRE(got.direction_class == f.direction_class);

    // The rendered trace is a straight constant-speed line, so the path
    // ratio collapses to 1 and the direction stays perfectly concentrated.
    REQUIRE(got.v[feat::ratio_dist_traj] == Catch::Approx(1.0).margin(1e-9));
    REQUIRE(got.v[feat::mean_resultant_length] == Catch::Approx(1.0).margin(1e-9));
    REQUIRE(got.v[feat::max_deviation] == Catch::Approx(0.0).margin(1e-9));

    // Constant speed: velocity percentiles all sit near distance/duration.
    const double avg_vel =
        got.v[feat::end_to_end_dist] / (got.v[feat::duration] / 1000.0);
    REQUIRE(got.v[feat::vel_p50] == Catch::Approx(avg_vel).epsilon(0.15));
  }
}

TEST_CASE("raw events survive the full ingestion pipeline", "[authsim][synthetic]") {
  SeparatedCorpusOptions opt;
  opt.n_users = 2;
  opt.seed = 424242;
  opt.sessions_week1 = 2;
  opt.sessions_week2 = 1;
  opt.strokes_per_session = 12;
  const SyntheticCorpusSpec spec = separated_corpus_spec(opt);

  ScreenSpec screen;
  screen.phone_id = "phone0";
  screen.width_px = 480.0;
  screen.height_px = 800.0;

  const std::vector<TouchEvent> events = generate_raw_events(spec, screen);
  REQUIRE_FALSE(events.empty());
  for (const TouchEvent& e : events) REQUIRE(e.phone_id == "phone0");

  // Events are laid out session by session in generation order, so the
  // session-splitting segmenter applies directly.
  const SegmentResult seg = segment_log(events);
  REQUIRE(seg.diagnostics.empty());
  REQUIRE(seg.strokes.size() == 2 * 3 * 12);

  // Every synthetic stroke is a real swipe; the click filter keeps them all.
  std::vector<Stroke> swipes = filter_clicks(
      [&] {
        std::vector<Stroke> normalized;
        normalized.reserve(seg.strokes.size());
        for (const Stroke& s : seg.strokes) normalized.push_back(normalize(s, screen));
        return normalized;
      }(),
      0.05);
  REQUIRE(swipes.size() == seg.strokes.size());

  const std::vector<FeatureVector> features = extract_all(swipes);
  REQUIRE(features.size() == swipes.size());

  // Sessions carry their own clocks: strokes after the first have the
  // generated inter-stroke gaps, within rounding.
  std::size_t with_inter = 0;
  for (const FeatureVector& f : features) {
    if (f.stroke_index_in_session == 0) {
      REQUIRE_FALSE(f.has(feat::inter_stroke_time));
    } else {
      REQUIRE(f.has(feat::inter_stroke_time));
      ++with_inter;
    }
    REQUIRE(f.v[feat::start_x] >= 0.0);
    REQUIRE(f.v[feat::start_x] <= 1.0);
    REQUIRE(f.v[feat::duration] >= 1.0);
  }
  REQUIRE(with_inter == features.size() - 2 * 3);

  // The recovered inter-stroke gaps match the generating vectors.
  const Dataset source = generate_corpus(spec);
  REQUIRE(source.features.size() == features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    REQUIRE(features[i].user_id == source.features[i].user_id);
    REQUIRE(features[i].doc_id == source.features[i].doc_id);
    if (features[i].has(feat::inter_stroke_time)) {
      REQUIRE(features[i].v[feat::inter_stroke_time] ==
              Catch::Approx(source.features[i].v[feat::inter_stroke_time]).margin(1.0));
    }
  }
}
