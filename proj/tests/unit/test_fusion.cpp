#include "doctest.h"

#include <functional>
#include <random>

#include "fixtures.hpp"
#include "gazefuse/error.hpp"
#include "gazefuse/fusion.hpp"
#include "gazefuse/metrics.hpp"
#include "oracles.hpp"

using namespace gazefuse;

namespace {

ScoreVector pair_of(const std::string& e, const std::string& a, double ekyt, double spatial,
                    Task task = Task::RAN) {
  ScoreVector v;
  v.enroll = {e, 1, 2, task};
  v.auth = {a, 1, 1, task};
  v.label = label_for(v.enroll, v.auth);
  (task == Task::RAN ? v.s_ekyt_ran : v.s_ekyt_tex) = ekyt;
  v.s_spatial = spatial;
  return v;
}

double oracle_eer_at(std::span<const ScoreVector> pairs, double alpha) {
  std::vector<double> g, i;
  for (const auto& p : pairs)
    (is_genuine(p.label) ? g : i).push_back(alpha * *p.ekyt() + (1 - alpha) * *p.s_spatial);
  return oracle::eer_bruteforce(g, i);
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Io;
}

}  // namespace

TEST_CASE("weighted_fuse") {
  CHECK(weighted_fuse(0.37, 0.9, 1.0) == 0.37);
  CHECK(weighted_fuse(0.8, 0.2, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
  for (double a : {0.5, 0.61, 0.77, 0.9, 1.0}) CHECK(weighted_fuse(0.42, 0.42, a) == doctest::Approx(0.42).epsilon(1e-15));
  CHECK(code_of([] { weighted_fuse(0.5, 0.5, 1.01); }) == ErrorCode::AlphaOutOfRange);
  CHECK(code_of([] { weighted_fuse(0.5, 0.5, -0.1); }) == ErrorCode::AlphaOutOfRange);
}

TEST_CASE("sweep_alpha") {
  SUBCASE("perfect EKYT with noise spatial keeps alpha 1") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0, 1);
    const auto pairs = fixtures::scored_pairs(
        10, Task::RAN, rng, [](bool g, auto& r) { return g ? 0.9 + 0.05 * std::uniform_real_distribution<>(0, 1)(r) : 0.5 * std::uniform_real_distribution<>(0, 1)(r); },
        [&](bool, auto& r) { return u(r); });
    const auto s = sweep_alpha(pairs);
    CHECK(s.best_alpha == 1.0);
    CHECK(s.best_eer == 0.0);
  }
  SUBCASE("only alpha 0.70 separates the hand-built instance") {
    // G1 beats I1 only for alpha > 0.695, G2 beats I2 only for alpha < 0.705
    const std::vector<ScoreVector> pairs{
        pair_of("A", "A", 0.30, 0.0),   pair_of("A", "B", 0.0, 0.6836),
        pair_of("B", "B", 0.0, 0.705),  pair_of("B", "A", 0.295, 0.0),
        pair_of("C", "C", 1.0, 1.0),    pair_of("C", "A", 0.0, 0.0),
    };
    int zero_count = 0;
    double zero_alpha = -1;
    for (int p = 50; p <= 100; ++p)
      if (oracle_eer_at(pairs, p / 100.0) == 0.0) {
        ++zero_count;
        zero_alpha = p / 100.0;
      }
    REQUIRE(zero_count == 1);
    CHECK(zero_alpha == 0.70);
    const auto s = sweep_alpha(pairs);
    CHECK(s.best_alpha == 0.70);
    CHECK(s.best_eer == 0.0);
    CHECK(s.baseline_eer > 0.0);
  }
  SUBCASE("51 evaluations and never worse than alpha 1") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> z(0, 1);
    const auto pairs = fixtures::scored_pairs(
        12, Task::TEX, rng, [&](bool g, auto& r) { return z(r) + (g ? 1.5 : 0.0); },
        [&](bool g, auto& r) { return z(r) + (g ? 1.0 : 0.0); });
    const auto s = sweep_alpha(pairs);
    REQUIRE(s.curve.size() == 51);
    CHECK(s.curve.front().alpha == 0.5);
    CHECK(s.curve.back().alpha == 1.0);
    CHECK(s.best_eer <= s.baseline_eer);
    for (const auto& pt : s.curve) {
      CHECK(std::abs(pt.eer_percent - oracle_eer_at(pairs, pt.alpha)) < 1e-9);
      CHECK(pt.eer_percent >= s.best_eer);
    }
  }
}

TEST_CASE("feature recipes") {
  CHECK(two_score_features(1, 1) == std::vector<double>{1, 1, 1, 1, 1, 0, 1, 1});
  const auto z = two_score_features(0, 0);
  for (double v : z) CHECK(v == 0.0);
  CHECK(feature_names(FeatureMode::EkytSpatial).size() == 8);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = u(rng), b = u(rng), c = u(rng);
    const auto f = three_score_features(a, b, c);
    const std::vector<double> ref{a,         b,         c,         a * b, a * c, b * c, a * a,
                                  b * b,     c * c,     std::abs(a - b), std::abs(a - c),
                                  std::abs(b - c), a * b * c};
    REQUIRE(f.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(f[i] - ref[i]) < 1e-12);
    CHECK(feature_names(FeatureMode::Triple).size() == ref.size());
  }
  ScoreVector v = pair_of("A", "B", 0.5, 0.5);
  v.s_spatial.reset();
  CHECK(code_of([&] { engineer_features(v, FeatureMode::EkytSpatial); }) == ErrorCode::MissingModality);
}

TEST_CASE("fuse_tree") {
  auto make = [](int first, int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<ScoreVector> out;
    std::uniform_real_distribution<double> u(0, 1);
    for (int e = first; e < first + n; ++e)
      for (int a = first; a < first + n; ++a)
        out.push_back(pair_of("P" + std::to_string(e), "P" + std::to_string(a), u(rng),
                              e == a ? 0.6 + 0.4 * u(rng) : 0.4 * u(rng)));
    return out;
  };
  const auto train = make(0, 15, 1);
  const auto test = make(100, 8, 2);

  SUBCASE("spatial alone separates") {
    TreeFusionOptions o;
    o.search_candidates = 0;
    o.fixed = {30, 4, 1, 0.1};
    const auto r = fuse_tree(train, test, FeatureMode::EkytSpatial, o);
    std::vector<double> g, i;
    for (std::size_t k = 0; k < test.size(); ++k) (is_genuine(test[k].label) ? g : i).push_back(r.scores[k]);
    CHECK(eer(g, i) == 0.0);
    for (double s : r.scores) {
      CHECK(s >= 0.0);
      CHECK(s <= 1.0);
    }
  }
  SUBCASE("leakage is refused") {
    auto leaky = test;
    leaky.push_back(train.front());
    CHECK(code_of([&] { fuse_tree(train, leaky, FeatureMode::EkytSpatial); }) == ErrorCode::SubjectLeakage);
  }
  SUBCASE("degenerate forest equals a single tree") {
    TreeFusionOptions o;
    o.search_candidates = 0;
    o.fixed = {1, 5, 1, 0.1};
    o.max_features = 0;
    o.bootstrap = false;
    const auto r = fuse_tree(train, test, FeatureMode::EkytSpatial, o);
    const auto data = make_training_set(train, FeatureMode::EkytSpatial);
    const auto tree = fit_tree(data, {5, 1, 0, SplitStrategy::Best});
    for (std::size_t k = 0; k < test.size(); ++k)
      CHECK(r.scores[k] == predict_proba(tree, engineer_features(test[k], FeatureMode::EkytSpatial)));
  }
  SUBCASE("randomized search runs on training data only") {
    TreeFusionOptions o;
    o.search_candidates = 2;
    o.kind = ModelKind::GradientBoosting;
    const auto r = fuse_tree(train, test, FeatureMode::EkytSpatial, o);
    CHECK(r.scores.size() == test.size());
    CHECK(std::isfinite(r.inner_cv_eer));
  }
}

TEST_CASE("training set weights are class balanced") {
  std::mt19937_64 rng(4);
  const auto pairs = fixtures::scored_pairs(
      6, Task::RAN, rng, [](bool g, auto&) { return g ? 0.8 : 0.2; }, [](bool, auto&) { return 0.5; });
  const auto s = make_training_set(pairs, FeatureMode::EkytSpatial);
  double wg = 0, wi = 0;
  for (std::size_t i = 0; i < s.rows(); ++i) (is_genuine(s.labels[i]) ? wg : wi) += s.weights[i];
  CHECK(wg == doctest::Approx(wi));
  CHECK(s.group_ids[1] == group_id_for("P0", "P1"));
  CHECK(group_id_for("b", "a") == group_id_for("a", "b"));
}

TEST_CASE("cross_task_scores") {
  std::vector<ScoreVector> ran, tex;
  const std::vector<std::string> subjects{"A", "B", "C"};
  for (const auto& e : subjects)
    for (const auto& a : subjects) {
      ran.push_back(pair_of(e, a, 0.1, 0.3, Task::RAN));
      tex.push_back(pair_of(e, a, 0.2, 0.0, Task::TEX));
      tex.back().s_spatial.reset();
    }
  const auto out = cross_task_scores(tex, ran);
  REQUIRE(out.size() == 9);
  for (const auto& v : out) {
    CHECK(v.s_ekyt_ran == 0.1);
    CHECK(v.s_ekyt_tex == 0.2);
    CHECK_FALSE(v.s_spatial.has_value());
    CHECK(v.label == label_for(v.enroll, v.auth));
  }
  CHECK(cross_task_scores(tex, ran, true).front().s_spatial == 0.3);

  // a subject with only TEX recordings
  auto tex_extra = tex;
  tex_extra.push_back(pair_of("D", "D", 0.5, 0.0, Task::TEX));
  CHECK(code_of([&] { cross_task_scores(tex_extra, ran); }) == ErrorCode::MissingTask);
  CHECK(cross_task_scores(tex_extra, ran, false, MissingPolicy::Skip).size() == 9);
}

TEST_CASE("score vector validation") {
  auto v = pair_of("A", "A", 0.5, 0.5);
  CHECK_NOTHROW(validate(v));
  v.label = PairLabel::Impostor;
  CHECK_THROWS_AS(validate(v), Error);
  v = pair_of("A", "B", 0.5, std::nan(""));
  CHECK_THROWS_AS(validate(v), Error);
}
