#include "gazefuse/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <tuple>

#include "gazefuse/error.hpp"
#include "gazefuse/metrics.hpp"

namespace gazefuse {

std::string group_id_for(const std::string& subject_a, const std::string& subject_b) {
  return subject_a <= subject_b ? subject_a + "|" + subject_b : subject_b + "|" + subject_a;
}

std::string ScoreVector::group_id() const { return group_id_for(enroll.subject_id, auth.subject_id); }

void validate(const ScoreVector& v) {
  const auto present = {v.s_ekyt_ran, v.s_ekyt_tex, v.s_spatial};
  bool any = false;
  for (const auto& s : present) {
    if (!s) continue;
    any = true;
    if (!std::isfinite(*s)) fail(ErrorCode::InvalidValue, "non-finite score");
  }
  if (!any) fail(ErrorCode::InvalidValue, "score vector without scores");
  if (v.label != label_for(v.enroll, v.auth))
    fail(ErrorCode::InvalidValue, "label disagrees with subject ids for " + describe(v.enroll) +
                                      " vs " + describe(v.auth));
}

std::string_view recipe_id(FeatureMode mode) {
  return mode == FeatureMode::Triple ? kThreeScoreRecipe : kTwoScoreRecipe;
}

std::vector<std::string> feature_names(FeatureMode mode) {
  if (mode == FeatureMode::Triple)
    return {"s1", "s2", "s3", "s1*s2", "s1*s3", "s2*s3", "s1^2", "s2^2", "s3^2",
            "|s1-s2|", "|s1-s3|", "|s2-s3|", "s1*s2*s3"};
  return {"s1", "s2", "s1*s2", "s1^2", "s2^2", "|s1-s2|", "min", "max"};
}

std::vector<double> two_score_features(double s1, double s2) {
  return {s1, s2, s1 * s2, s1 * s1, s2 * s2, std::abs(s1 - s2), std::min(s1, s2), std::max(s1, s2)};
}

std::vector<double> three_score_features(double s1, double s2, double s3) {
  return {s1,      s2,      s3,      s1 * s2,           s1 * s3,           s2 * s3,     s1 * s1,
          s2 * s2, s3 * s3, std::abs(s1 - s2), std::abs(s1 - s3), std::abs(s2 - s3), s1 * s2 * s3};
}

namespace {

double need(const std::optional<double>& s, const char* what, const ScoreVector& v) {
  if (!s) fail(ErrorCode::MissingModality, std::string(what) + " score missing for " +
                                               describe(v.enroll) + " vs " + describe(v.auth));
  return *s;
}

}  // namespace

std::vector<double> engineer_features(const ScoreVector& v, FeatureMode mode) {
  switch (mode) {
    case FeatureMode::EkytSpatial:
      return two_score_features(need(v.ekyt(), "EKYT", v), need(v.s_spatial, "spatial", v));
    case FeatureMode::CrossTask:
      return two_score_features(need(v.s_ekyt_ran, "EKYT RAN", v), need(v.s_ekyt_tex, "EKYT TEX", v));
    case FeatureMode::Triple:
      return three_score_features(need(v.s_ekyt_ran, "EKYT RAN", v), need(v.s_ekyt_tex, "EKYT TEX", v),
                                  need(v.s_spatial, "spatial", v));
  }
  return {};
}

double weighted_fuse(double s_ekyt, double s_spatial, double alpha) {
  if (!(alpha >= 0.5 - 1e-12 && alpha <= 1.0 + 1e-12))
    fail(ErrorCode::AlphaOutOfRange, "alpha " + std::to_string(alpha) + " outside [0.5, 1.0]");
  return alpha * s_ekyt + (1.0 - alpha) * s_spatial;
}

std::vector<double> AlphaGrid::values() const {
  if (step_percent < 1 || lo_percent > hi_percent || lo_percent < 50 || hi_percent > 100)
    fail(ErrorCode::InvalidConfig, "alpha grid must lie within [0.50, 1.00] with a positive step");
  std::vector<double> out;
  for (int a = lo_percent; a <= hi_percent; a += step_percent) out.push_back(a / 100.0);
  return out;
}

AlphaSweep sweep_alpha(std::span<const ScoreVector> pairs, const AlphaGrid& grid) {
  std::vector<double> ekyt(pairs.size()), spatial(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    ekyt[i] = need(pairs[i].ekyt(), "EKYT", pairs[i]);
    spatial[i] = need(pairs[i].s_spatial, "spatial", pairs[i]);
  }
  auto eer_at = [&](double alpha) {
    std::vector<double> g, im;
    for (std::size_t i = 0; i < pairs.size(); ++i)
      (is_genuine(pairs[i].label) ? g : im).push_back(weighted_fuse(ekyt[i], spatial[i], alpha));
    return eer(g, im);
  };

  AlphaSweep out;
  const auto alphas = grid.values();
  out.curve.resize(alphas.size());
  out.best_eer = std::numeric_limits<double>::infinity();
  // Walk from the largest alpha down so that ties keep the larger one.
  for (std::size_t r = alphas.size(); r-- > 0;) {
    const double e = eer_at(alphas[r]);
    out.curve[r] = {alphas[r], e};
    if (e < out.best_eer) {
      out.best_eer = e;
      out.best_alpha = alphas[r];
    }
  }
  out.baseline_eer = grid.hi_percent == 100 ? out.curve.back().eer_percent : eer_at(1.0);
  return out;
}

void check_subject_disjoint(std::span<const ScoreVector> train, std::span<const ScoreVector> test) {
  std::set<std::string> train_subjects;
  for (const auto& v : train) {
    train_subjects.insert(v.enroll.subject_id);
    train_subjects.insert(v.auth.subject_id);
  }
  for (const auto& v : test)
    for (const auto* s : {&v.enroll.subject_id, &v.auth.subject_id})
      if (train_subjects.count(*s))
        fail(ErrorCode::SubjectLeakage, "subject " + *s + " appears in both training and test pairs");
}

TrainingSet make_training_set(std::span<const ScoreVector> pairs, FeatureMode mode) {
  TrainingSet data;
  std::vector<PairLabel> labels;
  for (const auto& v : pairs) labels.push_back(v.label);
  const auto weights = class_balanced_weights(labels);
  for (std::size_t i = 0; i < pairs.size(); ++i)
    data.add_row(engineer_features(pairs[i], mode), pairs[i].label, weights[i], pairs[i].group_id());
  if (data.rows() == 0) data.n_features = feature_names(mode).size();
  return data;
}

FusionModel train_fusion_model(std::span<const ScoreVector> train, FeatureMode mode,
                               const TreeFusionOptions& options) {
  const TrainingSet data = make_training_set(train, mode);
  if (data.rows() == 0) fail(ErrorCode::EmptyClass, "no training pairs");

  FusionModel out;
  out.mode = mode;
  out.inner_cv_eer = std::numeric_limits<double>::quiet_NaN();
  const std::uint64_t fit_seed = derive_seed(options.seed, 0xF17);
  if (options.search_candidates > 0) {
    const auto search = randomized_search(data, options.kind, options.search_candidates, options.inner_folds,
                                          options.seed, options.threads);
    out.params = search.best;
    out.inner_cv_eer = search.cv_eer;
    out.model = fit_model(data, options.kind, search.best, fit_seed, options.threads);
  } else if (options.kind == ModelKind::GradientBoosting) {
    out.params = options.fixed;
    out.model = fit_model(data, options.kind, options.fixed, fit_seed, options.threads);
  } else {
    out.params = options.fixed;
    ForestOptions f;
    f.n_trees = options.fixed.n_trees;
    f.max_depth = options.fixed.max_depth;
    f.min_leaf = options.fixed.min_leaf;
    f.max_features = options.max_features;
    f.bootstrap = options.bootstrap;
    f.threads = options.threads;
    out.model = fit_forest(data, options.kind, f, fit_seed);
  }
  return out;
}

TreeFusionResult fuse_tree(std::span<const ScoreVector> train, std::span<const ScoreVector> test,
                           FeatureMode mode, const TreeFusionOptions& options) {
  check_subject_disjoint(train, test);
  const auto fitted = train_fusion_model(train, mode, options);
  TreeFusionResult result;
  result.params = fitted.params;
  result.inner_cv_eer = fitted.inner_cv_eer;
  result.scores.reserve(test.size());
  for (const auto& v : test) result.scores.push_back(predict_proba(fitted.model, engineer_features(v, mode)));
  return result;
}

std::vector<ScoreVector> cross_task_scores(std::span<const ScoreVector> tex_pairs,
                                           std::span<const ScoreVector> ran_pairs, bool keep_spatial,
                                           MissingPolicy policy) {
  using JoinKey = std::tuple<std::string, int, int, std::string, int, int>;
  auto key_of = [](const ScoreVector& v) {
    return JoinKey{v.enroll.subject_id, v.enroll.round, v.enroll.session,
                   v.auth.subject_id,   v.auth.round,   v.auth.session};
  };
  std::map<JoinKey, const ScoreVector*> ran;
  for (const auto& v : ran_pairs)
    if (v.task() == Task::RAN) ran.emplace(key_of(v), &v);

  std::vector<ScoreVector> out;
  for (const auto& v : tex_pairs) {
    if (v.task() != Task::TEX) continue;
    const auto it = ran.find(key_of(v));
    if (it == ran.end() || !it->second->s_ekyt_ran) {
      if (policy == MissingPolicy::Skip) continue;
      fail(ErrorCode::MissingTask, "no RAN counterpart for TEX pair " + describe(v.enroll) + " vs " +
                                       describe(v.auth));
    }
    if (!v.s_ekyt_tex)
      fail(ErrorCode::MissingModality, "TEX pair without EKYT score: " + describe(v.enroll));
    ScoreVector fused = v;
    fused.s_ekyt_ran = it->second->s_ekyt_ran;
    fused.s_spatial = keep_spatial ? (v.s_spatial ? v.s_spatial : it->second->s_spatial) : std::nullopt;
    out.push_back(std::move(fused));
  }
  return out;
}

}  // namespace gazefuse
