#include "gazefuse/protocol.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <tuple>

#include "gazefuse/error.hpp"
#include "gazefuse/metrics.hpp"

namespace gazefuse {

std::vector<PairEntry> form_pairs(std::span<const RecordingKey> recordings, int round) {
  // task -> subject -> session -> key
  std::map<Task, std::map<std::string, std::map<int, RecordingKey>>> by_task;
  for (const auto& key : recordings) {
    validate(key);
    if (key.round != round) continue;
    auto& slot = by_task[key.task][key.subject_id];
    if (!slot.emplace(key.session, key).second)
      fail(ErrorCode::DuplicateKey, "recording listed twice: " + describe(key));
  }

  std::vector<PairEntry> pairs;
  for (const auto& [task, subjects] : by_task) {
    std::vector<const RecordingKey*> enroll, auth;
    for (const auto& [subject, sessions] : subjects) {
      const auto s2 = sessions.find(2);
      const auto s1 = sessions.find(1);
      if (s2 == sessions.end() || s1 == sessions.end())
        fail(ErrorCode::MissingSession, "subject " + subject + " lacks session " +
                                            std::string(s2 == sessions.end() ? "2" : "1") + " for " +
                                            std::string(to_string(task)));
      enroll.push_back(&s2->second);
      auth.push_back(&s1->second);
    }
    for (const auto* e : enroll)
      for (const auto* a : auth) pairs.push_back({*e, *a, label_for(*e, *a)});
  }
  return pairs;
}

std::vector<std::size_t> FoldAssignment::test_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pair_fold.size(); ++i)
    if (pair_fold[i] == fold) out.push_back(i);
  return out;
}

namespace {

using SubjectPairs = std::vector<std::pair<std::string, std::string>>;

FoldAssignment assign_folds(const SubjectPairs& pairs, int k, std::uint64_t seed) {
  if (k < 2) fail(ErrorCode::InvalidConfig, "fold count must be at least 2");
  std::set<std::string> distinct;
  for (const auto& [a, b] : pairs) {
    distinct.insert(a);
    distinct.insert(b);
  }
  if (distinct.size() < static_cast<std::size_t>(k))
    fail(ErrorCode::TooFewSubjects, std::to_string(distinct.size()) + " subjects for " +
                                        std::to_string(k) + " folds");
  std::vector<std::string> subjects(distinct.begin(), distinct.end());
  std::mt19937_64 rng(seed);
  std::shuffle(subjects.begin(), subjects.end(), rng);

  FoldAssignment out;
  out.k = k;
  for (std::size_t i = 0; i < subjects.size(); ++i) out.subject_fold[subjects[i]] = static_cast<int>(i % k);
  out.pair_fold.reserve(pairs.size());
  for (const auto& [a, b] : pairs) {
    const int fa = out.subject_fold.at(a);
    out.pair_fold.push_back(fa == out.subject_fold.at(b) ? fa : -1);
  }
  out.subject_pairs = pairs;
  return out;
}

}  // namespace

std::vector<std::size_t> FoldAssignment::train_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < subject_pairs.size(); ++i)
    if (subject_fold.at(subject_pairs[i].first) != fold && subject_fold.at(subject_pairs[i].second) != fold)
      out.push_back(i);
  return out;
}

FoldAssignment subject_disjoint_folds(std::span<const ScoreVector> pairs, int k, std::uint64_t seed) {
  SubjectPairs sp;
  for (const auto& p : pairs) sp.emplace_back(p.enroll.subject_id, p.auth.subject_id);
  return assign_folds(sp, k, seed);
}

FoldAssignment subject_disjoint_folds(std::span<const PairEntry> pairs, int k, std::uint64_t seed) {
  SubjectPairs sp;
  for (const auto& p : pairs) sp.emplace_back(p.enroll.subject_id, p.auth.subject_id);
  return assign_folds(sp, k, seed);
}

std::size_t leaked_subjects(std::span<const ScoreVector> pairs, const FoldAssignment& folds, int fold) {
  std::set<std::string> train, test;
  for (const auto i : folds.train_indices(fold)) {
    train.insert(pairs[i].enroll.subject_id);
    train.insert(pairs[i].auth.subject_id);
  }
  for (const auto i : folds.test_indices(fold)) {
    test.insert(pairs[i].enroll.subject_id);
    test.insert(pairs[i].auth.subject_id);
  }
  std::size_t n = 0;
  for (const auto& s : test) n += train.count(s);
  return n;
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::Baseline: return "baseline";
    case Method::Weighted: return "weighted";
    case Method::Tree: return "tree";
    case Method::CrossTask: return "cross-task";
    case Method::Triple: return "triple";
  }
  return "?";
}

Method parse_method(std::string_view text) {
  for (auto m : {Method::Baseline, Method::Weighted, Method::Tree, Method::CrossTask, Method::Triple})
    if (text == to_string(m)) return m;
  if (text == "ekyt") return Method::Baseline;
  if (text == "cross") return Method::CrossTask;
  fail(ErrorCode::InvalidConfig, "unknown method '" + std::string(text) + "'");
}

bool is_cross_validated(Method method) {
  return method == Method::Tree || method == Method::CrossTask || method == Method::Triple;
}

namespace {

FeatureMode mode_for(Method method) {
  switch (method) {
    case Method::CrossTask: return FeatureMode::CrossTask;
    case Method::Triple: return FeatureMode::Triple;
    default: return FeatureMode::EkytSpatial;
  }
}

FusedScore fused_row(const ScoreVector& v, int fold, double score) {
  return {v.enroll, v.auth, v.label, fold, score};
}

}  // namespace

FusionRun fuse_pairs(std::span<const ScoreVector> pairs, Method method, const CvOptions& options) {
  for (const auto& p : pairs) validate(p);
  FusionRun run;
  if (!pairs.empty()) run.task = pairs.front().task();
  run.method = method;
  run.k = options.k;
  run.seed = options.seed;

  if (!is_cross_validated(method)) {
    std::optional<FoldAssignment> folds;
    try {
      folds = subject_disjoint_folds(pairs, options.k, options.seed);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::TooFewSubjects) throw;
      run.warnings.push_back("no per-fold breakdown: " + std::string(e.what()));
    }
    auto fold_of = [&](std::size_t i) { return folds ? folds->pair_fold[i] : -1; };

    if (method == Method::Baseline) {
      run.recipe = "ekyt";
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto s = pairs[i].ekyt();
        if (!s) fail(ErrorCode::MissingModality, "EKYT score missing for " + describe(pairs[i].enroll));
        run.scores.push_back(fused_row(pairs[i], fold_of(i), *s));
      }
    } else {
      run.recipe = "alpha-weighted";
      const auto sweep = sweep_alpha(pairs, options.alpha);
      run.alpha = sweep.best_alpha;
      run.alpha_curve = sweep.curve;
      run.warnings.push_back("oracle-alpha: alpha selected on all pairs, optimistic");
      for (std::size_t i = 0; i < pairs.size(); ++i)
        run.scores.push_back(
            fused_row(pairs[i], fold_of(i), weighted_fuse(*pairs[i].ekyt(), *pairs[i].s_spatial, sweep.best_alpha)));
    }
    if (folds)
      for (int f = 0; f < options.k; ++f)
        run.folds.push_back({f, folds->train_indices(f).size(), leaked_subjects(pairs, *folds, f), {}, 0.0});
    return run;
  }

  const FeatureMode mode = mode_for(method);
  run.kind = options.tree.kind;
  run.recipe = std::string(recipe_id(mode));
  const auto folds = subject_disjoint_folds(pairs, options.k, options.seed);
  for (int f = 0; f < options.k; ++f) {
    std::vector<ScoreVector> train, test;
    const auto train_idx = folds.train_indices(f);
    const auto test_idx = folds.test_indices(f);
    for (const auto i : train_idx) train.push_back(pairs[i]);
    for (const auto i : test_idx) test.push_back(pairs[i]);

    TreeFusionOptions tree = options.tree;
    tree.seed = derive_seed(options.tree.seed, static_cast<std::uint64_t>(f));
    const auto result = fuse_tree(train, test, mode, tree);
    for (std::size_t j = 0; j < test_idx.size(); ++j)
      run.scores.push_back(fused_row(pairs[test_idx[j]], f, result.scores[j]));
    run.folds.push_back({f, train.size(), leaked_subjects(pairs, folds, f), result.params, result.inner_cv_eer});
  }
  return run;
}

namespace {

struct Split {
  std::vector<double> genuine, impostor;
};

std::string format_far(double far) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", far);
  return buf;
}

Split split_scores(const std::vector<FusedScore>& rows, std::optional<int> fold) {
  Split s;
  for (const auto& r : rows)
    if (!fold || r.fold == *fold) (is_genuine(r.label) ? s.genuine : s.impostor).push_back(r.score);
  return s;
}

}  // namespace

EvalReport evaluate(const FusionRun& run, double far_target) {
  EvalReport report;
  report.method = std::string(to_string(run.method));
  report.kind = run.kind ? std::string(to_string(*run.kind)) : "";
  report.recipe = run.recipe;
  report.seed = run.seed;
  report.k = run.k;
  report.far_target = far_target;
  report.alpha = run.alpha;
  report.alpha_curve = run.alpha_curve;
  report.warnings = run.warnings;
  if (run.task) report.task = std::string(to_string(*run.task));

  const bool cv = is_cross_validated(run.method);
  report.scope = cv ? "cv-mean" : "all-pairs";

  double eer_sum = 0.0, frr_sum = 0.0;
  bool all_reliable = true;
  std::size_t evaluated = 0;
  for (const auto& info : run.folds) {
    const auto s = split_scores(run.scores, info.fold);
    if (s.genuine.empty() || s.impostor.empty()) {
      if (cv) fail(ErrorCode::EmptyClass, "fold " + std::to_string(info.fold) + " lacks a class");
      report.warnings.push_back("fold " + std::to_string(info.fold) + " lacks a class; skipped");
      continue;
    }
    FoldMetrics m;
    m.fold = info.fold;
    m.n_train = info.n_train;
    m.n_genuine = s.genuine.size();
    m.n_impostor = s.impostor.size();
    m.eer_percent = eer(s.genuine, s.impostor);
    const auto frr = frr_at_far(s.genuine, s.impostor, far_target);
    m.frr_percent = frr.frr_percent;
    m.frr_reliable = frr.reliable;
    m.leaked_subjects = info.leaked_subjects;
    m.params = info.params;
    m.inner_cv_eer = info.inner_cv_eer;
    eer_sum += m.eer_percent;
    frr_sum += m.frr_percent;
    all_reliable = all_reliable && frr.reliable;
    ++evaluated;
    report.folds.push_back(m);
  }
  if (evaluated > 0) report.cv_mean_eer_percent = eer_sum / static_cast<double>(evaluated);

  const auto all = split_scores(run.scores, std::nullopt);
  report.n_pairs = run.scores.size();
  report.n_genuine = all.genuine.size();
  report.n_impostor = all.impostor.size();
  if (!all.genuine.empty() && !all.impostor.empty()) report.roc = roc_points(all.genuine, all.impostor);
  if (cv) {
    if (evaluated == 0) fail(ErrorCode::EmptyClass, "no evaluable folds");
    report.eer_percent = *report.cv_mean_eer_percent;
    report.frr_percent = frr_sum / static_cast<double>(evaluated);
    report.frr_reliable = all_reliable;
  } else {
    report.eer_percent = eer(all.genuine, all.impostor);
    const auto frr = frr_at_far(all.genuine, all.impostor, far_target);
    report.frr_percent = frr.frr_percent;
    report.frr_reliable = frr.reliable;
  }
  if (!report.frr_reliable)
    report.warnings.push_back("FRR at FAR " + format_far(far_target) +
                              " rests on too few impostor pairs to be reliable");
  return report;
}

EvalReport run_cv(std::span<const ScoreVector> pairs, Method method, const CvOptions& options) {
  return evaluate(fuse_pairs(pairs, method, options), options.far_target);
}

}  // namespace gazefuse
