#pragma once

// Evaluation protocol: pair formation, subject-disjoint folds, per-method CV runs and
// the report that summarizes them.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gazefuse/fusion.hpp"
#include "gazefuse/metrics.hpp"
#include "gazefuse/types.hpp"

namespace gazefuse {

struct PairEntry {
  RecordingKey enroll;
  RecordingKey auth;
  PairLabel label = PairLabel::Impostor;
};

// Within each task of the given round: every session-2 recording (enrollment) against
// every session-1 recording (authentication). Ordered by task, enrollment subject,
// authentication subject. Throws MissingSession when a subject has only one session
// of a task.
std::vector<PairEntry> form_pairs(std::span<const RecordingKey> recordings, int round = 1);

struct FoldAssignment {
  int k = 0;
  std::map<std::string, int> subject_fold;
  std::vector<int> pair_fold;  // test fold per pair, -1 when its subjects straddle folds
  std::vector<std::pair<std::string, std::string>> subject_pairs;  // (enroll, auth) per pair

  std::vector<std::size_t> test_indices(int fold) const;
  // Pairs whose subjects both lie outside `fold`.
  std::vector<std::size_t> train_indices(int fold) const;
};

// Shuffles the distinct subjects with `seed` and deals them round-robin into k groups.
// Throws TooFewSubjects when there are fewer than k subjects.
FoldAssignment subject_disjoint_folds(std::span<const ScoreVector> pairs, int k, std::uint64_t seed);
FoldAssignment subject_disjoint_folds(std::span<const PairEntry> pairs, int k, std::uint64_t seed);

// Number of subjects that occur in both the train and test pairs of the fold.
std::size_t leaked_subjects(std::span<const ScoreVector> pairs, const FoldAssignment& folds, int fold);

enum class Method { Baseline, Weighted, Tree, CrossTask, Triple };

std::string_view to_string(Method method);
Method parse_method(std::string_view text);
// Tree-based methods are cross-validated; baseline and weighted score every pair.
bool is_cross_validated(Method method);

struct CvOptions {
  int k = 4;
  std::uint64_t seed = 7;
  double far_target = 1e-4;
  AlphaGrid alpha{};
  TreeFusionOptions tree{};
};

struct FusedScore {
  RecordingKey enroll;
  RecordingKey auth;
  PairLabel label = PairLabel::Impostor;
  int fold = -1;
  double score = 0.0;
};

struct FoldInfo {
  int fold = 0;
  std::size_t n_train = 0;
  std::size_t leaked_subjects = 0;
  std::optional<Candidate> params;
  double inner_cv_eer = 0.0;
};

// Output of a fusion method, before evaluation.
struct FusionRun {
  std::optional<Task> task;
  Method method = Method::Baseline;
  std::optional<ModelKind> kind;
  std::string recipe;
  int k = 4;
  std::uint64_t seed = 7;
  std::optional<double> alpha;
  std::vector<AlphaPoint> alpha_curve;
  std::vector<FoldInfo> folds;
  std::vector<std::string> warnings;
  std::vector<FusedScore> scores;
};

// Baseline: the pair's own EKYT score. Weighted: oracle alpha chosen on all pairs.
// Tree / CrossTask / Triple: one model per subject-disjoint fold, scored on its test
// pairs only. CrossTask and Triple expect joined TEX pairs (see cross_task_scores).
FusionRun fuse_pairs(std::span<const ScoreVector> pairs, Method method, const CvOptions& options);

struct FoldMetrics {
  int fold = 0;
  std::size_t n_train = 0;
  std::size_t n_genuine = 0;
  std::size_t n_impostor = 0;
  double eer_percent = 0.0;
  double frr_percent = 0.0;
  bool frr_reliable = false;
  std::size_t leaked_subjects = 0;
  std::optional<Candidate> params;
  double inner_cv_eer = 0.0;
};

struct EvalReport {
  std::string task;
  int n_seq = 0;
  std::string method;
  std::string kind;  // empty for non-tree methods
  std::string recipe;
  std::string scope;  // "all-pairs" or "cv-mean"
  std::uint64_t seed = 0;
  int k = 0;
  double far_target = 1e-4;
  std::size_t n_pairs = 0;
  std::size_t n_genuine = 0;
  std::size_t n_impostor = 0;
  double eer_percent = 0.0;  // headline: all-pairs EER or mean over folds
  double frr_percent = 0.0;
  bool frr_reliable = false;
  std::optional<double> cv_mean_eer_percent;
  std::optional<double> alpha;
  std::vector<AlphaPoint> alpha_curve;
  std::vector<RocPoint> roc;  // over every scored pair (pooled across folds for CV runs)
  std::vector<FoldMetrics> folds;
  std::vector<std::string> warnings;
};

// Metrics from fused scores. Cross-validated runs average their per-fold EERs and FRRs;
// all-pairs runs are scored on every pair and additionally broken down by fold.
EvalReport evaluate(const FusionRun& run, double far_target);

// fuse_pairs followed by evaluate; task and n_seq are taken from the pairs.
EvalReport run_cv(std::span<const ScoreVector> pairs, Method method, const CvOptions& options);

inline constexpr std::string_view kReportSchema = "gazefuse.report/1";

}  // namespace gazefuse
