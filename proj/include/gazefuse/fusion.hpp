#pragma once

// Score-level fusion: weighted (alpha sweep), tree-ensemble, cross-task and triple.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gazefuse/trees.hpp"
#include "gazefuse/types.hpp"

namespace gazefuse {

// One enrollment/authentication comparison with its per-modality similarities.
struct ScoreVector {
  RecordingKey enroll;
  RecordingKey auth;
  PairLabel label = PairLabel::Impostor;
  std::optional<double> s_ekyt_ran;
  std::optional<double> s_ekyt_tex;
  std::optional<double> s_spatial;

  Task task() const { return enroll.task; }
  // EKYT score of the pair's own task.
  std::optional<double> ekyt() const { return task() == Task::RAN ? s_ekyt_ran : s_ekyt_tex; }
  std::string group_id() const;
};

// Unordered subject pair, e.g. "S01|S07".
std::string group_id_for(const std::string& subject_a, const std::string& subject_b);

// Throws InvalidValue when no score is present, a score is not finite, or the label
// disagrees with subject equality.
void validate(const ScoreVector& v);

enum class FeatureMode {
  EkytSpatial,  // two-score recipe on (EKYT of own task, spatial)
  CrossTask,    // two-score recipe on (EKYT RAN, EKYT TEX)
  Triple,       // three-score recipe on (EKYT RAN, EKYT TEX, spatial)
};

inline constexpr std::string_view kTwoScoreRecipe = "two-score/v1";
inline constexpr std::string_view kThreeScoreRecipe = "three-score/v1";

std::string_view recipe_id(FeatureMode mode);
std::vector<std::string> feature_names(FeatureMode mode);

// [s1, s2, s1*s2, s1^2, s2^2, |s1-s2|, min, max]
std::vector<double> two_score_features(double s1, double s2);
// [s1, s2, s3, s1*s2, s1*s3, s2*s3, s1^2, s2^2, s3^2, |s1-s2|, |s1-s3|, |s2-s3|, s1*s2*s3]
std::vector<double> three_score_features(double s1, double s2, double s3);

// Throws MissingModality when a score the mode needs is absent.
std::vector<double> engineer_features(const ScoreVector& v, FeatureMode mode);

// alpha * s_ekyt + (1 - alpha) * s_spatial, alpha in [0.5, 1]. Throws AlphaOutOfRange.
double weighted_fuse(double s_ekyt, double s_spatial, double alpha);

// Alpha grid in hundredths: lo, lo + step, ..., hi.
struct AlphaGrid {
  int lo_percent = 50;
  int hi_percent = 100;
  int step_percent = 1;

  std::vector<double> values() const;
};

struct AlphaPoint {
  double alpha = 1.0;
  double eer_percent = 0.0;
};

struct AlphaSweep {
  double best_alpha = 1.0;
  double best_eer = 0.0;
  double baseline_eer = 0.0;  // EER at alpha = 1.0
  std::vector<AlphaPoint> curve;  // ascending alpha
};

// EER at every grid alpha over the given pairs; returns the minimizer, preferring the
// largest alpha among equal EERs. Throws MissingModality or EmptyClass.
AlphaSweep sweep_alpha(std::span<const ScoreVector> pairs, const AlphaGrid& grid = {});

struct TreeFusionOptions {
  ModelKind kind = ModelKind::RandomForest;
  int search_candidates = 6;  // 0 fits `fixed` directly
  int inner_folds = 3;
  Candidate fixed{};
  int max_features = kSqrtFeatures;  // forests fitted from `fixed`
  bool bootstrap = true;             // forests fitted from `fixed`
  std::uint64_t seed = 7;
  int threads = 1;
};

struct TreeFusionResult {
  std::vector<double> scores;  // fused similarity per test pair
  Candidate params;
  double inner_cv_eer = 0.0;  // NaN when no search was run
};

// Throws SubjectLeakage if any subject appears on both sides.
void check_subject_disjoint(std::span<const ScoreVector> train, std::span<const ScoreVector> test);

// Features per mode, class-balanced weights and subject-pair groups.
TrainingSet make_training_set(std::span<const ScoreVector> pairs, FeatureMode mode);

struct FusionModel {
  EnsembleModel model;
  FeatureMode mode = FeatureMode::EkytSpatial;
  Candidate params;
  double inner_cv_eer = 0.0;  // NaN when no search was run
};

// Class-weighted fit on every given pair, with randomized search when enabled.
FusionModel train_fusion_model(std::span<const ScoreVector> train, FeatureMode mode,
                               const TreeFusionOptions& options = {});

// Fits the classifier on `train` and returns the genuine-class probability on `test`.
TreeFusionResult fuse_tree(std::span<const ScoreVector> train, std::span<const ScoreVector> test,
                           FeatureMode mode, const TreeFusionOptions& options = {});

enum class MissingPolicy { Error, Skip };

// Joins TEX pairs with the RAN pairs of the same subjects, rounds and sessions.
// Cross-task output carries both EKYT scores and no spatial score; with
// `keep_spatial` the spatial score is retained for triple fusion.
std::vector<ScoreVector> cross_task_scores(std::span<const ScoreVector> tex_pairs,
                                           std::span<const ScoreVector> ran_pairs,
                                           bool keep_spatial = false,
                                           MissingPolicy policy = MissingPolicy::Error);

}  // namespace gazefuse
