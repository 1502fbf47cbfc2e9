#pragma once

// Weighted CART trees and the three ensembles used as fusion classifiers
// (random forest, extra trees, logistic gradient boosting), plus randomized
// hyperparameter search with group-disjoint inner cross-validation.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gazefuse/types.hpp"

namespace gazefuse {

enum class ModelKind { RandomForest, ExtraTrees, GradientBoosting };

std::string_view to_string(ModelKind kind);
// Accepts "rf"/"et"/"gb" and the full names. Throws InvalidConfig.
ModelKind parse_model_kind(std::string_view text);

// Row-major feature matrix with labels, positive weights and a grouping tag per row.
struct TrainingSet {
  std::size_t n_features = 0;
  std::vector<double> features;
  std::vector<PairLabel> labels;
  std::vector<double> weights;
  std::vector<std::string> group_ids;

  std::size_t rows() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * n_features, n_features);
  }
  void add_row(std::span<const double> x, PairLabel label, double weight = 1.0,
               std::string group_id = {});
  TrainingSet subset(std::span<const std::size_t> rows) const;
};

// Throws InvalidValue on misaligned columns, non-finite features or non-positive weights.
void validate(const TrainingSet& data);

// Inverse class frequency, normalized so the mean weight over rows is 1.
std::vector<double> class_balanced_weights(std::span<const PairLabel> labels);

enum class SplitStrategy { Best, Random };

struct TreeParams {
  int max_depth = 8;
  int min_leaf = 1;      // minimum number of rows on each side of a split
  int max_features = 0;  // features examined per split; 0 examines all
  SplitStrategy splitter = SplitStrategy::Best;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // rows with x[feature] <= threshold go left
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf probability (classification) or additive output (boosting)
};

struct TreeModel {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::size_t n_features = 0;
  TreeParams params;
  std::uint64_t seed = 0;

  std::size_t leaf_index(std::span<const double> x) const;
  double value(std::span<const double> x) const { return nodes[leaf_index(x)].value; }
  int depth() const;
  std::size_t leaf_count() const;
};

// Greedy CART on weighted Gini impurity. The split with the largest impurity decrease
// wins; ties go to the lowest feature index, then the lowest threshold. Impure nodes
// split even when the best decrease is zero. Deterministic in (data, params, seed).
TreeModel fit_tree(const TrainingSet& data, const TreeParams& params = {}, std::uint64_t seed = 0);

struct EnsembleModel {
  ModelKind kind = ModelKind::RandomForest;
  std::vector<TreeModel> trees;
  double learning_rate = 1.0;  // boosting only; already folded into leaf values
  double init_score = 0.0;     // boosting only, log-odds
  double feature_subsample = 1.0;
  std::size_t n_features = 0;
  std::uint64_t seed = 0;
};

// Sentinel for ForestOptions::max_features: ceil(sqrt(n_features)).
inline constexpr int kSqrtFeatures = -1;

struct ForestOptions {
  int n_trees = 100;
  int max_depth = 8;
  int min_leaf = 1;
  int max_features = kSqrtFeatures;  // 0 examines all features
  bool bootstrap = true;             // ignored for ExtraTrees, which never resamples
  int threads = 1;
};

// Tree i is fitted with seed derive_seed(seed, i); results are independent of threads.
EnsembleModel fit_forest(const TrainingSet& data, ModelKind kind, const ForestOptions& options,
                         std::uint64_t seed);

struct BoostingOptions {
  int n_stages = 100;
  double learning_rate = 0.1;
  int max_depth = 3;
  int min_leaf = 1;
  double feature_subsample = 1.0;  // fraction of features examined per split
};

// Logistic-loss boosting. The initial score is the clipped weighted log-odds of the
// genuine class; each stage fits a regression tree to the residuals y - p and sets each
// leaf by a Newton step scaled by the learning rate, halved until that leaf's training
// loss does not increase.
EnsembleModel fit_boosting(const TrainingSet& data, const BoostingOptions& options, std::uint64_t seed);

// Probability of the genuine class. Throws DimensionMismatch on a wrong row length.
double predict_proba(const TreeModel& model, std::span<const double> x);
double predict_proba(const EnsembleModel& model, std::span<const double> x);
// Boosting: uses only the first `stages` trees. Forests: the first `stages` trees.
double predict_proba(const EnsembleModel& model, std::span<const double> x, std::size_t stages);
std::vector<double> predict_proba(const EnsembleModel& model, const TrainingSet& data);

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

// One hyperparameter setting. n_trees doubles as the number of boosting stages.
struct Candidate {
  int n_trees = 100;
  int max_depth = 8;
  int min_leaf = 1;
  double learning_rate = 0.1;

  bool operator==(const Candidate&) const = default;
};

struct SearchSpace {
  int n_trees_min = 50, n_trees_max = 400;
  int depth_min = 2, depth_max = 10;
  int min_leaf_min = 1, min_leaf_max = 50;
  double lr_min = 0.01, lr_max = 0.3;  // sampled log-uniformly
};

std::vector<Candidate> sample_candidates(int n_candidates, std::uint64_t seed,
                                         const SearchSpace& space = {});

EnsembleModel fit_model(const TrainingSet& data, ModelKind kind, const Candidate& candidate,
                        std::uint64_t seed, int threads = 1);

// Fold index per row. Distinct group ids are shuffled and dealt round-robin, genuine and
// impostor groups separately so each fold sees both classes when possible. Rows of a
// group always share a fold. Throws InsufficientGroups when there are fewer than k groups.
std::vector<int> group_kfold(const TrainingSet& data, int k, std::uint64_t seed);

struct SearchTrial {
  Candidate candidate;
  double cv_eer = 0.0;  // mean inner-fold EER, percent
};

struct SearchResult {
  Candidate best;
  double cv_eer = 0.0;
  std::vector<SearchTrial> trials;
};

// Evaluates the given candidates with group-disjoint inner CV and keeps the lowest mean
// EER (earliest candidate on ties). A single candidate is returned without evaluation.
SearchResult search_candidates(const TrainingSet& data, ModelKind kind,
                               std::span<const Candidate> candidates, int cv_folds,
                               std::uint64_t seed, int threads = 1);

SearchResult randomized_search(const TrainingSet& data, ModelKind kind, int n_candidates,
                               int cv_folds, std::uint64_t seed, int threads = 1,
                               const SearchSpace& space = {});

// JSON dump of an ensemble (node arrays); round-trips exactly.
std::string model_to_json(const EnsembleModel& model);
EnsembleModel model_from_json(std::string_view text);

}  // namespace gazefuse
