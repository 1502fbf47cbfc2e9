#include "gazefuse/trees.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "gazefuse/error.hpp"
#include "gazefuse/metrics.hpp"
#include "gazefuse/parallel.hpp"
#include "json.hpp"

namespace gazefuse {
namespace {

enum class Criterion { Gini, SquaredError };

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double label_value(PairLabel l) { return is_genuine(l) ? 1.0 : 0.0; }

// Node "purity score": the part of the weighted impurity that depends on the partition.
// Gini:  W * gini = W - (S^2 + (W - S)^2) / W, so maximizing (S^2 + (W-S)^2)/W summed
//        over children maximizes the impurity decrease.
// SSE:   sum w r^2 - S^2 / W, likewise maximizing S^2 / W.
double purity(Criterion c, double w, double s) {
  if (c == Criterion::Gini) return (s * s + (w - s) * (w - s)) / w;
  return s * s / w;
}

class TreeBuilder {
 public:
  TreeBuilder(const TrainingSet& data, std::span<const double> target, std::span<const double> weight,
              Criterion criterion, const TreeParams& params, std::uint64_t seed)
      : data_(data), target_(target), weight_(weight), criterion_(criterion), params_(params),
        rng_(seed) {}

  TreeModel build(std::vector<std::size_t> rows, std::uint64_t seed) {
    rows_ = std::move(rows);
    nodes_.clear();
    if (!rows_.empty()) grow(0, rows_.size(), 0);
    TreeModel model;
    model.nodes = std::move(nodes_);
    model.n_features = data_.n_features;
    model.params = params_;
    model.seed = seed;
    if (model.nodes.empty()) model.nodes.push_back(TreeNode{});
    return model;
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = -std::numeric_limits<double>::infinity();
  };

  std::vector<int> candidate_features() {
    const int p = static_cast<int>(data_.n_features);
    std::vector<int> features(static_cast<std::size_t>(p));
    std::iota(features.begin(), features.end(), 0);
    const int m = params_.max_features;
    if (m > 0 && m < p) {
      for (int i = 0; i < m; ++i) {
        std::uniform_int_distribution<int> pick(i, p - 1);
        std::swap(features[static_cast<std::size_t>(i)], features[static_cast<std::size_t>(pick(rng_))]);
      }
      features.resize(static_cast<std::size_t>(m));
      std::sort(features.begin(), features.end());
    }
    return features;
  }

  double x(std::size_t row, int feature) const {
    return data_.features[row * data_.n_features + static_cast<std::size_t>(feature)];
  }

  void consider(Split& best, int feature, double threshold, double gain, double tolerance) const {
    if (gain > best.gain + tolerance) best = Split{feature, threshold, gain};
  }

  Split best_split(std::size_t begin, std::size_t end, double w_total, double s_total) {
    Split best;
    const std::size_t count = end - begin;
    const std::size_t min_leaf = static_cast<std::size_t>(std::max(1, params_.min_leaf));
    const double parent = purity(criterion_, w_total, s_total);
    const double tolerance = 1e-12 * std::max(1.0, std::abs(parent));

    for (int f : candidate_features()) {
      if (params_.splitter == SplitStrategy::Random) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t i = begin; i < end; ++i) {
          lo = std::min(lo, x(rows_[i], f));
          hi = std::max(hi, x(rows_[i], f));
        }
        const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
        if (!(hi > lo)) continue;
        double thr = lo + u * (hi - lo);
        if (thr >= hi) thr = lo;
        double wl = 0.0, sl = 0.0;
        std::size_t nl = 0;
        for (std::size_t i = begin; i < end; ++i) {
          const std::size_t r = rows_[i];
          if (x(r, f) <= thr) {
            wl += weight_[r];
            sl += weight_[r] * target_[r];
            ++nl;
          }
        }
        if (nl < min_leaf || count - nl < min_leaf) continue;
        const double gain = purity(criterion_, wl, sl) +
                            purity(criterion_, w_total - wl, s_total - sl) - parent;
        consider(best, f, thr, gain, tolerance);
        continue;
      }

      scratch_.clear();
      for (std::size_t i = begin; i < end; ++i) scratch_.emplace_back(x(rows_[i], f), rows_[i]);
      std::sort(scratch_.begin(), scratch_.end());
      double wl = 0.0, sl = 0.0;
      for (std::size_t i = 0; i + 1 < count; ++i) {
        const std::size_t r = scratch_[i].second;
        wl += weight_[r];
        sl += weight_[r] * target_[r];
        const double a = scratch_[i].first;
        const double b = scratch_[i + 1].first;
        if (a == b) continue;
        const std::size_t nl = i + 1;
        if (nl < min_leaf || count - nl < min_leaf) continue;
        const double gain = purity(criterion_, wl, sl) +
                            purity(criterion_, w_total - wl, s_total - sl) - parent;
        double thr = a + (b - a) * 0.5;
        if (!(thr < b)) thr = a;
        consider(best, f, thr, gain, tolerance);
      }
    }
    return best;
  }

  int grow(std::size_t begin, std::size_t end, int depth) {
    double w = 0.0, s = 0.0;
    bool uniform_target = true;
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t r = rows_[i];
      w += weight_[r];
      s += weight_[r] * target_[r];
      uniform_target = uniform_target && target_[r] == target_[rows_[begin]];
    }
    const int index = static_cast<int>(nodes_.size());
    nodes_.push_back(TreeNode{-1, 0.0, -1, -1, w > 0.0 ? s / w : 0.0});

    const std::size_t count = end - begin;
    const auto min_leaf = static_cast<std::size_t>(std::max(1, params_.min_leaf));
    if (depth >= params_.max_depth || count < 2 * min_leaf || uniform_target) return index;

    const Split split = best_split(begin, end, w, s);
    if (split.feature < 0) return index;

    const auto mid_it = std::stable_partition(
        rows_.begin() + static_cast<std::ptrdiff_t>(begin), rows_.begin() + static_cast<std::ptrdiff_t>(end),
        [&](std::size_t r) { return x(r, split.feature) <= split.threshold; });
    const auto mid = static_cast<std::size_t>(mid_it - rows_.begin());
    if (mid == begin || mid == end) return index;

    const int left = grow(begin, mid, depth + 1);
    const int right = grow(mid, end, depth + 1);
    TreeNode& node = nodes_[static_cast<std::size_t>(index)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left;
    node.right = right;
    return index;
  }

  const TrainingSet& data_;
  std::span<const double> target_;
  std::span<const double> weight_;
  Criterion criterion_;
  TreeParams params_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> rows_;
  std::vector<TreeNode> nodes_;
  std::vector<std::pair<double, std::size_t>> scratch_;
};

std::vector<double> label_targets(const TrainingSet& data) {
  std::vector<double> y(data.rows());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = label_value(data.labels[i]);
  return y;
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

void check_width(std::size_t expected, std::span<const double> x) {
  if (x.size() != expected)
    fail(ErrorCode::DimensionMismatch, "model expects " + std::to_string(expected) +
                                           " features, got " + std::to_string(x.size()));
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::RandomForest: return "RandomForest";
    case ModelKind::ExtraTrees: return "ExtraTrees";
    case ModelKind::GradientBoosting: return "GradientBoosting";
  }
  return "RandomForest";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "rf" || text == "RandomForest") return ModelKind::RandomForest;
  if (text == "et" || text == "ExtraTrees") return ModelKind::ExtraTrees;
  if (text == "gb" || text == "GradientBoosting") return ModelKind::GradientBoosting;
  fail(ErrorCode::InvalidConfig, "unknown model kind '" + std::string(text) + "'");
}

void TrainingSet::add_row(std::span<const double> x, PairLabel label, double weight,
                          std::string group_id) {
  if (rows() == 0 && features.empty() && n_features == 0) n_features = x.size();
  if (x.size() != n_features)
    fail(ErrorCode::DimensionMismatch, "row has " + std::to_string(x.size()) + " features, expected " +
                                           std::to_string(n_features));
  features.insert(features.end(), x.begin(), x.end());
  labels.push_back(label);
  weights.push_back(weight);
  group_ids.push_back(std::move(group_id));
}

TrainingSet TrainingSet::subset(std::span<const std::size_t> rows_to_keep) const {
  TrainingSet out;
  out.n_features = n_features;
  out.features.reserve(rows_to_keep.size() * n_features);
  for (std::size_t r : rows_to_keep) {
    const auto x = row(r);
    out.features.insert(out.features.end(), x.begin(), x.end());
    out.labels.push_back(labels[r]);
    out.weights.push_back(weights[r]);
    out.group_ids.push_back(group_ids[r]);
  }
  return out;
}

void validate(const TrainingSet& data) {
  const std::size_t n = data.rows();
  if (data.features.size() != n * data.n_features || data.weights.size() != n ||
      data.group_ids.size() != n)
    fail(ErrorCode::InvalidValue, "training set columns are not aligned");
  for (double v : data.features)
    if (!std::isfinite(v)) fail(ErrorCode::InvalidValue, "non-finite feature value");
  for (double w : data.weights)
    if (!(w > 0.0) || !std::isfinite(w)) fail(ErrorCode::InvalidValue, "sample weights must be positive");
}

std::vector<double> class_balanced_weights(std::span<const PairLabel> labels) {
  const double n = static_cast<double>(labels.size());
  const auto genuine = static_cast<double>(std::count(labels.begin(), labels.end(), PairLabel::Genuine));
  const double impostor = n - genuine;
  std::vector<double> w(labels.size(), 1.0);
  if (genuine == 0.0 || impostor == 0.0) return w;
  for (std::size_t i = 0; i < labels.size(); ++i)
    w[i] = n / (2.0 * (is_genuine(labels[i]) ? genuine : impostor));
  return w;
}

std::size_t TreeModel::leaf_index(std::span<const double> x) const {
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    const TreeNode& n = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return i;
}

int TreeModel::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, d[i]);
    if (nodes[i].feature >= 0) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return deepest;
}

std::size_t TreeModel::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.feature < 0; }));
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finalizer over a combination of both inputs
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

TreeModel fit_tree(const TrainingSet& data, const TreeParams& params, std::uint64_t seed) {
  validate(data);
  const auto y = label_targets(data);
  TreeBuilder builder(data, y, data.weights, Criterion::Gini, params, seed);
  return builder.build(all_rows(data.rows()), seed);
}

EnsembleModel fit_forest(const TrainingSet& data, ModelKind kind, const ForestOptions& options,
                         std::uint64_t seed) {
  if (kind == ModelKind::GradientBoosting)
    fail(ErrorCode::InvalidConfig, "fit_forest does not build boosting models");
  if (options.n_trees < 1) fail(ErrorCode::InvalidConfig, "a forest needs at least one tree");
  validate(data);

  const std::size_t p = data.n_features;
  TreeParams params;
  params.max_depth = options.max_depth;
  params.min_leaf = options.min_leaf;
  params.max_features = options.max_features == kSqrtFeatures
                            ? static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p))))
                            : options.max_features;
  params.splitter = kind == ModelKind::ExtraTrees ? SplitStrategy::Random : SplitStrategy::Best;
  const bool bootstrap = kind == ModelKind::RandomForest && options.bootstrap;

  const auto y = label_targets(data);
  const std::size_t n = data.rows();

  EnsembleModel model;
  model.kind = kind;
  model.n_features = p;
  model.seed = seed;
  model.feature_subsample = params.max_features > 0 ? static_cast<double>(params.max_features) / static_cast<double>(p) : 1.0;
  model.trees.resize(static_cast<std::size_t>(options.n_trees));

  parallel_for(model.trees.size(), options.threads, [&](std::size_t t) {
    const std::uint64_t tree_seed = derive_seed(seed, t);
    std::vector<double> weights = data.weights;
    std::vector<std::size_t> rows;
    if (bootstrap) {
      std::mt19937_64 rng(derive_seed(tree_seed, 0xB0075712));
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      std::vector<int> counts(n, 0);
      for (std::size_t i = 0; i < n; ++i) ++counts[pick(rng)];
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[i] == 0) continue;
        weights[i] *= counts[i];
        rows.push_back(i);
      }
    } else {
      rows = all_rows(n);
    }
    TreeBuilder builder(data, y, weights, Criterion::Gini, params, tree_seed);
    model.trees[t] = builder.build(std::move(rows), tree_seed);
  });
  return model;
}

EnsembleModel fit_boosting(const TrainingSet& data, const BoostingOptions& options, std::uint64_t seed) {
  if (options.n_stages < 0) fail(ErrorCode::InvalidConfig, "negative number of boosting stages");
  if (!(options.learning_rate > 0.0)) fail(ErrorCode::InvalidConfig, "learning rate must be positive");
  validate(data);
  constexpr double kClip = 1e-6;

  const std::size_t n = data.rows();
  const std::size_t p = data.n_features;
  const auto y = label_targets(data);
  const auto& w = data.weights;

  double w_sum = 0.0, wy_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    w_sum += w[i];
    wy_sum += w[i] * y[i];
  }
  const double base = std::clamp(w_sum > 0.0 ? wy_sum / w_sum : 0.5, kClip, 1.0 - kClip);

  EnsembleModel model;
  model.kind = ModelKind::GradientBoosting;
  model.n_features = p;
  model.seed = seed;
  model.learning_rate = options.learning_rate;
  model.feature_subsample = options.feature_subsample;
  model.init_score = std::log(base / (1.0 - base));

  TreeParams params;
  params.max_depth = options.max_depth;
  params.min_leaf = options.min_leaf;
  params.max_features =
      options.feature_subsample < 1.0
          ? std::max(1, static_cast<int>(std::ceil(options.feature_subsample * static_cast<double>(p))))
          : 0;

  std::vector<double> score(n, model.init_score);
  std::vector<double> residual(n);
  std::vector<double> prob(n);
  const auto rows = all_rows(n);

  for (int stage = 0; stage < options.n_stages; ++stage) {
    for (std::size_t i = 0; i < n; ++i) {
      prob[i] = sigmoid(score[i]);
      residual[i] = y[i] - prob[i];
    }
    const std::uint64_t stage_seed = derive_seed(seed, static_cast<std::uint64_t>(stage));
    TreeBuilder builder(data, residual, w, Criterion::SquaredError, params, stage_seed);
    TreeModel tree = builder.build(rows, stage_seed);

    std::vector<std::vector<std::size_t>> members(tree.nodes.size());
    for (std::size_t i = 0; i < n; ++i) members[tree.leaf_index(data.row(i))].push_back(i);

    for (std::size_t leaf = 0; leaf < tree.nodes.size(); ++leaf) {
      if (tree.nodes[leaf].feature >= 0) continue;
      const auto& m = members[leaf];
      double num = 0.0, den = 0.0;
      for (std::size_t i : m) {
        num += w[i] * residual[i];
        den += w[i] * prob[i] * (1.0 - prob[i]);
      }
      double step = (den > 0.0 ? num / den : 0.0) * options.learning_rate;
      auto leaf_loss = [&](double delta) {
        double loss = 0.0;
        for (std::size_t i : m) loss += w[i] * (softplus(score[i] + delta) - y[i] * (score[i] + delta));
        return loss;
      };
      const double current = leaf_loss(0.0);
      int halvings = 0;
      while (step != 0.0 && leaf_loss(step) > current) {
        step *= 0.5;
        if (++halvings > 60) step = 0.0;
      }
      tree.nodes[leaf].value = step;
      for (std::size_t i : m) score[i] += step;
    }
    model.trees.push_back(std::move(tree));
  }
  return model;
}

double predict_proba(const TreeModel& model, std::span<const double> x) {
  check_width(model.n_features, x);
  return std::clamp(model.value(x), 0.0, 1.0);
}

double predict_proba(const EnsembleModel& model, std::span<const double> x, std::size_t stages) {
  check_width(model.n_features, x);
  const std::size_t used = std::min(stages, model.trees.size());
  if (model.kind == ModelKind::GradientBoosting) {
    double raw = model.init_score;
    for (std::size_t t = 0; t < used; ++t) raw += model.trees[t].value(x);
    return sigmoid(raw);
  }
  if (used == 0) fail(ErrorCode::InvalidValue, "forest without trees");
  double sum = 0.0;
  for (std::size_t t = 0; t < used; ++t) sum += model.trees[t].value(x);
  return std::clamp(sum / static_cast<double>(used), 0.0, 1.0);
}

double predict_proba(const EnsembleModel& model, std::span<const double> x) {
  return predict_proba(model, x, model.trees.size());
}

std::vector<double> predict_proba(const EnsembleModel& model, const TrainingSet& data) {
  std::vector<double> out(data.rows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = predict_proba(model, data.row(i));
  return out;
}

// ---------------------------------------------------------------------------
// Hyperparameter search

std::vector<Candidate> sample_candidates(int n_candidates, std::uint64_t seed, const SearchSpace& space) {
  std::mt19937_64 rng(seed);
  std::vector<Candidate> out;
  for (int i = 0; i < n_candidates; ++i) {
    Candidate c;
    c.n_trees = std::uniform_int_distribution<int>(space.n_trees_min, space.n_trees_max)(rng);
    c.max_depth = std::uniform_int_distribution<int>(space.depth_min, space.depth_max)(rng);
    c.min_leaf = std::uniform_int_distribution<int>(space.min_leaf_min, space.min_leaf_max)(rng);
    c.learning_rate = std::exp(std::uniform_real_distribution<double>(std::log(space.lr_min),
                                                                      std::log(space.lr_max))(rng));
    out.push_back(c);
  }
  return out;
}

EnsembleModel fit_model(const TrainingSet& data, ModelKind kind, const Candidate& candidate,
                        std::uint64_t seed, int threads) {
  if (kind == ModelKind::GradientBoosting) {
    BoostingOptions o;
    o.n_stages = candidate.n_trees;
    o.learning_rate = candidate.learning_rate;
    o.max_depth = candidate.max_depth;
    o.min_leaf = candidate.min_leaf;
    return fit_boosting(data, o, seed);
  }
  ForestOptions o;
  o.n_trees = candidate.n_trees;
  o.max_depth = candidate.max_depth;
  o.min_leaf = candidate.min_leaf;
  o.threads = threads;
  return fit_forest(data, kind, o, seed);
}

std::vector<int> group_kfold(const TrainingSet& data, int k, std::uint64_t seed) {
  if (k < 2) fail(ErrorCode::InvalidConfig, "inner cross-validation needs k >= 2");
  const std::size_t n = data.rows();
  auto group_of = [&](std::size_t i) {
    return data.group_ids[i].empty() ? "#row" + std::to_string(i) : data.group_ids[i];
  };
  std::map<std::string, bool> group_genuine;  // sorted, so the shuffle input is canonical
  for (std::size_t i = 0; i < n; ++i) group_genuine.emplace(group_of(i), is_genuine(data.labels[i]));
  if (group_genuine.size() < static_cast<std::size_t>(k))
    fail(ErrorCode::InsufficientGroups, std::to_string(group_genuine.size()) + " groups for " +
                                            std::to_string(k) + " folds");

  std::vector<std::string> genuine, impostor;
  for (const auto& [g, is_gen] : group_genuine) (is_gen ? genuine : impostor).push_back(g);
  std::mt19937_64 rng(seed);
  std::shuffle(genuine.begin(), genuine.end(), rng);
  std::shuffle(impostor.begin(), impostor.end(), rng);

  std::map<std::string, int> fold_of;
  int next = 0;
  for (const auto* list : {&genuine, &impostor})
    for (const auto& g : *list) fold_of[g] = next++ % k;

  std::vector<int> folds(n);
  for (std::size_t i = 0; i < n; ++i) folds[i] = fold_of.at(group_of(i));
  return folds;
}

SearchResult search_candidates(const TrainingSet& data, ModelKind kind,
                               std::span<const Candidate> candidates, int cv_folds,
                               std::uint64_t seed, int threads) {
  if (candidates.empty()) fail(ErrorCode::InvalidConfig, "no hyperparameter candidates");
  SearchResult result;
  if (candidates.size() == 1) {
    result.best = candidates[0];
    result.cv_eer = std::numeric_limits<double>::quiet_NaN();
    result.trials.push_back({candidates[0], result.cv_eer});
    return result;
  }

  const auto folds = group_kfold(data, cv_folds, seed);
  const std::size_t k = static_cast<std::size_t>(cv_folds);
  std::vector<std::vector<std::size_t>> train_rows(k), val_rows(k);
  for (std::size_t i = 0; i < data.rows(); ++i)
    for (std::size_t f = 0; f < k; ++f)
      (static_cast<std::size_t>(folds[i]) == f ? val_rows : train_rows)[f].push_back(i);

  std::vector<TrainingSet> train_sets, val_sets;
  for (std::size_t f = 0; f < k; ++f) {
    train_sets.push_back(data.subset(train_rows[f]));
    val_sets.push_back(data.subset(val_rows[f]));
  }

  // eer per (candidate, fold); NaN when a validation fold lacks one class
  std::vector<double> scores(candidates.size() * k, std::numeric_limits<double>::quiet_NaN());
  parallel_for(scores.size(), threads, [&](std::size_t job) {
    const std::size_t c = job / k, f = job % k;
    const auto& val = val_sets[f];
    const bool has_gen = std::count(val.labels.begin(), val.labels.end(), PairLabel::Genuine) > 0;
    const bool has_imp = std::count(val.labels.begin(), val.labels.end(), PairLabel::Impostor) > 0;
    if (!has_gen || !has_imp || train_sets[f].rows() == 0) return;
    const auto model = fit_model(train_sets[f], kind, candidates[c], derive_seed(seed, f), 1);
    const auto pred = predict_proba(model, val);
    std::vector<double> g, i;
    for (std::size_t r = 0; r < pred.size(); ++r) (is_genuine(val.labels[r]) ? g : i).push_back(pred[r]);
    scores[job] = eer(g, i);
  });

  result.cv_eer = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    double sum = 0.0;
    int used = 0;
    for (std::size_t f = 0; f < k; ++f) {
      const double s = scores[c * k + f];
      if (!std::isnan(s)) {
        sum += s;
        ++used;
      }
    }
    if (used == 0)
      fail(ErrorCode::InsufficientGroups, "no inner fold contains both genuine and impostor rows");
    const double mean = sum / used;
    result.trials.push_back({candidates[c], mean});
    if (mean < result.cv_eer) {
      result.cv_eer = mean;
      result.best = candidates[c];
    }
  }
  return result;
}

SearchResult randomized_search(const TrainingSet& data, ModelKind kind, int n_candidates,
                               int cv_folds, std::uint64_t seed, int threads, const SearchSpace& space) {
  if (n_candidates < 1) fail(ErrorCode::InvalidConfig, "randomized search needs >= 1 candidate");
  std::set<std::string> groups(data.group_ids.begin(), data.group_ids.end());
  if (groups.size() < static_cast<std::size_t>(cv_folds))
    fail(ErrorCode::InsufficientGroups, std::to_string(groups.size()) + " groups for " +
                                            std::to_string(cv_folds) + " folds");
  const auto candidates = sample_candidates(n_candidates, derive_seed(seed, 0x5EA4C4), space);
  return search_candidates(data, kind, candidates, cv_folds, seed, threads);
}

// ---------------------------------------------------------------------------
// Serialization

std::string model_to_json(const EnsembleModel& model) {
  nlohmann::json doc;
  doc["schema"] = "gazefuse.model/1";
  doc["kind"] = std::string(to_string(model.kind));
  doc["n_features"] = model.n_features;
  doc["learning_rate"] = model.learning_rate;
  doc["init_score"] = model.init_score;
  doc["feature_subsample"] = model.feature_subsample;
  doc["seed"] = model.seed;
  auto& trees = doc["trees"] = nlohmann::json::array();
  for (const auto& t : model.trees) {
    nlohmann::json jt;
    jt["seed"] = t.seed;
    jt["params"] = {{"max_depth", t.params.max_depth},
                    {"min_leaf", t.params.min_leaf},
                    {"max_features", t.params.max_features},
                    {"splitter", t.params.splitter == SplitStrategy::Best ? "best" : "random"}};
    auto& nodes = jt["nodes"] = nlohmann::json::array();
    for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
    trees.push_back(std::move(jt));
  }
  return doc.dump();
}

EnsembleModel model_from_json(std::string_view text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    if (doc.at("schema") != "gazefuse.model/1") fail(ErrorCode::InvalidConfig, "unsupported model schema");
    EnsembleModel m;
    m.kind = parse_model_kind(doc.at("kind").get<std::string>());
    m.n_features = doc.at("n_features").get<std::size_t>();
    m.learning_rate = doc.at("learning_rate").get<double>();
    m.init_score = doc.at("init_score").get<double>();
    m.feature_subsample = doc.at("feature_subsample").get<double>();
    m.seed = doc.at("seed").get<std::uint64_t>();
    for (const auto& jt : doc.at("trees")) {
      TreeModel t;
      t.n_features = m.n_features;
      t.seed = jt.at("seed").get<std::uint64_t>();
      const auto& p = jt.at("params");
      t.params.max_depth = p.at("max_depth").get<int>();
      t.params.min_leaf = p.at("min_leaf").get<int>();
      t.params.max_features = p.at("max_features").get<int>();
      t.params.splitter = p.at("splitter") == "best" ? SplitStrategy::Best : SplitStrategy::Random;
      for (const auto& jn : jt.at("nodes")) {
        TreeNode n{jn.at(0).get<int>(), jn.at(1).get<double>(), jn.at(2).get<int>(), jn.at(3).get<int>(),
                   jn.at(4).get<double>()};
        t.nodes.push_back(n);
      }
      const auto count = static_cast<int>(t.nodes.size());
      for (const auto& n : t.nodes)
        if (n.feature >= 0 && (n.left <= 0 || n.right <= 0 || n.left >= count || n.right >= count ||
                               static_cast<std::size_t>(n.feature) >= m.n_features))
          fail(ErrorCode::InvalidConfig, "malformed tree node");
      if (t.nodes.empty()) fail(ErrorCode::InvalidConfig, "empty tree");
      m.trees.push_back(std::move(t));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("model JSON: ") + e.what());
  }
}

}  // namespace gazefuse
