#pragma once

// Random forest detector: Gini-split CART trees over bootstrap resamples.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "smad/features/types.hpp"
#include "smad/util.hpp"

namespace smad::forest {

enum class FeatureRule { sqrt, log2, all, fixed };

std::string to_string(FeatureRule rule);
/// "sqrt", "log2", "all" or "fixed"; throws UsageError otherwise.
FeatureRule parse_feature_rule(const std::string& name);

struct ForestParams {
  int n_trees = 300;
  int max_depth = 0;  // 0 = unlimited
  int min_samples_leaf = 1;
  FeatureRule features_per_split = FeatureRule::sqrt;
  int fixed_features = 0;  // used with FeatureRule::fixed
  bool bootstrap = true;
  bool balanced_class_weights = false;
  std::uint64_t seed = 0;

  void validate() const;
  /// Number of candidate features examined per split for a given dimension.
  std::size_t features_for(std::size_t dim) const;
};

/// Internal nodes have feature >= 0 and send x[feature] <= threshold left.
/// Leaves have feature == -1 and carry P(morph).
struct Node {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double p_morph = 0.0;
};

struct Tree {
  std::vector<Node> nodes;  // nodes[0] is the root

  double predict(std::span<const double> x) const;
};

/// Operating thresholds carried alongside a model, taken from a validation
/// score set when one was available at training time.
struct OperatingPoints {
  double eer_threshold = 0.5;
  double bpcer10_threshold = 0.5;
  double bpcer20_threshold = 0.5;
};

struct ForestModel {
  std::vector<Tree> trees;
  ForestParams params;
  std::size_t feature_dim = 0;
  std::string method;
  std::string training_digest;
  std::optional<OperatingPoints> operating_points;
};

inline constexpr int kFormatVersion = 1;

/// Samples are put in id order before anything random happens, so the
/// model depends on the (id, vector, label) set and not on input order.
/// Without ids, positions ("0", "1", ...) serve as ids.
ForestModel train_forest(std::span<const features::FeatureVector> X, std::span<const Label> y,
                         const ForestParams& params, std::span<const std::string> ids = {});

/// Mean over trees of leaf P(morph).
double predict_score(const ForestModel& model, std::span<const double> x);
double predict_score(const ForestModel& model, const features::FeatureVector& x);
std::vector<double> tree_scores(const ForestModel& model, std::span<const double> x);

std::string serialize(const ForestModel& model);
ForestModel deserialize(const std::string& text);
void save_model(const ForestModel& model, const std::filesystem::path& path);
ForestModel load_model(const std::filesystem::path& path);

std::string training_digest(std::vector<std::string> ids);

}  // namespace smad::forest
