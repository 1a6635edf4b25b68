#include "smad/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "smad/error.hpp"

namespace smad::forest {

namespace {

using nlohmann::json;

struct Task {
  int node;
  std::vector<int> members;
  int depth;
};

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double score = -1.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<const double*>& rows, const std::vector<bool>& is_morph,
              std::size_t dim, const ForestParams& params, double bonafide_weight, double morph_weight)
      : rows_(rows), is_morph_(is_morph), dim_(dim), params_(params),
        class_weight_{bonafide_weight, morph_weight}, mtry_(params.features_for(dim)) {}

  Tree build(std::uint64_t seed) {
    Rng rng(seed);
    const int n = static_cast<int>(rows_.size());
    std::vector<double> weight(n, 0.0);
    if (params_.bootstrap) {
      for (int i = 0; i < n; ++i) weight[rng.below(static_cast<std::uint64_t>(n))] += 1.0;
    } else {
      std::fill(weight.begin(), weight.end(), 1.0);
    }
    weight_.resize(n);
    std::vector<int> members;
    for (int i = 0; i < n; ++i) {
      weight_[i] = weight[i] * class_weight_[is_morph_[i] ? 1 : 0];
      if (weight[i] > 0.0) members.push_back(i);
    }

    order_.resize(dim_);
    std::iota(order_.begin(), order_.end(), 0);

    Tree tree;
    tree.nodes.emplace_back();
    std::vector<Task> stack;
    stack.push_back({0, std::move(members), 0});
    while (!stack.empty()) {
      Task task = std::move(stack.back());
      stack.pop_back();

      double w_bf = 0.0, w_m = 0.0;
      for (int i : task.members) (is_morph_[i] ? w_m : w_bf) += weight_[i];
      tree.nodes[task.node].p_morph = w_m / (w_bf + w_m);

      const bool pure = w_bf == 0.0 || w_m == 0.0;
      const bool too_small = task.members.size() < 2 * static_cast<std::size_t>(params_.min_samples_leaf);
      const bool too_deep = params_.max_depth > 0 && task.depth >= params_.max_depth;
      if (pure || too_small || too_deep) continue;

      const Split split = best_split(task.members, rng);
      if (split.feature < 0) continue;

      std::vector<int> left, right;
      for (int i : task.members) {
        (rows_[i][split.feature] <= split.threshold ? left : right).push_back(i);
      }
      const int left_index = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      Node& node = tree.nodes[task.node];
      node.feature = split.feature;
      node.threshold = split.threshold;
      node.left = left_index;
      node.right = left_index + 1;
      stack.push_back({left_index + 1, std::move(right), task.depth + 1});
      stack.push_back({left_index, std::move(left), task.depth + 1});
    }
    return tree;
  }

 private:
  Split best_split(const std::vector<int>& members, Rng& rng) {
    Split best;
    std::size_t informative = 0;
    const std::size_t min_leaf = static_cast<std::size_t>(params_.min_samples_leaf);
    values_.resize(members.size());
    for (std::size_t j = 0; j < dim_ && informative < mtry_; ++j) {
      std::swap(order_[j], order_[j + rng.below(dim_ - j)]);
      const int f = order_[j];
      for (std::size_t k = 0; k < members.size(); ++k) values_[k] = {rows_[members[k]][f], members[k]};
      std::sort(values_.begin(), values_.end());
      if (values_.front().first == values_.back().first) continue;
      ++informative;

      double total[2] = {0.0, 0.0};
      for (const auto& v : values_) total[is_morph_[v.second] ? 1 : 0] += weight_[v.second];
      double left[2] = {0.0, 0.0};
      for (std::size_t k = 0; k + 1 < values_.size(); ++k) {
        left[is_morph_[values_[k].second] ? 1 : 0] += weight_[values_[k].second];
        const double lo = values_[k].first;
        const double hi = values_[k + 1].first;
        if (lo == hi) continue;
        if (k + 1 < min_leaf || values_.size() - k - 1 < min_leaf) continue;
        const double wl = left[0] + left[1];
        const double r0 = total[0] - left[0];
        const double r1 = total[1] - left[1];
        const double wr = r0 + r1;
        if (wl <= 0.0 || wr <= 0.0) continue;
        const double score = (left[0] * left[0] + left[1] * left[1]) / wl + (r0 * r0 + r1 * r1) / wr;
        double threshold = lo + (hi - lo) / 2.0;
        if (threshold >= hi) threshold = lo;
        const bool better = score > best.score ||
                            (score == best.score &&
                             (f < best.feature || (f == best.feature && threshold < best.threshold)));
        if (better) best = {f, threshold, score};
      }
    }
    return best;
  }

  const std::vector<const double*>& rows_;
  const std::vector<bool>& is_morph_;
  std::size_t dim_;
  const ForestParams& params_;
  double class_weight_[2];
  std::size_t mtry_;
  std::vector<double> weight_;
  std::vector<int> order_;
  std::vector<std::pair<double, int>> values_;
};

std::string rule_name(FeatureRule rule) {
  switch (rule) {
    case FeatureRule::sqrt: return "sqrt";
    case FeatureRule::log2: return "log2";
    case FeatureRule::all: return "all";
    case FeatureRule::fixed: return "fixed";
  }
  return "sqrt";
}

FeatureRule parse_rule(const std::string& name) {
  if (name == "sqrt") return FeatureRule::sqrt;
  if (name == "log2") return FeatureRule::log2;
  if (name == "all") return FeatureRule::all;
  if (name == "fixed") return FeatureRule::fixed;
  throw DataError("unknown features_per_split rule '" + name + "'");
}

json params_to_json(const ForestParams& p) {
  return {{"n_trees", p.n_trees},
          {"max_depth", p.max_depth},
          {"min_samples_leaf", p.min_samples_leaf},
          {"features_per_split", rule_name(p.features_per_split)},
          {"fixed_features", p.fixed_features},
          {"bootstrap", p.bootstrap},
          {"balanced_class_weights", p.balanced_class_weights},
          {"seed", p.seed}};
}

ForestParams params_from_json(const json& j) {
  ForestParams p;
  p.n_trees = j.at("n_trees").get<int>();
  p.max_depth = j.at("max_depth").get<int>();
  p.min_samples_leaf = j.at("min_samples_leaf").get<int>();
  p.features_per_split = parse_rule(j.at("features_per_split").get<std::string>());
  p.fixed_features = j.at("fixed_features").get<int>();
  p.bootstrap = j.at("bootstrap").get<bool>();
  p.balanced_class_weights = j.at("balanced_class_weights").get<bool>();
  p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

}  // namespace

std::string to_string(FeatureRule rule) { return rule_name(rule); }

FeatureRule parse_feature_rule(const std::string& name) {
  try {
    return parse_rule(name);
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
}

void ForestParams::validate() const {
  if (n_trees < 1) throw UsageError("n_trees must be >= 1");
  if (min_samples_leaf < 1) throw UsageError("min_samples_leaf must be >= 1");
  if (max_depth < 0) throw UsageError("max_depth must be >= 0 (0 = unlimited)");
  if (features_per_split == FeatureRule::fixed && fixed_features < 1) {
    throw UsageError("fixed features_per_split needs a positive count");
  }
}

std::size_t ForestParams::features_for(std::size_t dim) const {
  std::size_t k = dim;
  switch (features_per_split) {
    case FeatureRule::sqrt: k = static_cast<std::size_t>(std::sqrt(static_cast<double>(dim))); break;
    case FeatureRule::log2: k = static_cast<std::size_t>(std::log2(static_cast<double>(std::max<std::size_t>(dim, 1)))); break;
    case FeatureRule::all: k = dim; break;
    case FeatureRule::fixed: k = static_cast<std::size_t>(fixed_features); break;
  }
  return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(dim, 1));
}

double Tree::predict(std::span<const double> x) const {
  int index = 0;
  while (nodes[index].feature >= 0) {
    const Node& n = nodes[index];
    index = x[n.feature] <= n.threshold ? n.left : n.right;
  }
  return nodes[index].p_morph;
}

std::string training_digest(std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  std::string joined;
  for (const auto& id : ids) {
    joined += id;
    joined += '\n';
  }
  return sha256_hex(joined);
}

ForestModel train_forest(std::span<const features::FeatureVector> X, std::span<const Label> y,
                         const ForestParams& params, std::span<const std::string> ids) {
  params.validate();
  if (X.size() != y.size()) throw DataError("feature and label counts differ");
  if (X.size() < 2) throw DataError("need at least two training samples");
  if (!ids.empty() && ids.size() != X.size()) throw DataError("id and sample counts differ");
  const std::size_t dim = X.front().dim();
  if (dim == 0) throw DataError("feature vectors are empty");
  for (const auto& v : X) {
    if (v.dim() != dim) throw DataError("inconsistent feature dimensions in training data");
    for (double value : v.values) {
      if (!std::isfinite(value)) throw DataError("non-finite feature value in training data");
    }
  }
  const auto n_morph = static_cast<std::size_t>(std::count(y.begin(), y.end(), Label::morph));
  if (n_morph == 0 || n_morph == y.size()) throw DataError("training data must contain both classes");

  std::vector<std::string> keys(X.size());
  for (std::size_t i = 0; i < X.size(); ++i) keys[i] = ids.empty() ? std::to_string(i) : ids[i];
  std::vector<std::size_t> order(X.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (keys[order[i]] == keys[order[i - 1]]) throw DataError("duplicate training id '" + keys[order[i]] + "'");
  }

  std::vector<const double*> rows(X.size());
  std::vector<bool> is_morph(X.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    rows[i] = X[order[i]].values.data();
    is_morph[i] = y[order[i]] == Label::morph;
  }

  double w_bf = 1.0, w_m = 1.0;
  if (params.balanced_class_weights) {
    const double n = static_cast<double>(X.size());
    w_m = n / (2.0 * static_cast<double>(n_morph));
    w_bf = n / (2.0 * static_cast<double>(X.size() - n_morph));
  }

  ForestModel model;
  model.params = params;
  model.feature_dim = dim;
  model.method = X.front().method;
  model.training_digest = training_digest(keys);
  model.trees.resize(static_cast<std::size_t>(params.n_trees));
  parallel_for(model.trees.size(), [&](std::size_t t) {
    TreeBuilder builder(rows, is_morph, dim, params, w_bf, w_m);
    model.trees[t] = builder.build(combine_seeds(params.seed, t));
  });
  return model;
}

std::vector<double> tree_scores(const ForestModel& model, std::span<const double> x) {
  if (x.size() != model.feature_dim) {
    throw DataError("feature dimension mismatch: model expects " + std::to_string(model.feature_dim) +
                    ", got " + std::to_string(x.size()));
  }
  std::vector<double> scores;
  scores.reserve(model.trees.size());
  for (const auto& tree : model.trees) scores.push_back(tree.predict(x));
  return scores;
}

double predict_score(const ForestModel& model, std::span<const double> x) {
  const auto scores = tree_scores(model, x);
  if (scores.empty()) throw DataError("model has no trees");
  double sum = 0.0;
  for (double s : scores) sum += s;
  return std::clamp(sum / static_cast<double>(scores.size()), 0.0, 1.0);
}

double predict_score(const ForestModel& model, const features::FeatureVector& x) {
  return predict_score(model, std::span<const double>(x.values));
}

std::string serialize(const ForestModel& model) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["feature_dim"] = model.feature_dim;
  doc["method"] = model.method;
  doc["params"] = params_to_json(model.params);
  doc["training_digest"] = model.training_digest;
  if (model.operating_points) {
    doc["operating_points"] = {{"eer_threshold", model.operating_points->eer_threshold},
                               {"bpcer10_threshold", model.operating_points->bpcer10_threshold},
                               {"bpcer20_threshold", model.operating_points->bpcer20_threshold}};
  }
  json trees = json::array();
  for (const auto& tree : model.trees) {
    json feature = json::array(), threshold = json::array(), left = json::array(), right = json::array(),
         p = json::array();
    for (const auto& n : tree.nodes) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      p.push_back(n.p_morph);
    }
    trees.push_back({{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"p_morph", p}});
  }
  doc["trees"] = std::move(trees);
  return doc.dump();
}

ForestModel deserialize(const std::string& text) {
  ForestModel model;
  try {
    const json doc = json::parse(text);
    const int version = doc.at("format_version").get<int>();
    if (version != kFormatVersion) {
      throw DataError("model format version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kFormatVersion) + ")");
    }
    model.feature_dim = doc.at("feature_dim").get<std::size_t>();
    model.method = doc.at("method").get<std::string>();
    model.params = params_from_json(doc.at("params"));
    model.training_digest = doc.at("training_digest").get<std::string>();
    if (doc.contains("operating_points")) {
      const auto& op = doc.at("operating_points");
      model.operating_points = OperatingPoints{op.at("eer_threshold").get<double>(),
                                               op.at("bpcer10_threshold").get<double>(),
                                               op.at("bpcer20_threshold").get<double>()};
    }
    for (const auto& t : doc.at("trees")) {
      const auto feature = t.at("feature").get<std::vector<int>>();
      const auto threshold = t.at("threshold").get<std::vector<double>>();
      const auto left = t.at("left").get<std::vector<int>>();
      const auto right = t.at("right").get<std::vector<int>>();
      const auto p = t.at("p_morph").get<std::vector<double>>();
      const std::size_t n = feature.size();
      if (n == 0 || threshold.size() != n || left.size() != n || right.size() != n || p.size() != n) {
        throw DataError("corrupt tree arrays");
      }
      Tree tree;
      tree.nodes.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        Node& node = tree.nodes[i];
        node = {feature[i], threshold[i], left[i], right[i], p[i]};
        if (node.feature >= 0) {
          if (static_cast<std::size_t>(node.feature) >= model.feature_dim) throw DataError("split feature out of range");
          const auto in_range = [&](int c) { return c > static_cast<int>(i) && static_cast<std::size_t>(c) < n; };
          if (!in_range(node.left) || !in_range(node.right)) throw DataError("corrupt child index");
        } else if (!(node.p_morph >= 0.0 && node.p_morph <= 1.0)) {
          throw DataError("leaf probability out of range");
        }
      }
      model.trees.push_back(std::move(tree));
    }
    if (model.trees.empty()) throw DataError("model has no trees");
  } catch (const json::exception& e) {
    throw DataError(std::string("corrupt model file: ") + e.what());
  }
  return model;
}

void save_model(const ForestModel& model, const std::filesystem::path& path) {
  write_text_file(path, serialize(model));
}

ForestModel load_model(const std::filesystem::path& path) {
  try {
    return deserialize(read_text_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace smad::forest
