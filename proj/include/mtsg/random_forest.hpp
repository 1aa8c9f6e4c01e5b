#ifndef MTSG_RANDOM_FOREST_HPP
#define MTSG_RANDOM_FOREST_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mtsg/error.hpp"
#include "mtsg/matrix.hpp"
#include "mtsg/parallel.hpp"
#include "mtsg/random.hpp"

namespace mtsg {

struct RfParams {
  std::size_t n_trees = 500;
  std::size_t mtry = 0;  // 0 selects ceil(f / 3)
  std::size_t min_node_size = 5;
  std::uint64_t seed = 42;

  std::size_t effective_mtry(std::size_t features) const noexcept {
    const std::size_t m = mtry ? mtry : (features + 2) / 3;
    return std::clamp<std::size_t>(m, 1, std::max<std::size_t>(features, 1));
  }
  friend bool operator==(const RfParams&, const RfParams&) = default;
};

/// One CART regression tree stored as flat node arrays.
/// A node is a leaf when feature < 0; otherwise rows with
/// x[feature] <= threshold go left.
struct RegressionTree {
  std::vector<std::int32_t> feature;
  std::vector<double> threshold;
  std::vector<std::uint32_t> left;
  std::vector<std::uint32_t> right;
  std::vector<double> value;

  std::size_t node_count() const noexcept { return feature.size(); }

  double predict(std::span<const double> row) const noexcept {
    std::uint32_t node = 0;
    while (feature[node] >= 0)
      node = row[static_cast<std::size_t>(feature[node])] <= threshold[node] ? left[node] : right[node];
    return value[node];
  }

  friend bool operator==(const RegressionTree&, const RegressionTree&) = default;
};

class RandomForest {
 public:
  RandomForest() = default;

  static RandomForest fit(const RfParams& params, const Matrix& x, std::span<const double> y) {
    if (x.rows() == 0) throw DataError("random forest: empty training data");
    if (x.rows() != y.size())
      throw DataError("random forest: " + std::to_string(x.rows()) + " rows but " +
                      std::to_string(y.size()) + " targets");
    if (params.n_trees == 0) throw ParameterError("random forest: n_trees must be positive");
    if (params.min_node_size == 0) throw ParameterError("random forest: min_node_size must be positive");
    if (params.mtry > x.cols())
      throw ParameterError("random forest: mtry " + std::to_string(params.mtry) + " exceeds " +
                           std::to_string(x.cols()) + " features");

    RandomForest rf;
    rf.params_ = params;
    rf.feature_count_ = x.cols();
    rf.trees_.resize(params.n_trees);
    std::vector<std::vector<double>> per_tree_importance(params.n_trees);
    parallel::parallel_for(params.n_trees, [&](std::size_t t) {
      TreeBuilder builder(params, x, y, derive_seed(params.seed, {t}));
      rf.trees_[t] = builder.build();
      per_tree_importance[t] = std::move(builder.importance);
    });
    rf.raw_importance_.assign(x.cols(), 0.0);
    for (const auto& imp : per_tree_importance)
      for (std::size_t c = 0; c < imp.size(); ++c) rf.raw_importance_[c] += imp[c];
    return rf;
  }

  double predict_row(std::span<const double> row) const noexcept {
    double s = 0.0;
    for (const auto& t : trees_) s += t.predict(row);
    return s / static_cast<double>(trees_.size());
  }

  std::vector<double> predict(const Matrix& x) const {
    if (x.cols() != feature_count_)
      throw DataError("random forest expects " + std::to_string(feature_count_) + " features, got " +
                      std::to_string(x.cols()));
    std::vector<double> out(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) out[r] = predict_row(x.row(r));
    return out;
  }

  /// Total variance reduction per feature, normalised to sum to 1 (all
  /// zeros when the forest never split).
  std::vector<double> importance() const {
    std::vector<double> imp = raw_importance_;
    const double total = std::accumulate(imp.begin(), imp.end(), 0.0);
    if (total > 0.0)
      for (double& v : imp) v /= total;
    return imp;
  }

  const std::vector<double>& raw_importance() const noexcept { return raw_importance_; }
  const std::vector<RegressionTree>& trees() const noexcept { return trees_; }
  const RfParams& params() const noexcept { return params_; }
  std::size_t feature_count() const noexcept { return feature_count_; }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["feature_count"] = feature_count_;
    j["raw_importance"] = raw_importance_;
    auto& trees = j["trees"] = nlohmann::json::array();
    for (const auto& t : trees_)
      trees.push_back({{"feature", t.feature},
                       {"threshold", t.threshold},
                       {"left", t.left},
                       {"right", t.right},
                       {"value", t.value}});
    return j;
  }

  static RandomForest from_json(const nlohmann::json& j, const RfParams& params) {
    RandomForest rf;
    rf.params_ = params;
    rf.feature_count_ = j.at("feature_count").get<std::size_t>();
    rf.raw_importance_ = j.at("raw_importance").get<std::vector<double>>();
    for (const auto& tj : j.at("trees")) {
      RegressionTree t;
      tj.at("feature").get_to(t.feature);
      tj.at("threshold").get_to(t.threshold);
      tj.at("left").get_to(t.left);
      tj.at("right").get_to(t.right);
      tj.at("value").get_to(t.value);
      const std::size_t n = t.feature.size();
      if (n == 0 || t.threshold.size() != n || t.left.size() != n || t.right.size() != n ||
          t.value.size() != n)
        throw DataError("random forest: corrupted tree arrays");
      for (std::size_t i = 0; i < n; ++i)
        if (t.feature[i] >= 0 && (static_cast<std::size_t>(t.feature[i]) >= rf.feature_count_ ||
                                  t.left[i] >= n || t.right[i] >= n || t.left[i] <= i || t.right[i] <= i))
          throw DataError("random forest: corrupted tree node " + std::to_string(i));
      rf.trees_.push_back(std::move(t));
    }
    if (rf.trees_.empty()) throw DataError("random forest: no trees in model");
    return rf;
  }

 private:
  class TreeBuilder {
   public:
    TreeBuilder(const RfParams& params, const Matrix& x, std::span<const double> y, std::uint64_t seed)
        : params_(params), x_(x), y_(y), rng_(seed), importance(x.cols(), 0.0) {}

    RegressionTree build() {
      const std::size_t n = x_.rows();
      std::vector<std::size_t> sample(n);
      for (auto& s : sample) s = static_cast<std::size_t>(rng_.below(n));
      features_.resize(x_.cols());
      std::iota(features_.begin(), features_.end(), std::size_t{0});

      struct Pending {
        std::uint32_t node;
        std::size_t begin, end;
      };
      std::vector<Pending> stack;
      stack.push_back({add_node(), 0, n});
      while (!stack.empty()) {
        const Pending p = stack.back();
        stack.pop_back();
        const Split s = best_split(sample, p.begin, p.end);
        if (!s.valid) {
          tree_.value[p.node] = mean_of(sample, p.begin, p.end);
          continue;
        }
        auto mid = std::partition(sample.begin() + static_cast<std::ptrdiff_t>(p.begin),
                                  sample.begin() + static_cast<std::ptrdiff_t>(p.end),
                                  [&](std::size_t r) { return x_(r, s.feature) <= s.threshold; });
        const std::size_t m = static_cast<std::size_t>(mid - sample.begin());
        importance[s.feature] += s.gain;
        const std::uint32_t l = add_node();
        const std::uint32_t r = add_node();
        tree_.feature[p.node] = static_cast<std::int32_t>(s.feature);
        tree_.threshold[p.node] = s.threshold;
        tree_.left[p.node] = l;
        tree_.right[p.node] = r;
        tree_.value[p.node] = mean_of(sample, p.begin, p.end);
        stack.push_back({r, m, p.end});
        stack.push_back({l, p.begin, m});
      }
      return std::move(tree_);
    }

   private:
    struct Split {
      bool valid = false;
      std::size_t feature = 0;
      double threshold = 0.0;
      double gain = 0.0;
    };

    std::uint32_t add_node() {
      tree_.feature.push_back(-1);
      tree_.threshold.push_back(0.0);
      tree_.left.push_back(0);
      tree_.right.push_back(0);
      tree_.value.push_back(0.0);
      return static_cast<std::uint32_t>(tree_.feature.size() - 1);
    }

    double mean_of(const std::vector<std::size_t>& sample, std::size_t b, std::size_t e) const {
      double s = 0.0;
      for (std::size_t i = b; i < e; ++i) s += y_[sample[i]];
      return s / static_cast<double>(e - b);
    }

    Split best_split(const std::vector<std::size_t>& sample, std::size_t b, std::size_t e) {
      Split best;
      const std::size_t count = e - b;
      if (count <= params_.min_node_size || count < 2) return best;

      double sum = 0.0;
      const double first = y_[sample[b]];
      bool constant = true;
      for (std::size_t i = b; i < e; ++i) {
        sum += y_[sample[i]];
        constant = constant && y_[sample[i]] == first;
      }
      if (constant) return best;
      const double parent = sum * sum / static_cast<double>(count);

      // Partial Fisher-Yates: the first mtry entries become the candidates.
      const std::size_t mtry = params_.effective_mtry(x_.cols());
      for (std::size_t k = 0; k < mtry; ++k) {
        const std::size_t swap_with = k + static_cast<std::size_t>(rng_.below(features_.size() - k));
        std::swap(features_[k], features_[swap_with]);
      }

      pairs_.resize(count);
      for (std::size_t k = 0; k < mtry; ++k) {
        const std::size_t f = features_[k];
        for (std::size_t i = 0; i < count; ++i) {
          const std::size_t r = sample[b + i];
          pairs_[i] = {x_(r, f), y_[r]};
        }
        std::sort(pairs_.begin(), pairs_.end());
        double left_sum = 0.0;
        for (std::size_t i = 0; i + 1 < count; ++i) {
          left_sum += pairs_[i].second;
          if (pairs_[i].first == pairs_[i + 1].first) continue;
          const double nl = static_cast<double>(i + 1);
          const double nr = static_cast<double>(count - i - 1);
          const double right_sum = sum - left_sum;
          const double gain = left_sum * left_sum / nl + right_sum * right_sum / nr - parent;
          if (gain > best.gain) {
            double t = 0.5 * (pairs_[i].first + pairs_[i + 1].first);
            if (!(t < pairs_[i + 1].first)) t = pairs_[i].first;
            best = {true, f, t, gain};
          }
        }
      }
      // Rounding noise on an essentially pure node is not a split.
      if (best.valid && best.gain <= 1e-12 * std::max(1.0, parent)) best.valid = false;
      return best;
    }

    const RfParams& params_;
    const Matrix& x_;
    std::span<const double> y_;
    SplitMix64 rng_;
    RegressionTree tree_;
    std::vector<std::size_t> features_;
    std::vector<std::pair<double, double>> pairs_;

   public:
    std::vector<double> importance;
  };

  RfParams params_;
  std::size_t feature_count_ = 0;
  std::vector<RegressionTree> trees_;
  std::vector<double> raw_importance_;
};

}  // namespace mtsg

#endif  // MTSG_RANDOM_FOREST_HPP
