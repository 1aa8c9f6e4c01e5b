#ifndef MTSG_MTR_HPP
#define MTSG_MTR_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mtsg/error.hpp"
#include "mtsg/learners.hpp"
#include "mtsg/matrix.hpp"
#include "mtsg/parallel.hpp"
#include "mtsg/random.hpp"
#include "mtsg/tabular.hpp"

namespace mtsg {

enum class Method { st, sst, erc, motc, drs, mtas, mtsg };

inline constexpr Method kAllMethods[] = {Method::st,   Method::sst, Method::erc, Method::motc,
                                         Method::drs,  Method::mtas, Method::mtsg};

inline std::string to_string(Method m) {
  switch (m) {
    case Method::st: return "ST";
    case Method::sst: return "SST";
    case Method::erc: return "ERC";
    case Method::motc: return "MOTC";
    case Method::drs: return "DRS";
    case Method::mtas: return "MTAS";
    case Method::mtsg: return "MTSG";
  }
  return "?";
}

inline Method parse_method(std::string name) {
  for (auto& ch : name) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  for (Method m : kAllMethods)
    if (to_string(m) == name) return m;
  throw ParameterError("unknown method '" + name + "' (allowed: st, sst, erc, motc, drs, mtas, mtsg)");
}

enum class FilterRule { mean_threshold, keep_all };

inline std::string to_string(FilterRule r) { return r == FilterRule::keep_all ? "keep-all" : "mean-threshold"; }

inline FilterRule parse_filter_rule(const std::string& s) {
  if (s == "mean-threshold" || s == "mean_threshold") return FilterRule::mean_threshold;
  if (s == "keep-all" || s == "keep_all") return FilterRule::keep_all;
  throw ParameterError("unknown filter rule '" + s + "' (allowed: mean-threshold, keep-all)");
}

struct MtrMethodSpec {
  Method method = Method::st;
  LearnerSpec base;                      // per-target / Level-1 learner
  std::vector<LearnerSpec> level0_pool;  // MTSG and MTAS only
  std::size_t erc_chains = 10;
  std::size_t drs_max_layers = 5;
  std::size_t motc_max_children = 2;
  std::size_t motc_max_depth = 2;
  FilterRule filter_rule = FilterRule::mean_threshold;
  std::size_t filter_trees = 500;
  std::uint64_t seed = 42;
  // 0 trains stacked layers on in-sample predictions of the layer below;
  // k >= 2 uses k-fold out-of-fold predictions instead.
  std::size_t oof_folds = 0;
};

/// Seed for one model inside a method: (stage, learner, target) address.
/// ST, the first stage of every stacking method and chain 0 of ERC share
/// stage 0, which is what makes the structural identities exact.
inline std::uint64_t model_seed(std::uint64_t method_seed, std::uint64_t stage, std::uint64_t learner,
                                std::uint64_t target) {
  return derive_seed(method_seed, {stage, learner, target});
}

namespace stage {
inline constexpr std::uint64_t level0 = 0;
inline constexpr std::uint64_t level1 = 1;  // DRS layer L uses stage L
inline constexpr std::uint64_t filter = 1000;
inline constexpr std::uint64_t erc_chain = 2000;  // chain c > 0 uses erc_chain + c
inline constexpr std::uint64_t folds = 4000;
inline constexpr std::uint64_t permutations = 5000;
}  // namespace stage

struct ChainModel {
  std::vector<std::size_t> order;        // target at each chain position
  std::vector<RegressionModel> models;   // models[k] sees x plus predictions of order[0..k)
};

struct TargetTreeNode {
  std::size_t target = 0;
  std::size_t depth = 0;
  std::vector<std::size_t> children;     // node indices
  std::vector<std::size_t> descendants;  // node indices, breadth-first; their predictions augment x
  RegressionModel model;
};

/// Dependency tree for one target; node 0 is the root, nodes are stored in
/// breadth-first order.
struct TargetTree {
  std::vector<TargetTreeNode> nodes;
};

struct MultiTargetModel {
  MtrMethodSpec spec;
  std::size_t feature_count = 0;
  std::size_t target_count = 0;
  std::vector<std::string> feature_names;
  std::vector<std::string> target_names;

  std::vector<std::vector<RegressionModel>> level0;  // [learner][target]
  std::vector<std::vector<bool>> filter_masks;       // [target] over j*d prediction columns
  std::vector<RegressionModel> level1;               // [target]
  std::vector<std::vector<RegressionModel>> layers;  // DRS layers 1..L, each [target]
  std::vector<ChainModel> chains;                    // ERC
  std::vector<TargetTree> trees;                     // MOTC, one per target

  // When present, predict() scales inputs and unscales outputs.
  std::optional<ScalingParams> x_scaling;
  std::optional<ScalingParams> y_scaling;
};

struct PredictionMatrix {
  Matrix values;
  std::vector<std::string> target_names;
};

/// Classic single-target stacked generalisation.
struct StackedModel {
  std::vector<RegressionModel> level0;
  RegressionModel level1;
};

namespace detail {

inline void check_shapes(const Matrix& x, const Matrix& y) {
  if (x.rows() == 0) throw DataError("no training rows");
  if (x.rows() != y.rows())
    throw DataError("x has " + std::to_string(x.rows()) + " rows but y has " + std::to_string(y.rows()));
  if (x.cols() == 0) throw DataError("no input features");
  if (y.cols() == 0) throw DataError("no targets");
}

inline std::vector<std::size_t> fold_assignment(std::size_t n, std::size_t folds, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  SplitMix64 rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(i))]);
  std::vector<std::size_t> fold(n);
  for (std::size_t p = 0; p < n; ++p) fold[order[p]] = p % folds;
  return fold;
}

struct Fitted {
  RegressionModel model;
  std::vector<double> train_predictions;
};

/// Trains on all rows and returns the predictions a stacked layer sees for
/// the training rows: in-sample, or out-of-fold when folds >= 2.
inline Fitted fit_and_predict_train(const LearnerSpec& spec, const Matrix& x, std::span<const double> y,
                                    std::size_t folds, std::uint64_t method_seed) {
  Fitted out{train(spec, x, y), {}};
  if (folds < 2 || x.rows() < folds) {
    out.train_predictions = predict(out.model, x);
    return out;
  }
  const auto fold = fold_assignment(x.rows(), folds, derive_seed(method_seed, {stage::folds}));
  out.train_predictions.assign(x.rows(), 0.0);
  for (std::size_t k = 0; k < folds; ++k) {
    std::vector<std::size_t> fit_rows, held_rows;
    for (std::size_t i = 0; i < x.rows(); ++i) (fold[i] == k ? held_rows : fit_rows).push_back(i);
    std::vector<double> fit_y;
    for (auto i : fit_rows) fit_y.push_back(y[i]);
    const auto m = train(spec, x.select_rows(fit_rows), fit_y);
    const auto p = predict(m, x.select_rows(held_rows));
    for (std::size_t i = 0; i < held_rows.size(); ++i) out.train_predictions[held_rows[i]] = p[i];
  }
  return out;
}

inline Matrix columns_to_matrix(const std::vector<std::vector<double>>& cols, std::size_t rows) {
  Matrix m(rows, cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c) m.set_column(c, cols[c]);
  return m;
}

inline Matrix predict_all(const std::vector<RegressionModel>& models, const Matrix& x) {
  Matrix out(x.rows(), models.size());
  for (std::size_t t = 0; t < models.size(); ++t) out.set_column(t, predict(models[t], x));
  return out;
}

/// |Pearson r| between two columns; 0 when either is constant.
inline double abs_correlation(const Matrix& y, std::size_t a, std::size_t b) {
  const std::size_t n = y.rows();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += y(i, a);
    mb += y(i, b);
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = y(i, a) - ma, db = y(i, b) - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) return 0.0;
  return std::abs(sab / std::sqrt(saa * sbb));
}

inline std::vector<std::size_t> mask_indices(const std::vector<bool>& mask) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) idx.push_back(i);
  return idx;
}

inline std::size_t factorial_capped(std::size_t d, std::size_t cap) {
  std::size_t f = 1;
  for (std::size_t i = 2; i <= d; ++i) {
    f *= i;
    if (f >= cap) return cap;
  }
  return f;
}

inline MultiTargetModel skeleton(const MtrMethodSpec& spec, const Matrix& x, const Matrix& y) {
  check_shapes(x, y);
  MultiTargetModel m;
  m.spec = spec;
  m.feature_count = x.cols();
  m.target_count = y.cols();
  for (std::size_t i = 0; i < x.cols(); ++i) m.feature_names.push_back("x" + std::to_string(i));
  for (std::size_t i = 0; i < y.cols(); ++i) m.target_names.push_back("y" + std::to_string(i));
  return m;
}

/// Level-0 grid over (learner, target). Returns the n x (j*d) matrix of
/// training-row predictions with column r*d + t.
inline Matrix train_level0_grid(MultiTargetModel& m, const std::vector<LearnerSpec>& pool, const Matrix& x,
                                const Matrix& y) {
  const std::size_t j = pool.size(), d = y.cols();
  m.level0.assign(j, std::vector<RegressionModel>(d));
  Matrix y0(x.rows(), j * d);
  std::vector<std::vector<double>> preds(j * d);
  parallel::parallel_for(j * d, [&](std::size_t k) {
    const std::size_t r = k / d, t = k % d;
    const auto yt = y.column(t);
    try {
      auto fit = fit_and_predict_train(pool[r].with_seed(model_seed(m.spec.seed, stage::level0, r, t)), x, yt,
                                       m.spec.oof_folds, m.spec.seed);
      m.level0[r][t] = std::move(fit.model);
      preds[k] = std::move(fit.train_predictions);
    } catch (const DataError& e) {
      throw DataError("target " + std::to_string(t) + ": " + e.what());
    }
  });
  for (std::size_t k = 0; k < j * d; ++k) y0.set_column(k, preds[k]);
  return y0;
}

inline Matrix level0_grid_predictions(const MultiTargetModel& m, const Matrix& x) {
  const std::size_t j = m.level0.size(), d = m.target_count;
  Matrix y0(x.rows(), j * d);
  for (std::size_t r = 0; r < j; ++r)
    for (std::size_t t = 0; t < d; ++t) y0.set_column(r * d + t, predict(m.level0[r][t], x));
  return y0;
}

/// d models trained on `inputs` against each target column.
inline std::vector<RegressionModel> train_per_target(const MtrMethodSpec& spec, std::uint64_t stage_id,
                                                     const Matrix& inputs, const Matrix& y,
                                                     std::vector<std::vector<double>>* train_preds = nullptr) {
  const std::size_t d = y.cols();
  std::vector<RegressionModel> models(d);
  if (train_preds) train_preds->assign(d, {});
  parallel::parallel_for(d, [&](std::size_t t) {
    const auto yt = y.column(t);
    try {
      auto fit = fit_and_predict_train(spec.base.with_seed(model_seed(spec.seed, stage_id, 0, t)), inputs, yt,
                                       train_preds ? spec.oof_folds : 0, spec.seed);
      models[t] = std::move(fit.model);
      if (train_preds) (*train_preds)[t] = std::move(fit.train_predictions);
    } catch (const DataError& e) {
      throw DataError("target " + std::to_string(t) + ": " + e.what());
    }
  });
  return models;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Relevance filter

/// Chooses which of the j*d Level-0 prediction columns feed target t's
/// meta-model. mean-threshold keeps columns whose forest importance is at
/// least the mean importance; when nothing qualifies (all importances zero)
/// it keeps the j columns that predict t itself.
inline std::vector<bool> filter_relevant(const Matrix& y0, std::span<const double> y_t, FilterRule rule,
                                         std::uint64_t seed, std::size_t learners, std::size_t target,
                                         std::size_t n_trees = 500) {
  if (y0.rows() != y_t.size()) throw DataError("filter: prediction rows and target length differ");
  const std::size_t cols = y0.cols();
  if (rule == FilterRule::keep_all) return std::vector<bool>(cols, true);
  if (learners == 0 || cols % learners != 0) throw DataError("filter: column count is not j*d");
  const std::size_t d = cols / learners;
  if (target >= d) throw DataError("filter: target index out of range");

  LearnerSpec rf = LearnerSpec::of(LearnerKind::rf);
  rf.rf.n_trees = n_trees;
  rf.rf.seed = seed;
  const auto model = train(rf, y0, y_t);
  const auto imp = rf_importance(model);
  const double mean = std::accumulate(imp.begin(), imp.end(), 0.0) / static_cast<double>(cols);

  std::vector<bool> mask(cols, false);
  bool any = false;
  if (mean > 0.0)
    for (std::size_t c = 0; c < cols; ++c)
      if (imp[c] >= mean * (1.0 - 1e-12)) mask[c] = any = true;
  if (!any)
    for (std::size_t r = 0; r < learners; ++r) mask[r * d + target] = true;
  return mask;
}

// ---------------------------------------------------------------------------
// Methods

inline MultiTargetModel st_train(const Matrix& x, const Matrix& y, const MtrMethodSpec& spec) {
  auto m = detail::skeleton(spec, x, y);
  m.spec.method = Method::st;
  m.level0.push_back(detail::train_per_target(m.spec, stage::level0, x, y));
  return m;
}

inline MultiTargetModel sst_train(const Matrix& x, const Matrix& y, const MtrMethodSpec& spec) {
  auto m = detail::skeleton(spec, x, y);
  m.spec.method = Method::sst;
  std::vector<std::vector<double>> preds;
  m.level0.push_back(detail::train_per_target(m.spec, stage::level0, x, y, &preds));
  const Matrix augmented = x.hconcat(detail::columns_to_matrix(preds, x.rows()));
  m.level1 = detail::train_per_target(m.spec, stage::level1, augmented, y);
  return m;
}

inline MultiTargetModel drs_train(const Matrix& x, const Matrix& y, const MtrMethodSpec& spec) {
  if (spec.drs_max_layers == 0) throw ParameterError("DRS needs at least one stacked layer");
  auto m = detail::skeleton(spec, x, y);
  m.spec.method = Method::drs;
  std::vector<std::vector<double>> preds;
  m.level0.push_back(detail::train_per_target(m.spec, stage::level0, x, y, &preds));
  for (std::size_t layer = 1; layer <= spec.drs_max_layers; ++layer) {
    const Matrix augmented = x.hconcat(detail::columns_to_matrix(preds, x.rows()));
    const bool need_preds = layer < spec.drs_max_layers;
    std::vector<std::vector<double>> next;
    m.layers.push_back(detail::train_per_target(m.spec, layer, augmented, y, need_preds ? &next : nullptr));
    preds = std::move(next);
  }
  return m;
}

inline MultiTargetModel erc_train(const Matrix& x, const Matrix& y, const MtrMethodSpec& spec) {
  if (spec.erc_chains == 0) throw ParameterError("ERC needs at least one chain");
  auto m = detail::skeleton(spec, x, y);
  m.spec.method = Method::erc;
  const std::size_t d = y.cols();
  const std::size_t chains = detail::factorial_capped(d, spec.erc_chains);

  SplitMix64 rng(derive_seed(spec.seed, {stage::permutations}));
  std::set<std::vector<std::size_t>> used;
  while (m.chains.size() < chains) {
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = d; i > 1; --i) std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(i))]);
    if (!used.insert(order).second) continue;
    m.chains.push_back({std::move(order), {}});
  }

  parallel::parallel_for(chains, [&](std::size_t c) {
    ChainModel& chain = m.chains[c];
    const std::uint64_t stage_id = c == 0 ? stage::level0 : stage::erc_chain + c;
    Matrix inputs = x;
    for (std::size_t k = 0; k < d; ++k) {
      const std::size_t t = chain.order[k];
      const auto yt = y.column(t);
      auto fit = detail::fit_and_predict_train(m.spec.base.with_seed(model_seed(spec.seed, stage_id, 0, t)),
                                               inputs, yt, k + 1 < d ? spec.oof_folds : 0, spec.seed);
      chain.models.push_back(std::move(fit.model));
      if (k + 1 < d) inputs = inputs.hconcat(Matrix::from_column(fit.train_predictions));
    }
  });
  return m;
}

inline MultiTargetModel motc_train(const Matrix& x, const Matrix& y, const MtrMethodSpec& spec) {
  auto m = detail::skeleton(spec, x, y);
  m.spec.method = Method::motc;
  const std::size_t d = y.cols();
  Matrix corr(d, d);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b) corr(a, b) = a == b ? 1.0 : detail::abs_correlation(y, a, b);

  m.trees.resize(d);
  for (std::size_t root = 0; root < d; ++root) {
    auto& nodes = m.trees[root].nodes;
    std::vector<bool> in_tree(d, false);
    in_tree[root] = true;
    nodes.push_back({root, 0, {}, {}, {}});
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].depth >= spec.motc_max_depth) continue;
      std::vector<std::size_t> candidates;
      for (std::size_t u = 0; u < d; ++u)
        if (!in_tree[u]) candidates.push_back(u);
      const std::size_t src = nodes[i].target;
      std::stable_sort(candidates.begin(), candidates.end(),
                       [&](std::size_t a, std::size_t b) { return corr(src, a) > corr(src, b); });
      candidates.resize(std::min(candidates.size(), spec.motc_max_children));
      for (std::size_t u : candidates) {
        in_tree[u] = true;
        nodes[i].children.push_back(nodes.size());
        nodes.push_back({u, nodes[i].depth + 1, {}, {}, {}});
      }
    }
    // Breadth-first storage means every descendant has a larger index.
    for (std::size_t i = nodes.size(); i-- > 0;) {
      auto& desc = nodes[i].descendants;
      for (std::size_t c : nodes[i].children) {
        desc.push_back(c);
      }
      for (std::size_t c : nodes[i].children)
        desc.insert(desc.end(), nodes[c].descendants.begin(), nodes[c].descendants.end());
      std::sort(desc.begin(), desc.end());
    }
  }

  parallel::parallel_for(d, [&](std::size_t root) {
    auto& nodes = m.trees[root].nodes;
    std::vector<std::vector<double>> train_preds(nodes.size());
    for (std::size_t i = nodes.size(); i-- > 0;) {
      Matrix inputs = x;
      for (std::size_t c : nodes[i].descendants) inputs = inputs.hconcat(Matrix::from_column(train_preds[c]));
      const auto yt = y.column(nodes[i].target);
      auto fit = detail::fit_and_predict_train(
          spec.base.with_seed(model_seed(spec.seed, stage::level0, 0, nodes[i].target)), inputs, yt,
          i == 0 ? 0 : spec.oof_folds, spec.seed);
      nodes[i].model = std::move(fit.model);
      train_preds[i] = std::move(fit.train_predictions);
    }
  });
  return m;
}

inline MultiTargetModel mtas_train(const Matrix& x, const Matrix& y, const MtrMethodSpec& spec) {
  if (spec.level0_pool.empty()) throw ParameterError("MTAS needs at least one Level-0 learner");
  auto m = detail::skeleton(spec, x, y);
  m.spec.method = Method::mtas;
  const Matrix y0 = detail::train_level0_grid(m, spec.level0_pool, x, y);
  const std::size_t d = y.cols();
  m.filter_masks.resize(d);
  m.level1.resize(d);
  parallel::parallel_for(d, [&](std::size_t t) {
    const auto yt = y.column(t);
    m.filter_masks[t] = filter_relevant(y0, yt, spec.filter_rule, model_seed(spec.seed, stage::filter, 0, t),
                                        spec.level0_pool.size(), t, spec.filter_trees);
    const Matrix inputs = x.hconcat(y0.select_columns(detail::mask_indices(m.filter_masks[t])));
    m.level1[t] = train(spec.base.with_seed(model_seed(spec.seed, stage::level1, 0, t)), inputs, yt);
  });
  return m;
}

/// Multi-target stacked generalisation: j learners x d targets at Level 0,
/// per-target relevance filtering of the j*d prediction columns, and d
/// Level-1 models that see only the filtered predictions.
inline MultiTargetModel mtsg_train(const Matrix& x, const Matrix& y, const MtrMethodSpec& spec) {
  if (spec.level0_pool.empty()) throw ParameterError("MTSG needs at least one Level-0 learner");
  auto m = detail::skeleton(spec, x, y);
  m.spec.method = Method::mtsg;
  const Matrix y0 = detail::train_level0_grid(m, spec.level0_pool, x, y);
  const std::size_t d = y.cols();
  m.filter_masks.resize(d);
  m.level1.resize(d);
  parallel::parallel_for(d, [&](std::size_t t) {
    const auto yt = y.column(t);
    m.filter_masks[t] = filter_relevant(y0, yt, spec.filter_rule, model_seed(spec.seed, stage::filter, 0, t),
                                        spec.level0_pool.size(), t, spec.filter_trees);
    const Matrix inputs = y0.select_columns(detail::mask_indices(m.filter_masks[t]));
    m.level1[t] = train(spec.base.with_seed(model_seed(spec.seed, stage::level1, 0, t)), inputs, yt);
  });
  return m;
}

inline StackedModel sg_train(const Matrix& x, std::span<const double> y, const std::vector<LearnerSpec>& pool,
                             const LearnerSpec& base, std::uint64_t seed, std::size_t oof_folds = 0) {
  if (pool.empty()) throw ParameterError("stacking needs at least one Level-0 learner");
  if (x.rows() != y.size()) throw DataError("x rows and y length differ");
  StackedModel sg;
  Matrix y0(x.rows(), pool.size());
  for (std::size_t r = 0; r < pool.size(); ++r) {
    auto fit =
        detail::fit_and_predict_train(pool[r].with_seed(model_seed(seed, stage::level0, r, 0)), x, y, oof_folds, seed);
    sg.level0.push_back(std::move(fit.model));
    y0.set_column(r, fit.train_predictions);
  }
  sg.level1 = train(base.with_seed(model_seed(seed, stage::level1, 0, 0)), y0, y);
  return sg;
}

inline std::vector<double> sg_predict(const StackedModel& sg, const Matrix& x) {
  Matrix y0(x.rows(), sg.level0.size());
  for (std::size_t r = 0; r < sg.level0.size(); ++r) y0.set_column(r, predict(sg.level0[r], x));
  return predict(sg.level1, y0);
}

inline MultiTargetModel mtr_train(const Matrix& x, const Matrix& y, const MtrMethodSpec& spec) {
  switch (spec.method) {
    case Method::st: return st_train(x, y, spec);
    case Method::sst: return sst_train(x, y, spec);
    case Method::erc: return erc_train(x, y, spec);
    case Method::motc: return motc_train(x, y, spec);
    case Method::drs: return drs_train(x, y, spec);
    case Method::mtas: return mtas_train(x, y, spec);
    case Method::mtsg: return mtsg_train(x, y, spec);
  }
  throw ParameterError("unknown method");
}

/// Trains on a Dataset, keeping its column names in the model.
inline MultiTargetModel mtr_train(const Dataset& ds, const MtrMethodSpec& spec) {
  auto m = mtr_train(ds.x, ds.y, spec);
  m.feature_names = ds.feature_names;
  m.target_names = ds.target_names;
  return m;
}

/// Predictions in the model's training space (no scaling applied).
inline Matrix mtr_predict_raw(const MultiTargetModel& m, const Matrix& x) {
  if (x.cols() != m.feature_count)
    throw DataError("model expects " + std::to_string(m.feature_count) + " features, got " +
                    std::to_string(x.cols()));
  const std::size_t d = m.target_count;
  if (x.rows() == 0) return Matrix(0, d);
  switch (m.spec.method) {
    case Method::st:
      if (m.level0.size() != 1 || m.level0[0].size() != d) throw DataError("corrupted ST model");
      return detail::predict_all(m.level0[0], x);
    case Method::sst:
      if (m.level0.size() != 1 || m.level1.size() != d) throw DataError("corrupted SST model");
      return detail::predict_all(m.level1, x.hconcat(detail::predict_all(m.level0[0], x)));
    case Method::drs: {
      if (m.level0.size() != 1 || m.layers.empty()) throw DataError("corrupted DRS model");
      Matrix p = detail::predict_all(m.level0[0], x);
      for (const auto& layer : m.layers) p = detail::predict_all(layer, x.hconcat(p));
      return p;
    }
    case Method::erc: {
      if (m.chains.empty()) throw DataError("corrupted ERC model");
      Matrix sum(x.rows(), d, 0.0);
      for (const auto& chain : m.chains) {
        if (chain.order.size() != d || chain.models.size() != d) throw DataError("corrupted ERC chain");
        Matrix inputs = x;
        for (std::size_t k = 0; k < d; ++k) {
          const auto p = predict(chain.models[k], inputs);
          for (std::size_t i = 0; i < x.rows(); ++i) sum(i, chain.order[k]) += p[i];
          if (k + 1 < d) inputs = inputs.hconcat(Matrix::from_column(p));
        }
      }
      const double c = static_cast<double>(m.chains.size());
      for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t t = 0; t < d; ++t) sum(i, t) /= c;
      return sum;
    }
    case Method::motc: {
      if (m.trees.size() != d) throw DataError("corrupted MOTC model");
      Matrix out(x.rows(), d);
      for (std::size_t root = 0; root < d; ++root) {
        const auto& nodes = m.trees[root].nodes;
        std::vector<std::vector<double>> p(nodes.size());
        for (std::size_t i = nodes.size(); i-- > 0;) {
          Matrix inputs = x;
          for (std::size_t c : nodes[i].descendants) inputs = inputs.hconcat(Matrix::from_column(p[c]));
          p[i] = predict(nodes[i].model, inputs);
        }
        out.set_column(root, p[0]);
      }
      return out;
    }
    case Method::mtas:
    case Method::mtsg: {
      if (m.level1.size() != d || m.filter_masks.size() != d) throw DataError("corrupted stacking model");
      const Matrix y0 = detail::level0_grid_predictions(m, x);
      Matrix out(x.rows(), d);
      for (std::size_t t = 0; t < d; ++t) {
        if (m.filter_masks[t].size() != y0.cols()) throw DataError("corrupted filter mask");
        Matrix selected = y0.select_columns(detail::mask_indices(m.filter_masks[t]));
        const Matrix inputs = m.spec.method == Method::mtas ? x.hconcat(selected) : std::move(selected);
        out.set_column(t, predict(m.level1[t], inputs));
      }
      return out;
    }
  }
  throw DataError("corrupted model: unknown method");
}

/// n x d predictions. Applies the stored scaling, if any, so inputs and
/// outputs are in original units.
inline PredictionMatrix mtr_predict(const MultiTargetModel& m, const Matrix& x) {
  if (x.cols() != m.feature_count)
    throw DataError("model expects " + std::to_string(m.feature_count) + " features, got " +
                    std::to_string(x.cols()));
  Matrix raw = m.x_scaling ? mtr_predict_raw(m, apply_autoscale(x, *m.x_scaling)) : mtr_predict_raw(m, x);
  if (m.y_scaling) raw = invert_autoscale(raw, *m.y_scaling);
  return {std::move(raw), m.target_names};
}

/// Provenance of each Level-1 input column of target t ("feature:<name>" or
/// "prediction:<learner>:<target>"); empty for methods without Level-1 masks.
inline std::vector<std::string> level1_input_provenance(const MultiTargetModel& m, std::size_t t) {
  std::vector<std::string> tags;
  if (m.spec.method != Method::mtas && m.spec.method != Method::mtsg) return tags;
  if (m.spec.method == Method::mtas)
    for (const auto& f : m.feature_names) tags.push_back("feature:" + f);
  const std::size_t d = m.target_count;
  for (std::size_t c : detail::mask_indices(m.filter_masks.at(t)))
    tags.push_back("prediction:" + to_string(m.spec.level0_pool.at(c / d).kind) + ":" + m.target_names.at(c % d));
  return tags;
}

inline std::size_t model_count(const MultiTargetModel& m) {
  std::size_t n = 0;
  for (const auto& row : m.level0) n += row.size();
  n += m.level1.size();
  for (const auto& l : m.layers) n += l.size();
  for (const auto& c : m.chains) n += c.models.size();
  for (const auto& t : m.trees) n += t.nodes.size();
  return n;
}

}  // namespace mtsg

#endif  // MTSG_MTR_HPP
