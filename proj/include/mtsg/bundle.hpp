#ifndef MTSG_BUNDLE_HPP
#define MTSG_BUNDLE_HPP

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mtsg/error.hpp"
#include "mtsg/learners.hpp"
#include "mtsg/mtr.hpp"
#include "mtsg/tabular.hpp"

// On-disk layout of a trained multi-target model:
//
//   <dir>/manifest.json      method spec, names, masks, structure, scaling
//   <dir>/models/<id>.json   one file per base model (learner format)
//
// The manifest references model files by id; ids encode their role
// (l0_r<learner>_t<target>, l1_t<target>, layer<L>_t<target>,
// chain<c>_k<position>, tree<root>_n<node>).

namespace mtsg {

inline constexpr const char* kBundleFormat = "mtsg-bundle/1";

inline nlohmann::json to_json(const MtrMethodSpec& s) {
  nlohmann::json pool = nlohmann::json::array();
  for (const auto& l : s.level0_pool) pool.push_back(to_json(l));
  return {{"method", to_string(s.method)},
          {"base", to_json(s.base)},
          {"level0_pool", pool},
          {"erc_chains", s.erc_chains},
          {"drs_max_layers", s.drs_max_layers},
          {"motc_max_children", s.motc_max_children},
          {"motc_max_depth", s.motc_max_depth},
          {"filter_rule", to_string(s.filter_rule)},
          {"filter_trees", s.filter_trees},
          {"seed", s.seed},
          {"oof_folds", s.oof_folds}};
}

inline MtrMethodSpec method_spec_from_json(const nlohmann::json& j) {
  MtrMethodSpec s;
  s.method = parse_method(j.at("method").get<std::string>());
  if (j.contains("base")) s.base = learner_spec_from_json(j.at("base"));
  if (j.contains("level0_pool"))
    for (const auto& l : j.at("level0_pool")) s.level0_pool.push_back(learner_spec_from_json(l));
  s.erc_chains = j.value("erc_chains", s.erc_chains);
  s.drs_max_layers = j.value("drs_max_layers", s.drs_max_layers);
  s.motc_max_children = j.value("motc_max_children", s.motc_max_children);
  s.motc_max_depth = j.value("motc_max_depth", s.motc_max_depth);
  if (j.contains("filter_rule")) s.filter_rule = parse_filter_rule(j.at("filter_rule").get<std::string>());
  s.filter_trees = j.value("filter_trees", s.filter_trees);
  s.seed = j.value("seed", s.seed);
  s.oof_folds = j.value("oof_folds", s.oof_folds);
  return s;
}

inline nlohmann::json to_json(const ScalingParams& p) { return {{"means", p.means}, {"stds", p.stds}}; }

inline ScalingParams scaling_from_json(const nlohmann::json& j) {
  ScalingParams p;
  j.at("means").get_to(p.means);
  j.at("stds").get_to(p.stds);
  if (p.means.size() != p.stds.size()) throw DataError("corrupted scaling parameters");
  return p;
}

namespace detail {

class BundleWriter {
 public:
  explicit BundleWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_ / "models");
  }
  std::string put(const std::string& id, const RegressionModel& m) {
    save_model(m, (dir_ / "models" / (id + ".json")).string());
    return id;
  }

 private:
  std::filesystem::path dir_;
};

class BundleReader {
 public:
  explicit BundleReader(std::filesystem::path dir) : dir_(std::move(dir)) {}
  RegressionModel get(const nlohmann::json& id) const {
    const auto name = id.get<std::string>();
    if (name.find('/') != std::string::npos || name.find("..") != std::string::npos)
      throw DataError("bundle: invalid model id '" + name + "'");
    return load_model((dir_ / "models" / (name + ".json")).string());
  }

 private:
  std::filesystem::path dir_;
};

}  // namespace detail

inline void save_bundle(const MultiTargetModel& m, const std::string& dir) {
  detail::BundleWriter w(dir);
  const auto tid = [](std::size_t t) { return "_t" + std::to_string(t); };
  nlohmann::json j;
  j["format"] = kBundleFormat;
  j["spec"] = to_json(m.spec);
  j["feature_count"] = m.feature_count;
  j["target_count"] = m.target_count;
  j["feature_names"] = m.feature_names;
  j["target_names"] = m.target_names;
  nlohmann::json pool_kinds = nlohmann::json::array();
  for (const auto& l : m.spec.level0_pool) pool_kinds.push_back(to_string(l.kind));
  j["level0_learner_kinds"] = pool_kinds;

  auto& level0 = j["level0"] = nlohmann::json::array();
  for (std::size_t r = 0; r < m.level0.size(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t t = 0; t < m.level0[r].size(); ++t)
      row.push_back(w.put("l0_r" + std::to_string(r) + tid(t), m.level0[r][t]));
    level0.push_back(row);
  }
  auto& masks = j["filter_masks"] = nlohmann::json::array();
  for (const auto& mask : m.filter_masks) {
    std::string bits;
    for (bool b : mask) bits += b ? '1' : '0';
    masks.push_back(bits);
  }
  auto& level1 = j["level1"] = nlohmann::json::array();
  for (std::size_t t = 0; t < m.level1.size(); ++t) level1.push_back(w.put("l1" + tid(t), m.level1[t]));
  auto& layers = j["layers"] = nlohmann::json::array();
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t t = 0; t < m.layers[l].size(); ++t)
      row.push_back(w.put("layer" + std::to_string(l + 1) + tid(t), m.layers[l][t]));
    layers.push_back(row);
  }
  auto& chains = j["chains"] = nlohmann::json::array();
  for (std::size_t c = 0; c < m.chains.size(); ++c) {
    nlohmann::json models = nlohmann::json::array();
    for (std::size_t k = 0; k < m.chains[c].models.size(); ++k)
      models.push_back(w.put("chain" + std::to_string(c) + "_k" + std::to_string(k), m.chains[c].models[k]));
    chains.push_back({{"order", m.chains[c].order}, {"models", models}});
  }
  auto& trees = j["trees"] = nlohmann::json::array();
  for (std::size_t root = 0; root < m.trees.size(); ++root) {
    nlohmann::json nodes = nlohmann::json::array();
    for (std::size_t i = 0; i < m.trees[root].nodes.size(); ++i) {
      const auto& n = m.trees[root].nodes[i];
      nodes.push_back({{"target", n.target},
                       {"depth", n.depth},
                       {"children", n.children},
                       {"descendants", n.descendants},
                       {"model", w.put("tree" + std::to_string(root) + "_n" + std::to_string(i), n.model)}});
    }
    trees.push_back(nodes);
  }
  if (m.x_scaling) j["x_scaling"] = to_json(*m.x_scaling);
  if (m.y_scaling) j["y_scaling"] = to_json(*m.y_scaling);

  std::ofstream out(std::filesystem::path(dir) / "manifest.json", std::ios::binary);
  if (!out) throw DataError("cannot write bundle manifest in '" + dir + "'");
  out << j.dump(2) << '\n';
}

inline MultiTargetModel load_bundle(const std::string& dir) {
  const auto manifest = std::filesystem::path(dir) / "manifest.json";
  std::ifstream in(manifest, std::ios::binary);
  if (!in) throw DataError("no bundle manifest at '" + manifest.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
    if (j.at("format").get<std::string>() != kBundleFormat)
      throw DataError("unsupported bundle format '" + j.at("format").get<std::string>() + "'");
    detail::BundleReader r(dir);
    MultiTargetModel m;
    m.spec = method_spec_from_json(j.at("spec"));
    m.feature_count = j.at("feature_count").get<std::size_t>();
    m.target_count = j.at("target_count").get<std::size_t>();
    j.at("feature_names").get_to(m.feature_names);
    j.at("target_names").get_to(m.target_names);
    for (const auto& row : j.at("level0")) {
      std::vector<RegressionModel> models;
      for (const auto& id : row) models.push_back(r.get(id));
      m.level0.push_back(std::move(models));
    }
    for (const auto& bits : j.at("filter_masks")) {
      std::vector<bool> mask;
      for (char ch : bits.get<std::string>()) mask.push_back(ch == '1');
      m.filter_masks.push_back(std::move(mask));
    }
    for (const auto& id : j.at("level1")) m.level1.push_back(r.get(id));
    for (const auto& row : j.at("layers")) {
      std::vector<RegressionModel> models;
      for (const auto& id : row) models.push_back(r.get(id));
      m.layers.push_back(std::move(models));
    }
    for (const auto& cj : j.at("chains")) {
      ChainModel c;
      cj.at("order").get_to(c.order);
      for (const auto& id : cj.at("models")) c.models.push_back(r.get(id));
      m.chains.push_back(std::move(c));
    }
    for (const auto& tj : j.at("trees")) {
      TargetTree tree;
      for (const auto& nj : tj) {
        TargetTreeNode n;
        n.target = nj.at("target").get<std::size_t>();
        n.depth = nj.at("depth").get<std::size_t>();
        nj.at("children").get_to(n.children);
        nj.at("descendants").get_to(n.descendants);
        n.model = r.get(nj.at("model"));
        tree.nodes.push_back(std::move(n));
      }
      m.trees.push_back(std::move(tree));
    }
    if (j.contains("x_scaling")) m.x_scaling = scaling_from_json(j.at("x_scaling"));
    if (j.contains("y_scaling")) m.y_scaling = scaling_from_json(j.at("y_scaling"));
    if (m.feature_names.size() != m.feature_count || m.target_names.size() != m.target_count)
      throw DataError("bundle: name lists do not match declared shape");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(manifest.string() + ": " + e.what());
  }
}

}  // namespace mtsg

#endif  // MTSG_BUNDLE_HPP
