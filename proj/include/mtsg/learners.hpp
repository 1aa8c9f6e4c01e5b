#ifndef MTSG_LEARNERS_HPP
#define MTSG_LEARNERS_HPP

#include <cctype>
#include <fstream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "mtsg/error.hpp"
#include "mtsg/matrix.hpp"
#include "mtsg/random_forest.hpp"
#include "mtsg/svr.hpp"

namespace mtsg {

enum class LearnerKind { rf, svr_linear, svr_rbf };

inline std::string to_string(LearnerKind k) {
  switch (k) {
    case LearnerKind::rf: return "RF";
    case LearnerKind::svr_linear: return "SVR_L";
    case LearnerKind::svr_rbf: return "SVR_R";
  }
  return "?";
}

/// Accepts "rf", "svr_l", "svr_r" in any case.
inline LearnerKind parse_learner_kind(std::string name) {
  for (auto& ch : name) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (name == "rf") return LearnerKind::rf;
  if (name == "svr_l" || name == "svm_l") return LearnerKind::svr_linear;
  if (name == "svr_r" || name == "svm_r") return LearnerKind::svr_rbf;
  throw ParameterError("unknown learner '" + name + "' (allowed: rf, svr_l, svr_r)");
}

struct LearnerSpec {
  LearnerKind kind = LearnerKind::rf;
  RfParams rf;
  SvrParams svr;

  static LearnerSpec of(LearnerKind kind) {
    LearnerSpec s;
    s.kind = kind;
    return s;
  }

  LearnerSpec with_seed(std::uint64_t seed) const {
    LearnerSpec s = *this;
    s.rf.seed = seed;
    return s;
  }

  friend bool operator==(const LearnerSpec&, const LearnerSpec&) = default;
};

inline nlohmann::json to_json(const LearnerSpec& s) {
  return {{"kind", to_string(s.kind)},
          {"rf", {{"n_trees", s.rf.n_trees}, {"mtry", s.rf.mtry}, {"min_node_size", s.rf.min_node_size}, {"seed", s.rf.seed}}},
          {"svr",
           {{"c", s.svr.c},
            {"epsilon", s.svr.epsilon},
            {"gamma", s.svr.gamma},
            {"tolerance", s.svr.tolerance},
            {"max_passes", s.svr.max_passes}}}};
}

/// Missing keys keep their defaults, so configs may list only overrides.
inline LearnerSpec learner_spec_from_json(const nlohmann::json& j) {
  if (j.is_string()) return LearnerSpec::of(parse_learner_kind(j.get<std::string>()));
  LearnerSpec s = LearnerSpec::of(parse_learner_kind(j.at("kind").get<std::string>()));
  if (auto it = j.find("rf"); it != j.end()) {
    s.rf.n_trees = it->value("n_trees", s.rf.n_trees);
    s.rf.mtry = it->value("mtry", s.rf.mtry);
    s.rf.min_node_size = it->value("min_node_size", s.rf.min_node_size);
    s.rf.seed = it->value("seed", s.rf.seed);
  }
  if (auto it = j.find("svr"); it != j.end()) {
    s.svr.c = it->value("c", s.svr.c);
    s.svr.epsilon = it->value("epsilon", s.svr.epsilon);
    s.svr.gamma = it->value("gamma", s.svr.gamma);
    s.svr.tolerance = it->value("tolerance", s.svr.tolerance);
    s.svr.max_passes = it->value("max_passes", s.svr.max_passes);
  }
  return s;
}

/// A trained base learner of any kind.
class RegressionModel {
 public:
  RegressionModel() = default;

  const LearnerSpec& spec() const noexcept { return spec_; }
  std::size_t feature_count() const noexcept { return feature_count_; }
  bool is_forest() const noexcept { return std::holds_alternative<RandomForest>(state_); }
  const RandomForest& forest() const { return std::get<RandomForest>(state_); }
  const SupportVectorRegression& svr() const { return std::get<SupportVectorRegression>(state_); }

  friend RegressionModel train(const LearnerSpec& spec, const Matrix& x, std::span<const double> y);
  friend RegressionModel model_from_json(const nlohmann::json& j);

 private:
  LearnerSpec spec_;
  std::size_t feature_count_ = 0;
  std::variant<RandomForest, SupportVectorRegression> state_;
};

inline RegressionModel train(const LearnerSpec& spec, const Matrix& x, std::span<const double> y) {
  if (x.rows() == 0) throw DataError("cannot train on empty data");
  if (x.rows() != y.size())
    throw DataError("training rows (" + std::to_string(x.rows()) + ") and targets (" + std::to_string(y.size()) +
                    ") differ");
  if (x.cols() == 0) throw DataError("cannot train without input features");
  RegressionModel m;
  m.spec_ = spec;
  m.feature_count_ = x.cols();
  switch (spec.kind) {
    case LearnerKind::rf: m.state_ = RandomForest::fit(spec.rf, x, y); break;
    case LearnerKind::svr_linear:
      m.state_ = SupportVectorRegression::fit(KernelType::linear, spec.svr, x, y);
      break;
    case LearnerKind::svr_rbf: m.state_ = SupportVectorRegression::fit(KernelType::rbf, spec.svr, x, y); break;
  }
  return m;
}

inline std::vector<double> predict(const RegressionModel& model, const Matrix& x) {
  if (x.cols() != model.feature_count())
    throw DataError(to_string(model.spec().kind) + " model expects " + std::to_string(model.feature_count()) +
                    " features, got " + std::to_string(x.cols()));
  if (model.is_forest()) return model.forest().predict(x);
  return model.svr().predict(x);
}

/// Normalised impurity importance of a forest.
inline std::vector<double> rf_importance(const RegressionModel& model) {
  if (!model.is_forest())
    throw ParameterError("importance is only defined for RF models, got " + to_string(model.spec().kind));
  return model.forest().importance();
}

inline constexpr const char* kModelFormat = "mtsg-learner/1";

inline nlohmann::json model_to_json(const RegressionModel& m) {
  nlohmann::json j;
  j["format"] = kModelFormat;
  j["spec"] = to_json(m.spec());
  j["feature_count"] = m.feature_count();
  j["state"] = m.is_forest() ? m.forest().to_json() : m.svr().to_json();
  return j;
}

inline RegressionModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kModelFormat)
      throw DataError("unsupported model format '" + j.at("format").get<std::string>() + "'");
    RegressionModel m;
    m.spec_ = learner_spec_from_json(j.at("spec"));
    m.feature_count_ = j.at("feature_count").get<std::size_t>();
    const auto& state = j.at("state");
    switch (m.spec_.kind) {
      case LearnerKind::rf: m.state_ = RandomForest::from_json(state, m.spec_.rf); break;
      case LearnerKind::svr_linear:
        m.state_ = SupportVectorRegression::from_json(state, KernelType::linear, m.spec_.svr);
        break;
      case LearnerKind::svr_rbf:
        m.state_ = SupportVectorRegression::from_json(state, KernelType::rbf, m.spec_.svr);
        break;
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupted model file: ") + e.what());
  }
}

inline void save_model(const RegressionModel& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << model_to_json(m).dump() << '\n';
}

inline RegressionModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace mtsg

#endif  // MTSG_LEARNERS_HPP
