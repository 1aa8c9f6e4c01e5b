#ifndef MTSG_REPORT_HPP
#define MTSG_REPORT_HPP

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mtsg/error.hpp"
#include "mtsg/matrix.hpp"
#include "mtsg/metrics.hpp"
#include "mtsg/tabular.hpp"

namespace mtsg {

inline constexpr const char* kReportSchema = "mtsg-report/1";

struct TargetEvaluation {
  std::string target;
  double rmse = 0.0;  // original target units
  std::optional<double> rpt;
  double rpd = 0.0;
  metrics::RpdBand band = metrics::RpdBand::very_poor;
  double reference_sd = 0.0;
  double sse = 0.0;  // raw terms behind rmse and rrmse
  double sst = 0.0;
  std::size_t n = 0;

  double rrmse() const { return std::sqrt(sse / sst); }
};

struct Provenance {
  std::string method;
  std::string learner;
  std::vector<std::string> pool;
  std::uint64_t seed = 0;
  std::string dataset;
};

struct EvaluationReport {
  std::vector<TargetEvaluation> per_target;
  double arrmse = 0.0;
  Provenance provenance;
};

/// Scores predictions against actual values, target by target. Reference
/// SDs default to the sample SD of each actual column.
inline EvaluationReport evaluate(const Matrix& actual, const Matrix& predicted,
                                 const std::vector<std::string>& target_names, Provenance provenance = {},
                                 std::optional<std::vector<double>> reference_sds = std::nullopt) {
  if (actual.rows() != predicted.rows() || actual.cols() != predicted.cols())
    throw DataError("evaluate: actual is " + std::to_string(actual.rows()) + "x" + std::to_string(actual.cols()) +
                    ", predicted is " + std::to_string(predicted.rows()) + "x" + std::to_string(predicted.cols()));
  if (target_names.size() != actual.cols()) throw DataError("evaluate: target name count mismatch");
  if (reference_sds && reference_sds->size() != actual.cols())
    throw DataError("evaluate: reference SD count mismatch");
  EvaluationReport r;
  r.provenance = std::move(provenance);
  r.arrmse = metrics::arrmse(actual, predicted, target_names);
  for (std::size_t t = 0; t < actual.cols(); ++t) {
    const auto a = actual.column(t);
    const auto p = predicted.column(t);
    TargetEvaluation e;
    e.target = target_names[t];
    e.rmse = metrics::rmse(a, p);
    const auto terms = metrics::rrmse_terms(a, p);
    e.sse = terms.sse;
    e.sst = terms.sst;
    e.n = a.size();
    e.reference_sd = reference_sds ? (*reference_sds)[t] : metrics::sample_sd(a);
    e.rpd = metrics::rpd(e.reference_sd, e.rmse);
    e.band = metrics::rpd_band(e.rpd);
    r.per_target.push_back(std::move(e));
  }
  return r;
}

/// One row per target plus an "__aggregate__" row carrying aRRMSE.
inline std::string report_to_csv(const EvaluationReport& r) {
  std::ostringstream out;
  out << "target,rmse,rpt,rpd,rpd_band,rrmse,reference_sd,sse,sst,n\n";
  for (const auto& e : r.per_target)
    out << e.target << ',' << csv::format_double(e.rmse) << ',' << (e.rpt ? csv::format_double(*e.rpt) : "")
        << ',' << csv::format_double(e.rpd) << ',' << metrics::to_string(e.band) << ','
        << csv::format_double(e.rrmse()) << ',' << csv::format_double(e.reference_sd) << ','
        << csv::format_double(e.sse) << ',' << csv::format_double(e.sst) << ',' << e.n << '\n';
  out << "__aggregate__,,,,," << csv::format_double(r.arrmse) << ",,,,\n";
  return out.str();
}

inline nlohmann::json report_to_json(const EvaluationReport& r) {
  nlohmann::json targets = nlohmann::json::array();
  for (const auto& e : r.per_target) {
    nlohmann::json t = {{"target", e.target}, {"rmse", e.rmse},        {"rpd", e.rpd},
                        {"rpd_band", metrics::to_string(e.band)},    {"rrmse", e.rrmse()},
                        {"reference_sd", e.reference_sd},            {"n", e.n}};
    if (e.rpt) t["rpt"] = *e.rpt;
    targets.push_back(t);
  }
  return {{"schema", kReportSchema},
          {"arrmse", r.arrmse},
          {"provenance",
           {{"method", r.provenance.method},
            {"learner", r.provenance.learner},
            {"pool", r.provenance.pool},
            {"seed", r.provenance.seed},
            {"dataset", r.provenance.dataset}}},
          {"targets", targets}};
}

}  // namespace mtsg

#endif  // MTSG_REPORT_HPP
