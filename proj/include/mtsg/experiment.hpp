#ifndef MTSG_EXPERIMENT_HPP
#define MTSG_EXPERIMENT_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <numeric>
#include <charconv>
#include <limits>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mtsg/bundle.hpp"
#include "mtsg/error.hpp"
#include "mtsg/metrics.hpp"
#include "mtsg/mtr.hpp"
#include "mtsg/parallel.hpp"
#include "mtsg/random.hpp"
#include "mtsg/report.hpp"
#include "mtsg/tabular.hpp"

namespace mtsg {

inline constexpr const char* kRunLayout = "mtsg-run/1";

struct ExperimentConfig {
  std::string dataset_path;
  std::string dataset_id;  // defaults to the file stem
  std::vector<std::string> target_names;
  double train_fraction = 2.0 / 3.0;
  std::vector<MtrMethodSpec> grid;
  std::uint64_t master_seed = 42;
  std::string output_dir;
  std::size_t oof_folds = 0;  // 0 = in-sample stacking
};

struct ResultRecord {
  std::string config_hash;
  std::size_t entry = 0;
  std::string method;
  std::string learner;
  std::vector<std::string> pool;
  std::uint64_t seed = 0;
  std::vector<TargetEvaluation> per_target;
  double arrmse = 0.0;
  double wall_seconds = 0.0;
  bool ok = true;
  std::string error;
};

// ---------------------------------------------------------------------------
// Config

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json grid = nlohmann::json::array();
  for (const auto& s : c.grid) {
    auto j = to_json(s);
    j.erase("seed");
    j.erase("oof_folds");
    grid.push_back(j);
  }
  return {{"dataset", c.dataset_path},     {"dataset_id", c.dataset_id}, {"targets", c.target_names},
          {"train_fraction", c.train_fraction}, {"grid", grid},          {"seed", c.master_seed},
          {"output_dir", c.output_dir},      {"oof_folds", c.oof_folds}};
}

/// Accepts either an explicit "grid" list or the shorthand
/// "methods" x "learners" (with an optional shared "pool").
inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  try {
    ExperimentConfig c;
    c.dataset_path = j.value("dataset", std::string{});
    c.dataset_id = j.value("dataset_id", std::string{});
    if (j.contains("targets")) j.at("targets").get_to(c.target_names);
    c.train_fraction = j.value("train_fraction", c.train_fraction);
    c.master_seed = j.value("seed", c.master_seed);
    c.output_dir = j.value("output_dir", std::string{});
    c.oof_folds = j.value("oof_folds", c.oof_folds);
    if (j.contains("grid"))
      for (const auto& e : j.at("grid")) c.grid.push_back(method_spec_from_json(e));
    if (j.contains("methods")) {
      std::vector<LearnerSpec> pool;
      for (const auto& p : j.value("pool", nlohmann::json::array({"rf", "svr_l", "svr_r"})))
        pool.push_back(learner_spec_from_json(p));
      const auto learners = j.value("learners", nlohmann::json::array({"rf", "svr_l", "svr_r"}));
      for (const auto& mname : j.at("methods"))
        for (const auto& l : learners) {
          MtrMethodSpec s;
          s.method = parse_method(mname.get<std::string>());
          s.base = learner_spec_from_json(l);
          if (s.method == Method::mtas || s.method == Method::mtsg) s.level0_pool = pool;
          c.grid.push_back(s);
        }
    }
    if (c.dataset_id.empty() && !c.dataset_path.empty())
      c.dataset_id = std::filesystem::path(c.dataset_path).stem().string();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("invalid experiment config: ") + e.what());
  }
}

inline void validate(const ExperimentConfig& c) {
  if (c.grid.empty()) throw ParameterError("experiment grid is empty");
  if (!(c.train_fraction > 0.0 && c.train_fraction <= 1.0))
    throw ParameterError("train_fraction must lie in (0, 1], got " + csv::format_double(c.train_fraction));
  if (c.oof_folds == 1) throw ParameterError("oof_folds must be 0 (in-sample) or at least 2");
  for (const auto& s : c.grid)
    if ((s.method == Method::mtas || s.method == Method::mtsg) && s.level0_pool.empty())
      throw ParameterError(to_string(s.method) + " grid entry has an empty Level-0 pool");
}

/// Hash of everything that determines results (output location excluded).
inline std::string config_hash(const ExperimentConfig& c) {
  auto j = to_json(c);
  j.erase("output_dir");
  j.erase("dataset");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

inline std::string learner_label(const MtrMethodSpec& s) { return to_string(s.base.kind); }

inline std::vector<std::string> pool_labels(const MtrMethodSpec& s) {
  std::vector<std::string> out;
  for (const auto& l : s.level0_pool) out.push_back(to_string(l.kind));
  return out;
}

inline std::uint64_t entry_seed(std::uint64_t master, const MtrMethodSpec& s, std::size_t index) {
  return derive_seed(master, {fnv1a(to_string(s.method)), fnv1a(learner_label(s)), index});
}

// ---------------------------------------------------------------------------
// Running

/// Split, scaling and evaluation shared by every grid entry of one run.
struct PreparedData {
  Dataset train;
  Dataset test;
  SplitIndices split;
  ScalingParams x_scaling;
  ScalingParams y_scaling;
  Matrix x_train;  // scaled
  Matrix y_train;  // scaled
};

inline PreparedData prepare(const Dataset& ds, double train_fraction) {
  PreparedData p;
  p.split = kennard_stone_split(ds.x, train_fraction);
  if (p.split.test.empty()) throw ParameterError("empty test set: train_fraction leaves no rows for testing");
  p.train = ds.subset(p.split.train);
  p.test = ds.subset(p.split.test);
  p.x_scaling = fit_autoscale(p.train.x);
  p.y_scaling = fit_autoscale(p.train.y);
  p.x_train = apply_autoscale(p.train.x, p.x_scaling);
  p.y_train = apply_autoscale(p.train.y, p.y_scaling);
  return p;
}

/// Trains one grid entry on the prepared training split and scores it on
/// the test split in original units.
inline MultiTargetModel train_entry(const PreparedData& data, const MtrMethodSpec& spec) {
  auto model = mtr_train(data.x_train, data.y_train, spec);
  model.feature_names = data.train.feature_names;
  model.target_names = data.train.target_names;
  model.x_scaling = data.x_scaling;
  model.y_scaling = data.y_scaling;
  return model;
}

/// The first failing grid entry of a run, kept so the caller can rethrow
/// it with its original error category after partial results are saved.
struct EntryFailure {
  std::size_t entry = 0;
  std::string message;
  std::exception_ptr error;

  [[noreturn]] void rethrow() const {
    try {
      std::rethrow_exception(error);
    } catch (const DataError&) {
      throw DataError(message);
    } catch (const ParameterError&) {
      throw ParameterError(message);
    } catch (...) {
      throw std::runtime_error(message);
    }
  }
};

inline ResultRecord run_entry(const PreparedData& data, const ExperimentConfig& cfg, std::size_t index,
                              const std::string& hash, const std::vector<double>& reference_sds,
                              std::exception_ptr& error) {
  MtrMethodSpec spec = cfg.grid[index];
  spec.seed = entry_seed(cfg.master_seed, spec, index);
  spec.oof_folds = cfg.oof_folds;
  ResultRecord rec;
  rec.config_hash = hash;
  rec.entry = index;
  rec.method = to_string(spec.method);
  rec.learner = learner_label(spec);
  rec.pool = pool_labels(spec);
  rec.seed = spec.seed;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const auto model = train_entry(data, spec);
    const auto pred = mtr_predict(model, data.test.x);
    auto report = evaluate(data.test.y, pred.values, data.test.target_names, {}, reference_sds);
    rec.per_target = std::move(report.per_target);
    rec.arrmse = report.arrmse;
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error = e.what();
    error = std::current_exception();
  }
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

/// Trains and scores every grid entry on one shared split. ST entries run
/// first so their RMSEs can be attached as RPT to MTR entries with the
/// same base learner. Entries within each phase run in parallel; records
/// come back with ST entries first, each phase in grid order.
inline std::vector<ResultRecord> run_grid(const PreparedData& data, const ExperimentConfig& cfg,
                                          std::optional<EntryFailure>* failure = nullptr) {
  const std::string hash = config_hash(cfg);
  std::vector<double> ref_sd;
  for (std::size_t t = 0; t < data.test.y.cols(); ++t) {
    const auto col = data.test.y.column(t);
    ref_sd.push_back(col.size() >= 2 ? metrics::sample_sd(col) : 1.0);
  }

  std::vector<std::size_t> st_entries, mtr_entries;
  for (std::size_t i = 0; i < cfg.grid.size(); ++i)
    (cfg.grid[i].method == Method::st ? st_entries : mtr_entries).push_back(i);

  std::vector<ResultRecord> records(cfg.grid.size());
  std::vector<std::exception_ptr> errors(cfg.grid.size());
  std::size_t slot = 0;
  for (const auto* phase : {&st_entries, &mtr_entries}) {
    const std::size_t base = slot;
    parallel::parallel_for(phase->size(), [&](std::size_t k) {
      const std::size_t i = (*phase)[k];
      records[base + k] = run_entry(data, cfg, i, hash, ref_sd, errors[base + k]);
    });
    slot += phase->size();
  }

  std::map<std::string, const ResultRecord*> st_by_learner;
  for (const auto& r : records)
    if (r.method == "ST" && r.ok) st_by_learner.emplace(r.learner, &r);
  for (auto& r : records) {
    if (r.method == "ST" || !r.ok) continue;
    auto it = st_by_learner.find(r.learner);
    if (it == st_by_learner.end()) continue;
    for (std::size_t t = 0; t < r.per_target.size(); ++t) {
      const double base = it->second->per_target[t].rmse;
      if (base > 0.0 && r.per_target[t].rmse > 0.0) r.per_target[t].rpt = metrics::rpt(base, r.per_target[t].rmse);
    }
  }

  if (failure) {
    for (std::size_t k = 0; k < records.size(); ++k) {
      if (!errors[k]) continue;
      const auto& r = records[k];
      if (!*failure || r.entry < (*failure)->entry)
        *failure = EntryFailure{r.entry,
                                "grid entry " + std::to_string(r.entry) + " (" + r.method + "/" + r.learner +
                                    "): " + r.error,
                                errors[k]};
    }
  }
  return records;
}

// ---------------------------------------------------------------------------
// Persistence

namespace detail {

inline std::string join(const std::vector<std::string>& v, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
  return out;
}

inline std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write '" + p.string() + "'");
  out << content;
}

}  // namespace detail

inline constexpr const char* kTargetsFile = "results_targets.csv";
inline constexpr const char* kSummaryFile = "results_summary.csv";

inline std::string records_targets_csv(const std::vector<ResultRecord>& records) {
  std::ostringstream out;
  out << "config_hash,entry,method,learner,pool,seed,target,rmse,rpt,rpd,rpd_band,reference_sd,sse,sst,n\n";
  for (const auto& r : records)
    for (const auto& e : r.per_target)
      out << r.config_hash << ',' << r.entry << ',' << r.method << ',' << r.learner << ','
          << detail::join(r.pool, "+") << ',' << r.seed << ',' << e.target << ',' << csv::format_double(e.rmse)
          << ',' << (e.rpt ? csv::format_double(*e.rpt) : "") << ',' << csv::format_double(e.rpd) << ','
          << metrics::to_string(e.band) << ',' << csv::format_double(e.reference_sd) << ','
          << csv::format_double(e.sse) << ',' << csv::format_double(e.sst) << ',' << e.n << '\n';
  return out.str();
}

inline std::string records_summary_csv(const std::vector<ResultRecord>& records) {
  std::ostringstream out;
  out << "config_hash,entry,method,learner,pool,seed,arrmse,status\n";
  for (const auto& r : records)
    out << r.config_hash << ',' << r.entry << ',' << r.method << ',' << r.learner << ','
        << detail::join(r.pool, "+") << ',' << r.seed << ',' << (r.ok ? csv::format_double(r.arrmse) : "") << ','
        << (r.ok ? "ok" : "failed") << '\n';
  return out.str();
}

/// Exclusive lock on an output directory for the lifetime of the object.
class OutputLock {
 public:
  explicit OutputLock(const std::filesystem::path& dir) : path_(dir / ".lock") {
    std::filesystem::create_directories(dir);
    std::FILE* f = std::fopen(path_.string().c_str(), "wx");
    if (!f) throw DataError("output directory '" + dir.string() + "' is locked by another run (" + path_.string() + ")");
    std::fclose(f);
  }
  ~OutputLock() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::filesystem::path path_;
};

inline void persist_records(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                            const std::vector<ResultRecord>& records, const PreparedData* data = nullptr) {
  std::filesystem::create_directories(dir);
  detail::write_file(dir / kTargetsFile, records_targets_csv(records));
  detail::write_file(dir / kSummaryFile, records_summary_csv(records));
  if (data) write_split_csv((dir / "split.csv").string(), data->split);
  nlohmann::json timings = nlohmann::json::array();
  for (const auto& r : records)
    timings.push_back({{"entry", r.entry}, {"seconds", r.wall_seconds}, {"status", r.ok ? "ok" : "failed"},
                       {"error", r.error}});
  nlohmann::json manifest = {{"layout", kRunLayout},
                             {"config", to_json(cfg)},
                             {"config_hash", config_hash(cfg)},
                             {"stacking_predictions", cfg.oof_folds >= 2 ? "out-of-fold" : "in-sample"},
                             {"oof_folds", cfg.oof_folds},
                             {"files", {kTargetsFile, kSummaryFile, "split.csv"}},
                             {"timings", timings}};
  if (data) {
    manifest["n_train"] = data->split.train.size();
    manifest["n_test"] = data->split.test.size();
  }
  detail::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

/// Runs the grid on an in-memory dataset. With an output directory set,
/// records (including failed entries) are written before the first
/// failure, if any, is rethrown naming its grid entry.
inline std::vector<ResultRecord> run_experiment(const Dataset& ds, const ExperimentConfig& cfg) {
  validate(cfg);
  std::optional<OutputLock> lock;
  if (!cfg.output_dir.empty()) lock.emplace(cfg.output_dir);
  const PreparedData data = prepare(ds, cfg.train_fraction);
  std::optional<EntryFailure> failure;
  auto records = run_grid(data, cfg, &failure);
  if (!cfg.output_dir.empty()) persist_records(cfg.output_dir, cfg, records, &data);
  if (failure) failure->rethrow();
  return records;
}

inline std::vector<ResultRecord> run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  if (cfg.dataset_path.empty()) throw ParameterError("experiment config has no dataset path");
  if (cfg.target_names.empty()) throw ParameterError("experiment config has no target names");
  return run_experiment(load_csv(cfg.dataset_path, cfg.target_names), cfg);
}

/// Reads the two result CSVs back. Malformed rows raise DataError naming
/// file and line.
inline std::vector<ResultRecord> load_records(const std::filesystem::path& dir) {
  const auto summary_path = (dir / kSummaryFile).string();
  const auto targets_path = (dir / kTargetsFile).string();
  if (!std::filesystem::exists(summary_path)) throw DataError("no " + std::string(kSummaryFile) + " in '" + dir.string() + "'");
  const auto summary = csv::read(summary_path);
  const auto targets = csv::read(targets_path);
  auto bad = [](const std::string& path, std::size_t line, const std::string& what) {
    return DataError(path + ":" + std::to_string(line) + ": " + what);
  };
  auto num = [&](const std::string& path, std::size_t line, const std::string& cell) {
    double v;
    if (!csv::parse_double(cell, v)) throw bad(path, line, "malformed number '" + cell + "'");
    return v;
  };
  auto integer = [&](const std::string& path, std::size_t line, const std::string& cell) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || p != cell.data() + cell.size()) throw bad(path, line, "malformed integer '" + cell + "'");
    return v;
  };
  if (summary.header.size() != 8 || summary.header[6] != "arrmse") throw bad(summary_path, 1, "unexpected header");
  if (targets.header.size() != 15 || targets.header[7] != "rmse") throw bad(targets_path, 1, "unexpected header");

  std::vector<ResultRecord> records;
  std::map<std::size_t, std::size_t> by_entry;
  for (std::size_t r = 0; r < summary.rows.size(); ++r) {
    const auto& c = summary.rows[r];
    const auto line = summary.line_numbers[r];
    ResultRecord rec;
    rec.config_hash = c[0];
    rec.entry = integer(summary_path, line, c[1]);
    rec.method = c[2];
    rec.learner = c[3];
    rec.pool = detail::split_on(c[4], '+');
    rec.seed = integer(summary_path, line, c[5]);
    rec.ok = c[7] == "ok";
    if (!rec.ok && c[7] != "failed") throw bad(summary_path, line, "status must be ok or failed");
    if (rec.ok) rec.arrmse = num(summary_path, line, c[6]);
    by_entry[rec.entry] = records.size();
    records.push_back(std::move(rec));
  }
  for (std::size_t r = 0; r < targets.rows.size(); ++r) {
    const auto& c = targets.rows[r];
    const auto line = targets.line_numbers[r];
    const auto entry = integer(targets_path, line, c[1]);
    auto it = by_entry.find(entry);
    if (it == by_entry.end()) throw bad(targets_path, line, "entry " + c[1] + " missing from summary");
    TargetEvaluation e;
    e.target = c[6];
    e.rmse = num(targets_path, line, c[7]);
    if (!c[8].empty()) e.rpt = num(targets_path, line, c[8]);
    e.rpd = c[9] == "inf" ? std::numeric_limits<double>::infinity() : num(targets_path, line, c[9]);
    const auto band = metrics::parse_rpd_band(c[10]);
    if (!band) throw bad(targets_path, line, "unknown rpd band '" + c[10] + "'");
    e.band = *band;
    e.reference_sd = num(targets_path, line, c[11]);
    e.sse = num(targets_path, line, c[12]);
    e.sst = num(targets_path, line, c[13]);
    e.n = integer(targets_path, line, c[14]);
    records[it->second].per_target.push_back(std::move(e));
  }
  return records;
}

// ---------------------------------------------------------------------------
// Rendering

namespace detail {

inline std::string fixed(double v, int decimals) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(decimals) << v;
  return s.str();
}

inline std::string render_text_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (width.size() <= c) width.push_back(0);
      width[c] = std::max(width[c], r[c].size());
    }
  std::ostringstream out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < rows[i].size(); ++c) {
      if (c) out << "  ";
      out << (c == 0 ? std::left : std::right) << std::setw(static_cast<int>(width[c])) << rows[i][c];
    }
    out << '\n';
    if (i == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w;
      out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
    }
  }
  return out.str();
}

inline std::vector<const ResultRecord*> ok_records(const std::vector<ResultRecord>& records) {
  std::vector<const ResultRecord*> out;
  for (const auto& r : records)
    if (r.ok) out.push_back(&r);
  return out;
}

}  // namespace detail

/// Rows = (method, learner) of every non-ST record, columns = targets and
/// their average. RPT is recomputed from stored RMSEs; the best average per
/// learner (at the displayed precision) is marked with '*'.
inline std::string render_rpt_table(const std::vector<ResultRecord>& records) {
  const auto ok = detail::ok_records(records);
  std::map<std::string, const ResultRecord*> st;
  for (const auto* r : ok)
    if (r->method == "ST") st.emplace(r->learner, r);
  struct Row {
    const ResultRecord* rec;
    std::vector<double> rpt;
    double average;
  };
  std::vector<Row> rows;
  for (const auto* r : ok) {
    if (r->method == "ST") continue;
    auto it = st.find(r->learner);
    if (it == st.end()) throw DataError("no ST baseline for learner " + r->learner);
    const auto& base = it->second->per_target;
    if (base.size() != r->per_target.size()) throw DataError("ST baseline has a different target set");
    Row row{r, {}, 0.0};
    for (std::size_t t = 0; t < base.size(); ++t)
      row.rpt.push_back(metrics::rpt(base[t].rmse, r->per_target[t].rmse));
    row.average = std::accumulate(row.rpt.begin(), row.rpt.end(), 0.0) / static_cast<double>(row.rpt.size());
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("no multi-target records to compare against ST");

  std::map<std::string, std::string> best;  // learner -> best rounded average
  for (const auto& r : rows) {
    const auto v = detail::fixed(r.average, 2);
    auto [it, inserted] = best.emplace(r.rec->learner, v);
    if (!inserted && std::stod(v) > std::stod(it->second)) it->second = v;
  }
  std::vector<std::vector<std::string>> table;
  std::vector<std::string> header = {"Method", "Learner"};
  for (const auto& e : rows.front().rec->per_target) header.push_back(e.target);
  header.push_back("Average");
  table.push_back(header);
  for (const auto& r : rows) {
    std::vector<std::string> line = {"RPT_" + r.rec->method, r.rec->learner};
    for (double v : r.rpt) line.push_back(detail::fixed(v, 2));
    const auto avg = detail::fixed(r.average, 2);
    line.push_back(avg == best[r.rec->learner] ? "*" + avg : avg);
    table.push_back(line);
  }
  return detail::render_text_table(table);
}

/// method,learner,arrmse rows plus a reference row holding the lowest ST
/// aRRMSE (the horizontal line of an aRRMSE bar chart).
inline std::string render_arrmse_chart_data(const std::vector<ResultRecord>& records) {
  const auto ok = detail::ok_records(records);
  if (ok.empty()) throw DataError("no records to chart");
  std::ostringstream out;
  out << "method,learner,arrmse\n";
  std::optional<double> st_min;
  for (const auto* r : ok) {
    out << r->method << ',' << r->learner << ',' << detail::fixed(r->arrmse, 6) << '\n';
    if (r->method == "ST") st_min = st_min ? std::min(*st_min, r->arrmse) : r->arrmse;
  }
  if (st_min) out << "ST_MIN,reference," << detail::fixed(*st_min, 6) << '\n';
  return out.str();
}

/// Per target: the model(s) with the lowest RMSE, their RMSE, RPD and band.
inline std::string render_rpd_table(const std::vector<ResultRecord>& records,
                                    const std::map<std::string, double>& reference_sds,
                                    double tie_tolerance = 1e-9) {
  const auto ok = detail::ok_records(records);
  if (ok.empty()) throw DataError("no records for the RPD table");
  std::vector<std::vector<std::string>> table = {{"Target", "Best model(s)", "RMSE", "RPD", "Band"}};
  const std::size_t d = ok.front()->per_target.size();
  for (std::size_t t = 0; t < d; ++t) {
    const std::string& name = ok.front()->per_target[t].target;
    auto sd = reference_sds.find(name);
    if (sd == reference_sds.end()) throw DataError("no reference SD for target '" + name + "'");
    double best = std::numeric_limits<double>::infinity();
    for (const auto* r : ok) best = std::min(best, r->per_target.at(t).rmse);
    std::vector<const ResultRecord*> winners;
    for (const auto* r : ok)
      if (r->per_target[t].rmse <= best + tie_tolerance * std::max(1.0, best)) winners.push_back(r);

    std::string label;
    if (winners.size() == ok.size() && ok.size() > 1) {
      label = "All models";
    } else {
      std::vector<std::pair<std::string, std::vector<std::string>>> groups;
      for (const auto* w : winners) {
        auto g = std::find_if(groups.begin(), groups.end(), [&](const auto& p) { return p.first == w->method; });
        if (g == groups.end()) groups.push_back({w->method, {w->learner}});
        else g->second.push_back(w->learner);
      }
      if (groups.size() > 3) {
        label = "Several models";
      } else {
        std::vector<std::string> parts;
        for (const auto& [method, learners] : groups) {
          std::string joined;
          for (std::size_t k = 0; k < learners.size(); ++k) joined += (k ? ", " : "") + learners[k];
          parts.push_back(method + " (" + joined + ")");
        }
        label = detail::join(parts, "; ");
      }
    }
    const double rpd = metrics::rpd(sd->second, best);
    table.push_back({name, label, detail::fixed(best, 4), detail::fixed(rpd, 2), metrics::to_string(metrics::rpd_band(rpd))});
  }
  return detail::render_text_table(table);
}

/// Reference SDs as stored in the records (test-set sample SDs).
inline std::map<std::string, double> stored_reference_sds(const std::vector<ResultRecord>& records) {
  std::map<std::string, double> out;
  for (const auto& r : records)
    for (const auto& e : r.per_target) out.emplace(e.target, e.reference_sd);
  return out;
}

// ---------------------------------------------------------------------------
// Public benchmark suites

struct BenchmarkSuite {
  const char* name;
  std::size_t targets;  // the last `targets` columns of the file
};

inline constexpr BenchmarkSuite kBenchmarkSuites[] = {{"atp1d", 6}, {"atp7d", 6}, {"edm", 2},  {"sf1", 3},
                                                      {"sf2", 3},   {"jura", 3},  {"enb", 2},  {"slump", 3},
                                                      {"andro", 6}, {"scpf", 3}};

inline const BenchmarkSuite& find_suite(const std::string& name) {
  for (const auto& s : kBenchmarkSuites)
    if (name == s.name) return s;
  std::string known;
  for (const auto& s : kBenchmarkSuites) known += (known.empty() ? "" : ", ") + std::string(s.name);
  throw ParameterError("unknown benchmark suite '" + name + "' (known: " + known + ")");
}

/// Target names of a suite file: its last `targets` header cells.
inline std::vector<std::string> suite_targets(const std::string& path, const BenchmarkSuite& suite) {
  const auto t = csv::read(path);
  if (t.header.size() <= suite.targets)
    throw DataError(path + ": expected more than " + std::to_string(suite.targets) + " columns");
  return {t.header.end() - static_cast<std::ptrdiff_t>(suite.targets), t.header.end()};
}

/// The 7 methods x {RF, SVR_R} grid; stacking pools use all three learners.
inline std::vector<MtrMethodSpec> benchmark_grid() {
  std::vector<MtrMethodSpec> grid;
  const std::vector<LearnerSpec> pool = {LearnerSpec::of(LearnerKind::rf), LearnerSpec::of(LearnerKind::svr_linear),
                                         LearnerSpec::of(LearnerKind::svr_rbf)};
  for (Method m : {Method::st, Method::sst, Method::erc, Method::mtas, Method::motc, Method::drs, Method::mtsg})
    for (LearnerKind k : {LearnerKind::rf, LearnerKind::svr_rbf}) {
      MtrMethodSpec s;
      s.method = m;
      s.base = LearnerSpec::of(k);
      if (m == Method::mtas || m == Method::mtsg) s.level0_pool = pool;
      grid.push_back(s);
    }
  return grid;
}

/// One dataset row of method x learner aRRMSE cells.
inline std::string render_benchmark_table(const std::string& dataset, const std::vector<ResultRecord>& records) {
  std::vector<std::string> header = {"Dataset"};
  std::vector<std::string> row = {dataset};
  std::vector<const ResultRecord*> sorted;
  for (const auto& r : records) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ResultRecord* a, const ResultRecord* b) { return a->entry < b->entry; });
  for (const auto* r : sorted) {
    header.push_back(r->method + "-" + r->learner);
    row.push_back(r->ok ? detail::fixed(r->arrmse, 4) : "failed");
  }
  return detail::render_text_table({header, row});
}

}  // namespace mtsg

#endif  // MTSG_EXPERIMENT_HPP
