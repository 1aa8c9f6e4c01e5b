#ifndef MTSG_TOOLS_CLI_APP_HPP
#define MTSG_TOOLS_CLI_APP_HPP

// Command-line front end. Kept in a header so tests can drive run_cli
// in-process with captured streams.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime failure.
// Failures print a single line starting with "error:" to the error stream.

#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mtsg/mtsg.hpp"

namespace mtsg::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kRuntime = 3 };

struct Options {
  std::size_t threads = 0;

  std::string data;
  std::vector<std::string> targets;
  std::string split;
  std::string out;
  double fraction = 2.0 / 3.0;
  std::uint64_t seed = 42;

  std::string method = "mtsg";
  std::string learner = "rf";
  std::vector<std::string> pool = {"rf", "svr_l", "svr_r"};
  std::string filter = "mean-threshold";
  std::size_t oof_folds = 0;
  std::size_t erc_chains = 10;
  std::size_t drs_layers = 5;
  std::size_t n_trees = 500;

  std::string model;
  std::string suite;
  std::string data_dir = ".";
  std::string records;
  std::string config;
  std::vector<std::string> overrides;
};

namespace detail {

inline std::string require_out(const Options& o) {
  if (o.out.empty()) throw ParameterError("--out is required");
  return o.out;
}

inline MtrMethodSpec method_spec(const Options& o) {
  MtrMethodSpec s;
  s.method = parse_method(o.method);
  s.base = LearnerSpec::of(parse_learner_kind(o.learner));
  s.base.rf.n_trees = o.n_trees;
  if (s.method == Method::mtsg || s.method == Method::mtas) {
    if (o.pool.empty()) throw ParameterError("--pool must name at least one learner");
    for (const auto& name : o.pool) {
      auto l = LearnerSpec::of(parse_learner_kind(name));
      l.rf.n_trees = o.n_trees;
      s.level0_pool.push_back(l);
    }
  }
  s.filter_rule = parse_filter_rule(o.filter);
  s.filter_trees = o.n_trees;
  s.erc_chains = o.erc_chains;
  s.drs_max_layers = o.drs_layers;
  s.oof_folds = o.oof_folds;
  s.seed = o.seed;
  if (s.oof_folds == 1) throw ParameterError("--oof-folds must be 0 or at least 2");
  return s;
}

/// Split given on the command line, or a fresh Kennard-Stone split.
inline SplitIndices resolve_split(const Options& o, const Dataset& ds) {
  if (!o.split.empty()) return read_split_csv(o.split, ds.x.rows());
  return kennard_stone_split(ds.x, o.fraction);
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw DataError("cannot write '" + p.string() + "'");
  f << s;
}

inline std::string predictions_csv(const PredictionMatrix& p) {
  std::ostringstream s;
  for (std::size_t t = 0; t < p.target_names.size(); ++t) s << (t ? "," : "") << p.target_names[t];
  s << '\n';
  for (std::size_t i = 0; i < p.values.rows(); ++i) {
    for (std::size_t t = 0; t < p.values.cols(); ++t) s << (t ? "," : "") << csv::format_double(p.values(i, t));
    s << '\n';
  }
  return s.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Subcommands

inline int cmd_split(const Options& o, std::ostream& out) {
  const auto path = detail::require_out(o);
  const Matrix x = load_csv(o.data, o.targets).x;
  const auto split = kennard_stone_split(x, o.fraction);
  write_split_csv(path, split);
  out << "split: " << split.train.size() << " train, " << split.test.size() << " test -> " << path << '\n';
  return kOk;
}

inline int cmd_train(const Options& o, std::ostream& out) {
  const auto dir = detail::require_out(o);
  const auto spec = detail::method_spec(o);
  if (o.targets.empty()) throw ParameterError("--targets is required");
  const Dataset ds = load_csv(o.data, o.targets);
  const auto split = detail::resolve_split(o, ds);
  const Dataset train = ds.subset(split.train);
  const auto xs = fit_autoscale(train.x);
  const auto ys = fit_autoscale(train.y);
  auto model = mtr_train(apply_autoscale(train.x, xs), apply_autoscale(train.y, ys), spec);
  model.feature_names = train.feature_names;
  model.target_names = train.target_names;
  model.x_scaling = xs;
  model.y_scaling = ys;
  save_bundle(model, dir);
  out << "trained " << to_string(spec.method) << " (" << to_string(spec.base.kind) << ") on " << train.x.rows()
      << " rows, " << model_count(model) << " models -> " << dir << '\n';
  return kOk;
}

inline int cmd_predict(const Options& o, std::ostream& out) {
  const auto path = detail::require_out(o);
  const auto model = load_bundle(o.model);
  const Matrix x = load_features(o.data, model.feature_names);
  detail::write_text(path, detail::predictions_csv(mtr_predict(model, x)));
  out << "predicted " << x.rows() << " rows -> " << path << '\n';
  return kOk;
}

inline int cmd_evaluate(const Options& o, std::ostream& out) {
  const auto dir = std::filesystem::path(detail::require_out(o));
  const auto model = load_bundle(o.model);
  const Dataset ds = load_csv(o.data, model.target_names);
  if (ds.x.cols() != model.feature_count)
    throw DataError("model expects " + std::to_string(model.feature_count) + " features, dataset has " +
                    std::to_string(ds.x.cols()));
  Dataset test = ds;
  if (!o.split.empty()) test = ds.subset(read_split_csv(o.split, ds.x.rows()).test);
  const auto pred = mtr_predict(model, test.x);
  Provenance prov;
  prov.method = to_string(model.spec.method);
  prov.learner = to_string(model.spec.base.kind);
  for (const auto& l : model.spec.level0_pool) prov.pool.push_back(to_string(l.kind));
  prov.seed = model.spec.seed;
  prov.dataset = std::filesystem::path(o.data).filename().string();
  const auto report = evaluate(test.y, pred.values, test.target_names, prov);
  detail::write_text(dir / "report.csv", report_to_csv(report));
  detail::write_text(dir / "report.json", report_to_json(report).dump(2) + "\n");
  out << "aRRMSE " << csv::format_double(report.arrmse) << " on " << test.x.rows() << " rows -> " << dir.string()
      << '\n';
  return kOk;
}

inline int cmd_benchmark(const Options& o, std::ostream& out) {
  const auto& suite = find_suite(o.suite);
  const auto file = std::filesystem::path(o.data.empty() ? o.data_dir + "/" + suite.name + ".csv" : o.data);
  if (!std::filesystem::exists(file))
    throw DataError("benchmark file '" + file.string() + "' not found (suite files are user-supplied)");
  ExperimentConfig cfg;
  cfg.dataset_path = file.string();
  cfg.dataset_id = suite.name;
  cfg.target_names = suite_targets(cfg.dataset_path, suite);
  cfg.train_fraction = o.fraction;
  cfg.grid = benchmark_grid();
  for (auto& s : cfg.grid) {
    s.base.rf.n_trees = o.n_trees;
    for (auto& l : s.level0_pool) l.rf.n_trees = o.n_trees;
    s.filter_trees = o.n_trees;
  }
  cfg.master_seed = o.seed;
  cfg.oof_folds = o.oof_folds;
  cfg.output_dir = o.out;
  const auto records = run_experiment(cfg);
  const auto table = render_benchmark_table(suite.name, records);
  if (!o.out.empty()) detail::write_text(std::filesystem::path(o.out) / "benchmark_table.txt", table);
  out << table;
  return kOk;
}

inline int cmd_compare(const Options& o, std::ostream& out, std::ostream& err) {
  if (!std::filesystem::is_directory(o.records)) throw DataError("records directory '" + o.records + "' not found");
  const auto records = load_records(o.records);
  if (records.empty()) throw DataError("records directory '" + o.records + "' holds no records");
  const std::filesystem::path dir = o.out.empty() ? std::filesystem::path(o.records) : std::filesystem::path(o.out);

  std::string rpt;
  try {
    rpt = render_rpt_table(records);
  } catch (const DataError& e) {
    err << "warning: RPT table skipped: " << e.what() << '\n';
    rpt = std::string("RPT table unavailable: ") + e.what() + "\n";
  }
  detail::write_text(dir / "rpt_table.txt", rpt);
  detail::write_text(dir / "arrmse_chart.csv", render_arrmse_chart_data(records));
  detail::write_text(dir / "rpd_table.txt", render_rpd_table(records, stored_reference_sds(records)));
  out << rpt;
  out << "wrote rpt_table.txt, arrmse_chart.csv, rpd_table.txt -> " << dir.string() << '\n';
  return kOk;
}

/// Applies "key=value" overrides to a JSON config. Values that parse as
/// JSON are used as such, anything else is taken as a string. Dotted keys
/// address nested objects.
inline void apply_overrides(nlohmann::json& j, const std::vector<std::string>& overrides) {
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw ParameterError("--set expects key=value, got '" + kv + "'");
    std::string pointer = "/" + kv.substr(0, eq);
    for (auto& c : pointer)
      if (c == '.') c = '/';
    const std::string raw = kv.substr(eq + 1);
    auto value = nlohmann::json::parse(raw, nullptr, false);
    j[nlohmann::json::json_pointer(pointer)] = value.is_discarded() ? nlohmann::json(raw) : value;
  }
}

inline int cmd_run(const Options& o, std::ostream& out, bool seed_given) {
  std::ifstream f(o.config);
  if (!f) throw DataError("cannot open config '" + o.config + "'");
  nlohmann::json j = nlohmann::json::parse(f, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParameterError(o.config + ": config is not a JSON object");
  apply_overrides(j, o.overrides);
  if (seed_given) j["seed"] = o.seed;
  if (!o.out.empty()) j["output_dir"] = o.out;
  if (j.contains("dataset") && j["dataset"].is_string()) {
    const std::filesystem::path p = j["dataset"].get<std::string>();
    if (p.is_relative()) j["dataset"] = (std::filesystem::path(o.config).parent_path() / p).string();
  }
  const auto cfg = experiment_config_from_json(j);
  const auto records = run_experiment(cfg);
  out << records_summary_csv(records);
  return kOk;
}

// ---------------------------------------------------------------------------

struct App {
  CLI::App app{"Multi-target regression toolkit: stacking and comparison methods with Kennard-Stone evaluation",
               "mtsg"};
  Options opt;
  CLI::App* split = nullptr;
  CLI::App* train = nullptr;
  CLI::App* predict = nullptr;
  CLI::App* evaluate = nullptr;
  CLI::App* benchmark = nullptr;
  CLI::App* compare = nullptr;
  CLI::App* run = nullptr;
  CLI::Option* run_seed = nullptr;

  App() {
    app.require_subcommand(1);
    app.fallthrough();  // lets --threads follow the subcommand too
    app.option_defaults()->always_capture_default();
    app.add_option("--threads", opt.threads, "Worker threads (0 = hardware concurrency)");

    auto add_data = [&](CLI::App* c) { c->add_option("--data", opt.data, "Input CSV with a header row")->required(); };
    auto add_targets = [&](CLI::App* c, bool required) {
      auto* t = c->add_option("--targets", opt.targets, "Comma-separated target column names")->delimiter(',');
      if (required) t->required();
    };
    auto add_seed = [&](CLI::App* c) { return c->add_option("--seed", opt.seed, "Random seed"); };
    auto add_fraction = [&](CLI::App* c) {
      c->add_option("--fraction", opt.fraction, "Training fraction for the Kennard-Stone split, in (0, 1]");
    };

    split = app.add_subcommand("split", "Kennard-Stone train/test split of a dataset");
    add_data(split);
    add_targets(split, true);
    add_fraction(split);
    split->add_option("--out", opt.out, "Output split CSV (index,role)")->required();

    train = app.add_subcommand("train", "Train a multi-target model and save it as a bundle directory");
    add_data(train);
    add_targets(train, true);
    train->add_option("--split", opt.split, "Split CSV; default is a fresh Kennard-Stone split");
    add_fraction(train);
    train->add_option("--method", opt.method, "ST, SST, ERC, MOTC, DRS, MTAS or MTSG");
    train->add_option("--learner", opt.learner, "Per-target / Level-1 learner: rf, svr_l or svr_r");
    train->add_option("--pool", opt.pool, "Level-0 learners for MTSG and MTAS")->delimiter(',');
    train->add_option("--filter", opt.filter, "Level-0 column filter: mean-threshold or keep-all");
    train->add_option("--oof-folds", opt.oof_folds, "0 = in-sample stacking, k >= 2 = k-fold out-of-fold");
    train->add_option("--erc-chains", opt.erc_chains, "Number of ERC chains");
    train->add_option("--drs-layers", opt.drs_layers, "Maximum DRS layers");
    train->add_option("--trees", opt.n_trees, "Trees per random forest");
    add_seed(train);
    train->add_option("--out", opt.out, "Output bundle directory")->required();

    predict = app.add_subcommand("predict", "Predict targets with a saved bundle");
    predict->add_option("--model", opt.model, "Bundle directory")->required();
    add_data(predict);
    predict->add_option("--out", opt.out, "Output predictions CSV")->required();

    evaluate = app.add_subcommand("evaluate", "Score a saved bundle on the test rows of a dataset");
    evaluate->add_option("--model", opt.model, "Bundle directory")->required();
    add_data(evaluate);
    evaluate->add_option("--split", opt.split, "Split CSV; default scores every row");
    evaluate->add_option("--out", opt.out, "Output directory for report.csv and report.json")->required();

    benchmark = app.add_subcommand("benchmark", "Run the method x learner grid on a public benchmark dataset");
    benchmark->add_option("--suite", opt.suite, "atp1d, atp7d, edm, sf1, sf2, jura, enb, slump, andro or scpf")
        ->required();
    benchmark->add_option("--data-dir", opt.data_dir, "Directory holding <suite>.csv");
    benchmark->add_option("--data", opt.data, "Explicit dataset path (overrides --data-dir)");
    add_fraction(benchmark);
    benchmark->add_option("--oof-folds", opt.oof_folds, "0 = in-sample stacking, k >= 2 = k-fold out-of-fold");
    benchmark->add_option("--trees", opt.n_trees, "Trees per random forest");
    add_seed(benchmark);
    benchmark->add_option("--out", opt.out, "Output directory for result records");

    compare = app.add_subcommand("compare", "Render RPT, aRRMSE-chart and RPD outputs from result records");
    compare->add_option("--records", opt.records, "Run directory with result CSVs")->required();
    compare->add_option("--out", opt.out, "Output directory; default is the records directory");

    run = app.add_subcommand("run", "Run an experiment described by a JSON config");
    run->add_option("--config", opt.config, "JSON config file")->required();
    run->add_option("--set", opt.overrides, "Override a config key: key=value (repeatable)");
    run_seed = add_seed(run);
    run->add_option("--out", opt.out, "Output directory (overrides output_dir)");
  }

  int dispatch(std::ostream& out, std::ostream& err) {
    parallel::set_max_threads(static_cast<unsigned>(opt.threads));
    if (split->parsed()) return cmd_split(opt, out);
    if (train->parsed()) return cmd_train(opt, out);
    if (predict->parsed()) return cmd_predict(opt, out);
    if (evaluate->parsed()) return cmd_evaluate(opt, out);
    if (benchmark->parsed()) return cmd_benchmark(opt, out);
    if (compare->parsed()) return cmd_compare(opt, out, err);
    if (run->parsed()) return cmd_run(opt, out, run_seed->count() > 0);
    return kUsage;
  }
};

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  auto state = std::make_unique<App>();
  try {
    state->app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    state->app.exit(e, out, err);
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    state->app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  try {
    return state->dispatch(out, err);
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
}

}  // namespace mtsg::cli

#endif  // MTSG_TOOLS_CLI_APP_HPP
