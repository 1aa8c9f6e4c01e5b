#include <gtest/gtest.h>

#include <cmath>

#include "mtsg/experiment.hpp"
#include "mtsg/parallel.hpp"
#include "mtsg/synthetic.hpp"
#include "test_util.hpp"

using mtsg::ExperimentConfig;
using mtsg::LearnerKind;
using mtsg::Method;
using mtsg::ResultRecord;

namespace {

mtsg::MtrMethodSpec entry(Method m, LearnerKind k, std::size_t trees = 15) {
  mtsg::MtrMethodSpec s;
  s.method = m;
  s.base = mtsg::LearnerSpec::of(k);
  s.base.rf.n_trees = trees;
  if (m == Method::mtsg || m == Method::mtas)
    for (auto kind : {LearnerKind::rf, LearnerKind::svr_linear, LearnerKind::svr_rbf}) {
      auto l = mtsg::LearnerSpec::of(kind);
      l.rf.n_trees = trees;
      s.level0_pool.push_back(l);
    }
  s.filter_trees = trees;
  s.erc_chains = 2;
  s.drs_max_layers = 2;
  return s;
}

mtsg::Dataset small_data(std::size_t d = 3, std::size_t n = 45) {
  mtsg::SyntheticConfig cfg;
  cfg.rows = n;
  cfg.features = 4;
  cfg.targets = d;
  cfg.seed = 9;
  auto ds = mtsg::make_correlated_targets(cfg);
  return ds;
}

ExperimentConfig config(std::vector<mtsg::MtrMethodSpec> grid) {
  ExperimentConfig c;
  c.grid = std::move(grid);
  c.master_seed = 5;
  return c;
}

ResultRecord record(const std::string& method, const std::string& learner, std::vector<double> rmses,
                    std::vector<double> sds = {}) {
  ResultRecord r;
  r.method = method;
  r.learner = learner;
  double sum = 0;
  for (std::size_t t = 0; t < rmses.size(); ++t) {
    mtsg::TargetEvaluation e;
    e.target = "t" + std::to_string(t);
    e.rmse = rmses[t];
    e.reference_sd = sds.empty() ? 1.0 : sds[t];
    e.rpd = e.reference_sd / e.rmse;
    e.band = mtsg::metrics::rpd_band(e.rpd);
    e.n = 10;
    sum += rmses[t];
    r.per_target.push_back(e);
  }
  r.arrmse = sum / static_cast<double>(rmses.size());
  return r;
}

}  // namespace

TEST(Experiment, FullGridYieldsOneRecordPerEntry) {
  const auto ds = small_data(10, 40);
  std::vector<mtsg::MtrMethodSpec> grid;
  for (Method m : mtsg::kAllMethods)
    for (auto k : {LearnerKind::rf, LearnerKind::svr_linear, LearnerKind::svr_rbf}) grid.push_back(entry(m, k, 5));
  const auto records = mtsg::run_experiment(ds, config(grid));
  ASSERT_EQ(records.size(), 21u);
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_TRUE(records[i].ok) << records[i].error;
    EXPECT_EQ(records[i].per_target.size(), 10u);
    if (i < 3) {
      EXPECT_EQ(records[i].method, "ST");
    }
  }
}

TEST(Experiment, RptIsAttachedFromMatchingStBaseline) {
  const auto ds = small_data();
  const auto records = mtsg::run_experiment(
      ds, config({entry(Method::sst, LearnerKind::rf), entry(Method::st, LearnerKind::rf),
                  entry(Method::st, LearnerKind::svr_rbf), entry(Method::mtsg, LearnerKind::svr_rbf)}));
  ASSERT_EQ(records.size(), 4u);
  EXPECT_EQ(records[0].method, "ST");
  EXPECT_EQ(records[1].method, "ST");
  for (const auto& r : records) {
    if (r.method == "ST") {
      for (const auto& e : r.per_target) EXPECT_FALSE(e.rpt);
      continue;
    }
    const auto& st = r.learner == "RF" ? records[0] : records[1];
    for (std::size_t t = 0; t < r.per_target.size(); ++t) {
      ASSERT_TRUE(r.per_target[t].rpt);
      EXPECT_NEAR(*r.per_target[t].rpt, st.per_target[t].rmse / r.per_target[t].rmse, 1e-12);
    }
  }
}

TEST(Experiment, MetricsAreInOriginalUnitsWithTestSetSd) {
  auto ds = small_data();
  for (std::size_t i = 0; i < ds.y.rows(); ++i) ds.y(i, 0) = 1000.0 + 50.0 * ds.y(i, 0);
  auto cfg = config({entry(Method::st, LearnerKind::svr_rbf)});
  const auto records = mtsg::run_experiment(ds, cfg);
  const auto split = mtsg::kennard_stone_split(ds.x, cfg.train_fraction);
  const auto test = ds.subset(split.test);
  const auto& e = records[0].per_target[0];
  EXPECT_NEAR(e.reference_sd, mtsg::metrics::sample_sd(test.y.column(0)), 1e-9);
  EXPECT_GT(e.rmse, 1.0);  // a scaled-space RMSE would be well below this
  EXPECT_EQ(e.n, split.test.size());
}

TEST(Experiment, EmptyTestSetIsRejected) {
  auto cfg = config({entry(Method::st, LearnerKind::rf)});
  cfg.train_fraction = 1.0;
  try {
    mtsg::run_experiment(small_data(), cfg);
    FAIL();
  } catch (const mtsg::ParameterError& e) {
    EXPECT_NE(std::string(e.what()).find("empty test set"), std::string::npos);
  }
  cfg.grid.clear();
  EXPECT_THROW(mtsg::validate(cfg), mtsg::ParameterError);
}

TEST(Experiment, RerunsAreByteIdenticalAcrossThreadCounts) {
  const auto ds = small_data();
  testutil::TempDir a("runa"), b("runb");
  auto cfg = config({entry(Method::st, LearnerKind::rf), entry(Method::erc, LearnerKind::rf),
                     entry(Method::mtsg, LearnerKind::rf)});
  cfg.output_dir = a.path().string();
  mtsg::parallel::set_max_threads(1);
  mtsg::run_experiment(ds, cfg);
  cfg.output_dir = b.path().string();
  mtsg::parallel::set_max_threads(4);
  mtsg::run_experiment(ds, cfg);
  mtsg::parallel::set_max_threads(0);
  for (const char* f : {mtsg::kTargetsFile, mtsg::kSummaryFile, "split.csv"})
    EXPECT_EQ(testutil::read_file(a.file(f)), testutil::read_file(b.file(f))) << f;
  EXPECT_FALSE(std::filesystem::exists(a.file(".lock")));
}

TEST(Experiment, AddingAGridEntryDoesNotPerturbOthers) {
  const auto ds = small_data();
  const auto one = mtsg::run_experiment(ds, config({entry(Method::st, LearnerKind::rf)}));
  const auto two =
      mtsg::run_experiment(ds, config({entry(Method::st, LearnerKind::rf), entry(Method::sst, LearnerKind::svr_rbf)}));
  EXPECT_EQ(one[0].arrmse, two[0].arrmse);
  EXPECT_EQ(one[0].seed, two[0].seed);
}

TEST(Experiment, FailingEntryIsPersistedAndIdentified) {
  const auto ds = small_data();
  testutil::TempDir dir("fail");
  auto bad = entry(Method::erc, LearnerKind::rf);
  bad.erc_chains = 0;
  auto cfg = config({entry(Method::st, LearnerKind::rf), bad});
  cfg.output_dir = dir.path().string();
  try {
    mtsg::run_experiment(ds, cfg);
    FAIL();
  } catch (const mtsg::ParameterError& e) {
    EXPECT_NE(std::string(e.what()).find("grid entry 1 (ERC/RF)"), std::string::npos) << e.what();
  }
  const auto back = mtsg::load_records(dir.path());
  ASSERT_EQ(back.size(), 2u);
  EXPECT_TRUE(back[0].ok);
  EXPECT_FALSE(back[1].ok);
  const auto manifest = nlohmann::json::parse(testutil::read_file(dir.file("manifest.json")));
  EXPECT_EQ(manifest["timings"][1]["status"], "failed");
}

TEST(Experiment, RecordsRoundTripThroughCsv) {
  const auto ds = small_data();
  testutil::TempDir dir("records");
  auto cfg = config({entry(Method::st, LearnerKind::rf), entry(Method::sst, LearnerKind::rf)});
  cfg.output_dir = dir.path().string();
  cfg.oof_folds = 3;
  const auto records = mtsg::run_experiment(ds, cfg);
  const auto back = mtsg::load_records(dir.path());
  ASSERT_EQ(back.size(), records.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].arrmse, records[i].arrmse);
    EXPECT_EQ(back[i].seed, records[i].seed);
    ASSERT_EQ(back[i].per_target.size(), records[i].per_target.size());
    for (std::size_t t = 0; t < back[i].per_target.size(); ++t) {
      EXPECT_EQ(back[i].per_target[t].rmse, records[i].per_target[t].rmse);
      EXPECT_EQ(back[i].per_target[t].rpt, records[i].per_target[t].rpt);
    }
  }
  const auto manifest = nlohmann::json::parse(testutil::read_file(dir.file("manifest.json")));
  EXPECT_EQ(manifest["layout"], mtsg::kRunLayout);
  EXPECT_EQ(manifest["stacking_predictions"], "out-of-fold");
}

TEST(Experiment, MalformedRecordsNameFileAndLine) {
  testutil::TempDir dir("malformed");
  testutil::write_file(dir.file(mtsg::kSummaryFile),
                       "config_hash,entry,method,learner,pool,seed,arrmse,status\nabc,0,ST,RF,,1,0.5,ok\nabc,x,ST,RF,,1,0.5,ok\n");
  testutil::write_file(dir.file(mtsg::kTargetsFile),
                       "config_hash,entry,method,learner,pool,seed,target,rmse,rpt,rpd,rpd_band,reference_sd,sse,sst,n\n");
  try {
    mtsg::load_records(dir.path());
    FAIL();
  } catch (const mtsg::DataError& e) {
    EXPECT_NE(std::string(e.what()).find("results_summary.csv:3"), std::string::npos) << e.what();
  }
}

TEST(Experiment, OutputDirectoryIsLockedDuringARun) {
  testutil::TempDir dir("lock");
  mtsg::OutputLock first(dir.path());
  EXPECT_THROW(mtsg::OutputLock second(dir.path()), mtsg::DataError);
}

TEST(Experiment, ConfigShorthandAndHash) {
  const auto j = nlohmann::json::parse(R"({"dataset": "data/soil.csv", "targets": ["a", "b"],
      "methods": ["st", "mtsg"], "learners": ["rf", "svr_r"], "seed": 3})");
  auto cfg = mtsg::experiment_config_from_json(j);
  ASSERT_EQ(cfg.grid.size(), 4u);
  EXPECT_EQ(cfg.grid[3].method, Method::mtsg);
  EXPECT_EQ(cfg.grid[3].level0_pool.size(), 3u);
  EXPECT_TRUE(cfg.grid[0].level0_pool.empty());
  EXPECT_EQ(cfg.dataset_id, "soil");
  const auto h = mtsg::config_hash(cfg);
  cfg.output_dir = "elsewhere";
  EXPECT_EQ(mtsg::config_hash(cfg), h);
  cfg.master_seed = 4;
  EXPECT_NE(mtsg::config_hash(cfg), h);
  // Round trip through JSON keeps the hash.
  cfg.master_seed = 3;
  EXPECT_EQ(mtsg::config_hash(mtsg::experiment_config_from_json(mtsg::to_json(cfg))), h);
  EXPECT_THROW(mtsg::experiment_config_from_json(nlohmann::json::parse(R"({"methods": ["nope"]})")),
               mtsg::ParameterError);
}

// Collapses runs of spaces so assertions do not depend on column widths.
std::string squash(const std::string& s) {
  std::string out;
  for (char c : s)
    if (c != ' ' || out.empty() || out.back() != ' ') out += c;
  return out;
}

TEST(Rendering, RptTableMarksBestAndTies) {
  const std::vector<ResultRecord> recs = {
      record("ST", "RF", {1.0, 2.0}),  record("SST", "RF", {1.0, 2.0}), record("ERC", "RF", {0.5, 2.0}),
      record("DRS", "RF", {1.0, 1.0}), record("ST", "SVR_R", {1.0, 1.0}), record("MTSG", "SVR_R", {1.0, 0.8})};
  const auto table = mtsg::render_rpt_table(recs);
  EXPECT_NE(table.find("RPT_SST"), std::string::npos);
  EXPECT_NE(squash(table).find("RPT_SST RF 1.00 1.00 1.00"), std::string::npos) << table;
  // ERC and DRS both average 1.50 and tie for best among RF rows.
  EXPECT_NE(table.find("*1.50"), std::string::npos);
  std::size_t stars = 0;
  for (char c : table) stars += c == '*';
  EXPECT_EQ(stars, 3u) << table;  // ERC, DRS and the only SVR_R row
}

TEST(Rendering, RptAverageIsMeanOfUnroundedCells) {
  // Displayed cells 1.00, 1.00, 1.01 average to 1.00; the unrounded cells
  // 1.004, 1.004, 1.014 average to 1.0073, shown as 1.01.
  const std::vector<ResultRecord> recs = {record("ST", "RF", {1.0, 1.0, 1.0}),
                                          record("SST", "RF", {1.0 / 1.004, 1.0 / 1.004, 1.0 / 1.014})};
  const auto table = mtsg::render_rpt_table(recs);
  EXPECT_NE(table.find("1.00  1.00  1.01    *1.01"), std::string::npos) << table;
}

TEST(Rendering, RptTableNeedsStBaselines) {
  EXPECT_THROW(mtsg::render_rpt_table({record("SST", "RF", {1.0})}), mtsg::DataError);
}

TEST(Rendering, ArrmseChartHasReferenceRow) {
  std::vector<ResultRecord> recs;
  for (const char* m : {"ST", "SST", "MTSG"})
    for (const char* l : {"RF", "SVR_L", "SVR_R"}) recs.push_back(record(m, l, {std::string(l) == "RF" ? 0.67 : 0.7}));
  recs[4].arrmse = 0.6412344;
  const auto csv = mtsg::render_arrmse_chart_data(recs);
  std::size_t lines = 0;
  for (char c : csv) lines += c == '\n';
  EXPECT_EQ(lines, 1u + 9u + 1u);
  EXPECT_NE(csv.find("ST_MIN,reference,0.670000"), std::string::npos) << csv;
  EXPECT_NE(csv.find("SST,SVR_L,0.641234"), std::string::npos) << csv;
  EXPECT_THROW(mtsg::render_arrmse_chart_data({}), mtsg::DataError);
}

TEST(Rendering, RpdTableLabelsWinners) {
  const std::vector<ResultRecord> recs = {record("ST", "RF", {1.0, 6.5, 2.5}, {3.0, 11.0, 4.2}),
                                          record("DRS", "RF", {1.0, 6.1, 2.2}, {3.0, 11.0, 4.2}),
                                          record("MTSG", "SVR_R", {1.0, 6.3, 2.1}, {3.0, 11.0, 4.2}),
                                          record("MTSG", "RF", {1.0, 6.4, 2.1}, {3.0, 11.0, 4.2})};
  const std::map<std::string, double> sds = {{"t0", 3.0}, {"t1", 11.0}, {"t2", 4.2}};
  const auto table = mtsg::render_rpd_table(recs, sds);
  EXPECT_NE(table.find("All models"), std::string::npos) << table;
  EXPECT_NE(table.find("DRS (RF)"), std::string::npos) << table;
  EXPECT_NE(table.find("MTSG (SVR_R, RF)"), std::string::npos) << table;
  EXPECT_NE(squash(table).find("6.1000 1.80 good"), std::string::npos) << table;
  EXPECT_NE(squash(table).find("2.1000 2.00 very_good"), std::string::npos) << table;
  EXPECT_THROW(mtsg::render_rpd_table(recs, {{"t0", 1.0}}), mtsg::DataError);
}
