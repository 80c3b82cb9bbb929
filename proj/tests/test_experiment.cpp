#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "elastic/experiment.hpp"

using namespace elastic;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.policies = {{PolicyKind::FractionalLcfs, {1.0, 0.25, 0.25}},
                {PolicyKind::BlindEqui, {}},
                {PolicyKind::PaFcfs, {}}};
  StochasticConfig s;
  s.arrival_rate = 3.0;
  s.horizon_slots = 60;
  c.workload = s;
  c.replications = 6;
  c.base_seed = 11;
  c.workers = 2;
  return c;
}

std::string csv(const AggregateResult& r) {
  std::ostringstream out;
  write_csv(r, out);
  return out.str();
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) out.push_back(f);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("elastic_test_" + name);
}

}  // namespace

TEST(Experiment, DeterministicAcrossRunsAndWorkerCounts) {
  auto c = small_config();
  const auto a = csv(run_experiment(c));
  EXPECT_EQ(a, csv(run_experiment(c)));
  c.workers = 1;
  EXPECT_EQ(a, csv(run_experiment(c)));
  c.workers = 5;
  EXPECT_EQ(a, csv(run_experiment(c)));
}

TEST(Experiment, AddingPolicyLeavesOthersUnchanged) {
  auto c = small_config();
  const auto before = run_experiment(c);
  c.policies.insert(c.policies.begin(), PolicySpec{PolicyKind::InelasticFirst, {}});
  const auto after = run_experiment(c);
  ASSERT_EQ(after.cells.size(), before.cells.size() + 1);
  for (std::size_t i = 0; i < before.cells.size(); ++i) {
    EXPECT_EQ(before.cells[i].per_replication, after.cells[i + 1].per_replication);
  }
}

TEST(Experiment, EmptyReplicationsAreExcluded) {
  auto c = small_config();
  std::get<StochasticConfig>(c.workload).arrival_rate = 0.0;
  const auto r = run_experiment(c);
  for (const auto& cell : r.cells) {
    EXPECT_EQ(cell.replications, 0);
    EXPECT_EQ(cell.jobs_total, 0u);
    EXPECT_TRUE(std::isnan(cell.mean_flow_time));
  }
  const auto text = csv(r);
  EXPECT_NE(text.find("pa_fcfs,,,,2,10,0,0,0,,,,"), std::string::npos) << text;
}

TEST(Experiment, DeterministicSingleJobHasZeroSpread) {
  const auto path = temp_path("single.json");
  save_workload({{0, 0.0, {{PhaseKind::Elastic, 8.0}, {PhaseKind::Inelastic, 2.0}}}}, path.string());
  ExperimentConfig c;
  c.policies = {{PolicyKind::PaEqui, {}}, {PolicyKind::FractionalLcfs, {1.0, 0.25, 0.25}}};
  c.servers = 4.0;
  c.workload = FileWorkload{path.string()};
  c.replications = 5;
  const auto r = run_experiment(c);
  for (const auto& cell : r.cells) {
    EXPECT_DOUBLE_EQ(cell.mean_flow_time, 6.0);
    EXPECT_EQ(cell.stddev, 0.0);
    EXPECT_EQ(cell.ci95, 0.0);
    EXPECT_EQ(cell.jobs_total, 5u);
  }
  std::filesystem::remove(path);
}

TEST(Experiment, MeanIsAverageOfReplicationMeans) {
  const auto r = run_experiment(small_config());
  for (const auto& cell : r.cells) {
    double s = 0.0;
    for (double m : cell.per_replication) s += m;
    EXPECT_NEAR(cell.mean_flow_time, s / cell.replications, 1e-9 * s);
    EXPECT_GT(cell.ci95, 0.0);
  }
}

TEST(Experiment, LivelockCarriesReplicationContext) {
  const auto path = temp_path("starve.json");
  save_workload({{0, 0.0, {{PhaseKind::Inelastic, 1.0}}}}, path.string());
  ExperimentConfig c;
  c.policies = {{PolicyKind::InelasticFirst, {}}};
  c.servers = 0.5;
  c.workload = FileWorkload{path.string()};
  c.replications = 1;
  try {
    run_experiment(c);
    FAIL() << "expected a livelock";
  } catch (const ReplicationError& e) {
    EXPECT_NE(std::string(e.what()).find("replication 0"), std::string::npos) << e.what();
  }
  std::filesystem::remove(path);
}

TEST(Sweep, SingleValueMatchesRun) {
  const auto c = small_config();
  const double rate = std::get<StochasticConfig>(c.workload).arrival_rate;
  EXPECT_EQ(csv(sweep(c, SweepDimension::ArrivalRate, {rate})), csv(run_experiment(c)));
}

TEST(Sweep, BetaAppliesToFractionalLcfsOnly) {
  const auto c = small_config();
  const auto r = sweep(c, SweepDimension::Beta, {1.0, 0.5});
  ASSERT_EQ(r.cells.size(), 6u);
  EXPECT_EQ(r.cells[3].policy.params.beta, 0.5);
  EXPECT_EQ(r.cells[1].per_replication, r.cells[4].per_replication);  // equi unaffected
  EXPECT_THROW(with_value(ExperimentConfig{}, SweepDimension::Beta, 0.5), ValidationError);
}

TEST(Emit, CsvAndJsonAgree) {
  const auto r = run_experiment(small_config());
  std::istringstream in(csv(r));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, kCsvHeader);
  const auto header = split(line);
  const auto j = to_json(r)["results"];
  std::size_t row = 0;
  while (std::getline(in, line)) {
    const auto f = split(line);
    ASSERT_EQ(f.size(), header.size());
    for (std::size_t k = 0; k < f.size(); ++k) {
      const auto& v = j[row][header[k]];
      if (v.is_null()) {
        EXPECT_TRUE(f[k].empty());
      } else if (v.is_string()) {
        EXPECT_EQ(f[k], v.get<std::string>());
      } else {
        EXPECT_NEAR(std::stod(f[k]), v.get<double>(), 1e-9 * (1 + std::abs(v.get<double>())));
      }
    }
    ++row;
  }
  EXPECT_EQ(row, j.size());
}

TEST(Emit, EmptyResultIsHeaderOnly) {
  EXPECT_EQ(csv(AggregateResult{}), std::string(kCsvHeader) + "\n");
  EXPECT_THROW(emit(AggregateResult{}, "csv", "/nonexistent/dir/out.csv"), std::runtime_error);
  EXPECT_THROW(emit(AggregateResult{}, "xml", "-"), ValidationError);
}

TEST(Emit, FilesAreByteIdentical) {
  const auto a = temp_path("a.csv"), b = temp_path("b.csv");
  emit(run_experiment(small_config()), "csv", a.string());
  emit(run_experiment(small_config()), "csv", b.string());
  std::ifstream fa(a), fb(b);
  std::stringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  EXPECT_EQ(sa.str(), sb.str());
  std::filesystem::remove(a);
  std::filesystem::remove(b);
}

TEST(Config, ParsesAndRejectsTypos) {
  const auto j = nlohmann::json::parse(R"({
    "policies": [{"kind": "fractional_lcfs", "beta": 0.75, "theta": 0.25}, {"kind": "if"}],
    "servers": 10, "alpha": 2, "replications": 3, "base_seed": 9,
    "workload": {"type": "profile", "sizes": [1, 10], "arrival_rate": 5}
  })");
  const auto c = config_from_json(j);
  EXPECT_EQ(c.policies[0].params.beta, 0.75);
  EXPECT_EQ(c.policies[1].kind, PolicyKind::InelasticFirst);
  EXPECT_EQ(std::get<ProfileConfig>(c.workload).sizes.size(), 2u);

  auto bad = j;
  bad["replicatons"] = 3;
  EXPECT_THROW(config_from_json(bad), ValidationError);
  bad = j;
  bad["servers"] = "ten";
  EXPECT_THROW(config_from_json(bad), ValidationError);
  bad = j;
  bad["policies"][0]["theta"] = 0.9;
  EXPECT_THROW(config_from_json(bad), ValidationError);
  bad = j;
  bad["replications"] = 0;
  EXPECT_THROW(config_from_json(bad), ValidationError);
}

TEST(Config, ShippedConfigsLoad) {
  const char* dir = std::getenv("ELASTIC_CONFIG_DIR");
  if (!dir) GTEST_SKIP() << "ELASTIC_CONFIG_DIR not set";
  std::size_t n = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() != ".json") continue;
    SCOPED_TRACE(e.path().string());
    const auto j = read_json_file(e.path().string());
    EXPECT_NO_THROW(load_config(e.path().string()));
    EXPECT_NO_THROW(sweep_from_json(j));
    ++n;
  }
  EXPECT_GE(n, 4u);
}

TEST(Stats, StudentQuantile) {
  EXPECT_NEAR(t_quantile_975(1), 12.706, 1e-3);
  EXPECT_NEAR(t_quantile_975(30), 2.042, 2e-3);
  EXPECT_NEAR(t_quantile_975(199), 1.972, 2e-3);
}
