#include "gpulet/sim.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "gpulet/errors.h"
#include "gpulet/experiments.h"

namespace gpulet {
namespace {

const std::vector<std::string> kNames = {"goo", "le", "res", "ssd", "vgg"};

class SimTest : public ::testing::Test {
 protected:
  SimTest() : profiles_(DefaultProfiles(3)), slos_(DefaultSlos()) {}

  double Capacity(const std::string& m) const {
    return ComputeCapacityCurve(profiles_.At(m), slos_.at(m)).max_rate.back();
  }

  WorkloadSpec Spec(const std::map<std::string, double>& rates, int gpus,
                    SchedulerMode mode) const {
    WorkloadSpec spec;
    spec.num_gpus = gpus;
    spec.mode = mode;
    for (const auto& [m, r] : rates) spec.models.push_back({m, slos_.at(m), r});
    return spec;
  }

  static std::vector<RequestStream> Streams(const WorkloadSpec& spec,
                                            ArrivalProcess process,
                                            double scale = 1.0) {
    std::vector<RequestStream> out;
    uint64_t seed = 40;
    for (const WorkloadModel& m : spec.models) {
      out.push_back(ConstantStream(m.name, scale * m.rate, ++seed, process));
    }
    return out;
  }

  ProfileSet profiles_;
  std::map<std::string, double> slos_;
};

TEST(Arrivals, ZeroRateSegmentIsEmpty) {
  RequestStream s{"m", {{0.0, 50.0}, {10.0, 0.0}, {20.0, 50.0}}, 3};
  auto t = GenerateArrivals(s, 30.0);
  ASSERT_FALSE(t.empty());
  for (double x : t) EXPECT_FALSE(x >= 10.0 && x < 20.0) << x;
  EXPECT_TRUE(std::is_sorted(t.begin(), t.end()));
  EXPECT_LT(t.back(), 30.0);
}

TEST(Arrivals, PoissonRateWithinThreeSigma) {
  const double lambda = 100.0, horizon = 100.0;
  const double sigma = std::sqrt(lambda * horizon) / horizon;
  for (uint64_t seed : {1, 2, 3, 4, 5}) {
    auto t = GenerateArrivals(ConstantStream("m", lambda, seed), horizon);
    double rate = static_cast<double>(t.size()) / horizon;
    EXPECT_LT(std::abs(rate - lambda), 3 * sigma) << "seed " << seed;
  }
}

TEST(Arrivals, PoissonGapsAreExponential) {
  auto t = GenerateArrivals(ConstantStream("m", 200.0, 9), 500.0);
  double sum = 0.0, sq = 0.0;
  for (size_t i = 1; i < t.size(); ++i) {
    double g = t[i] - t[i - 1];
    sum += g;
    sq += g * g;
  }
  double n = static_cast<double>(t.size() - 1);
  double mean = sum / n;
  double var = sq / n - mean * mean;
  EXPECT_NEAR(mean, 1.0 / 200.0, 3 * (1.0 / 200.0) / std::sqrt(n));
  // Coefficient of variation of an exponential is 1.
  EXPECT_NEAR(std::sqrt(var) / mean, 1.0, 0.03);
}

TEST(Arrivals, SameSeedSameSequence) {
  RequestStream s{"m", {{0.0, 80.0}, {5.0, 20.0}}, 17};
  EXPECT_EQ(GenerateArrivals(s, 20.0), GenerateArrivals(s, 20.0));
  RequestStream other = s;
  other.seed = 18;
  EXPECT_NE(GenerateArrivals(s, 20.0), GenerateArrivals(other, 20.0));
}

TEST(Arrivals, DeterministicSpacing) {
  RequestStream s = ConstantStream("m", 50.0, 1, ArrivalProcess::kDeterministic);
  auto t = GenerateArrivals(s, 2.0);
  ASSERT_EQ(t.size(), 100u);
  for (size_t i = 0; i < t.size(); ++i) EXPECT_NEAR(t[i], i * 0.02, 1e-12);

  // The count follows the integrated rate across segments.
  RequestStream two{"m", {{0.0, 10.0}, {0.55, 100.0}}, 1,
                    ArrivalProcess::kDeterministic};
  auto u = GenerateArrivals(two, 1.0);
  EXPECT_EQ(u.size(), 51u);  // ceil(5.5 + 45)
}

TEST(Arrivals, InvalidTraces) {
  RequestStream neg{"m", {{0.0, -1.0}}, 1};
  EXPECT_THROW(GenerateArrivals(neg, 1.0), ConfigError);
  RequestStream unsorted{"m", {{5.0, 1.0}, {2.0, 1.0}}, 1};
  EXPECT_THROW(GenerateArrivals(unsorted, 10.0), ConfigError);
}

TEST(RateAt, PiecewiseConstant) {
  RequestStream s{"m", {{1.0, 10.0}, {3.0, 20.0}}, 1};
  EXPECT_EQ(s.RateAt(0.5), 0.0);
  EXPECT_EQ(s.RateAt(1.0), 10.0);
  EXPECT_EQ(s.RateAt(2.9), 10.0);
  EXPECT_EQ(s.RateAt(100.0), 20.0);
}

TEST(Ewma, Examples) {
  EXPECT_DOUBLE_EQ(EwmaRate(100.0, 200.0, 0.5), 150.0);
  EXPECT_DOUBLE_EQ(EwmaRate(100.0, 200.0, 1.0), 200.0);
  double r = 5000.0;
  for (int i = 0; i < 100; ++i) r = EwmaRate(r, 300.0, 0.3);
  EXPECT_NEAR(r, 300.0, 1e-6);
  EXPECT_THROW(EwmaRate(1.0, 2.0, 0.0), ConfigError);
  EXPECT_THROW(EwmaRate(1.0, 2.0, 1.5), ConfigError);
}

TEST(SimConfig, Validation) {
  SimConfig ok;
  EXPECT_NO_THROW(ok.Validate());
  auto bad = [](auto mutate) {
    SimConfig c;
    mutate(c);
    EXPECT_THROW(c.Validate(), ConfigError);
  };
  bad([](SimConfig& c) { c.duration_s = 0; });
  bad([](SimConfig& c) { c.period_s = 12; });  // below the reorg maximum
  bad([](SimConfig& c) { c.reorg_min_s = 16; });
  bad([](SimConfig& c) { c.ewma_alpha = 0; });
  bad([](SimConfig& c) { c.headroom = 0.9; });
  bad([](SimConfig& c) { c.scale_down_margin = -1; });
}

TEST_F(SimTest, NoArrivalsNoViolations) {
  WorkloadSpec spec = Spec({{"res", 100.0}}, 1, SchedulerMode::kGpulet);
  SchedulePlan plan = Schedule(spec, profiles_, nullptr);
  SimConfig config;
  auto report = SimulateStatic(plan, profiles_, {ConstantStream("res", 0.0, 1)},
                               config);
  EXPECT_EQ(report.Total().arrivals, 0u);
  EXPECT_EQ(report.Total().completed, 0u);
  EXPECT_EQ(report.ViolationRate(), 0.0);
}

TEST_F(SimTest, UnservedModelIsDropped) {
  WorkloadSpec spec = Spec({{"res", 100.0}}, 1, SchedulerMode::kGpulet);
  SchedulePlan plan = Schedule(spec, profiles_, nullptr);
  SimConfig config;
  config.duration_s = 5.0;
  auto report = SimulateStatic(
      plan, profiles_,
      {ConstantStream("res", 100.0, 1), ConstantStream("vgg", 30.0, 2)}, config);
  const RequestCounts& vgg = report.totals.at("vgg");
  EXPECT_GT(vgg.arrivals, 0u);
  EXPECT_EQ(vgg.dropped, vgg.arrivals);
}

// Exact replay: every Schedulable plan serves its rates with no violation.
TEST_F(SimTest, DeterministicReplayOfSchedulablePlans) {
  std::mt19937_64 rng(6);
  InterferenceModel intf = DefaultPlantedInterference();
  int replayed = 0;
  for (int i = 0; i < 60; ++i) {
    std::map<std::string, double> rates;
    for (const std::string& m : kNames) {
      if (rng() % 2) {
        rates[m] = std::uniform_real_distribution<double>(0.0, 1.0)(rng) * Capacity(m);
      }
    }
    if (rates.empty()) continue;
    SchedulerMode mode = i % 2 ? SchedulerMode::kGpuletInt : SchedulerMode::kSbp;
    WorkloadSpec spec = Spec(rates, 2, mode);
    SchedulePlan plan = Schedule(spec, profiles_, &intf);
    if (!plan.schedulable()) continue;
    ++replayed;
    SimConfig config;
    config.duration_s = 10.0;
    if (mode == SchedulerMode::kGpuletInt) config.factor = PredictedFactor(intf);
    auto report = SimulateStatic(
        plan, profiles_, Streams(spec, ArrivalProcess::kDeterministic), config);
    EXPECT_EQ(report.Total().violations(), 0u) << DumpPlan(plan).dump();
    for (const auto& [m, lat] : report.max_latency_ms) {
      EXPECT_LE(lat, slos_.at(m) + 1e-6) << m;
    }
  }
  EXPECT_GT(replayed, 20);
}

TEST_F(SimTest, PoissonAtHalfCapacity) {
  WorkloadSpec spec = Spec({{"goo", 600.0}, {"res", 250.0}, {"vgg", 150.0}}, 2,
                           SchedulerMode::kGpulet);
  SchedulePlan plan = Schedule(spec, profiles_, nullptr);
  ASSERT_TRUE(plan.schedulable());
  SimConfig config;
  config.duration_s = 60.0;
  auto report = SimulateStatic(
      plan, profiles_, Streams(spec, ArrivalProcess::kPoisson, 0.5), config);
  EXPECT_GT(report.Total().arrivals, 25000u);
  EXPECT_LT(report.ViolationRate(), 0.01);
}

TEST_F(SimTest, AccountingIdentities) {
  WorkloadSpec spec = Spec({{"goo", 600.0}, {"res", 250.0}}, 1,
                           SchedulerMode::kGpulet);
  SchedulePlan plan = Schedule(spec, profiles_, nullptr);
  ASSERT_TRUE(plan.schedulable());
  SimConfig config;
  config.duration_s = 45.0;
  // Overload to exercise late and dropped requests.
  auto report = SimulateStatic(
      plan, profiles_, Streams(spec, ArrivalProcess::kPoisson, 1.6), config);
  RequestCounts total = report.Total();
  EXPECT_GT(total.dropped, 0u);
  RequestCounts sum;
  for (const PeriodStats& p : report.periods) {
    for (const auto& [m, c] : p.models) {
      sum += c;
      EXPECT_LE(c.violation_rate(), 1.0);
      EXPECT_LE(static_cast<double>(c.completed), static_cast<double>(c.arrivals) + 1e-9);
    }
  }
  EXPECT_EQ(sum.arrivals, total.arrivals);
  EXPECT_EQ(sum.completed + sum.dropped, total.arrivals);
  EXPECT_LE(total.late, total.completed);
  EXPECT_EQ(report.periods.size(), 3u);
  EXPECT_DOUBLE_EQ(report.periods[2].start_s, 40.0);
  EXPECT_DOUBLE_EQ(report.periods[2].length_s, 5.0);
  for (const PeriodStats& p : report.periods) {
    EXPECT_DOUBLE_EQ(p.utilized_partition_sum, plan.inventory.UtilizedPartitionSum());
  }
}

TEST_F(SimTest, DropRuleOnlyAffectsHopelessRequests) {
  WorkloadSpec spec = Spec({{"res", 300.0}}, 1, SchedulerMode::kGpulet);
  SchedulePlan plan = Schedule(spec, profiles_, nullptr);
  SimConfig config;
  config.duration_s = 20.0;
  auto streams = Streams(spec, ArrivalProcess::kPoisson, 2.0);
  auto with_drops = SimulateStatic(plan, profiles_, streams, config);
  config.drop_hopeless = false;
  auto without = SimulateStatic(plan, profiles_, streams, config);
  EXPECT_GT(with_drops.Total().dropped, 0u);
  EXPECT_EQ(without.Total().dropped, 0u);
  EXPECT_EQ(with_drops.Total().arrivals, without.Total().arrivals);
  // Served requests past the SLO are late; dropping them early bounds latency.
  EXPECT_GT(without.Total().late, 0u);
}

TEST_F(SimTest, InterferenceSlowsCoRunners) {
  WorkloadSpec spec = Spec({{"goo", 900.0}, {"res", 300.0}}, 1,
                           SchedulerMode::kGpulet);
  SchedulePlan plan = Schedule(spec, profiles_, nullptr);
  ASSERT_TRUE(plan.schedulable());
  ASSERT_EQ(plan.inventory.AllocGpulets().size(), 2u);
  SimConfig config;
  config.duration_s = 10.0;
  auto streams = Streams(spec, ArrivalProcess::kDeterministic);
  auto clean = SimulateStatic(plan, profiles_, streams, config);
  FactorTable table;
  table.default_factor = 3.0;
  config.factor = TableFactor(table);
  auto slowed = SimulateStatic(plan, profiles_, streams, config);
  EXPECT_EQ(clean.Total().violations(), 0u);
  EXPECT_GT(slowed.Total().violations(), 0u);
  EXPECT_GT(slowed.max_latency_ms.at("goo"), clean.max_latency_ms.at("goo"));
}

TEST_F(SimTest, ThroughputOfSingleModelMatchesCapacity) {
  for (const std::string& m : {"res", "vgg"}) {
    WorkloadSpec spec = Spec({{m, 1.0}}, 1, SchedulerMode::kSbp);
    SimConfig config;
    config.duration_s = 20.0;
    auto r = MaxAchievableThroughput(spec, profiles_, nullptr, config,
                                     ArrivalProcess::kDeterministic);
    double c = Capacity(m);
    EXPECT_LE(std::abs(r.aggregate_rate - c), r.step + 1e-9)
        << m << " got " << r.aggregate_rate << " step " << r.step;
  }
}

TEST_F(SimTest, ThroughputOfUnschedulableIsZero) {
  double l1 = LookupLatency(profiles_.At("vgg"), 1, 100);
  WorkloadSpec spec;
  spec.num_gpus = 1;
  spec.mode = SchedulerMode::kGpulet;
  spec.models = {{"vgg", 1.5 * l1, 10.0}};
  SimConfig config;
  config.duration_s = 5.0;
  auto r = MaxAchievableThroughput(spec, profiles_, nullptr, config);
  EXPECT_EQ(r.multiplier, 0.0);
  EXPECT_EQ(r.aggregate_rate, 0.0);
}

// Deterministic arrivals isolate plan capacity from queueing at lanes that are
// provisioned exactly at their rate.
TEST_F(SimTest, ElasticThroughputAtLeastSbp) {
  SimConfig config;
  config.duration_s = 20.0;
  for (const auto& mix : std::vector<std::map<std::string, double>>{
           {{"le", 100.0}, {"vgg", 10.0}, {"goo", 30.0}},
           {{"ssd", 1.0}, {"goo", 1.0}, {"vgg", 1.0}}}) {
    WorkloadSpec el = Spec(mix, 2, SchedulerMode::kGpulet);
    WorkloadSpec sbp = Spec(mix, 2, SchedulerMode::kSbp);
    auto a = MaxAchievableThroughput(el, profiles_, nullptr, config,
                                     ArrivalProcess::kDeterministic);
    auto b = MaxAchievableThroughput(sbp, profiles_, nullptr, config,
                                     ArrivalProcess::kDeterministic);
    EXPECT_GT(b.aggregate_rate, 0.0);
    EXPECT_GE(a.aggregate_rate, b.aggregate_rate);
  }
}

TEST_F(SimTest, LiveModeFlatTraceSettles) {
  WorkloadSpec base = Spec({{"goo", 400.0}, {"res", 150.0}}, 2,
                           SchedulerMode::kGpulet);
  SimConfig config;
  config.duration_s = 200.0;
  auto report = SimulateLive(base, profiles_, nullptr,
                             Streams(base, ArrivalProcess::kPoisson), config);
  int late_reorgs = 0;
  for (const ReorgEvent& e : report.reorgs) {
    EXPECT_GE(e.activated_s - e.decided_s, config.reorg_min_s - 1e-9);
    EXPECT_LE(e.activated_s - e.decided_s, config.reorg_max_s + 1e-9);
    if (e.decided_s > 2 * config.period_s) ++late_reorgs;
  }
  EXPECT_LE(late_reorgs, 1);
  EXPECT_LT(report.ViolationRate(), 0.01);
  EXPECT_EQ(report.periods.size(), 10u);
}

TEST_F(SimTest, LiveModeFollowsLoad) {
  std::map<std::string, double> peak = {{"goo", 900.0}, {"res", 350.0}};
  auto streams = TwoWaveTrace(peak, 400.0, 20.0, 0.1, 4);
  WorkloadSpec base = Spec({{"goo", 90.0}, {"res", 35.0}}, 2,
                           SchedulerMode::kGpulet);
  SimConfig config;
  config.duration_s = 800.0;
  auto report = SimulateLive(base, profiles_, nullptr, streams, config);
  std::vector<double> offered, used;
  for (const PeriodStats& p : report.periods) {
    offered.push_back(p.offered_rate);
    used.push_back(p.utilized_partition_sum);
  }
  EXPECT_GT(SpearmanCorrelation(offered, used), 0.0);
  EXPECT_LT(report.ViolationRate(), 0.01);
  bool up = false, down = false;
  for (const ReorgEvent& e : report.reorgs) {
    up |= e.scale_up;
    down |= !e.scale_up;
  }
  EXPECT_TRUE(up);
  EXPECT_TRUE(down);
}

TEST(RateTrace, RoundTripAndErrors) {
  std::vector<RequestStream> streams = {
      {"a", {{0.0, 10.0}, {5.5, 20.25}}, 1},
      {"b", {{0.0, 0.0}, {1.0, 3.0}}, 1},
  };
  std::stringstream buf;
  WriteRateTrace(buf, streams);
  auto loaded = LoadRateTrace(buf, 7);
  ASSERT_EQ(loaded.size(), 2u);
  EXPECT_EQ(loaded[0].model, "a");
  ASSERT_EQ(loaded[0].trace.size(), 2u);
  EXPECT_DOUBLE_EQ(loaded[0].trace[1].start_s, 5.5);
  EXPECT_DOUBLE_EQ(loaded[0].trace[1].rate, 20.25);
  EXPECT_NE(loaded[0].seed, loaded[1].seed);

  std::istringstream no_header("0,a,1\n");
  EXPECT_THROW(LoadRateTrace(no_header, 1), ParseError);
  std::istringstream short_row("time_s,model,rate\n0,a\n");
  EXPECT_THROW(LoadRateTrace(short_row, 1), ParseError);
  std::istringstream negative("time_s,model,rate\n0,a,-2\n");
  EXPECT_THROW(LoadRateTrace(negative, 1), DataError);
  std::istringstream backwards("time_s,model,rate\n3,a,1\n1,a,2\n");
  EXPECT_THROW(LoadRateTrace(backwards, 1), DataError);
  std::istringstream empty("");
  EXPECT_THROW(LoadRateTrace(empty, 1), ParseError);
}

TEST_F(SimTest, ReportCsv) {
  WorkloadSpec spec = Spec({{"res", 100.0}}, 1, SchedulerMode::kGpulet);
  SchedulePlan plan = Schedule(spec, profiles_, nullptr);
  SimConfig config;
  config.duration_s = 40.0;
  auto report = SimulateStatic(plan, profiles_, Streams(spec, ArrivalProcess::kPoisson),
                               config);
  std::ostringstream out;
  WriteReportCsv(out, report, {"mode=gpulet", "seed=1"});
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "# mode=gpulet");
  std::getline(in, line);
  std::getline(in, line);
  EXPECT_EQ(line, "period,model,throughput,violation_rate,utilized_partition_sum");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(line.rfind(std::to_string(rows - 1) + ",res,", 0), 0u) << line;
  }
  EXPECT_EQ(rows, 2);
}

}  // namespace
}  // namespace gpulet
