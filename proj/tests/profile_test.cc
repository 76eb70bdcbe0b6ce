#include "gpulet/profile.h"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "gpulet/errors.h"
#include "gpulet/synthetic.h"

namespace gpulet {
namespace {

// L(b, p) = scale * b / p, over the given batches and partitions.
LatencyProfile InverseProfile(const std::string& name, double scale,
                              std::vector<int> batches,
                              std::vector<int> partitions) {
  std::vector<double> lat;
  for (int b : batches) {
    for (int p : partitions) lat.push_back(scale * b / p);
  }
  std::vector<SoloStats> stats(partitions.size(), {0.3, 0.2});
  return LatencyProfile(name, batches, partitions, lat, stats);
}

CapacityCurve Curve(std::vector<int> p, std::vector<double> r) {
  return {"toy", std::move(p), std::move(r)};
}

TEST(LoadProfiles, MapsRowFields) {
  std::istringstream in(
      "model,batch,partition_pct,latency_ms,l2_util,mem_bw_util\n"
      "toy,1,20,10.0,0.30,0.25\n");
  ProfileSet set = LoadProfiles(in);
  const LatencyProfile& p = set.At("toy");
  EXPECT_DOUBLE_EQ(LookupLatency(p, 1, 20), 10.0);
  EXPECT_DOUBLE_EQ(p.Stats(20).l2_util, 0.30);
  EXPECT_DOUBLE_EQ(p.Stats(20).mem_bw_util, 0.25);
}

TEST(LoadProfiles, RejectsBatchMonotonicityViolation) {
  std::istringstream in(
      "model,batch,partition_pct,latency_ms,l2_util,mem_bw_util\n"
      "toy,1,20,10.0,0.3,0.25\n"
      "toy,2,20,9.0,0.3,0.25\n");
  try {
    LoadProfiles(in);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("toy, b=2, p=20"), std::string::npos)
        << e.what();
  }
}

TEST(LoadProfiles, RejectsPartitionMonotonicityViolation) {
  std::istringstream in(
      "model,batch,partition_pct,latency_ms,l2_util,mem_bw_util\n"
      "toy,1,20,10.0,0.3,0.25\n"
      "toy,1,40,11.0,0.3,0.25\n");
  EXPECT_THROW(LoadProfiles(in), DataError);
}

TEST(LoadProfiles, MalformedRowNamesLine) {
  std::istringstream in(
      "model,batch,partition_pct,latency_ms,l2_util,mem_bw_util\n"
      "toy,1,20,10.0,0.3,0.25\n"
      "toy,two,20,10.0,0.3,0.25\n");
  try {
    LoadProfiles(in);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(":3"), std::string::npos) << e.what();
  }
}

TEST(LoadProfiles, RejectsMissingHeaderAndShortRows) {
  std::istringstream no_header("toy,1,20,10.0,0.3,0.25\n");
  EXPECT_THROW(LoadProfiles(no_header), ParseError);
  std::istringstream short_row(
      "model,batch,partition_pct,latency_ms,l2_util,mem_bw_util\n"
      "toy,1,20,10.0\n");
  EXPECT_THROW(LoadProfiles(short_row), ParseError);
}

TEST(LoadProfiles, RejectsIncompleteGrid) {
  std::istringstream in(
      "model,batch,partition_pct,latency_ms,l2_util,mem_bw_util\n"
      "toy,1,20,10.0,0.3,0.25\n"
      "toy,1,40,8.0,0.3,0.25\n"
      "toy,2,20,12.0,0.3,0.25\n");
  EXPECT_THROW(LoadProfiles(in), DataError);
}

TEST(LoadProfiles, SyntheticRoundTrip) {
  auto archetypes = DefaultArchetypes();
  ProfileSet original = GenerateSyntheticProfiles(
      archetypes, DefaultPartitionGrid(), DefaultBatches(), 11);
  std::stringstream buf;
  WriteProfiles(buf, original);
  ProfileSet loaded = LoadProfiles(buf);
  EXPECT_EQ(loaded, original);
}

TEST(LookupLatency, ExactHitAndCeiling) {
  std::vector<double> lat;
  std::vector<int> batches = {1, 2, 4, 8};
  for (int b : batches) lat.push_back(5.0 * b);
  LatencyProfile p("toy", batches, {40}, lat, {{0.1, 0.1}});
  EXPECT_DOUBLE_EQ(LookupLatency(p, 4, 40), 20.0);
  EXPECT_DOUBLE_EQ(LookupLatency(p, 3, 40), 20.0);
  EXPECT_THROW(LookupLatency(p, 64, 40), CapacityError);
  EXPECT_THROW(LookupLatency(p, 1, 50), GridError);
}

TEST(LookupLatency, MonotoneInBatchOnRandomTables) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    ModelArchetype a = RandomArchetype(rng, "m");
    ModelArchetype arr[] = {a};
    ProfileSet set = GenerateSyntheticProfiles(
        arr, DefaultPartitionGrid(), std::vector<int>{1, 2, 4, 8, 16, 32},
        trial);
    const LatencyProfile& p = set.At("m");
    for (int part : DefaultPartitionGrid()) {
      for (int b = 1; b < 32; ++b) {
        EXPECT_LE(LookupLatency(p, b, part), LookupLatency(p, b + 1, part));
      }
    }
  }
}

TEST(MaxFeasibleBatch, LargestTabulatedBatch) {
  std::vector<int> batches = {1, 2, 4, 8, 16};
  std::vector<double> lat;
  for (int b : batches) lat.push_back(5.0 * b);
  LatencyProfile p("toy", batches, {100}, lat, {{0.1, 0.1}});
  EXPECT_EQ(MaxFeasibleBatch(p, 100, 130.0, 0.0), 8);
  EXPECT_EQ(MaxFeasibleBatch(p, 100, 9.0, 0.0), std::nullopt);
  // 2*40 + 51 > 130 but 2*20 + 51 <= 130.
  EXPECT_EQ(MaxFeasibleBatch(p, 100, 130.0, 51.0), 4);
}

TEST(MaxFeasibleBatch, MaximalAgainstScan) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    ModelArchetype a = RandomArchetype(rng, "m");
    ModelArchetype arr[] = {a};
    ProfileSet set = GenerateSyntheticProfiles(arr, DefaultPartitionGrid(),
                                               DefaultBatches(), trial);
    const LatencyProfile& p = set.At("m");
    double overhead = std::uniform_real_distribution<double>(0, 5)(rng);
    for (int part : DefaultPartitionGrid()) {
      auto got = MaxFeasibleBatch(p, part, a.slo_ms, overhead);
      int want = 0;
      for (int b : p.batches()) {
        if (2.0 * LookupLatency(p, b, part) + overhead <= a.slo_ms) want = b;
      }
      EXPECT_EQ(got.value_or(0), want);
    }
  }
}

TEST(CapacityCurve, InfeasiblePointIsZero) {
  LatencyProfile p = InverseProfile("toy", 400.0, {1, 2, 4}, {20, 100});
  // L(1,20) = 20 ms, L(1,100) = 4 ms.
  CapacityCurve c = ComputeCapacityCurve(p, 30.0);
  EXPECT_DOUBLE_EQ(c.RateAt(20), 0.0);
  EXPECT_GT(c.RateAt(100), 0.0);
}

TEST(CapacityCurve, MatchesBruteForce) {
  std::vector<int> batches = {1, 2, 3, 4, 6, 8, 12, 16};
  std::vector<int> parts = {20, 40, 60, 80, 100};
  LatencyProfile p = InverseProfile("toy", 250.0, batches, parts);
  for (double slo : {20.0, 50.0, 120.0}) {
    CapacityCurve c = ComputeCapacityCurve(p, slo);
    for (size_t i = 0; i < parts.size(); ++i) {
      double best = 0.0;
      for (int b : batches) {
        double l = 250.0 * b / parts[i];
        if (2.0 * l <= slo) best = std::max(best, 1000.0 * b / l);
      }
      EXPECT_NEAR(c.max_rate[i], best, 1e-9) << "slo " << slo << " p " << parts[i];
    }
  }
}

TEST(CapacityCurve, SinglePointGrid) {
  LatencyProfile p = InverseProfile("toy", 100.0, {1, 2}, {100});
  CapacityCurve c = ComputeCapacityCurve(p, 10.0);
  ASSERT_EQ(c.partitions.size(), 1u);
  EXPECT_EQ(MaxEfficientPartition(c), 100);
}

TEST(CapacityCurve, NonDecreasingInPartition) {
  ProfileSet set = GenerateSyntheticProfiles(
      DefaultArchetypes(), DefaultPartitionGrid(), DefaultBatches(), 1);
  for (const auto& [name, prof] : set) {
    CapacityCurve c = ComputeCapacityCurve(prof, 100.0);
    for (size_t i = 1; i < c.max_rate.size(); ++i) {
      EXPECT_GE(c.max_rate[i], c.max_rate[i - 1]) << name;
    }
  }
}

TEST(MaxEfficientPartition, KneeOfHandCurve) {
  EXPECT_EQ(MaxEfficientPartition(Curve({20, 40, 60, 80, 100},
                                        {100, 200, 240, 260, 270})),
            40);
}

TEST(MaxEfficientPartition, LinearCurveTiesToSmallestInterior) {
  EXPECT_EQ(MaxEfficientPartition(Curve({20, 40, 60, 80, 100},
                                        {100, 200, 300, 400, 500})),
            40);
}

TEST(MaxEfficientPartition, TwoPointFallback) {
  EXPECT_EQ(MaxEfficientPartition(Curve({50, 100}, {10, 20})), 100);
}

TEST(MaxEfficientPartition, ScaleInvariant) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> r;
    double acc = 0.0;
    for (int i = 0; i < 6; ++i) r.push_back(acc += u(rng));
    std::vector<int> p = DefaultPartitionGrid();
    int base = MaxEfficientPartition(Curve(p, r));
    for (double s : {0.001, 3.0, 1e4}) {
      std::vector<double> scaled = r;
      for (double& x : scaled) x *= s;
      EXPECT_EQ(MaxEfficientPartition(Curve(p, scaled)), base);
    }
  }
}

TEST(MinRequiredPartition, Examples) {
  CapacityCurve c = Curve({20, 40, 60}, {100, 200, 240});
  EXPECT_EQ(MinRequiredPartition(c, 0).partition, 20);
  RequiredPartition mid = MinRequiredPartition(c, 150);
  EXPECT_EQ(mid.partition, 40);
  EXPECT_FALSE(mid.saturating);
  RequiredPartition big = MinRequiredPartition(c, 500);
  EXPECT_EQ(big.partition, 60);
  EXPECT_TRUE(big.saturating);
}

TEST(MinRequiredPartition, SmallestFeasibleAgainstScan) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> r;
    double acc = 0.0;
    for (int i = 0; i < 6; ++i) r.push_back(acc += u(rng));
    CapacityCurve c = Curve(DefaultPartitionGrid(), r);
    double rate = u(rng) * 7.0;
    int want = -1;
    for (size_t i = 0; i < r.size() && want < 0; ++i) {
      if (r[i] >= rate) want = c.partitions[i];
    }
    RequiredPartition got = MinRequiredPartition(c, rate);
    if (want < 0) {
      EXPECT_TRUE(got.saturating);
      EXPECT_EQ(got.partition, 100);
    } else {
      EXPECT_EQ(got.partition, want);
    }
  }
}

TEST(ProfileSet, MissingModelIsConfigError) {
  ProfileSet set;
  EXPECT_THROW(set.At("nope"), ConfigError);
}

}  // namespace
}  // namespace gpulet
