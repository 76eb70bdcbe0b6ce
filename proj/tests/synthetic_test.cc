#include "gpulet/synthetic.h"

#include <gtest/gtest.h>

#include <sstream>

#include "gpulet/errors.h"
#include "gpulet/experiments.h"
#include "knee_oracle.h"

namespace gpulet {
namespace {

TEST(Synthetic, ClosedForm) {
  ModelArchetype a{"m", 100.0, 2.0, 5.0, 1.0, 0.3, 0.3};
  EXPECT_DOUBLE_EQ(SyntheticLatency(a, 4, 100), 5.0 + 2.0 * 4);
  // x = 0.5: (1 + 0.5) / (2 * 0.5) = 1.5
  EXPECT_DOUBLE_EQ(SyntheticLatency(a, 4, 50), 5.0 + 2.0 * 4 * 1.5);
  a.saturation = 0.0;
  EXPECT_DOUBLE_EQ(SyntheticLatency(a, 4, 20), 5.0 + 2.0 * 4 * 5.0);
}

TEST(Synthetic, ZeroAlphaIsConstant) {
  ModelArchetype a{"m", 100.0, 0.0, 7.5, 2.0, 0.3, 0.3};
  std::vector<ModelArchetype> arch = {a};
  ProfileSet set = GenerateSyntheticProfiles(arch, DefaultPartitionGrid(),
                                             DefaultBatches(), 1);
  for (int b : DefaultBatches()) {
    for (int p : DefaultPartitionGrid()) {
      EXPECT_DOUBLE_EQ(LookupLatency(set.At("m"), b, p), 7.5);
    }
  }
}

TEST(Synthetic, DoublingAlphaDoublesVariablePart) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 10; ++i) {
    ModelArchetype a = RandomArchetype(rng, "m");
    ModelArchetype twice = a;
    twice.alpha_ms *= 2.0;
    std::vector<ModelArchetype> one = {a}, two = {twice};
    ProfileSet pa = GenerateSyntheticProfiles(one, DefaultPartitionGrid(), DefaultBatches(), 1);
    ProfileSet pb = GenerateSyntheticProfiles(two, DefaultPartitionGrid(), DefaultBatches(), 1);
    for (int b : DefaultBatches()) {
      for (int p : DefaultPartitionGrid()) {
        EXPECT_NEAR(LookupLatency(pb.At("m"), b, p) - a.beta_ms,
                    2.0 * (LookupLatency(pa.At("m"), b, p) - a.beta_ms), 1e-9);
      }
    }
  }
}

TEST(Synthetic, DefaultsFillHalfTheSlo) {
  ProfileSet set = DefaultProfiles(5);
  std::map<std::string, double> slos = DefaultSlos();
  EXPECT_EQ(slos, (std::map<std::string, double>{
                      {"goo", 44}, {"le", 5}, {"res", 95}, {"ssd", 136}, {"vgg", 130}}));
  for (const auto& [name, slo] : slos) {
    EXPECT_NEAR(LookupLatency(set.At(name), 32, 100), 0.48 * slo, 1e-9) << name;
    EXPECT_EQ(MaxFeasibleBatch(set.At(name), 100, slo, 0.0), 32) << name;
  }
}

TEST(Synthetic, TablesPassValidatorsAndRoundTrip) {
  std::mt19937_64 rng(8);
  std::vector<ModelArchetype> arch;
  for (int i = 0; i < 6; ++i) arch.push_back(RandomArchetype(rng, "m" + std::to_string(i)));
  ProfileSet set = GenerateSyntheticProfiles(arch, DefaultPartitionGrid(), DefaultBatches(), 4);
  std::stringstream csv;
  WriteProfiles(csv, set);
  ProfileSet again = LoadProfiles(csv);
  for (const ModelArchetype& a : arch) {
    const LatencyProfile& p = again.At(a.name);
    for (int b : DefaultBatches()) {
      for (int g : DefaultPartitionGrid()) {
        EXPECT_NEAR(LookupLatency(p, b, g), SyntheticLatency(a, b, g), 1e-9);
      }
    }
    double prev_l2 = -1.0;
    for (int g : DefaultPartitionGrid()) {
      EXPECT_GE(p.Stats(g).l2_util, prev_l2);
      prev_l2 = p.Stats(g).l2_util;
    }
  }
}

TEST(Synthetic, SeedOnlyPerturbsStats) {
  auto arch = DefaultArchetypes();
  ProfileSet a = GenerateSyntheticProfiles(arch, DefaultPartitionGrid(), DefaultBatches(), 1);
  ProfileSet b = GenerateSyntheticProfiles(arch, DefaultPartitionGrid(), DefaultBatches(), 2);
  EXPECT_DOUBLE_EQ(LookupLatency(a.At("res"), 7, 40), LookupLatency(b.At("res"), 7, 40));
  EXPECT_NE(a.At("res").Stats(40).l2_util, b.At("res").Stats(40).l2_util);
}

TEST(Synthetic, RejectsBadArchetype) {
  std::vector<ModelArchetype> arch = {{"m", 10.0, 1.0, 0.0, 1.0, 0.1, 0.1}};
  EXPECT_THROW(GenerateSyntheticProfiles(arch, DefaultPartitionGrid(), DefaultBatches(), 1),
               ConfigError);
}

TEST(Knee, MatchesAnalyticCurve) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 50; ++i) {
    ModelArchetype a = RandomArchetype(rng, "m");
    std::vector<ModelArchetype> one = {a};
    ProfileSet set = GenerateSyntheticProfiles(one, DefaultPartitionGrid(), DefaultBatches(), 1);
    CapacityCurve curve = ComputeCapacityCurve(set.At("m"), a.slo_ms);
    for (size_t k = 0; k < curve.partitions.size(); ++k) {
      EXPECT_NEAR(curve.max_rate[k],
                  testing::AnalyticCapacity(a, curve.partitions[k]),
                  1e-9 * std::max(1.0, curve.max_rate[k]));
    }
    EXPECT_EQ(MaxEfficientPartition(curve),
              testing::AnalyticKnee(a, DefaultPartitionGrid()))
        << "archetype " << i;
  }
}

TEST(Knee, DefaultModelsKneeAt40) {
  ProfileSet set = DefaultProfiles(1);
  for (const auto& [name, slo] : DefaultSlos()) {
    EXPECT_EQ(MaxEfficientPartition(ComputeCapacityCurve(set.At(name), slo)), 40) << name;
  }
}

}  // namespace
}  // namespace gpulet
