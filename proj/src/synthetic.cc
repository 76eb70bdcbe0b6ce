#include "gpulet/synthetic.h"

#include <algorithm>

#include "gpulet/errors.h"

namespace gpulet {

double SyntheticLatency(const ModelArchetype& a, int batch, int partition) {
  double x = partition / 100.0;
  double k = a.saturation;
  return a.beta_ms + a.alpha_ms * batch * (1.0 + k * x) / ((1.0 + k) * x);
}

SoloStats SyntheticStats(const ModelArchetype& a, int partition,
                         double jitter) {
  double x = partition / 100.0;
  auto shape = [&](double base) {
    return std::clamp(base * (0.6 + 0.4 * x) * jitter, 0.0, 1.0);
  };
  return {shape(a.l2_base), shape(a.mem_base)};
}

std::vector<int> DefaultBatches() {
  std::vector<int> b(32);
  for (int i = 0; i < 32; ++i) b[static_cast<size_t>(i)] = i + 1;
  return b;
}

ModelArchetype ArchetypeForSlo(std::string name, double slo_ms,
                               double beta_fraction, double saturation,
                               double l2_base, double mem_base, int max_batch,
                               double fill) {
  double full = fill * slo_ms / 2.0;
  ModelArchetype a;
  a.name = std::move(name);
  a.slo_ms = slo_ms;
  a.beta_ms = beta_fraction * full;
  a.alpha_ms = (full - a.beta_ms) / max_batch;
  a.saturation = saturation;
  a.l2_base = l2_base;
  a.mem_base = mem_base;
  return a;
}

std::vector<ModelArchetype> DefaultArchetypes() {
  return {
      ArchetypeForSlo("goo", 44.0, 0.30, 2.0, 0.45, 0.35),
      ArchetypeForSlo("le", 5.0, 0.50, 3.0, 0.20, 0.15),
      ArchetypeForSlo("res", 95.0, 0.20, 1.5, 0.55, 0.50),
      ArchetypeForSlo("ssd", 136.0, 0.25, 1.5, 0.40, 0.45),
      ArchetypeForSlo("vgg", 130.0, 0.10, 1.0, 0.70, 0.75),
  };
}

ModelArchetype RandomArchetype(std::mt19937_64& rng, std::string name) {
  std::uniform_real_distribution<double> slo(5.0, 150.0);
  std::uniform_real_distribution<double> beta_frac(0.05, 0.6);
  std::uniform_real_distribution<double> sat(0.0, 4.0);
  std::uniform_real_distribution<double> util(0.05, 0.9);
  std::uniform_real_distribution<double> fill(0.5, 1.2);
  double s = slo(rng);
  double bf = beta_frac(rng);
  double k = sat(rng);
  double l2 = util(rng);
  double mem = util(rng);
  return ArchetypeForSlo(std::move(name), s, bf, k, l2, mem, 32, fill(rng));
}

ProfileSet GenerateSyntheticProfiles(std::span<const ModelArchetype> archetypes,
                                     std::span<const int> grid,
                                     std::span<const int> batches,
                                     uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(0.9, 1.1);
  ProfileSet set;
  for (const ModelArchetype& a : archetypes) {
    if (!(a.alpha_ms >= 0.0 && a.beta_ms > 0.0 && a.saturation >= 0.0)) {
      throw ConfigError("archetype '" + a.name +
                        "' needs alpha >= 0, beta > 0, saturation >= 0");
    }
    double j = jitter(rng);
    std::vector<double> latency;
    std::vector<SoloStats> stats;
    for (int p : grid) stats.push_back(SyntheticStats(a, p, j));
    for (int b : batches) {
      for (int p : grid) latency.push_back(SyntheticLatency(a, b, p));
    }
    set.Add(LatencyProfile(a.name, {batches.begin(), batches.end()},
                           {grid.begin(), grid.end()}, std::move(latency),
                           std::move(stats)));
  }
  return set;
}

}  // namespace gpulet
