#ifndef GPULET_SYNTHETIC_H_
#define GPULET_SYNTHETIC_H_

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gpulet/profile.h"

namespace gpulet {

// Closed-form latency family used in place of measured profiles:
//
//   L(b, p) = beta + alpha * b * (1 + k x) / ((1 + k) x),   x = p / 100
//
// so L(b, 100) = beta + alpha * b and the useful share of compute saturates
// as x grows (k = `saturation` >= 0; k = 0 is perfectly linear scaling).
struct ModelArchetype {
  std::string name;
  double slo_ms = 0.0;
  double alpha_ms = 0.0;
  double beta_ms = 0.0;
  double saturation = 0.0;
  double l2_base = 0.0;
  double mem_base = 0.0;
};

double SyntheticLatency(const ModelArchetype& a, int batch, int partition);

// Utilizations grow linearly from 60% of the base at p -> 0 to the base at
// p = 100, scaled by `jitter` and clamped to [0, 1].
SoloStats SyntheticStats(const ModelArchetype& a, int partition,
                         double jitter = 1.0);

// Batch sizes 1..32.
std::vector<int> DefaultBatches();

// goo/le/res/ssd/vgg with their published SLOs (44/5/95/136/130 ms). Latency
// parameters are chosen so that batch 32 on a whole GPU takes 48% of the SLO.
std::vector<ModelArchetype> DefaultArchetypes();

// Archetype whose L(max_batch, 100) equals `fill` * slo / 2.
ModelArchetype ArchetypeForSlo(std::string name, double slo_ms,
                               double beta_fraction, double saturation,
                               double l2_base, double mem_base,
                               int max_batch = 32, double fill = 0.96);

// Random positive parameterization, used by property tests.
ModelArchetype RandomArchetype(std::mt19937_64& rng, std::string name);

// Tabulates every archetype over `grid` x `batches`. The seed only perturbs
// the utilization statistics (by at most +-10%); latencies are exact.
ProfileSet GenerateSyntheticProfiles(std::span<const ModelArchetype> archetypes,
                                     std::span<const int> grid,
                                     std::span<const int> batches,
                                     uint64_t seed);

}  // namespace gpulet

#endif  // GPULET_SYNTHETIC_H_
