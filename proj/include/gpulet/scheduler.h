#ifndef GPULET_SCHEDULER_H_
#define GPULET_SCHEDULER_H_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gpulet/interference.h"
#include "gpulet/partition.h"
#include "gpulet/profile.h"

namespace gpulet {

enum class SchedulerMode {
  kGpulet,     // elastic partitioning, interference ignored
  kGpuletInt,  // elastic partitioning with predicted interference
  kSbp,        // squishy bin packing on whole GPUs
  kIdeal,      // exhaustive search over partitionings
};

std::string ToString(SchedulerMode mode);
// Accepts gpulet, gpulet+int, sbp, ideal. Throws ConfigError otherwise.
SchedulerMode ParseSchedulerMode(const std::string& text);

struct WorkloadModel {
  std::string name;
  double slo_ms = 0.0;
  double rate = 0.0;  // req/s
};

struct WorkloadSpec {
  std::vector<WorkloadModel> models;
  int num_gpus = 4;
  std::vector<int> grid = DefaultPartitionGrid();
  SchedulerMode mode = SchedulerMode::kGpuletInt;
};

// Throws ConfigError on negative rates, non-positive SLOs, duplicate names, a
// grid that is not closed under p -> 100 - p, or missing profile coverage.
void ValidateWorkload(const WorkloadSpec& spec, const ProfileSet& profiles);

enum class Verdict { kSchedulable, kNotSchedulable };

struct SchedulePlan {
  Verdict verdict = Verdict::kNotSchedulable;
  GpuletInventory inventory;
  std::map<std::string, double> incoming_rate;
  std::map<std::string, double> assigned_rate;
  // Some allocated gpulet was checked without a co-runner and its sibling is
  // still free.
  bool pessimistic = false;

  bool schedulable() const { return verdict == Verdict::kSchedulable; }
};

// Elastic partitioning. Models are visited in descending rate; each is given
// gpulets of size min(p_eff, p_req) by best fit until its rate is covered,
// merging into already allocated gpulets through temporal sharing whenever
// possible. `interference` may be null (interference-oblivious).
SchedulePlan ElasticPartitioning(const WorkloadSpec& spec,
                                 const ProfileSet& profiles,
                                 const InterferenceModel* interference);

// Temporal-sharing-only baseline: whole GPUs as bins, saturated models take
// whole GPUs, residual loads are packed first-fit-decreasing by occupancy.
SchedulePlan SquishyBinPacking(const WorkloadSpec& spec,
                               const ProfileSet& profiles);

struct IdealOptions {
  // Upper bound on search nodes before giving up with ResourceError.
  uint64_t max_states = 2'000'000;
  // Separate bound for the second pass (shares below the largest absorbable
  // rate), which only runs when the first pass finds nothing.
  uint64_t max_fine_states = 20'000;
};

// Exhaustive oracle: every partitioning of every GPU, then a backtracking
// search over which gpulet each model's next share goes to. The first pass
// gives every share the largest rate the gpulet absorbs; the second also
// tries every smaller whole-batch share.
SchedulePlan IdealExhaustive(const WorkloadSpec& spec,
                             const ProfileSet& profiles,
                             const InterferenceModel* interference,
                             const IdealOptions& options = {});

// Runs the scheduler selected by spec.mode. `interference` is only consulted
// by kGpuletInt and kIdeal.
SchedulePlan Schedule(const WorkloadSpec& spec, const ProfileSet& profiles,
                      const InterferenceModel* interference,
                      const IdealOptions& ideal_options = {});

// Distinct whole-GPU partitionings available on `grid`: {100} and every
// unordered pair {p, 100 - p} with both sizes on the grid.
std::vector<std::vector<int>> GpuPartitionings(const std::vector<int>& grid);

// Workload JSON: {"models":[{"name","slo_ms","rate"}], "num_gpus", "mode",
// "grid"}. Missing num_gpus/mode/grid take the WorkloadSpec defaults.
WorkloadSpec ParseWorkload(const nlohmann::json& j);
WorkloadSpec LoadWorkloadFile(const std::string& path);

// {"verdict": ..., "gpus": DumpInventory(...), "assigned_rate": {...}}
nlohmann::ordered_json DumpPlan(const SchedulePlan& plan);

}  // namespace gpulet

#endif  // GPULET_SCHEDULER_H_
