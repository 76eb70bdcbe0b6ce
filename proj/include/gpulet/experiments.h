#ifndef GPULET_EXPERIMENTS_H_
#define GPULET_EXPERIMENTS_H_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gpulet/interference.h"
#include "gpulet/profile.h"
#include "gpulet/scheduler.h"
#include "gpulet/sim.h"

namespace gpulet {

// Synthetic profiles of the default goo/le/res/ssd/vgg archetypes.
ProfileSet DefaultProfiles(uint64_t seed, const std::vector<int>& grid =
                                              DefaultPartitionGrid());

// SLOs of the default model set, keyed by name.
std::map<std::string, double> DefaultSlos();

// Planted coefficients used for synthetic co-run data.
InterferenceModel DefaultPlantedInterference();

struct Scenario {
  int id = 0;
  std::map<std::string, double> rates;
};

struct ScenarioSuite {
  std::string name;
  std::vector<Scenario> scenarios;
};

// Every rate vector over `levels`^M except all-zero, in lexicographic order
// of level indices (the last model varies fastest).
ScenarioSuite CanonicalSweep(const std::vector<std::string>& models,
                             const std::vector<double>& levels = {0, 200, 400,
                                                                  600});

// equal, long-only or short-skew. Throws ConfigError on other names.
ScenarioSuite NamedSuite(const std::string& name);
std::vector<std::string> NamedSuiteNames();

// Workload for one scenario: models with a positive rate, SLOs from `slos`.
WorkloadSpec ScenarioWorkload(const Scenario& scenario,
                              const std::map<std::string, double>& slos,
                              int num_gpus, const std::vector<int>& grid,
                              SchedulerMode mode);

struct SweepRow {
  int scenario_id = 0;
  SchedulerMode mode = SchedulerMode::kGpulet;
  // Empty when the scheduler gave up (ideal budget).
  std::optional<Verdict> verdict;
};

struct SweepOptions {
  int num_gpus = 4;
  std::vector<int> grid = DefaultPartitionGrid();
  IdealOptions ideal;
  int threads = 0;  // 0 picks the hardware concurrency
};

// Rows sorted by (scenario_id, mode order in `modes`).
std::vector<SweepRow> SweepSchedulability(
    const ScenarioSuite& suite, const std::vector<SchedulerMode>& modes,
    const ProfileSet& profiles, const std::map<std::string, double>& slos,
    const InterferenceModel* interference, const SweepOptions& options);

// Schedulable scenarios per mode.
std::map<SchedulerMode, int> CountSchedulable(const std::vector<SweepRow>& rows);

void WriteSweepCsv(std::ostream& out, const std::vector<SweepRow>& rows,
                   const std::vector<std::string>& header);

struct AppScenario {
  std::string name;
  std::map<std::string, int> fanout;  // model -> requests per app request
  double slo_ms = 0.0;
};

// App SLO is twice the longest component latency at batch 32 on a whole GPU
// (the largest tabulated batch when smaller).
double AppSlo(const std::map<std::string, int>& fanout,
              const ProfileSet& profiles);
AppScenario GameApp(const ProfileSet& profiles);     // 6 le + 1 res
AppScenario TrafficApp(const ProfileSet& profiles);  // ssd + goo + vgg
AppScenario AppByName(const std::string& name, const ProfileSet& profiles);

// Per-model rates are fanout * rate; each model's SLO is its own SLO capped
// at the app SLO.
WorkloadSpec AppWorkload(const AppScenario& app, double rate,
                         const std::map<std::string, double>& slos,
                         int num_gpus, const std::vector<int>& grid,
                         SchedulerMode mode);

struct AppRun {
  SchedulePlan plan;
  SimulationReport report;
};

AppRun RunAppScenario(const AppScenario& app, double rate, SchedulerMode mode,
                      const ProfileSet& profiles,
                      const std::map<std::string, double>& slos,
                      const InterferenceModel* interference,
                      const SimConfig& config, int num_gpus = 4,
                      const std::vector<int>& grid = DefaultPartitionGrid());

// Each model's rate follows `peak` * (low + (1 - low) * sin^2(pi t / wave)),
// sampled every `step_s`, over two waves.
std::vector<RequestStream> TwoWaveTrace(
    const std::map<std::string, double>& peak, double wave_s, double step_s,
    double low, uint64_t seed);

// Spearman rank correlation with average ranks for ties.
double SpearmanCorrelation(const std::vector<double>& x,
                           const std::vector<double>& y);

}  // namespace gpulet

#endif  // GPULET_EXPERIMENTS_H_
