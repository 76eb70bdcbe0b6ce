#ifndef GPULET_SIM_H_
#define GPULET_SIM_H_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gpulet/interference.h"
#include "gpulet/profile.h"
#include "gpulet/scheduler.h"

namespace gpulet {

enum class ArrivalProcess { kPoisson, kDeterministic };

// Rate `rate` (req/s) from `start_s` until the next segment starts.
struct RateSegment {
  double start_s = 0.0;
  double rate = 0.0;
};

struct RequestStream {
  std::string model;
  std::vector<RateSegment> trace;  // sorted by start_s; rate 0 before the first
  uint64_t seed = 1;
  ArrivalProcess process = ArrivalProcess::kPoisson;

  double RateAt(double t) const;
};

RequestStream ConstantStream(std::string model, double rate, uint64_t seed,
                             ArrivalProcess process = ArrivalProcess::kPoisson);

// Arrival times in [0, duration_s), ascending. Poisson arrivals use
// inverse-CDF exponential gaps drawn per segment; deterministic arrivals
// fall where the integrated rate crosses 0, 1, 2, ...
// Throws ConfigError on negative rates or unsorted segments.
std::vector<double> GenerateArrivals(const RequestStream& stream,
                                     double duration_s);

// alpha * observed + (1 - alpha) * previous. Throws ConfigError unless
// alpha is in (0, 1].
double EwmaRate(double previous, double observed, double alpha);

struct SimConfig {
  double duration_s = 60.0;  // arrivals are generated in [0, duration_s)
  double period_s = 20.0;    // reporting and rescheduling period
  double reorg_min_s = 10.0;
  double reorg_max_s = 15.0;
  double ewma_alpha = 0.5;
  // Live mode provisions for this multiple of the estimated rate.
  double headroom = 1.15;
  // Live mode shrinks the plan only when that frees at least this much
  // partition (in percent of one GPU).
  double scale_down_margin = 40.0;
  // Drop a request at dispatch when its wait exceeds SLO - L(1, p).
  bool drop_hopeless = true;
  // Slowdown applied to executions whose gpulet has an allocated sibling.
  // Empty means no interference.
  FactorFn factor;
  uint64_t seed = 1;  // reorganization delays

  // Throws ConfigError on inconsistent values.
  void Validate() const;
};

struct RequestCounts {
  uint64_t arrivals = 0;
  uint64_t completed = 0;  // served, on time or not
  uint64_t late = 0;       // served after the SLO
  uint64_t dropped = 0;

  uint64_t violations() const { return late + dropped; }
  double violation_rate() const {
    return arrivals == 0 ? 0.0
                         : static_cast<double>(violations()) /
                               static_cast<double>(arrivals);
  }
  RequestCounts& operator+=(const RequestCounts& o);
};

struct PeriodStats {
  double start_s = 0.0;
  double length_s = 0.0;
  // Counts attributed to the period in which each request arrived.
  std::map<std::string, RequestCounts> models;
  // Time-averaged sum of allocated gpulet sizes over the period.
  double utilized_partition_sum = 0.0;
  double offered_rate = 0.0;  // total arrivals / period length
};

struct ReorgEvent {
  double decided_s = 0.0;
  double activated_s = 0.0;
  int utilized_before = 0;
  int utilized_after = 0;
  bool scale_up = false;
  bool schedulable = false;
};

struct SimulationReport {
  double period_s = 0.0;
  std::vector<PeriodStats> periods;
  std::map<std::string, RequestCounts> totals;
  std::map<std::string, double> max_latency_ms;
  std::vector<ReorgEvent> reorgs;

  RequestCounts Total() const;
  double ViolationRate() const { return Total().violation_rate(); }
};

// Plays `streams` against a fixed plan. Requests of models the plan does not
// serve are dropped.
SimulationReport SimulateStatic(const SchedulePlan& plan,
                                const ProfileSet& profiles,
                                const std::vector<RequestStream>& streams,
                                const SimConfig& config);

// Periodic rescheduling. `base` supplies models (with SLOs), GPUs, grid and
// mode; its rates seed the first plan and are then replaced by EWMA
// estimates of the observed rates.
SimulationReport SimulateLive(const WorkloadSpec& base,
                              const ProfileSet& profiles,
                              const InterferenceModel* interference,
                              const std::vector<RequestStream>& streams,
                              const SimConfig& config);

struct ThroughputResult {
  double multiplier = 0.0;      // largest passing rate multiplier
  double aggregate_rate = 0.0;  // multiplier * sum of base rates
  double step = 0.0;            // final search resolution, in req/s
};

// Binary search over a global multiplier on `base` rates. A multiplier
// passes when the plan is Schedulable and the simulated violation rate is at
// most `max_violation_rate`.
ThroughputResult MaxAchievableThroughput(
    const WorkloadSpec& base, const ProfileSet& profiles,
    const InterferenceModel* interference, const SimConfig& config,
    ArrivalProcess process = ArrivalProcess::kPoisson,
    double max_violation_rate = 0.01, int iterations = 14);

// `time_s,model,rate` rows, piecewise constant per model.
std::vector<RequestStream> LoadRateTrace(std::istream& in, uint64_t seed);
void WriteRateTrace(std::ostream& out, const std::vector<RequestStream>& streams);

// `period,model,throughput,violation_rate,utilized_partition_sum`, preceded
// by one `# ` line per entry of `header`.
void WriteReportCsv(std::ostream& out, const SimulationReport& report,
                    const std::vector<std::string>& header);

}  // namespace gpulet

#endif  // GPULET_SIM_H_
