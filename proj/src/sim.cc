#include "gpulet/sim.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <istream>
#include <ostream>
#include <queue>
#include <random>
#include <sstream>

#include "csv_util.h"
#include "gpulet/errors.h"

namespace gpulet {
namespace {

// Latencies within this many ms past the SLO still count as on time; it only
// absorbs rounding in the seconds-based clock.
constexpr double kLateToleranceMs = 1e-6;

double Uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

void CheckTrace(const RequestStream& s) {
  for (size_t i = 0; i < s.trace.size(); ++i) {
    if (!(s.trace[i].rate >= 0.0) || !std::isfinite(s.trace[i].rate)) {
      throw ConfigError("stream '" + s.model + "' has an invalid rate");
    }
    if (i > 0 && !(s.trace[i].start_s > s.trace[i - 1].start_s)) {
      throw ConfigError("stream '" + s.model + "' segments are not sorted");
    }
  }
}

struct Request {
  double arrival_s = 0.0;
  int model = 0;
  int period = 0;
};

struct LaneState {
  int model = 0;
  int executor = 0;
  const LatencyProfile* profile = nullptr;
  int size = 100;
  int batch = 1;
  double duty_s = 0.0;
  double slo_ms = 0.0;
  double factor = 1.0;
  double weight = 0.0;  // routing weight, the lane's planned rate
  double drop_after_ms = 0.0;
  std::deque<Request> queue;
  bool window_open = false;
  uint64_t generation = 0;
  bool retired = false;
};

struct Batch {
  int lane = 0;
  std::vector<Request> requests;
  double exec_s = 0.0;
};

struct Executor {
  std::deque<Batch> queue;
  bool busy = false;
};

// Picks the lane that is furthest behind its planned share, count / weight
// (ties to the first lane). A lane then never receives its k-th request
// before k / weight into a periodic stream.
struct Router {
  std::vector<int> lanes;
  std::vector<double> weights;
  std::vector<double> counts;

  int Pick() {
    int best = -1;
    double best_due = 0.0;
    for (size_t i = 0; i < lanes.size(); ++i) {
      if (weights[i] <= 0.0) continue;
      double due = counts[i] / weights[i];
      if (best < 0 || due < best_due) {
        best = static_cast<int>(i);
        best_due = due;
      }
    }
    if (best < 0) return -1;
    counts[static_cast<size_t>(best)] += 1.0;
    return lanes[static_cast<size_t>(best)];
  }
};

enum class EventKind { kActivate = 0, kExecDone, kArrival, kTimer, kTick };

struct Event {
  double time = 0.0;
  EventKind kind = EventKind::kArrival;
  uint64_t seq = 0;
  int a = 0;
  uint64_t b = 0;
};

struct EventLater {
  bool operator()(const Event& x, const Event& y) const {
    if (x.time != y.time) return x.time > y.time;
    if (x.kind != y.kind) return x.kind > y.kind;
    return x.seq > y.seq;
  }
};

// Rescheduling policy of live mode.
struct LivePolicy {
  const WorkloadSpec* base = nullptr;
  const ProfileSet* profiles = nullptr;
  const InterferenceModel* interference = nullptr;
};

struct PlannedState {
  SchedulePlan plan;
  std::map<std::string, double> provisioned;  // rate the plan was sized for
};

class Simulation {
 public:
  Simulation(const ProfileSet& profiles,
             const std::vector<RequestStream>& streams,
             const SimConfig& config)
      : profiles_(profiles), streams_(streams), config_(config),
        rng_(config.seed) {
    config_.Validate();
    for (size_t i = 0; i < streams_.size(); ++i) {
      CheckTrace(streams_[i]);
      if (model_index_.count(streams_[i].model)) {
        throw ConfigError("duplicate stream for model '" + streams_[i].model +
                          "'");
      }
      model_index_[streams_[i].model] = static_cast<int>(i);
      arrivals_.push_back(GenerateArrivals(streams_[i], config_.duration_s));
    }
    num_periods_ = std::max(
        1, static_cast<int>(std::ceil(config_.duration_s / config_.period_s -
                                      1e-12)));
    report_.period_s = config_.period_s;
    report_.periods.resize(static_cast<size_t>(num_periods_));
    for (int k = 0; k < num_periods_; ++k) {
      PeriodStats& p = report_.periods[static_cast<size_t>(k)];
      p.start_s = k * config_.period_s;
      for (const RequestStream& s : streams_) p.models[s.model] = {};
    }
    for (const RequestStream& s : streams_) {
      report_.totals[s.model] = {};
      report_.max_latency_ms[s.model] = 0.0;
    }
    routers_.resize(streams_.size());
  }

  SimulationReport RunStatic(const SchedulePlan& plan) {
    Activate(plan, 0.0);
    Loop();
    return Finish();
  }

  SimulationReport RunLive(const LivePolicy& policy) {
    live_ = policy;
    for (const WorkloadModel& m : policy.base->models) {
      estimate_[m.name] = m.rate;
      ewma_[m.name] = m.rate;
    }
    for (const RequestStream& s : streams_) {
      if (!estimate_.count(s.model)) {
        throw ConfigError("stream model '" + s.model +
                          "' is missing from the workload");
      }
    }
    PlannedState initial = PlanFor(estimate_);
    provisioned_ = initial.provisioned;
    Activate(initial.plan, 0.0);
    for (int k = 1; k * config_.period_s <= config_.duration_s + 1e-9; ++k) {
      Push(k * config_.period_s, EventKind::kTick, k, 0);
    }
    Loop();
    return Finish();
  }

 private:
  void Push(double t, EventKind kind, int a, uint64_t b) {
    events_.push({t, kind, seq_++, a, b});
  }

  int PeriodOf(double t) const {
    int k = static_cast<int>(std::floor(t / config_.period_s));
    return std::clamp(k, 0, num_periods_ - 1);
  }

  RequestCounts& Counts(const Request& r) {
    const std::string& name = streams_[static_cast<size_t>(r.model)].model;
    return report_.periods[static_cast<size_t>(r.period)].models[name];
  }

  RequestCounts& Totals(const Request& r) {
    return report_.totals[streams_[static_cast<size_t>(r.model)].model];
  }

  void Drop(const Request& r) {
    ++Counts(r).dropped;
    ++Totals(r).dropped;
  }

  double FactorFor(const Gpulet& g, const Gpulet* sibling,
                   const LatencyProfile& self) const {
    if (!config_.factor || sibling == nullptr || !sibling->allocated()) {
      return 1.0;
    }
    double f = 1.0;
    for (const Lane& l : sibling->lanes) {
      f = std::max(f, config_.factor(self, g.size, profiles_.At(l.model),
                                     sibling->size));
    }
    return f;
  }

  void Activate(const SchedulePlan& plan, double now) {
    // Requests still waiting in retiring lanes move to the new plan.
    std::vector<Request> carried;
    for (LaneState& lane : lanes_) {
      if (lane.retired) continue;
      lane.retired = true;
      carried.insert(carried.end(), lane.queue.begin(), lane.queue.end());
      lane.queue.clear();
    }
    std::stable_sort(carried.begin(), carried.end(),
                     [](const Request& x, const Request& y) {
                       return x.arrival_s < y.arrival_s;
                     });

    for (Router& r : routers_) r = Router{};
    for (const Gpulet* g : plan.inventory.AllocGpulets()) {
      int exec = static_cast<int>(executors_.size());
      executors_.emplace_back();
      const Gpulet* sibling = plan.inventory.Sibling(g->id);
      for (const Lane& l : g->lanes) {
        auto it = model_index_.find(l.model);
        if (it == model_index_.end()) continue;  // no traffic for this lane
        LaneState s;
        s.model = it->second;
        s.executor = exec;
        s.profile = &profiles_.At(l.model);
        s.size = g->size;
        s.batch = std::max(1, l.batch);
        s.duty_s = l.duty_ms / 1000.0;
        s.slo_ms = l.slo_ms;
        s.factor = FactorFor(*g, sibling, *s.profile);
        s.weight = l.rate;
        slo_[it->second] = l.slo_ms;
        s.drop_after_ms = l.slo_ms - LookupLatency(*s.profile, 1, g->size);
        int id = static_cast<int>(lanes_.size());
        lanes_.push_back(std::move(s));
        Router& r = routers_[static_cast<size_t>(it->second)];
        r.lanes.push_back(id);
        r.weights.push_back(l.rate);
        r.counts.push_back(0.0);
      }
    }
    active_utilization_ = plan.inventory.UtilizedPartitionSum();
    active_inventory_ = plan.inventory;
    utilization_.emplace_back(now, active_utilization_);
    for (const Request& r : carried) Route(r, now);
  }

  void Route(const Request& r, double now) {
    int lane = routers_[static_cast<size_t>(r.model)].Pick();
    if (lane < 0) {
      Drop(r);
      return;
    }
    LaneState& s = lanes_[static_cast<size_t>(lane)];
    s.queue.push_back(r);
    if (!s.window_open) OpenWindow(lane, now);
    while (static_cast<int>(s.queue.size()) >= s.batch) Dispatch(lane, now);
  }

  void OpenWindow(int lane, double now) {
    LaneState& s = lanes_[static_cast<size_t>(lane)];
    s.window_open = true;
    ++s.generation;
    Push(now + s.duty_s, EventKind::kTimer, lane, s.generation);
  }

  // Moves up to one batch from the lane queue to its executor, dropping
  // requests that can no longer make their SLO.
  void Dispatch(int lane, double now) {
    LaneState& s = lanes_[static_cast<size_t>(lane)];
    Batch batch;
    batch.lane = lane;
    int take = std::min(s.batch, static_cast<int>(s.queue.size()));
    for (int i = 0; i < take; ++i) {
      batch.requests.push_back(s.queue.front());
      s.queue.pop_front();
    }
    s.window_open = false;
    ++s.generation;
    DropHopeless(batch, now);
    if (!batch.requests.empty()) {
      Executor& e = executors_[static_cast<size_t>(s.executor)];
      e.queue.push_back(std::move(batch));
      if (!e.busy) StartNext(s.executor, now);
    }
    if (!s.queue.empty()) OpenWindow(lane, now);
  }

  // The drop rule is applied again when a queued batch finally starts, since
  // waiting behind other batches counts against the SLO too.
  void DropHopeless(Batch& batch, double now) {
    const LaneState& s = lanes_[static_cast<size_t>(batch.lane)];
    if (config_.drop_hopeless) {
      std::erase_if(batch.requests, [&](const Request& r) {
        double wait_ms = (now - r.arrival_s) * 1000.0;
        if (wait_ms <= s.drop_after_ms + kLateToleranceMs) return false;
        Drop(r);
        return true;
      });
    }
    int n = static_cast<int>(batch.requests.size());
    if (n > 0) batch.exec_s = LookupLatency(*s.profile, n, s.size) * s.factor / 1000.0;
  }

  void StartNext(int exec, double now) {
    Executor& e = executors_[static_cast<size_t>(exec)];
    while (!e.queue.empty()) {
      DropHopeless(e.queue.front(), now);
      if (!e.queue.front().requests.empty()) break;
      e.queue.pop_front();
    }
    if (e.queue.empty()) {
      e.busy = false;
      return;
    }
    e.busy = true;
    Push(now + e.queue.front().exec_s, EventKind::kExecDone, exec, 0);
  }

  void Complete(int exec, double now) {
    Executor& e = executors_[static_cast<size_t>(exec)];
    Batch batch = std::move(e.queue.front());
    e.queue.pop_front();
    for (const Request& r : batch.requests) {
      const std::string& name = streams_[static_cast<size_t>(r.model)].model;
      double latency_ms = (now - r.arrival_s) * 1000.0;
      double slo = slo_.at(r.model);
      RequestCounts& c = Counts(r);
      RequestCounts& t = Totals(r);
      ++c.completed;
      ++t.completed;
      if (latency_ms > slo + kLateToleranceMs) {
        ++c.late;
        ++t.late;
      }
      double& worst = report_.max_latency_ms[name];
      worst = std::max(worst, latency_ms);
    }
    StartNext(exec, now);
  }

  // Plan for `rates` times headroom; when that is not schedulable, the
  // largest schedulable fraction of it, else the partial plan.
  PlannedState PlanFor(const std::map<std::string, double>& rates) {
    auto attempt = [&](double multiplier) {
      WorkloadSpec spec = *live_.base;
      for (WorkloadModel& m : spec.models) {
        m.rate = rates.at(m.name) * config_.headroom * multiplier;
      }
      PlannedState s{Schedule(spec, *live_.profiles, live_.interference), {}};
      for (const WorkloadModel& m : spec.models) s.provisioned[m.name] = m.rate;
      return s;
    };
    PlannedState full = attempt(1.0);
    if (full.plan.schedulable()) return full;
    std::optional<PlannedState> best;
    double lo = 0.0;
    double hi = 1.0;
    for (int i = 0; i < 12; ++i) {
      double mid = 0.5 * (lo + hi);
      PlannedState s = attempt(mid);
      if (s.plan.schedulable()) {
        lo = mid;
        best = std::move(s);
      } else {
        hi = mid;
      }
    }
    if (best) return *best;
    for (auto& [name, rate] : full.provisioned) {
      rate = full.plan.assigned_rate[name];
    }
    return full;
  }

  void Tick(double now) {
    double window = config_.period_s;
    std::map<std::string, double> observed;
    for (const RequestStream& s : streams_) {
      const auto& times = arrivals_[static_cast<size_t>(model_index_[s.model])];
      auto lo = std::lower_bound(times.begin(), times.end(), now - window);
      auto hi = std::lower_bound(times.begin(), times.end(), now);
      observed[s.model] = static_cast<double>(hi - lo) / window;
    }
    bool need_up = false;
    for (auto& [name, est] : estimate_) {
      double obs = observed.count(name) ? observed[name] : 0.0;
      double prev = last_observed_.count(name) ? last_observed_[name] : obs;
      ewma_[name] = EwmaRate(ewma_[name], obs, config_.ewma_alpha);
      // Rising load is extrapolated to the end of the next plan's lifetime,
      // measured from the middle of the observation window.
      double lookahead =
          (0.5 * window + config_.reorg_max_s + config_.period_s) / window;
      double trend = std::max(0.0, obs - prev) * lookahead;
      est = std::max(ewma_[name], obs + trend);
      last_observed_[name] = obs;
      if (est > provisioned_[name] + 1e-9) need_up = true;
    }
    if (pending_) return;

    PlannedState candidate = PlanFor(estimate_);
    int current = active_utilization_;
    int next = candidate.plan.inventory.UtilizedPartitionSum();
    bool scale_down = next <= current - config_.scale_down_margin;
    if (!need_up && !scale_down) return;
    if (need_up && candidate.plan.inventory == active_inventory_) return;

    double delay = config_.reorg_min_s +
                   (config_.reorg_max_s - config_.reorg_min_s) * Uniform01(rng_);
    ReorgEvent ev;
    ev.decided_s = now;
    ev.activated_s = now + delay;
    ev.utilized_before = current;
    ev.utilized_after = next;
    ev.scale_up = need_up;
    ev.schedulable = candidate.plan.schedulable();
    report_.reorgs.push_back(ev);
    pending_plan_ = std::move(candidate);
    pending_ = true;
    Push(now + delay, EventKind::kActivate, 0, 0);
  }

  void Loop() {
    for (size_t i = 0; i < arrivals_.size(); ++i) {
      if (!arrivals_[i].empty()) {
        Push(arrivals_[i][0], EventKind::kArrival, static_cast<int>(i), 0);
      }
    }
    while (!events_.empty()) {
      Event ev = events_.top();
      events_.pop();
      switch (ev.kind) {
        case EventKind::kArrival: {
          const auto& times = arrivals_[static_cast<size_t>(ev.a)];
          Request r{ev.time, ev.a, PeriodOf(ev.time)};
          ++Counts(r).arrivals;
          ++Totals(r).arrivals;
          Route(r, ev.time);
          if (ev.b + 1 < times.size()) {
            Push(times[ev.b + 1], EventKind::kArrival, ev.a, ev.b + 1);
          }
          break;
        }
        case EventKind::kTimer: {
          LaneState& s = lanes_[static_cast<size_t>(ev.a)];
          if (!s.retired && s.window_open && s.generation == ev.b) {
            Dispatch(ev.a, ev.time);
          }
          break;
        }
        case EventKind::kExecDone:
          Complete(ev.a, ev.time);
          break;
        case EventKind::kTick:
          Tick(ev.time);
          break;
        case EventKind::kActivate:
          provisioned_ = pending_plan_->provisioned;
          Activate(pending_plan_->plan, ev.time);
          pending_plan_.reset();
          pending_ = false;
          break;
      }
    }
  }

  SimulationReport Finish() {
    // Time-weighted utilization per period over [0, duration).
    for (int k = 0; k < num_periods_; ++k) {
      double start = k * config_.period_s;
      double end = std::min(config_.duration_s, start + config_.period_s);
      double area = 0.0;
      for (size_t i = 0; i < utilization_.size(); ++i) {
        double from = std::max(start, utilization_[i].first);
        double to = i + 1 < utilization_.size()
                        ? std::min(end, utilization_[i + 1].first)
                        : end;
        if (to > from) area += (to - from) * utilization_[i].second;
      }
      PeriodStats& p = report_.periods[static_cast<size_t>(k)];
      double len = end - start;
      p.length_s = len;
      p.utilized_partition_sum = len > 0.0 ? area / len : 0.0;
      uint64_t total = 0;
      for (const auto& [name, c] : p.models) total += c.arrivals;
      p.offered_rate = len > 0.0 ? static_cast<double>(total) / len : 0.0;
    }
    return std::move(report_);
  }

  const ProfileSet& profiles_;
  const std::vector<RequestStream>& streams_;
  SimConfig config_;
  std::mt19937_64 rng_;
  std::map<std::string, int> model_index_;
  std::vector<std::vector<double>> arrivals_;
  int num_periods_ = 1;
  SimulationReport report_;

  std::priority_queue<Event, std::vector<Event>, EventLater> events_;
  uint64_t seq_ = 0;
  std::vector<LaneState> lanes_;
  std::vector<Executor> executors_;
  std::vector<Router> routers_;
  std::map<int, double> slo_;
  std::vector<std::pair<double, int>> utilization_;

  LivePolicy live_;
  std::map<std::string, double> estimate_;
  std::map<std::string, double> ewma_;
  std::map<std::string, double> last_observed_;
  std::map<std::string, double> provisioned_;
  bool pending_ = false;
  std::optional<PlannedState> pending_plan_;
  int active_utilization_ = 0;
  GpuletInventory active_inventory_;
};

}  // namespace

double RequestStream::RateAt(double t) const {
  double rate = 0.0;
  for (const RateSegment& s : trace) {
    if (s.start_s > t) break;
    rate = s.rate;
  }
  return rate;
}

RequestStream ConstantStream(std::string model, double rate, uint64_t seed,
                             ArrivalProcess process) {
  return {std::move(model), {{0.0, rate}}, seed, process};
}

std::vector<double> GenerateArrivals(const RequestStream& stream,
                                     double duration_s) {
  CheckTrace(stream);
  std::vector<double> out;
  std::mt19937_64 rng(stream.seed);
  double integrated = 0.0;  // expected arrivals before the segment
  uint64_t next = 0;        // index of the next deterministic arrival
  for (size_t i = 0; i < stream.trace.size(); ++i) {
    double start = std::max(0.0, stream.trace[i].start_s);
    double end = i + 1 < stream.trace.size()
                     ? std::min(duration_s, stream.trace[i + 1].start_s)
                     : duration_s;
    double rate = stream.trace[i].rate;
    if (end <= start || rate <= 0.0) continue;
    if (stream.process == ArrivalProcess::kPoisson) {
      double t = start;
      while (true) {
        t += -std::log(1.0 - Uniform01(rng)) / rate;
        if (t >= end) break;
        out.push_back(t);
      }
    } else {
      next = std::max<uint64_t>(
          next, static_cast<uint64_t>(std::ceil(integrated - 1e-9)));
      while (true) {
        double t = start + (static_cast<double>(next) - integrated) / rate;
        if (t >= end) break;
        out.push_back(t);
        ++next;
      }
      integrated += rate * (end - start);
    }
  }
  return out;
}

double EwmaRate(double previous, double observed, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw ConfigError("ewma alpha must be in (0, 1]");
  }
  return alpha * observed + (1.0 - alpha) * previous;
}

void SimConfig::Validate() const {
  if (!(duration_s > 0.0)) throw ConfigError("duration must be positive");
  if (!(period_s > 0.0)) throw ConfigError("period must be positive");
  if (!(reorg_min_s >= 0.0 && reorg_max_s >= reorg_min_s)) {
    throw ConfigError("reorganization latency range is invalid");
  }
  if (!(period_s > reorg_max_s)) {
    throw ConfigError("period must exceed the maximum reorganization latency");
  }
  if (!(ewma_alpha > 0.0 && ewma_alpha <= 1.0)) {
    throw ConfigError("ewma alpha must be in (0, 1]");
  }
  if (!(headroom >= 1.0)) throw ConfigError("headroom must be at least 1");
  if (!(scale_down_margin >= 0.0)) {
    throw ConfigError("scale-down margin must be non-negative");
  }
}

RequestCounts& RequestCounts::operator+=(const RequestCounts& o) {
  arrivals += o.arrivals;
  completed += o.completed;
  late += o.late;
  dropped += o.dropped;
  return *this;
}

RequestCounts SimulationReport::Total() const {
  RequestCounts sum;
  for (const auto& [name, c] : totals) sum += c;
  return sum;
}

SimulationReport SimulateStatic(const SchedulePlan& plan,
                                const ProfileSet& profiles,
                                const std::vector<RequestStream>& streams,
                                const SimConfig& config) {
  return Simulation(profiles, streams, config).RunStatic(plan);
}

SimulationReport SimulateLive(const WorkloadSpec& base,
                              const ProfileSet& profiles,
                              const InterferenceModel* interference,
                              const std::vector<RequestStream>& streams,
                              const SimConfig& config) {
  ValidateWorkload(base, profiles);
  return Simulation(profiles, streams, config)
      .RunLive({&base, &profiles, interference});
}

ThroughputResult MaxAchievableThroughput(const WorkloadSpec& base,
                                         const ProfileSet& profiles,
                                         const InterferenceModel* interference,
                                         const SimConfig& config,
                                         ArrivalProcess process,
                                         double max_violation_rate,
                                         int iterations) {
  double total = 0.0;
  for (const WorkloadModel& m : base.models) total += m.rate;
  ThroughputResult result;
  if (total <= 0.0) return result;

  auto passes = [&](double multiplier) {
    WorkloadSpec spec = base;
    std::vector<RequestStream> streams;
    uint64_t seed = config.seed;
    for (WorkloadModel& m : spec.models) {
      m.rate *= multiplier;
      streams.push_back(ConstantStream(m.name, m.rate, ++seed, process));
    }
    SchedulePlan plan = Schedule(spec, profiles, interference);
    if (!plan.schedulable()) return false;
    return SimulateStatic(plan, profiles, streams, config).ViolationRate() <=
           max_violation_rate;
  };

  // Grow an upper bound until the scheduler refuses, then bisect.
  double lo = 0.0;
  double hi = 1.0;
  while (passes(hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e6) break;
  }
  for (int i = 0; i < iterations; ++i) {
    double mid = 0.5 * (lo + hi);
    if (passes(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  result.multiplier = lo;
  result.aggregate_rate = lo * total;
  result.step = (hi - lo) * total;
  return result;
}

std::vector<RequestStream> LoadRateTrace(std::istream& in, uint64_t seed) {
  const std::string source = "rate trace";
  std::vector<RequestStream> out;
  std::map<std::string, size_t> index;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::IsBlankOrComment(line)) continue;
    auto f = csv::SplitRow(line);
    if (!header_seen) {
      if (f != std::vector<std::string>{"time_s", "model", "rate"}) {
        throw ParseError(csv::Where(source, line_no) +
                         ": missing header 'time_s,model,rate'");
      }
      header_seen = true;
      continue;
    }
    if (f.size() != 3) {
      throw ParseError(csv::Where(source, line_no) + ": expected 3 fields, got " +
                       std::to_string(f.size()));
    }
    double t = csv::ParseDouble(f[0], source, line_no);
    double rate = csv::ParseDouble(f[2], source, line_no);
    if (rate < 0.0) {
      throw DataError(csv::Where(source, line_no) + ": negative rate");
    }
    auto [it, inserted] = index.emplace(f[1], out.size());
    if (inserted) {
      out.push_back({f[1], {}, seed + out.size() + 1, ArrivalProcess::kPoisson});
    }
    RequestStream& s = out[it->second];
    if (!s.trace.empty() && !(t > s.trace.back().start_s)) {
      throw DataError(csv::Where(source, line_no) + ": times of model '" +
                      f[1] + "' are not increasing");
    }
    s.trace.push_back({t, rate});
  }
  if (!header_seen) throw ParseError(source + ": empty input");
  return out;
}

void WriteRateTrace(std::ostream& out,
                    const std::vector<RequestStream>& streams) {
  out << "time_s,model,rate\n";
  out << std::setprecision(17);
  for (const RequestStream& s : streams) {
    for (const RateSegment& seg : s.trace) {
      out << seg.start_s << ',' << s.model << ',' << seg.rate << '\n';
    }
  }
}

void WriteReportCsv(std::ostream& out, const SimulationReport& report,
                    const std::vector<std::string>& header) {
  for (const std::string& h : header) out << "# " << h << '\n';
  out << "period,model,throughput,violation_rate,utilized_partition_sum\n";
  std::ostringstream row;
  for (size_t k = 0; k < report.periods.size(); ++k) {
    const PeriodStats& p = report.periods[k];
    for (const auto& [name, c] : p.models) {
      row.str("");
      row << std::setprecision(10) << k << ',' << name << ','
          << (p.length_s > 0.0 ? static_cast<double>(c.completed) / p.length_s : 0.0) << ','
          << c.violation_rate() << ',' << p.utilized_partition_sum << '\n';
      out << row.str();
    }
  }
}

}  // namespace gpulet
