#include "gpulet/experiments.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <ostream>
#include <thread>

#include "gpulet/errors.h"
#include "gpulet/synthetic.h"

namespace gpulet {

ProfileSet DefaultProfiles(uint64_t seed, const std::vector<int>& grid) {
  auto archetypes = DefaultArchetypes();
  auto batches = DefaultBatches();
  return GenerateSyntheticProfiles(archetypes, grid, batches, seed);
}

std::map<std::string, double> DefaultSlos() {
  std::map<std::string, double> out;
  for (const ModelArchetype& a : DefaultArchetypes()) out[a.name] = a.slo_ms;
  return out;
}

InterferenceModel DefaultPlantedInterference() {
  return InterferenceModel({0.05, 0.20, 0.05, 0.25, 0.90});
}

ScenarioSuite CanonicalSweep(const std::vector<std::string>& models,
                             const std::vector<double>& levels) {
  if (levels.empty()) throw ConfigError("sweep needs at least one rate level");
  ScenarioSuite suite{"canonical", {}};
  std::vector<size_t> digit(models.size(), 0);
  int id = 0;
  while (true) {
    Scenario s{id, {}};
    bool any = false;
    for (size_t i = 0; i < models.size(); ++i) {
      s.rates[models[i]] = levels[digit[i]];
      any = any || levels[digit[i]] > 0.0;
    }
    if (any) {
      suite.scenarios.push_back(std::move(s));
      ++id;
    }
    size_t i = models.size();
    while (i > 0 && ++digit[i - 1] == levels.size()) digit[--i] = 0;
    if (i == 0) break;
  }
  return suite;
}

std::vector<std::string> NamedSuiteNames() {
  return {"equal", "long-only", "short-skew"};
}

ScenarioSuite NamedSuite(const std::string& name) {
  std::map<std::string, double> rates;
  if (name == "equal") {
    rates = {{"le", 50}, {"goo", 50}, {"res", 50}, {"ssd", 50}, {"vgg", 50}};
  } else if (name == "long-only") {
    rates = {{"le", 0}, {"goo", 0}, {"res", 100}, {"ssd", 100}, {"vgg", 100}};
  } else if (name == "short-skew") {
    rates = {{"le", 100}, {"goo", 100}, {"res", 100}, {"ssd", 50}, {"vgg", 50}};
  } else {
    throw ConfigError("unknown suite '" + name +
                      "' (expected equal, long-only or short-skew)");
  }
  return {name, {{0, rates}}};
}

WorkloadSpec ScenarioWorkload(const Scenario& scenario,
                              const std::map<std::string, double>& slos,
                              int num_gpus, const std::vector<int>& grid,
                              SchedulerMode mode) {
  WorkloadSpec spec;
  spec.num_gpus = num_gpus;
  spec.grid = grid;
  spec.mode = mode;
  for (const auto& [name, rate] : scenario.rates) {
    if (rate <= 0.0) continue;
    auto it = slos.find(name);
    if (it == slos.end()) throw ConfigError("no SLO for model '" + name + "'");
    spec.models.push_back({name, it->second, rate});
  }
  return spec;
}

std::vector<SweepRow> SweepSchedulability(
    const ScenarioSuite& suite, const std::vector<SchedulerMode>& modes,
    const ProfileSet& profiles, const std::map<std::string, double>& slos,
    const InterferenceModel* interference, const SweepOptions& options) {
  const size_t jobs = suite.scenarios.size() * modes.size();
  std::vector<SweepRow> rows(jobs);
  std::atomic<size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};

  auto worker = [&] {
    while (true) {
      size_t j = next.fetch_add(1);
      if (j >= jobs || failed) return;
      const Scenario& sc = suite.scenarios[j / modes.size()];
      SchedulerMode mode = modes[j % modes.size()];
      SweepRow& row = rows[j];
      row.scenario_id = sc.id;
      row.mode = mode;
      try {
        WorkloadSpec spec =
            ScenarioWorkload(sc, slos, options.num_gpus, options.grid, mode);
        row.verdict =
            Schedule(spec, profiles, interference, options.ideal).verdict;
      } catch (const ResourceError&) {
        row.verdict.reset();
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
        return;
      }
    }
  };

  unsigned threads = options.threads > 0
                         ? static_cast<unsigned>(options.threads)
                         : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<size_t>(threads, std::max<size_t>(jobs, 1)));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return rows;
}

std::map<SchedulerMode, int> CountSchedulable(
    const std::vector<SweepRow>& rows) {
  std::map<SchedulerMode, int> out;
  for (const SweepRow& r : rows) {
    out[r.mode] += r.verdict == Verdict::kSchedulable ? 1 : 0;
  }
  return out;
}

void WriteSweepCsv(std::ostream& out, const std::vector<SweepRow>& rows,
                   const std::vector<std::string>& header) {
  for (const std::string& h : header) out << "# " << h << '\n';
  out << "scenario_id,mode,verdict\n";
  for (const SweepRow& r : rows) {
    out << r.scenario_id << ',' << ToString(r.mode) << ',';
    if (!r.verdict) {
      out << "BudgetExceeded";
    } else {
      out << (*r.verdict == Verdict::kSchedulable ? "Schedulable"
                                                  : "NotSchedulable");
    }
    out << '\n';
  }
  std::map<SchedulerMode, int> totals = CountSchedulable(rows);
  for (const auto& [mode, count] : totals) {
    out << "# total " << ToString(mode) << ' ' << count << '\n';
  }
}

double AppSlo(const std::map<std::string, int>& fanout,
              const ProfileSet& profiles) {
  double longest = 0.0;
  for (const auto& [name, mult] : fanout) {
    const LatencyProfile& p = profiles.At(name);
    if (!p.HasPartition(100)) {
      throw ConfigError("profile of '" + name + "' lacks partition 100");
    }
    int b = std::min(32, p.max_batch());
    longest = std::max(longest, LookupLatency(p, b, 100));
  }
  return 2.0 * longest;
}

AppScenario GameApp(const ProfileSet& profiles) {
  std::map<std::string, int> fanout = {{"le", 6}, {"res", 1}};
  return {"game", fanout, AppSlo(fanout, profiles)};
}

AppScenario TrafficApp(const ProfileSet& profiles) {
  std::map<std::string, int> fanout = {{"ssd", 1}, {"goo", 1}, {"vgg", 1}};
  return {"traffic", fanout, AppSlo(fanout, profiles)};
}

AppScenario AppByName(const std::string& name, const ProfileSet& profiles) {
  if (name == "game") return GameApp(profiles);
  if (name == "traffic") return TrafficApp(profiles);
  throw ConfigError("unknown app '" + name + "' (expected game or traffic)");
}

WorkloadSpec AppWorkload(const AppScenario& app, double rate,
                         const std::map<std::string, double>& slos,
                         int num_gpus, const std::vector<int>& grid,
                         SchedulerMode mode) {
  WorkloadSpec spec;
  spec.num_gpus = num_gpus;
  spec.grid = grid;
  spec.mode = mode;
  for (const auto& [name, mult] : app.fanout) {
    if (mult < 1) throw ConfigError("app fan-out must be at least 1");
    auto it = slos.find(name);
    if (it == slos.end()) throw ConfigError("no SLO for model '" + name + "'");
    spec.models.push_back({name, std::min(it->second, app.slo_ms), mult * rate});
  }
  return spec;
}

AppRun RunAppScenario(const AppScenario& app, double rate, SchedulerMode mode,
                      const ProfileSet& profiles,
                      const std::map<std::string, double>& slos,
                      const InterferenceModel* interference,
                      const SimConfig& config, int num_gpus,
                      const std::vector<int>& grid) {
  WorkloadSpec spec = AppWorkload(app, rate, slos, num_gpus, grid, mode);
  AppRun run;
  run.plan = Schedule(spec, profiles, interference);
  std::vector<RequestStream> streams;
  uint64_t seed = config.seed;
  for (const WorkloadModel& m : spec.models) {
    streams.push_back(ConstantStream(m.name, m.rate, ++seed));
  }
  run.report = SimulateStatic(run.plan, profiles, streams, config);
  return run;
}

std::vector<RequestStream> TwoWaveTrace(
    const std::map<std::string, double>& peak, double wave_s, double step_s,
    double low, uint64_t seed) {
  if (!(wave_s > 0.0 && step_s > 0.0)) {
    throw ConfigError("wave length and step must be positive");
  }
  std::vector<RequestStream> out;
  for (const auto& [name, top] : peak) {
    RequestStream s{name, {}, ++seed, ArrivalProcess::kPoisson};
    for (double t = 0.0; t < 2.0 * wave_s - 1e-9; t += step_s) {
      double mid = t + 0.5 * step_s;
      double w = std::sin(std::numbers::pi * mid / wave_s);
      s.trace.push_back({t, top * (low + (1.0 - low) * w * w)});
    }
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

std::vector<double> Ranks(const std::vector<double>& v) {
  std::vector<size_t> order(v.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (size_t i = 0; i < order.size();) {
    size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  return rank;
}

}  // namespace

double SpearmanCorrelation(const std::vector<double>& x,
                           const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw ConfigError("rank correlation needs two equally long series");
  }
  auto rx = Ranks(x);
  auto ry = Ranks(y);
  double n = static_cast<double>(x.size());
  double mx = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - mx);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - mx) * (ry[i] - mx);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace gpulet
