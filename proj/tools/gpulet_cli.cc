// Experiment driver. Every subcommand writes CSV (or JSON for `schedule`)
// preceded by `# key=value` lines that echo the effective configuration.

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gpulet/errors.h"
#include "gpulet/experiments.h"
#include "gpulet/interference.h"
#include "gpulet/synthetic.h"

namespace gpulet {
namespace {

struct CommonOptions {
  std::string profiles;  // empty: synthetic default models
  int gpus = 4;
  std::string mode;      // empty: subcommand default
  std::string grid = "20,40,50,60,80,100";
  uint64_t seed = 1;
  std::string out = "-";
  std::vector<std::string> slo_overrides;  // name=ms
  std::string coeffs;                      // five comma-separated values
  bool no_interference = false;
};

std::vector<std::string> SplitList(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

double ParseNumber(const std::string& text, const std::string& what) {
  try {
    size_t used = 0;
    double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad number '" + text + "' in " + what);
  }
}

std::vector<int> ParseGrid(const std::string& text) {
  std::vector<int> grid;
  for (const std::string& s : SplitList(text)) {
    double v = ParseNumber(s, "--grid");
    if (v != std::floor(v)) throw ConfigError("--grid entries must be integers");
    grid.push_back(static_cast<int>(v));
  }
  if (grid.empty()) throw ConfigError("--grid is empty");
  std::sort(grid.begin(), grid.end());
  return grid;
}

std::map<std::string, double> ParsePairs(const std::vector<std::string>& items,
                                         const std::string& what) {
  std::map<std::string, double> out;
  for (const std::string& item : items) {
    auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError(what + " expects name=value, got '" + item + "'");
    }
    out[item.substr(0, eq)] = ParseNumber(item.substr(eq + 1), what);
  }
  return out;
}

std::string JoinInts(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

// Resolved form of CommonOptions shared by all subcommands.
class Context {
 public:
  Context(const CommonOptions& o, const std::string& command) : opts_(o) {
    grid_ = ParseGrid(o.grid);
    profiles_ = o.profiles.empty() ? DefaultProfiles(o.seed, grid_)
                                   : LoadProfilesFile(o.profiles);
    slos_ = DefaultSlos();
    for (const auto& [name, ms] : ParsePairs(o.slo_overrides, "--slo")) {
      slos_[name] = ms;
    }
    interference_ = DefaultPlantedInterference();
    if (!o.coeffs.empty()) {
      auto parts = SplitList(o.coeffs);
      if (parts.size() != 5) throw ConfigError("--coeffs needs five values");
      std::array<double, 5> c;
      for (size_t i = 0; i < 5; ++i) c[i] = ParseNumber(parts[i], "--coeffs");
      interference_ = InterferenceModel(c);
    }
    header_.push_back("command=" + command);
    header_.push_back("profiles=" + (o.profiles.empty()
                                         ? "synthetic(seed=" + std::to_string(o.seed) + ")"
                                         : o.profiles));
    header_.push_back("gpus=" + std::to_string(o.gpus));
    header_.push_back("grid=" + JoinInts(grid_));
    header_.push_back("seed=" + std::to_string(o.seed));
    std::ostringstream c;
    for (size_t i = 0; i < 5; ++i) {
      c << (i ? "," : "") << interference_.coeffs()[i];
    }
    header_.push_back("interference=" + c.str());
    header_.push_back(std::string("simulated_interference=") +
                      (o.no_interference ? "off" : "on"));
    std::string slos;
    for (const auto& [name, ms] : slos_) {
      if (profiles_.Find(name)) slos += (slos.empty() ? "" : ",") + name + "=" + FormatDouble(ms);
    }
    header_.push_back("slo_ms=" + slos);
  }

  static std::string FormatDouble(double v) {
    std::ostringstream s;
    s << v;
    return s.str();
  }

  std::ostream& out() {
    if (opts_.out == "-") return std::cout;
    if (!file_) {
      file_ = std::make_unique<std::ofstream>(opts_.out);
      if (!*file_) throw ConfigError("cannot open output file " + opts_.out);
    }
    return *file_;
  }

  SchedulerMode Mode(SchedulerMode fallback) const {
    return opts_.mode.empty() ? fallback : ParseSchedulerMode(opts_.mode);
  }

  std::vector<SchedulerMode> Modes(std::vector<SchedulerMode> fallback) const {
    if (opts_.mode.empty()) return fallback;
    std::vector<SchedulerMode> modes;
    for (const std::string& m : SplitList(opts_.mode)) {
      modes.push_back(ParseSchedulerMode(m));
    }
    return modes;
  }

  double Slo(const std::string& model) const {
    auto it = slos_.find(model);
    if (it == slos_.end()) {
      throw ConfigError("no SLO for model '" + model + "'; pass --slo " + model + "=MS");
    }
    return it->second;
  }

  // Slowdown applied by the simulator.
  FactorFn SimFactor() const {
    return opts_.no_interference ? FactorFn() : PredictedFactor(interference_);
  }

  void Note(const std::string& line) { header_.push_back(line); }
  void WriteHeader() {
    for (const std::string& h : header_) out() << "# " << h << '\n';
  }

  const CommonOptions& opts() const { return opts_; }
  const std::vector<int>& grid() const { return grid_; }
  const ProfileSet& profiles() const { return profiles_; }
  const std::map<std::string, double>& slos() const { return slos_; }
  const InterferenceModel& interference() const { return interference_; }
  const std::vector<std::string>& header() const { return header_; }

 private:
  CommonOptions opts_;
  std::vector<int> grid_;
  ProfileSet profiles_;
  std::map<std::string, double> slos_;
  InterferenceModel interference_;
  std::vector<std::string> header_;
  std::unique_ptr<std::ofstream> file_;
};

std::string ModeList(const std::vector<SchedulerMode>& modes) {
  std::string s;
  for (SchedulerMode m : modes) s += (s.empty() ? "" : ",") + ToString(m);
  return s;
}

void AddCommon(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--profiles", o.profiles, "Profile CSV (default: synthetic models)");
  cmd->add_option("--gpus", o.gpus, "Number of GPUs")->check(CLI::PositiveNumber);
  cmd->add_option("--mode", o.mode, "gpulet, gpulet+int, sbp or ideal");
  cmd->add_option("--grid", o.grid, "Partition sizes in percent, comma separated");
  cmd->add_option("--seed", o.seed, "Seed for synthetic data and arrivals");
  cmd->add_option("--out", o.out, "Output file, '-' for stdout");
  cmd->add_option("--slo", o.slo_overrides, "SLO override name=ms (repeatable)");
  cmd->add_option("--coeffs", o.coeffs, "Interference coefficients c1..c5");
  cmd->add_flag("--no-interference", o.no_interference,
                "Simulate without co-location slowdown");
}

// --- sweep / compare-ideal ---------------------------------------------------

struct SweepArgs {
  std::string suite = "canonical";
  std::string models = "le,goo,res,ssd,vgg";
  std::string levels = "0,200,400,600";
  int threads = 0;
  uint64_t max_states = IdealOptions{}.max_states;
  uint64_t max_fine_states = IdealOptions{}.max_fine_states;
};

void RunSweep(Context& ctx, const SweepArgs& a,
              const std::vector<SchedulerMode>& modes) {
  ScenarioSuite suite;
  if (a.suite == "canonical") {
    std::vector<double> levels;
    for (const std::string& s : SplitList(a.levels)) {
      levels.push_back(ParseNumber(s, "--levels"));
    }
    suite = CanonicalSweep(SplitList(a.models), levels);
    ctx.Note("models=" + a.models);
    ctx.Note("levels=" + a.levels);
  } else {
    suite = NamedSuite(a.suite);
  }
  ctx.Note("suite=" + a.suite + " (" + std::to_string(suite.scenarios.size()) + " scenarios)");
  ctx.Note("modes=" + ModeList(modes));
  SweepOptions options;
  options.num_gpus = ctx.opts().gpus;
  options.grid = ctx.grid();
  options.threads = a.threads;
  options.ideal.max_states = a.max_states;
  options.ideal.max_fine_states = a.max_fine_states;
  ctx.Note("ideal_max_states=" + std::to_string(a.max_states) + "," +
           std::to_string(a.max_fine_states));
  auto rows = SweepSchedulability(suite, modes, ctx.profiles(), ctx.slos(),
                                  &ctx.interference(), options);
  WriteSweepCsv(ctx.out(), rows, ctx.header());
}

void AddSweepOptions(CLI::App* cmd, SweepArgs& a) {
  cmd->add_option("--suite", a.suite, "canonical, equal, long-only or short-skew");
  cmd->add_option("--models", a.models, "Models of the canonical sweep");
  cmd->add_option("--levels", a.levels, "Per-model rate levels of the canonical sweep");
  cmd->add_option("--threads", a.threads, "Worker threads (0: hardware)");
  cmd->add_option("--max-states", a.max_states, "Ideal search budget");
  cmd->add_option("--max-fine-states", a.max_fine_states, "Ideal second-pass budget");
}

// --- workloads -------------------------------------------------------------

WorkloadSpec ResolveWorkload(Context& ctx, const std::string& path,
                             const std::vector<std::string>& rates,
                             SchedulerMode fallback) {
  WorkloadSpec spec;
  if (!path.empty()) {
    spec = LoadWorkloadFile(path);
    ctx.Note("workload=" + path);
    if (!ctx.opts().mode.empty()) spec.mode = ctx.Mode(fallback);
  } else {
    if (rates.empty()) throw ConfigError("give --workload or --rates");
    for (const auto& [name, r] : ParsePairs(rates, "--rates")) {
      spec.models.push_back({name, ctx.Slo(name), r});
    }
    spec.num_gpus = ctx.opts().gpus;
    spec.grid = ctx.grid();
    spec.mode = ctx.Mode(fallback);
  }
  std::string desc;
  for (const WorkloadModel& m : spec.models) {
    desc += (desc.empty() ? "" : ",") + m.name + "=" + Context::FormatDouble(m.rate);
  }
  ctx.Note("rates=" + desc);
  ctx.Note("mode=" + ToString(spec.mode));
  return spec;
}

ArrivalProcess ParseArrivals(const std::string& s) {
  if (s == "poisson") return ArrivalProcess::kPoisson;
  if (s == "deterministic") return ArrivalProcess::kDeterministic;
  throw ConfigError("--arrivals must be poisson or deterministic");
}

SimConfig BaseSimConfig(const Context& ctx, double duration) {
  SimConfig c;
  c.duration_s = duration;
  c.factor = ctx.SimFactor();
  c.seed = ctx.opts().seed;
  c.Validate();
  return c;
}

}  // namespace
}  // namespace gpulet

int main(int argc, char** argv) {
  using namespace gpulet;
  CLI::App app{"gpu-let scheduling experiments"};
  app.require_subcommand(1);
  CommonOptions common;

  auto* gen = app.add_subcommand("gen-profiles", "Write synthetic profiles as CSV");
  AddCommon(gen, common);

  SweepArgs sweep_args;
  auto* sweep = app.add_subcommand("sweep", "Schedulability over a scenario suite");
  AddCommon(sweep, common);
  AddSweepOptions(sweep, sweep_args);

  auto* compare = app.add_subcommand("compare-ideal", "gpulet+int against the ideal scheduler");
  AddCommon(compare, common);
  AddSweepOptions(compare, sweep_args);

  std::string workload;
  std::vector<std::string> rates;
  auto* schedule = app.add_subcommand("schedule", "Print the plan for one workload as JSON");
  AddCommon(schedule, common);
  schedule->add_option("--workload", workload, "Workload JSON");
  schedule->add_option("--rates", rates, "name=req/s (repeatable)");

  std::string arrivals = "poisson";
  double duration = 30.0, max_violation = 0.01;
  int iterations = 14;
  auto* thr = app.add_subcommand("throughput", "Maximum rate multiplier with at most 1% violations");
  AddCommon(thr, common);
  thr->add_option("--workload", workload, "Workload JSON");
  thr->add_option("--rates", rates, "name=req/s (repeatable)");
  thr->add_option("--arrivals", arrivals, "poisson or deterministic");
  thr->add_option("--duration", duration, "Simulated seconds per probe");
  thr->add_option("--max-violation", max_violation, "Violation threshold");
  thr->add_option("--iterations", iterations, "Bisection steps");

  std::string app_name = "game";
  double app_rate = 100.0;
  bool search = false;
  auto* appc = app.add_subcommand("app", "Simulate the game or traffic application");
  AddCommon(appc, common);
  appc->add_option("--app", app_name, "game or traffic");
  appc->add_option("--rate", app_rate, "Application requests per second");
  appc->add_option("--duration", duration, "Simulated seconds");
  appc->add_option("--arrivals", arrivals, "poisson or deterministic");
  appc->add_flag("--search", search, "Report the maximum application rate instead");

  std::string trace;
  double wave = 900.0, step = 10.0, peak_fraction = 0.6, low = 0.1;
  double trace_duration = 0.0;
  auto* fluct = app.add_subcommand("fluctuate", "Periodic rescheduling under a changing load");
  AddCommon(fluct, common);
  fluct->add_option("--trace", trace, "Rate trace CSV time_s,model,rate");
  fluct->add_option("--wave", wave, "Synthetic two-wave period in seconds");
  fluct->add_option("--step", step, "Synthetic trace step in seconds");
  fluct->add_option("--peak-fraction", peak_fraction,
                    "Synthetic peak as a fraction of one GPU's capacity");
  fluct->add_option("--low", low, "Synthetic trough as a fraction of the peak");
  fluct->add_option("--duration", trace_duration,
                    "Simulated seconds for --trace (default: last segment start)");

  std::string samples_path;
  size_t count = 2500;
  double noise = 0.05, train = 0.7;
  auto* fit = app.add_subcommand("fit-interference", "Fit the interference model and report validation errors");
  AddCommon(fit, common);
  fit->add_option("--samples", samples_path, "Co-run CSV (default: synthetic)");
  fit->add_option("--count", count, "Synthetic sample count");
  fit->add_option("--noise", noise, "Synthetic relative noise");
  fit->add_option("--train", train, "Training fraction");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) {
      Context ctx(common, "gen-profiles");
      ctx.WriteHeader();
      WriteProfiles(ctx.out(), ctx.profiles());
    } else if (*sweep) {
      Context ctx(common, "sweep");
      RunSweep(ctx, sweep_args,
               ctx.Modes({SchedulerMode::kSbp, SchedulerMode::kGpulet,
                          SchedulerMode::kGpuletInt}));
    } else if (*compare) {
      Context ctx(common, "compare-ideal");
      RunSweep(ctx, sweep_args,
               {SchedulerMode::kGpuletInt, SchedulerMode::kIdeal});
    } else if (*schedule) {
      Context ctx(common, "schedule");
      WorkloadSpec spec = ResolveWorkload(ctx, workload, rates, SchedulerMode::kGpuletInt);
      SchedulePlan plan = Schedule(spec, ctx.profiles(), &ctx.interference());
      ctx.WriteHeader();
      ctx.out() << DumpPlan(plan).dump(2) << '\n';
    } else if (*thr) {
      Context ctx(common, "throughput");
      WorkloadSpec spec = ResolveWorkload(ctx, workload, rates, SchedulerMode::kGpuletInt);
      ctx.Note("arrivals=" + arrivals);
      ctx.Note("duration_s=" + Context::FormatDouble(duration));
      ctx.Note("max_violation=" + Context::FormatDouble(max_violation));
      ThroughputResult r = MaxAchievableThroughput(
          spec, ctx.profiles(), &ctx.interference(),
          BaseSimConfig(ctx, duration), ParseArrivals(arrivals), max_violation,
          iterations);
      ctx.WriteHeader();
      ctx.out() << "mode,multiplier,aggregate_rate,step\n"
                << ToString(spec.mode) << ',' << r.multiplier << ','
                << r.aggregate_rate << ',' << r.step << '\n';
    } else if (*appc) {
      Context ctx(common, "app");
      AppScenario scenario = AppByName(app_name, ctx.profiles());
      SchedulerMode mode = ctx.Mode(SchedulerMode::kGpuletInt);
      ctx.Note("app=" + scenario.name);
      ctx.Note("app_slo_ms=" + Context::FormatDouble(scenario.slo_ms));
      ctx.Note("mode=" + ToString(mode));
      ctx.Note("arrivals=" + arrivals);
      ctx.Note("duration_s=" + Context::FormatDouble(duration));
      SimConfig config = BaseSimConfig(ctx, duration);
      if (search) {
        WorkloadSpec base = AppWorkload(scenario, 1.0, ctx.slos(), common.gpus,
                                        ctx.grid(), mode);
        ThroughputResult r = MaxAchievableThroughput(
            base, ctx.profiles(), &ctx.interference(), config,
            ParseArrivals(arrivals));
        ctx.WriteHeader();
        ctx.out() << "app,mode,app_rate,aggregate_rate\n"
                  << scenario.name << ',' << ToString(mode) << ','
                  << r.multiplier << ',' << r.aggregate_rate << '\n';
      } else {
        ctx.Note("rate=" + Context::FormatDouble(app_rate));
        if (ParseArrivals(arrivals) != ArrivalProcess::kPoisson) {
          throw ConfigError("app simulation uses Poisson arrivals; use --search for deterministic probes");
        }
        AppRun run = RunAppScenario(scenario, app_rate, mode, ctx.profiles(),
                                    ctx.slos(), &ctx.interference(), config,
                                    common.gpus, ctx.grid());
        ctx.Note(std::string("verdict=") +
                 (run.plan.schedulable() ? "Schedulable" : "NotSchedulable"));
        WriteReportCsv(ctx.out(), run.report, ctx.header());
      }
    } else if (*fluct) {
      Context ctx(common, "fluctuate");
      std::vector<RequestStream> streams;
      std::map<std::string, double> first_rate;
      if (!trace.empty()) {
        std::ifstream in(trace);
        if (!in) throw ConfigError("cannot open trace " + trace);
        streams = LoadRateTrace(in, common.seed);
        ctx.Note("trace=" + trace);
        double end = 0.0;
        for (const RequestStream& s : streams) {
          first_rate[s.model] = s.RateAt(0.0);
          end = std::max(end, s.trace.back().start_s);
        }
        duration = trace_duration > 0.0 ? trace_duration : end;
      } else {
        std::map<std::string, double> peak;
        for (const auto& [name, p] : ctx.profiles()) {
          peak[name] = peak_fraction *
                       ComputeCapacityCurve(p, ctx.Slo(name)).max_rate.back();
        }
        streams = TwoWaveTrace(peak, wave, step, low, common.seed);
        for (const auto& [name, r] : peak) first_rate[name] = low * r;
        duration = 2.0 * wave;
        ctx.Note("trace=two-wave(wave_s=" + Context::FormatDouble(wave) +
                 ",step_s=" + Context::FormatDouble(step) +
                 ",peak_fraction=" + Context::FormatDouble(peak_fraction) +
                 ",low=" + Context::FormatDouble(low) + ")");
      }
      WorkloadSpec base;
      base.num_gpus = common.gpus;
      base.grid = ctx.grid();
      base.mode = ctx.Mode(SchedulerMode::kGpulet);
      for (const auto& [name, r] : first_rate) {
        base.models.push_back({name, ctx.Slo(name), r});
      }
      ctx.Note("mode=" + ToString(base.mode));
      ctx.Note("duration_s=" + Context::FormatDouble(duration));
      SimulationReport report =
          SimulateLive(base, ctx.profiles(), &ctx.interference(), streams,
                       BaseSimConfig(ctx, duration));
      ctx.Note("total_violation_rate=" + Context::FormatDouble(report.ViolationRate()));
      ctx.Note("reorganizations=" + std::to_string(report.reorgs.size()));
      WriteReportCsv(ctx.out(), report, ctx.header());
    } else if (*fit) {
      Context ctx(common, "fit-interference");
      std::vector<CoRunSample> samples;
      if (!samples_path.empty()) {
        std::ifstream in(samples_path);
        if (!in) throw ConfigError("cannot open samples " + samples_path);
        samples = LoadCoRunSamples(in);
        ctx.Note("samples=" + samples_path);
      } else {
        samples = GenerateCoRunSamples(ctx.interference(), count, noise, common.seed);
        ctx.Note("samples=synthetic(count=" + std::to_string(count) +
                 ",noise=" + Context::FormatDouble(noise) + ")");
      }
      ctx.Note("train_fraction=" + Context::FormatDouble(train));
      FitResult r = FitInterference(samples, train, common.seed);
      std::ostringstream c;
      for (size_t i = 0; i < 5; ++i) c << (i ? "," : "") << r.model.coeffs()[i];
      ctx.Note("fitted=" + c.str());
      ctx.WriteHeader();
      ctx.out() << "percentile,relative_error\n";
      for (int q = 1; q <= 100; ++q) {
        ctx.out() << q << ',' << r.ErrorPercentile(q / 100.0) << '\n';
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
