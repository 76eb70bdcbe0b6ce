#include "gpulet/scheduler.h"

#include <algorithm>
#include <fstream>
#include <set>

#include "gpulet/errors.h"

namespace gpulet {

std::string ToString(SchedulerMode mode) {
  switch (mode) {
    case SchedulerMode::kGpulet:
      return "gpulet";
    case SchedulerMode::kGpuletInt:
      return "gpulet+int";
    case SchedulerMode::kSbp:
      return "sbp";
    case SchedulerMode::kIdeal:
      return "ideal";
  }
  return "unknown";
}

SchedulerMode ParseSchedulerMode(const std::string& text) {
  for (SchedulerMode m : {SchedulerMode::kGpulet, SchedulerMode::kGpuletInt,
                          SchedulerMode::kSbp, SchedulerMode::kIdeal}) {
    if (ToString(m) == text) return m;
  }
  throw ConfigError("unknown scheduler mode '" + text +
                    "' (expected gpulet, gpulet+int, sbp or ideal)");
}

void ValidateWorkload(const WorkloadSpec& spec, const ProfileSet& profiles) {
  if (spec.num_gpus < 1) throw ConfigError("num_gpus must be at least 1");
  if (spec.grid.empty()) throw ConfigError("partition grid is empty");
  std::set<int> grid(spec.grid.begin(), spec.grid.end());
  if (grid.size() != spec.grid.size()) {
    throw ConfigError("partition grid has duplicate entries");
  }
  if (!grid.count(100)) throw ConfigError("partition grid must contain 100");
  for (int p : grid) {
    if (p <= 0 || p > 100) {
      throw ConfigError("partition " + std::to_string(p) + " outside (0, 100]");
    }
    if (p < 100 && !grid.count(100 - p)) {
      throw ConfigError("partition grid is not closed under 100 - p: has " +
                        std::to_string(p) + " but not " +
                        std::to_string(100 - p));
    }
  }
  std::set<std::string> names;
  for (const WorkloadModel& m : spec.models) {
    if (!names.insert(m.name).second) {
      throw ConfigError("duplicate model '" + m.name + "' in workload");
    }
    if (!(m.slo_ms > 0.0)) {
      throw ConfigError("model '" + m.name + "' has non-positive SLO");
    }
    if (!(m.rate >= 0.0)) {
      throw ConfigError("model '" + m.name + "' has negative rate");
    }
    const LatencyProfile& prof = profiles.At(m.name);
    for (int p : grid) {
      if (!prof.HasPartition(p)) {
        throw ConfigError("profile of '" + m.name + "' lacks partition " +
                          std::to_string(p));
      }
    }
  }
}

SchedulePlan Schedule(const WorkloadSpec& spec, const ProfileSet& profiles,
                      const InterferenceModel* interference,
                      const IdealOptions& ideal_options) {
  switch (spec.mode) {
    case SchedulerMode::kGpulet:
      return ElasticPartitioning(spec, profiles, nullptr);
    case SchedulerMode::kGpuletInt:
      return ElasticPartitioning(spec, profiles, interference);
    case SchedulerMode::kSbp:
      return SquishyBinPacking(spec, profiles);
    case SchedulerMode::kIdeal:
      return IdealExhaustive(spec, profiles, interference, ideal_options);
  }
  throw ConfigError("unknown scheduler mode");
}

WorkloadSpec ParseWorkload(const nlohmann::json& j) {
  WorkloadSpec spec;
  try {
    if (!j.is_object() || !j.contains("models")) {
      throw ConfigError("workload must be an object with a 'models' array");
    }
    for (const auto& m : j.at("models")) {
      spec.models.push_back({m.at("name").get<std::string>(),
                             m.at("slo_ms").get<double>(),
                             m.at("rate").get<double>()});
    }
    if (j.contains("num_gpus")) spec.num_gpus = j.at("num_gpus").get<int>();
    if (j.contains("grid")) spec.grid = j.at("grid").get<std::vector<int>>();
    if (j.contains("mode")) {
      spec.mode = ParseSchedulerMode(j.at("mode").get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed workload: ") + e.what());
  }
  return spec;
}

WorkloadSpec LoadWorkloadFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open workload file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return ParseWorkload(j);
}

nlohmann::ordered_json DumpPlan(const SchedulePlan& plan) {
  nlohmann::ordered_json j;
  j["verdict"] = plan.schedulable() ? "Schedulable" : "NotSchedulable";
  j["pessimistic"] = plan.pessimistic;
  j["utilized_partition_sum"] = plan.inventory.UtilizedPartitionSum();
  j["gpus"] = DumpInventory(plan.inventory);
  nlohmann::ordered_json rates = nlohmann::ordered_json::object();
  for (const auto& [model, rate] : plan.incoming_rate) {
    rates[model] = {{"incoming", rate}, {"assigned", plan.assigned_rate.at(model)}};
  }
  j["rates"] = rates;
  return j;
}

}  // namespace gpulet
