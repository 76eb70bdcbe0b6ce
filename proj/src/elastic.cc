#include <algorithm>
#include <optional>

#include "gpulet/scheduler.h"
#include "placement.h"

namespace gpulet {
namespace internal {

std::optional<double> FindBestFit(GpuletInventory& inv,
                                  const Placement& placement,
                                  const std::string& model, double remaining,
                                  int p_ideal) {
  std::vector<int> candidates;
  for (const Gpulet* g : inv.RemainGpulets()) candidates.push_back(g->id);
  std::stable_sort(candidates.begin(), candidates.end(), [&](int a, int b) {
    return inv.Get(a).size < inv.Get(b).size;
  });

  std::optional<int> chosen;
  double share = 0.0;
  for (int id : candidates) {
    // Earlier reverts may have recombined this gpulet away.
    if (!inv.Contains(id) || inv.Get(id).allocated()) continue;
    if (inv.Get(id).size < p_ideal) continue;
    bool split = false;
    if (inv.Get(id).size == 100 && p_ideal < 100) {
      inv.Split(id, p_ideal);
      split = true;
    }
    double capacity = placement.MaxAbsorb(inv, id, model, remaining);
    share = std::min(remaining, capacity);
    if (share > kRateEps && placement.TryAdd(inv, id, model, share)) {
      chosen = id;
      break;
    }
    if (split) inv.RevertSplit(id);
  }
  if (!chosen) return std::nullopt;

  // Temporal sharing with an already allocated gpulet frees the new one.
  for (const Gpulet* ga : inv.AllocGpulets()) {
    if (ga->id == *chosen || ga->size < p_ideal) continue;
    const Gpulet& g = inv.Get(*chosen);
    auto factor = [&](const std::string& m) {
      return placement.FactorFor(inv, ga->id, m);
    };
    if (!TemporallySharable(g, *ga, placement.profiles(), factor)) continue;

    int target = ga->id;
    GpuletInventory trial = inv;
    Gpulet& tentative = trial.Mutable(*chosen);
    tentative.lanes.clear();
    tentative.pessimistic = false;
    if (const Gpulet* sib = trial.Sibling(*chosen)) {
      placement.Refresh(trial, sib->id);
    }
    trial.RevertSplit(*chosen);
    double absorb = std::min(
        remaining, placement.MaxAbsorb(trial, target, model, remaining));
    if (absorb + kRateEps < share) continue;
    if (!placement.TryAdd(trial, target, model, absorb)) continue;
    inv = std::move(trial);
    return absorb;
  }
  return share;
}

}  // namespace internal

using internal::kRateEps;
using internal::Placement;

SchedulePlan ElasticPartitioning(const WorkloadSpec& spec,
                                 const ProfileSet& profiles,
                                 const InterferenceModel* interference) {
  ValidateWorkload(spec, profiles);
  Placement placement(profiles, spec, interference);
  GpuletInventory inv(spec.num_gpus);

  for (const WorkloadModel& m : internal::ModelsByRate(spec)) {
    CapacityCurve curve =
        ComputeCapacityCurve(profiles.At(m.name), m.slo_ms, spec.grid);
    int p_eff = MaxEfficientPartition(curve);
    double assigned = 0.0;
    while (m.rate - assigned > kRateEps * std::max(1.0, m.rate)) {
      double remaining = m.rate - assigned;
      int p_req = MinRequiredPartition(curve, remaining).partition;
      int p_ideal = std::min(p_eff, p_req);
      auto got = internal::FindBestFit(inv, placement, m.name, remaining, p_ideal);
      inv.CheckConservation();
      if (!got) return internal::MakePlan(spec, std::move(inv), false);
      assigned += *got;
    }
  }
  return internal::MakePlan(spec, std::move(inv), true);
}

}  // namespace gpulet
