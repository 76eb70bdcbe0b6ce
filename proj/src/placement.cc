#include "placement.h"

#include <algorithm>
#include <cmath>

namespace gpulet::internal {

Placement::Placement(const ProfileSet& profiles, const WorkloadSpec& spec,
                     const InterferenceModel* interference, bool reserve)
    : profiles_(profiles), interference_(interference), reserve_(reserve) {
  for (const WorkloadModel& m : spec.models) {
    slo_[m.name] = m.slo_ms;
    rate_[m.name] = m.rate;
    if (m.rate > 0.0) active_.push_back(m.name);
  }
}

double Placement::FactorFor(const GpuletInventory& inv, int id,
                            const std::string& model) const {
  if (interference_ == nullptr) return 1.0;
  const Gpulet* sib = inv.Sibling(id);
  if (sib == nullptr) return 1.0;
  const Gpulet& g = inv.Get(id);
  const SoloStats& self = Profile(model).Stats(g.size);
  double factor = 1.0;
  if (!sib->allocated()) {
    if (!reserve_) return 1.0;
    // Reserve for the worst co-runner the workload could still place there.
    for (const std::string& other : active_) {
      factor = std::max(factor, interference_->Predict(
                                    self, Profile(other).Stats(sib->size)));
    }
    return factor;
  }
  for (const Lane& l : sib->lanes) {
    factor = std::max(factor, interference_->Predict(
                                  self, Profile(l.model).Stats(sib->size)));
  }
  return factor;
}

double Placement::JitterMs(const std::string& model, int lanes) const {
  if (lanes <= 1) return 0.0;
  return (lanes - 1) * 1000.0 / rate_.at(model);
}

int Placement::LanesElsewhere(const GpuletInventory& inv, int id,
                              const std::string& model) {
  int n = 0;
  for (const Gpulet* g : inv.AllocGpulets()) {
    if (g->id != id && g->FindLane(model) != nullptr) ++n;
  }
  return n;
}

std::optional<std::vector<Lane>> Placement::Realize(
    const GpuletInventory& inv, int id,
    const std::vector<std::pair<std::string, double>>& demands,
    const std::optional<std::pair<std::string, int>>& hint) const {
  std::vector<LaneDemand> d;
  d.reserve(demands.size());
  for (const auto& [model, rate] : demands) {
    int lanes = LanesElsewhere(inv, id, model) + 1;
    if (hint && hint->first == model) lanes = std::max(lanes, hint->second);
    d.push_back({&Profile(model), Slo(model), rate, FactorFor(inv, id, model),
                 JitterMs(model, lanes)});
  }
  return RealizeLanes(d, inv.Get(id).size);
}

std::vector<std::pair<std::string, double>> Placement::Demands(
    const Gpulet& g) {
  std::vector<std::pair<std::string, double>> out;
  for (const Lane& l : g.lanes) out.emplace_back(l.model, l.rate);
  return out;
}

bool Placement::RevalidateSibling(GpuletInventory& inv, int id) const {
  const Gpulet* sib = inv.Sibling(id);
  if (sib == nullptr) return true;
  if (!sib->allocated()) {
    inv.Mutable(id).pessimistic = interference_ != nullptr;
    return true;
  }
  inv.Mutable(id).pessimistic = false;
  if (interference_ == nullptr) return true;
  auto lanes = Realize(inv, sib->id, Demands(*sib));
  if (!lanes) return false;
  Gpulet& s = inv.Mutable(sib->id);
  s.lanes = std::move(*lanes);
  s.pessimistic = false;
  return true;
}

bool Placement::TryAdd(GpuletInventory& inv, int id, const std::string& model,
                       double rate) const {
  const Gpulet& g = inv.Get(id);
  const bool new_lane = g.FindLane(model) == nullptr;
  auto demands = Demands(g);
  auto it = std::find_if(demands.begin(), demands.end(),
                         [&](const auto& d) { return d.first == model; });
  if (it != demands.end()) {
    it->second += rate;
  } else {
    demands.emplace_back(model, rate);
  }
  auto lanes = Realize(inv, id, demands);
  if (!lanes) return false;

  GpuletInventory before = inv;
  inv.Mutable(id).lanes = std::move(*lanes);
  bool ok = RevalidateSibling(inv, id);
  // One more lane of the model delays the requests of all its other lanes.
  if (ok && new_lane) {
    for (const Gpulet* h : before.AllocGpulets()) {
      if (h->id == id || h->FindLane(model) == nullptr) continue;
      auto relaid = Realize(inv, h->id, Demands(inv.Get(h->id)));
      if (!relaid) {
        ok = false;
        break;
      }
      inv.Mutable(h->id).lanes = std::move(*relaid);
    }
  }
  if (!ok) inv = std::move(before);
  return ok;
}

double Placement::MaxAbsorb(const GpuletInventory& inv, int id,
                            const std::string& model, double want) const {
  const int lanes = LanesElsewhere(inv, id, model) + 1;
  int assumed = lanes;
  double absorb = 0.0;
  for (int round = 0; round < 4; ++round) {
    absorb = AbsorbWith(inv, id, model, assumed);
    if (absorb <= kRateEps || absorb >= want - kRateEps) break;
    int needed = lanes + static_cast<int>(std::ceil((want - absorb) / absorb -
                                                    kRateEps));
    if (needed <= assumed) break;
    assumed = needed;
  }
  return absorb;
}

double Placement::AbsorbWith(const GpuletInventory& inv, int id,
                             const std::string& model, int lanes) const {
  const Gpulet& g = inv.Get(id);
  double existing = 0.0;
  if (const Lane* l = g.FindLane(model)) existing = l->rate;
  const bool present = g.FindLane(model) != nullptr;

  // Another lane of the model, or a new co-runner for the sibling, must keep
  // the rest of the inventory feasible regardless of the rate.
  if (!present &&
      (interference_ != nullptr || LanesElsewhere(inv, id, model) > 0)) {
    GpuletInventory trial = inv;
    if (!TryAdd(trial, id, model, kRateEps)) return 0.0;
  }

  auto demands = Demands(g);
  if (!present) demands.emplace_back(model, 0.0);
  size_t slot = 0;
  while (demands[slot].first != model) ++slot;

  // The shared duty cycle depends only on which models share the gpulet, so
  // the admissible rates of `model` are b / D for integer batches b.
  std::vector<LaneDemand> probe;
  double jitter = 0.0;
  for (const auto& [m, rate] : demands) {
    int n = m == model ? lanes : LanesElsewhere(inv, id, m) + 1;
    probe.push_back({&Profile(m), Slo(m), rate, FactorFor(inv, id, m),
                     JitterMs(m, n)});
    jitter = std::max(jitter, probe.back().jitter_ms);
  }
  double duty = 0.0;
  int max_batch = 0;
  for (const LaneDemand& d : probe) {
    auto b = MaxFeasibleBatch(*d.profile, g.size, d.slo_ms / d.factor,
                              jitter / d.factor);
    if (!b) return 0.0;
    double own = LookupLatency(*d.profile, *b, g.size) * d.factor;
    duty = duty == 0.0 ? own : std::min(duty, own);
    if (d.profile->model() == model) max_batch = *b;
  }

  std::pair<std::string, int> hint{model, lanes};
  for (int b = max_batch; b >= 1; --b) {
    double total = 1000.0 * b / duty;
    if (total <= existing + kRateEps) break;
    demands[slot].second = total;
    if (Realize(inv, id, demands, hint)) return total - existing;
  }
  return 0.0;
}

void Placement::Refresh(GpuletInventory& inv, int id) const {
  const Gpulet& g = inv.Get(id);
  if (!g.allocated()) return;
  if (auto lanes = Realize(inv, id, Demands(g))) {
    inv.Mutable(id).lanes = std::move(*lanes);
  }
  const Gpulet* sib = inv.Sibling(id);
  inv.Mutable(id).pessimistic =
      interference_ != nullptr && sib != nullptr && !sib->allocated();
}

std::vector<WorkloadModel> ModelsByRate(const WorkloadSpec& spec) {
  std::vector<WorkloadModel> out;
  for (const WorkloadModel& m : spec.models) {
    if (m.rate > 0.0) out.push_back(m);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const WorkloadModel& a, const WorkloadModel& b) {
                     return a.rate > b.rate;
                   });
  return out;
}

SchedulePlan MakePlan(const WorkloadSpec& spec, GpuletInventory inventory,
                      bool schedulable) {
  SchedulePlan plan;
  plan.verdict = schedulable ? Verdict::kSchedulable : Verdict::kNotSchedulable;
  for (const WorkloadModel& m : spec.models) {
    plan.incoming_rate[m.name] = m.rate;
    plan.assigned_rate[m.name] = 0.0;
  }
  for (const Gpulet* g : inventory.AllocGpulets()) {
    for (const Lane& l : g->lanes) plan.assigned_rate[l.model] += l.rate;
    plan.pessimistic = plan.pessimistic || g->pessimistic;
  }
  plan.inventory = std::move(inventory);
  return plan;
}

}  // namespace gpulet::internal
