#include <algorithm>
#include <cmath>

#include "gpulet/scheduler.h"
#include "placement.h"

namespace gpulet {
namespace {

using internal::kRateEps;

struct Item {
  std::string model;
  double rate = 0.0;
  double occupancy = 0.0;  // exec / duty when running alone on a whole GPU
};

}  // namespace

SchedulePlan SquishyBinPacking(const WorkloadSpec& spec,
                               const ProfileSet& profiles) {
  ValidateWorkload(spec, profiles);
  // Whole GPUs only, so there is never a co-runner to interfere with.
  internal::Placement placement(profiles, spec, nullptr);
  GpuletInventory inv(spec.num_gpus);
  auto fail = [&] { return internal::MakePlan(spec, std::move(inv), false); };

  auto next_free_gpu = [&]() -> std::optional<int> {
    for (const Gpulet* g : inv.RemainGpulets()) return g->id;
    return std::nullopt;
  };

  std::vector<Item> items;
  for (const WorkloadModel& m : internal::ModelsByRate(spec)) {
    GpuletInventory probe(1);
    double capacity = placement.MaxAbsorb(probe, 0, m.name, m.rate);
    if (capacity <= kRateEps) return fail();
    int lanes_needed =
        static_cast<int>(std::ceil(m.rate / capacity - kRateEps));

    double residual = m.rate;
    // Saturated share: whole GPUs running at full capacity.
    while (residual >= capacity * (1.0 - kRateEps)) {
      auto id = next_free_gpu();
      if (!id || !placement.TryAdd(inv, *id, m.name, capacity)) return fail();
      residual -= capacity;
    }
    if (residual > kRateEps * std::max(1.0, m.rate)) {
      auto lanes = placement.Realize(probe, 0, {{m.name, residual}},
                                     std::make_pair(m.name, lanes_needed));
      if (!lanes) return fail();
      const Lane& l = lanes->front();
      items.push_back({m.name, residual, l.exec_ms / l.duty_ms});
    }
  }

  std::stable_sort(items.begin(), items.end(),
                   [](const Item& a, const Item& b) {
                     return a.occupancy > b.occupancy;
                   });
  for (const Item& item : items) {
    bool placed = false;
    for (const Gpulet* g : inv.All()) {
      if (placement.TryAdd(inv, g->id, item.model, item.rate)) {
        placed = true;
        break;
      }
    }
    if (!placed) return fail();
  }
  inv.CheckConservation();
  return internal::MakePlan(spec, std::move(inv), true);
}

}  // namespace gpulet
