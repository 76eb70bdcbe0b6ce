#ifndef GPULET_SRC_PLACEMENT_H_
#define GPULET_SRC_PLACEMENT_H_

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gpulet/interference.h"
#include "gpulet/partition.h"
#include "gpulet/profile.h"
#include "gpulet/scheduler.h"

namespace gpulet::internal {

inline constexpr double kRateEps = 1e-9;

// Lane placement shared by all schedulers. Adding a model to a gpulet
// re-derives that gpulet's lanes and, when interference is modeled, the lanes
// of its sibling, whose co-runner set just changed. Both must stay feasible.
class Placement {
 public:
  // Without `reserve`, a lane next to a free sibling is checked as if it had
  // no co-runner (an optimistic bound for searches that re-check at the end).
  Placement(const ProfileSet& profiles, const WorkloadSpec& spec,
            const InterferenceModel* interference, bool reserve = true);

  double Slo(const std::string& model) const { return slo_.at(model); }
  const LatencyProfile& Profile(const std::string& model) const {
    return profiles_.At(model);
  }
  const ProfileSet& profiles() const { return profiles_; }
  bool models_interference() const { return interference_ != nullptr; }

  // Predicted slowdown of a `model` lane on gpulet `id`: the worst pairing
  // with any lane of the sibling gpulet, 1 on a whole GPU. While the sibling
  // is free the worst pairing with any model of the workload is reserved.
  double FactorFor(const GpuletInventory& inv, int id,
                   const std::string& model) const;

  // Routing jitter of a model served by `lanes` lanes: a lane's requests
  // may arrive up to one inter-arrival gap late per other lane.
  double JitterMs(const std::string& model, int lanes) const;

  // Lanes of `model` on gpulets other than `id`.
  static int LanesElsewhere(const GpuletInventory& inv, int id,
                            const std::string& model);

  // Lanes of gpulet `id` for the given (model, rate) demands at its current
  // location. `hint` raises the lane count assumed for one model.
  std::optional<std::vector<Lane>> Realize(
      const GpuletInventory& inv, int id,
      const std::vector<std::pair<std::string, double>>& demands,
      const std::optional<std::pair<std::string, int>>& hint = {}) const;

  // Adds `rate` of `model` to gpulet `id` (combining with an existing lane of
  // the model). Leaves the inventory untouched and returns false when the
  // gpulet, its sibling or another lane of the model would become infeasible.
  bool TryAdd(GpuletInventory& inv, int id, const std::string& model,
              double rate) const;

  // Largest additional rate of `model` that TryAdd would accept on `id`.
  // When that falls short of `want`, the lanes still needed for the rest are
  // budgeted into the jitter so this lane stays feasible once they exist.
  double MaxAbsorb(const GpuletInventory& inv, int id, const std::string& model,
                   double want) const;

  // Re-derives the lanes of `id` under its current sibling. Keeps the old
  // lanes when re-derivation fails (they remain a valid, more pessimistic
  // configuration only if the sibling lost lanes, which is the only caller).
  void Refresh(GpuletInventory& inv, int id) const;

 private:
  static std::vector<std::pair<std::string, double>> Demands(const Gpulet& g);
  bool RevalidateSibling(GpuletInventory& inv, int id) const;
  double AbsorbWith(const GpuletInventory& inv, int id,
                    const std::string& model, int lanes) const;

  const ProfileSet& profiles_;
  std::map<std::string, double> slo_;
  std::map<std::string, double> rate_;
  std::vector<std::string> active_;  // models with a positive rate
  const InterferenceModel* interference_;
  bool reserve_;
};

// One elastic-partitioning step: the smallest remaining gpulet of at least
// `p_ideal` that can serve part of `remaining` (splitting a whole GPU at
// p_ideal), then folded into an allocated gpulet by temporal sharing when
// that one can absorb as much. Returns the rate newly assigned, or nullopt
// when no remaining gpulet can host the model.
std::optional<double> FindBestFit(GpuletInventory& inv,
                                  const Placement& placement,
                                  const std::string& model, double remaining,
                                  int p_ideal);

// Models with positive rate, by descending rate (ties keep workload order).
std::vector<WorkloadModel> ModelsByRate(const WorkloadSpec& spec);

// Fills verdict-independent plan fields from the final inventory.
SchedulePlan MakePlan(const WorkloadSpec& spec, GpuletInventory inventory,
                      bool schedulable);

}  // namespace gpulet::internal

#endif  // GPULET_SRC_PLACEMENT_H_
