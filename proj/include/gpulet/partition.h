#ifndef GPULET_PARTITION_H_
#define GPULET_PARTITION_H_

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gpulet/profile.h"

namespace gpulet {

// At most this many gpulets share one physical GPU.
inline constexpr int kMaxGpuletsPerGpu = 2;

// One model's temporal share of a gpulet. All lanes of a gpulet run on a
// common duty cycle: each lane builds a batch of up to `batch` requests
// during the window, and the batches execute back to back.
struct Lane {
  std::string model;
  double slo_ms = 0.0;
  double rate = 0.0;     // req/s routed to this lane
  int batch = 0;         // dispatch batch size, ceil(rate * duty)
  double duty_ms = 0.0;  // common batch-building window of the gpulet
  double exec_ms = 0.0;  // predicted execution latency, interference included
  double factor = 1.0;   // predicted interference factor

  friend bool operator==(const Lane&, const Lane&) = default;
};

struct Gpulet {
  int id = 0;
  int gpu_id = 0;
  int size = 100;
  std::vector<Lane> lanes;
  // Allocated while its sibling was still free; the interference check was
  // made without a co-runner and is redone when the sibling is allocated.
  bool pessimistic = false;

  bool allocated() const { return !lanes.empty(); }
  double duty_ms() const { return lanes.empty() ? 0.0 : lanes.front().duty_ms; }
  const Lane* FindLane(const std::string& model) const;

  friend bool operator==(const Gpulet&, const Gpulet&) = default;
};

// Demand placed on a gpulet by one model.
struct LaneDemand {
  const LatencyProfile* profile = nullptr;
  double slo_ms = 0.0;
  double rate = 0.0;
  double factor = 1.0;
  // How late the lane's requests may arrive relative to a perfectly periodic
  // stream (routing a model's requests over several lanes).
  double jitter_ms = 0.0;
};

// Derives batch sizes and the shared duty cycle for `demands` co-scheduled
// on a gpulet of `size`:
//   - J is the largest jitter of any lane;
//   - each lane's own duty is L(b_max, size) * factor, where b_max is the
//     largest batch with 2 * L * factor + J <= SLO;
//   - the shared duty D is the minimum of those;
//   - each lane dispatches b = ceil(rate * D) and executes L(b) * factor.
// Returns nullopt unless sum(exec) <= D and D + sum(exec) + J <= SLO of
// every lane (and every batch fits the profile).
std::optional<std::vector<Lane>> RealizeLanes(std::span<const LaneDemand> demands,
                                              int size);

// Interference factor a lane of `model` would see at a given location.
using LaneFactorFn = std::function<double(const std::string& model)>;

// Physical GPUs and their gpulets. Gpulet ids are stable: slot s of GPU g has
// id g * kMaxGpuletsPerGpu + s, slot 0 being the whole GPU or the "ideal" half
// of a split. A gpulet is in the alloc set iff it has lanes, otherwise in the
// remain set.
class GpuletInventory {
 public:
  GpuletInventory() = default;
  explicit GpuletInventory(int num_gpus);

  int num_gpus() const { return static_cast<int>(gpus_.size()); }

  // Sorted by (gpu_id, id).
  std::vector<const Gpulet*> All() const;
  std::vector<const Gpulet*> RemainGpulets() const;
  std::vector<const Gpulet*> AllocGpulets() const;
  std::span<const Gpulet> GpuGpulets(int gpu_id) const;

  bool Contains(int id) const;
  const Gpulet& Get(int id) const;
  Gpulet& Mutable(int id);
  // The other gpulet on the same physical GPU, if the GPU is split.
  const Gpulet* Sibling(int id) const;

  // Splits a free whole-GPU gpulet into sizes (p_ideal, 100 - p_ideal).
  // Returns the ids of the two parts; splitting at 100 is a no-op that
  // returns the gpulet itself and no remainder.
  std::pair<int, std::optional<int>> Split(int id, int p_ideal);

  // Returns a free gpulet to the remain set, recombining it with its sibling
  // into a whole GPU when the sibling is free as well.
  void RevertSplit(int id);

  // Throws StateError unless every GPU's gpulet sizes sum to exactly 100 and
  // no GPU holds more than kMaxGpuletsPerGpu gpulets.
  void CheckConservation() const;

  // Sum of the sizes of allocated gpulets, in percent.
  int UtilizedPartitionSum() const;

  friend bool operator==(const GpuletInventory&,
                         const GpuletInventory&) = default;

 private:
  std::vector<std::vector<Gpulet>> gpus_;
};

// Lanes `g_alloc` would carry after absorbing the lanes of `g` (lanes of the
// same model are combined), or nullopt when they cannot share its duty cycle.
std::optional<std::vector<Lane>> MergedLanes(const Gpulet& g,
                                             const Gpulet& g_alloc,
                                             const ProfileSet& profiles,
                                             const LaneFactorFn& factor);

bool TemporallySharable(const Gpulet& g, const Gpulet& g_alloc,
                        const ProfileSet& profiles, const LaneFactorFn& factor);

// Moves the lanes of `g` onto `g_alloc` and reverts `g`. Returns the id of
// the merged gpulet.
int MergeTemporal(GpuletInventory& inventory, int g, int g_alloc,
                  const ProfileSet& profiles, const LaneFactorFn& factor);

// Per GPU, the gpulets with their sizes and lanes.
nlohmann::ordered_json DumpInventory(const GpuletInventory& inventory);

}  // namespace gpulet

#endif  // GPULET_PARTITION_H_
