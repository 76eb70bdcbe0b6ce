#include <algorithm>
#include <set>
#include <sstream>
#include <unordered_set>

#include "gpulet/errors.h"
#include "gpulet/scheduler.h"
#include "placement.h"

namespace gpulet {
namespace {

using internal::kRateEps;
using internal::Placement;

class IdealSearch {
 public:
  IdealSearch(const WorkloadSpec& spec, const ProfileSet& profiles,
              const InterferenceModel* interference,
              const IdealOptions& options)
      : spec_(spec),
        placement_(profiles, spec, interference, false),
        final_(profiles, spec, interference),
        options_(options),
        models_(internal::ModelsByRate(spec)) {
    for (const WorkloadModel& m : models_) {
      capacity_.push_back(
          ComputeCapacityCurve(profiles.At(m.name), m.slo_ms, spec.grid));
    }
  }

  std::optional<GpuletInventory> Run() {
    auto types = GpuPartitionings(spec_.grid);
    const int n = spec_.num_gpus;
    // GPUs are interchangeable, so only non-decreasing type sequences.
    std::vector<size_t> pick(static_cast<size_t>(n), 0);
    while (true) {
      GpuletInventory inv(n);
      for (int g = 0; g < n; ++g) {
        const auto& type = types[pick[static_cast<size_t>(g)]];
        if (type.size() == 2) inv.Split(g * kMaxGpuletsPerGpu, type[0]);
      }
      if (models_.empty()) return inv;
      fine_ = false;
      if (Search(inv, 0, models_[0].rate)) return found_;

      int g = n - 1;
      while (g >= 0 && pick[static_cast<size_t>(g)] + 1 == types.size()) --g;
      if (g < 0) break;
      size_t next = pick[static_cast<size_t>(g)] + 1;
      for (int k = g; k < n; ++k) pick[static_cast<size_t>(k)] = next;
    }
    return std::nullopt;
  }

  // Second pass over every partitioning, also trying shares smaller than the
  // largest one a gpulet can absorb.
  std::optional<GpuletInventory> RunFine() {
    fine_ = true;
    failed_.clear();
    states_ = 0;
    auto types = GpuPartitionings(spec_.grid);
    const int n = spec_.num_gpus;
    std::vector<size_t> pick(static_cast<size_t>(n), 0);
    while (true) {
      GpuletInventory inv(n);
      for (int g = 0; g < n; ++g) {
        const auto& type = types[pick[static_cast<size_t>(g)]];
        if (type.size() == 2) inv.Split(g * kMaxGpuletsPerGpu, type[0]);
      }
      if (Search(inv, 0, models_[0].rate)) return found_;
      int g = n - 1;
      while (g >= 0 && pick[static_cast<size_t>(g)] + 1 == types.size()) --g;
      if (g < 0) break;
      size_t next = pick[static_cast<size_t>(g)] + 1;
      for (int k = g; k < n; ++k) pick[static_cast<size_t>(k)] = next;
    }
    return std::nullopt;
  }

 private:
  double Capacity(size_t model_index, int size) const {
    return capacity_[model_index].RateAt(size);
  }

  // Unused fraction of a gpulet's time, upper-bounded by assuming every lane
  // runs at its most efficient batch.
  double FreeFraction(const Gpulet& g) const {
    double used = 0.0;
    for (const Lane& l : g.lanes) {
      auto it = std::find_if(models_.begin(), models_.end(),
                             [&](const WorkloadModel& m) {
                               return m.name == l.model;
                             });
      double cap = Capacity(static_cast<size_t>(it - models_.begin()), g.size);
      used += cap > 0.0 ? l.rate / cap : 1.0;
    }
    return std::max(0.0, 1.0 - used);
  }

  // Necessary condition for completing the remaining demand.
  bool Promising(const GpuletInventory& inv, size_t mi,
                 double remaining) const {
    auto all = inv.All();
    std::vector<double> free;
    for (const Gpulet* g : all) free.push_back(FreeFraction(*g));
    double total_free = 0.0;
    for (double f : free) total_free += f;
    double needed = 0.0;
    for (size_t k = mi; k < models_.size(); ++k) {
      double demand = k == mi ? remaining : models_[k].rate;
      double reachable = 0.0;
      double best = 0.0;
      for (size_t i = 0; i < all.size(); ++i) {
        double cap = Capacity(k, all[i]->size);
        best = std::max(best, cap);
        if (k == mi && all[i]->FindLane(models_[k].name)) continue;
        reachable += free[i] * cap;
      }
      if (reachable + kRateEps < demand) return false;
      if (best <= 0.0) return false;
      needed += demand / best;
    }
    return needed <= total_free + 1e-9;
  }

  static std::string Signature(const GpuletInventory& inv, const Gpulet& g) {
    std::ostringstream s;
    s.precision(17);
    auto lanes = [&](const Gpulet& x) {
      for (const Lane& l : x.lanes) s << l.model << ':' << l.rate << ';';
    };
    s << g.size << '|';
    lanes(g);
    s << '|';
    if (const Gpulet* sib = inv.Sibling(g.id)) {
      s << sib->size << '|';
      lanes(*sib);
    }
    return s.str();
  }

  // Search state up to a permutation of GPUs.
  static std::string StateKey(const GpuletInventory& inv, size_t mi,
                              double remaining) {
    std::vector<std::string> gpus;
    for (int gpu = 0; gpu < inv.num_gpus(); ++gpu) {
      std::ostringstream s;
      s.precision(12);
      for (const Gpulet& g : inv.GpuGpulets(gpu)) {
        s << g.size << '[';
        for (const Lane& l : g.lanes) s << l.model << ':' << l.rate << ';';
        s << ']';
      }
      gpus.push_back(s.str());
    }
    std::sort(gpus.begin(), gpus.end());
    std::ostringstream key;
    key.precision(12);
    key << mi << '/' << remaining;
    for (const std::string& g : gpus) key << '|' << g;
    return key.str();
  }

  // Rates at whole-batch boundaries b / D below `limit`, largest first, for a
  // new lane of `model` that leaves the rest of its rate to another lane.
  std::vector<double> SmallerShares(const GpuletInventory& inv, int id,
                                    const std::string& model,
                                    double limit) const {
    std::vector<std::pair<std::string, double>> demands;
    for (const Lane& l : inv.Get(id).lanes) demands.emplace_back(l.model, l.rate);
    demands.emplace_back(model, kRateEps);
    int lanes = Placement::LanesElsewhere(inv, id, model) + 2;
    auto realized = placement_.Realize(inv, id, demands, {{model, lanes}});
    if (!realized) return {};
    double duty = realized->front().duty_ms;
    std::vector<double> out;
    for (int b = 1;; ++b) {
      double rate = 1000.0 * b / duty;
      if (rate >= limit - kRateEps) break;
      if (b > Profile(model).max_batch()) break;
      out.push_back(rate);
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

  // Complete assignments were checked with free siblings treated as idle;
  // the plan must also hold against any co-runner that may arrive there.
  bool Accept(const GpuletInventory& inv) {
    GpuletInventory out = inv;
    for (const Gpulet* g : inv.AllocGpulets()) {
      const Gpulet* sib = inv.Sibling(g->id);
      if (sib == nullptr || sib->allocated()) continue;
      std::vector<std::pair<std::string, double>> demands;
      for (const Lane& l : g->lanes) demands.emplace_back(l.model, l.rate);
      auto lanes = final_.Realize(inv, g->id, demands);
      if (!lanes) return false;
      out.Mutable(g->id).lanes = std::move(*lanes);
    }
    found_ = std::move(out);
    return true;
  }

  const LatencyProfile& Profile(const std::string& model) const {
    return placement_.Profile(model);
  }

  bool Search(const GpuletInventory& inv, size_t mi, double remaining) {
    uint64_t limit = fine_ ? options_.max_fine_states : options_.max_states;
    if (++states_ > limit) {
      throw ResourceError("ideal search exceeded " + std::to_string(limit) +
                          " states; use fewer GPUs, models or grid points");
    }
    if (remaining <= kRateEps * std::max(1.0, models_[mi].rate)) {
      if (mi + 1 == models_.size()) return Accept(inv);
      return Search(inv, mi + 1, models_[mi + 1].rate);
    }
    if (!Promising(inv, mi, remaining)) return false;
    std::string key = StateKey(inv, mi, remaining);
    if (failed_.count(key)) return false;

    const std::string& model = models_[mi].name;
    std::set<std::string> tried;
    for (const Gpulet* g : inv.All()) {
      if (g->FindLane(model)) continue;
      if (!tried.insert(Signature(inv, *g)).second) continue;
      double greedy = std::min(
          remaining, placement_.MaxAbsorb(inv, g->id, model, remaining));
      std::vector<double> shares;
      if (greedy > kRateEps) shares.push_back(greedy);
      if (fine_) {
        double limit = greedy > kRateEps ? greedy : remaining;
        for (double s : SmallerShares(inv, g->id, model, limit)) {
          shares.push_back(s);
        }
      }
      for (double absorb : shares) {
        GpuletInventory next = inv;
        if (!placement_.TryAdd(next, g->id, model, absorb)) continue;
        if (Search(next, mi, remaining - absorb)) return true;
      }
    }
    failed_.insert(std::move(key));
    return false;
  }

  const WorkloadSpec& spec_;
  Placement placement_;
  Placement final_;  // reserves interference next to free siblings
  IdealOptions options_;
  std::vector<WorkloadModel> models_;
  std::vector<CapacityCurve> capacity_;
  uint64_t states_ = 0;
  bool fine_ = false;
  // States already shown to be dead ends, shared across partitionings.
  std::unordered_set<std::string> failed_;
  GpuletInventory found_;
};

}  // namespace

std::vector<std::vector<int>> GpuPartitionings(const std::vector<int>& grid) {
  std::vector<std::vector<int>> out = {{100}};
  for (int p : grid) {
    if (p >= 100 || p > 100 - p) continue;
    if (std::find(grid.begin(), grid.end(), 100 - p) != grid.end()) {
      out.push_back({p, 100 - p});
    }
  }
  return out;
}

SchedulePlan IdealExhaustive(const WorkloadSpec& spec,
                             const ProfileSet& profiles,
                             const InterferenceModel* interference,
                             const IdealOptions& options) {
  ValidateWorkload(spec, profiles);
  IdealSearch search(spec, profiles, interference, options);
  if (auto inv = search.Run()) {
    return internal::MakePlan(spec, std::move(*inv), true);
  }
  if (auto inv = search.RunFine()) {
    return internal::MakePlan(spec, std::move(*inv), true);
  }
  return internal::MakePlan(spec, GpuletInventory(spec.num_gpus), false);
}

}  // namespace gpulet
