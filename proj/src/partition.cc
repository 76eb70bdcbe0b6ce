#include "gpulet/partition.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "gpulet/errors.h"

namespace gpulet {
namespace {

constexpr double kEps = 1e-9;

std::string Name(int id) { return "gpulet " + std::to_string(id); }

}  // namespace

const Lane* Gpulet::FindLane(const std::string& model) const {
  for (const Lane& l : lanes) {
    if (l.model == model) return &l;
  }
  return nullptr;
}

std::optional<std::vector<Lane>> RealizeLanes(std::span<const LaneDemand> demands,
                                              int size) {
  std::vector<Lane> lanes;
  std::vector<int> max_batch;
  double jitter = 0.0;
  for (const LaneDemand& d : demands) jitter = std::max(jitter, d.jitter_ms);
  double duty = 0.0;
  bool first = true;
  for (const LaneDemand& d : demands) {
    auto b = MaxFeasibleBatch(*d.profile, size, d.slo_ms / d.factor,
                              jitter / d.factor);
    if (!b) return std::nullopt;
    double own_duty = LookupLatency(*d.profile, *b, size) * d.factor;
    duty = first ? own_duty : std::min(duty, own_duty);
    first = false;
    max_batch.push_back(*b);
  }
  if (first) return std::vector<Lane>{};

  double total_exec = 0.0;
  for (size_t i = 0; i < demands.size(); ++i) {
    const LaneDemand& d = demands[i];
    Lane lane;
    lane.model = d.profile->model();
    lane.slo_ms = d.slo_ms;
    lane.rate = d.rate;
    lane.duty_ms = duty;
    lane.factor = d.factor;
    if (d.rate > 0.0) {
      lane.batch = static_cast<int>(std::ceil(d.rate * duty / 1000.0 - kEps));
      lane.batch = std::max(lane.batch, 1);
      if (lane.batch > max_batch[i]) return std::nullopt;
      lane.exec_ms = LookupLatency(*d.profile, lane.batch, size) * d.factor;
    }
    total_exec += lane.exec_ms;
    lanes.push_back(std::move(lane));
  }
  if (total_exec > duty + kEps) return std::nullopt;
  for (const Lane& l : lanes) {
    if (l.rate > 0.0 && duty + total_exec + jitter > l.slo_ms + kEps) {
      return std::nullopt;
    }
  }
  return lanes;
}

GpuletInventory::GpuletInventory(int num_gpus) {
  if (num_gpus < 0) throw ConfigError("negative GPU count");
  gpus_.resize(static_cast<size_t>(num_gpus));
  for (int g = 0; g < num_gpus; ++g) {
    Gpulet whole;
    whole.id = g * kMaxGpuletsPerGpu;
    whole.gpu_id = g;
    whole.size = 100;
    gpus_[static_cast<size_t>(g)].push_back(whole);
  }
}

std::vector<const Gpulet*> GpuletInventory::All() const {
  std::vector<const Gpulet*> out;
  for (const auto& gpu : gpus_) {
    for (const Gpulet& g : gpu) out.push_back(&g);
  }
  std::sort(out.begin(), out.end(), [](const Gpulet* a, const Gpulet* b) {
    return std::tie(a->gpu_id, a->id) < std::tie(b->gpu_id, b->id);
  });
  return out;
}

std::vector<const Gpulet*> GpuletInventory::RemainGpulets() const {
  auto all = All();
  std::erase_if(all, [](const Gpulet* g) { return g->allocated(); });
  return all;
}

std::vector<const Gpulet*> GpuletInventory::AllocGpulets() const {
  auto all = All();
  std::erase_if(all, [](const Gpulet* g) { return !g->allocated(); });
  return all;
}

std::span<const Gpulet> GpuletInventory::GpuGpulets(int gpu_id) const {
  if (gpu_id < 0 || gpu_id >= num_gpus()) {
    throw StateError("no GPU " + std::to_string(gpu_id));
  }
  return gpus_[static_cast<size_t>(gpu_id)];
}

bool GpuletInventory::Contains(int id) const {
  int gpu = id / kMaxGpuletsPerGpu;
  if (id < 0 || gpu >= num_gpus()) return false;
  for (const Gpulet& g : gpus_[static_cast<size_t>(gpu)]) {
    if (g.id == id) return true;
  }
  return false;
}

const Gpulet& GpuletInventory::Get(int id) const {
  int gpu = id / kMaxGpuletsPerGpu;
  if (id >= 0 && gpu < num_gpus()) {
    for (const Gpulet& g : gpus_[static_cast<size_t>(gpu)]) {
      if (g.id == id) return g;
    }
  }
  throw StateError("no " + Name(id));
}

Gpulet& GpuletInventory::Mutable(int id) {
  return const_cast<Gpulet&>(std::as_const(*this).Get(id));
}

const Gpulet* GpuletInventory::Sibling(int id) const {
  const Gpulet& g = Get(id);
  for (const Gpulet& other : gpus_[static_cast<size_t>(g.gpu_id)]) {
    if (other.id != id) return &other;
  }
  return nullptr;
}

std::pair<int, std::optional<int>> GpuletInventory::Split(int id, int p_ideal) {
  Gpulet& g = Mutable(id);
  if (g.size != 100 || g.allocated()) {
    throw StateError("only a free whole-GPU gpulet can be split; " + Name(id) +
                     " has size " + std::to_string(g.size) +
                     (g.allocated() ? " and lanes" : ""));
  }
  if (p_ideal <= 0 || p_ideal > 100) {
    throw StateError("split size " + std::to_string(p_ideal) +
                     " outside (0, 100]");
  }
  if (p_ideal == 100) return {id, std::nullopt};
  g.size = p_ideal;
  g.pessimistic = false;
  Gpulet remain;
  remain.id = id + 1;
  remain.gpu_id = g.gpu_id;
  remain.size = 100 - p_ideal;
  gpus_[static_cast<size_t>(g.gpu_id)].push_back(remain);
  return {id, remain.id};
}

void GpuletInventory::RevertSplit(int id) {
  const Gpulet& g = Get(id);
  if (g.allocated()) {
    throw StateError("cannot revert allocated " + Name(id));
  }
  auto& gpu = gpus_[static_cast<size_t>(g.gpu_id)];
  if (gpu.size() < 2) return;
  bool all_free = std::none_of(gpu.begin(), gpu.end(),
                               [](const Gpulet& x) { return x.allocated(); });
  if (!all_free) return;
  Gpulet whole;
  whole.id = g.gpu_id * kMaxGpuletsPerGpu;
  whole.gpu_id = g.gpu_id;
  whole.size = 100;
  gpu.assign(1, whole);
}

void GpuletInventory::CheckConservation() const {
  for (int gpu = 0; gpu < num_gpus(); ++gpu) {
    const auto& list = gpus_[static_cast<size_t>(gpu)];
    if (list.empty() || list.size() > static_cast<size_t>(kMaxGpuletsPerGpu)) {
      throw StateError("GPU " + std::to_string(gpu) + " holds " +
                       std::to_string(list.size()) + " gpulets");
    }
    int total = 0;
    for (const Gpulet& g : list) total += g.size;
    if (total != 100) {
      throw StateError("GPU " + std::to_string(gpu) + " gpulet sizes sum to " +
                       std::to_string(total));
    }
  }
}

int GpuletInventory::UtilizedPartitionSum() const {
  int total = 0;
  for (const auto& gpu : gpus_) {
    for (const Gpulet& g : gpu) {
      if (g.allocated()) total += g.size;
    }
  }
  return total;
}

std::optional<std::vector<Lane>> MergedLanes(const Gpulet& g,
                                             const Gpulet& g_alloc,
                                             const ProfileSet& profiles,
                                             const LaneFactorFn& factor) {
  // Keep g_alloc's lane order; append new models from g.
  std::vector<LaneDemand> demands;
  std::map<std::string, size_t> index;
  for (const auto* src : {&g_alloc, &g}) {
    for (const Lane& l : src->lanes) {
      auto [it, inserted] = index.emplace(l.model, demands.size());
      if (inserted) {
        demands.push_back({&profiles.At(l.model), l.slo_ms, l.rate,
                           factor ? factor(l.model) : 1.0});
      } else {
        demands[it->second].rate += l.rate;
      }
    }
  }
  return RealizeLanes(demands, g_alloc.size);
}

bool TemporallySharable(const Gpulet& g, const Gpulet& g_alloc,
                        const ProfileSet& profiles, const LaneFactorFn& factor) {
  return MergedLanes(g, g_alloc, profiles, factor).has_value();
}

int MergeTemporal(GpuletInventory& inventory, int g, int g_alloc,
                  const ProfileSet& profiles, const LaneFactorFn& factor) {
  if (g == g_alloc) throw StateError("cannot merge " + Name(g) + " into itself");
  const Gpulet& src = inventory.Get(g);
  const Gpulet& dst = inventory.Get(g_alloc);
  if (!dst.allocated()) {
    throw StateError("merge target " + Name(g_alloc) + " has no lanes");
  }
  if (!src.allocated()) {
    throw StateError("merge source " + Name(g) + " has no lanes");
  }
  auto merged = MergedLanes(src, dst, profiles, factor);
  if (!merged) {
    throw PredicateError(Name(g) + " and " + Name(g_alloc) +
                         " are not temporally sharable");
  }
  inventory.Mutable(g_alloc).lanes = std::move(*merged);
  inventory.Mutable(g).lanes.clear();
  inventory.Mutable(g).pessimistic = false;
  inventory.RevertSplit(g);
  return g_alloc;
}

nlohmann::ordered_json DumpInventory(const GpuletInventory& inventory) {
  auto gpus = nlohmann::ordered_json::array();
  for (int gpu = 0; gpu < inventory.num_gpus(); ++gpu) {
    auto gpulets = nlohmann::ordered_json::array();
    auto list = inventory.GpuGpulets(gpu);
    std::vector<const Gpulet*> sorted;
    for (const Gpulet& g : list) sorted.push_back(&g);
    std::sort(sorted.begin(), sorted.end(),
              [](const Gpulet* a, const Gpulet* b) { return a->id < b->id; });
    for (const Gpulet* g : sorted) {
      auto lanes = nlohmann::ordered_json::array();
      for (const Lane& l : g->lanes) {
        lanes.push_back({{"model", l.model},
                         {"batch", l.batch},
                         {"duty_ms", l.duty_ms},
                         {"exec_ms", l.exec_ms},
                         {"rate", l.rate}});
      }
      gpulets.push_back(
          {{"id", g->id}, {"size", g->size}, {"lanes", std::move(lanes)}});
    }
    gpus.push_back({{"gpu_id", gpu}, {"gpulets", std::move(gpulets)}});
  }
  return gpus;
}

}  // namespace gpulet
