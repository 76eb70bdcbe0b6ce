#ifndef GPULET_PROFILE_H_
#define GPULET_PROFILE_H_

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gpulet {

// Partition sizes are integer percentages of one physical GPU's compute.
inline const std::vector<int>& DefaultPartitionGrid() {
  static const std::vector<int> grid = {20, 40, 50, 60, 80, 100};
  return grid;
}

struct ModelSpec {
  std::string name;
  double slo_ms = 0.0;
  int max_batch = 1;
};

// Solo-run hardware counters for one model at one partition size.
struct SoloStats {
  double l2_util = 0.0;
  double mem_bw_util = 0.0;

  bool operator==(const SoloStats&) const = default;
};

// Profiled batch latency L(b, p) of one model, plus its solo-run L2 and
// DRAM bandwidth utilization per partition size. Immutable once built; the
// constructor rejects tables that are not monotone (non-decreasing in batch,
// non-increasing in partition size).
class LatencyProfile {
 public:
  // `latency_ms` is row-major: latency_ms[bi * partitions.size() + pi].
  LatencyProfile(std::string model, std::vector<int> batches,
                 std::vector<int> partitions, std::vector<double> latency_ms,
                 std::vector<SoloStats> stats);

  const std::string& model() const { return model_; }
  std::span<const int> batches() const { return batches_; }
  std::span<const int> partitions() const { return partitions_; }
  int max_batch() const { return batches_.back(); }

  bool HasPartition(int partition) const;
  // Index of `partition` on the grid; throws GridError when absent.
  size_t PartitionIndex(int partition) const;

  double LatencyAt(size_t batch_index, size_t partition_index) const {
    return latency_ms_[batch_index * partitions_.size() + partition_index];
  }
  const SoloStats& Stats(int partition) const {
    return stats_[PartitionIndex(partition)];
  }

  friend bool operator==(const LatencyProfile&, const LatencyProfile&) = default;

 private:
  std::string model_;
  std::vector<int> batches_;
  std::vector<int> partitions_;
  std::vector<double> latency_ms_;
  std::vector<SoloStats> stats_;
};

// Named collection of profiles; lookup by model name.
class ProfileSet {
 public:
  void Add(LatencyProfile profile);
  const LatencyProfile* Find(const std::string& model) const;
  // Throws ConfigError when the model has no profile.
  const LatencyProfile& At(const std::string& model) const;
  size_t size() const { return profiles_.size(); }
  auto begin() const { return profiles_.begin(); }
  auto end() const { return profiles_.end(); }

  friend bool operator==(const ProfileSet&, const ProfileSet&) = default;

 private:
  std::map<std::string, LatencyProfile> profiles_;
};

// CSV with header `model,batch,partition_pct,latency_ms,l2_util,mem_bw_util`.
ProfileSet LoadProfiles(std::istream& in);
ProfileSet LoadProfilesFile(const std::string& path);
void WriteProfiles(std::ostream& out, const ProfileSet& profiles);

// Exact entry when `batch` is tabulated, otherwise the entry of the smallest
// tabulated batch above it.
double LookupLatency(const LatencyProfile& profile, int batch, int partition);

// Largest tabulated batch b with 2 * L(b, p) + overhead_ms <= slo_ms. The
// batch-building window equals the execution latency, hence the factor two.
std::optional<int> MaxFeasibleBatch(const LatencyProfile& profile,
                                    int partition, double slo_ms,
                                    double overhead_ms);

// Maximum SLO-feasible request rate (req/s) per grid partition size.
struct CapacityCurve {
  std::string model;
  std::vector<int> partitions;
  std::vector<double> max_rate;

  double RateAt(int partition) const;
};

CapacityCurve ComputeCapacityCurve(const LatencyProfile& profile,
                                   double slo_ms);
// Same, restricted to the partition sizes in `grid`.
CapacityCurve ComputeCapacityCurve(const LatencyProfile& profile,
                                   double slo_ms, std::span<const int> grid);

// Knee of the capacity curve: the interior grid point with the largest
// concave curvature after normalizing both axes to [0, 1]. Ties go to the
// smaller partition. Curves with fewer than three points yield their largest
// partition.
int MaxEfficientPartition(const CapacityCurve& curve);

struct RequiredPartition {
  int partition = 0;
  // Set when no grid point reaches the requested rate; `partition` is then
  // the largest grid point.
  bool saturating = false;
};

RequiredPartition MinRequiredPartition(const CapacityCurve& curve,
                                       double rate);

}  // namespace gpulet

#endif  // GPULET_PROFILE_H_
