#include "gpulet/profile.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <tuple>

#include "csv_util.h"
#include "gpulet/errors.h"

namespace gpulet {
namespace {

constexpr double kFeasibilityEps = 1e-9;
constexpr double kCurvatureTieEps = 1e-12;

std::string Key(const std::string& model, int batch, int partition) {
  return "(" + model + ", b=" + std::to_string(batch) +
         ", p=" + std::to_string(partition) + ")";
}

}  // namespace

LatencyProfile::LatencyProfile(std::string model, std::vector<int> batches,
                               std::vector<int> partitions,
                               std::vector<double> latency_ms,
                               std::vector<SoloStats> stats)
    : model_(std::move(model)),
      batches_(std::move(batches)),
      partitions_(std::move(partitions)),
      latency_ms_(std::move(latency_ms)),
      stats_(std::move(stats)) {
  if (batches_.empty() || partitions_.empty()) {
    throw DataError("profile for '" + model_ + "' is empty");
  }
  if (latency_ms_.size() != batches_.size() * partitions_.size() ||
      stats_.size() != partitions_.size()) {
    throw DataError("profile for '" + model_ + "' has an incomplete grid");
  }
  if (!std::is_sorted(batches_.begin(), batches_.end()) ||
      std::adjacent_find(batches_.begin(), batches_.end()) != batches_.end() ||
      batches_.front() < 1) {
    throw DataError("profile for '" + model_ +
                    "': batches must be distinct positive integers");
  }
  if (!std::is_sorted(partitions_.begin(), partitions_.end()) ||
      std::adjacent_find(partitions_.begin(), partitions_.end()) !=
          partitions_.end() ||
      partitions_.front() < 1 || partitions_.back() > 100) {
    throw DataError("profile for '" + model_ +
                    "': partitions must be distinct values in [1, 100]");
  }
  for (size_t pi = 0; pi < partitions_.size(); ++pi) {
    const SoloStats& s = stats_[pi];
    if (!(s.l2_util >= 0.0 && s.l2_util <= 1.0 && s.mem_bw_util >= 0.0 &&
          s.mem_bw_util <= 1.0)) {
      throw DataError("utilization outside [0,1] for " +
                      Key(model_, batches_.front(), partitions_[pi]));
    }
  }
  for (size_t bi = 0; bi < batches_.size(); ++bi) {
    for (size_t pi = 0; pi < partitions_.size(); ++pi) {
      double l = LatencyAt(bi, pi);
      if (!(l > 0.0) || !std::isfinite(l)) {
        throw DataError("non-positive latency at " +
                        Key(model_, batches_[bi], partitions_[pi]));
      }
      if (bi > 0 && l < LatencyAt(bi - 1, pi)) {
        throw DataError("latency decreases with batch size at " +
                        Key(model_, batches_[bi], partitions_[pi]));
      }
      if (pi > 0 && l > LatencyAt(bi, pi - 1)) {
        throw DataError("latency increases with partition size at " +
                        Key(model_, batches_[bi], partitions_[pi]));
      }
    }
  }
}

bool LatencyProfile::HasPartition(int partition) const {
  return std::binary_search(partitions_.begin(), partitions_.end(), partition);
}

size_t LatencyProfile::PartitionIndex(int partition) const {
  auto it = std::lower_bound(partitions_.begin(), partitions_.end(), partition);
  if (it == partitions_.end() || *it != partition) {
    throw GridError("partition " + std::to_string(partition) +
                    "% is not on the grid of '" + model_ + "'");
  }
  return static_cast<size_t>(it - partitions_.begin());
}

void ProfileSet::Add(LatencyProfile profile) {
  std::string name = profile.model();
  if (!profiles_.emplace(name, std::move(profile)).second) {
    throw DataError("duplicate profile for model '" + name + "'");
  }
}

const LatencyProfile* ProfileSet::Find(const std::string& model) const {
  auto it = profiles_.find(model);
  return it == profiles_.end() ? nullptr : &it->second;
}

const LatencyProfile& ProfileSet::At(const std::string& model) const {
  const LatencyProfile* p = Find(model);
  if (p == nullptr) throw ConfigError("no profile for model '" + model + "'");
  return *p;
}

ProfileSet LoadProfiles(std::istream& in) {
  struct Row {
    double latency;
    SoloStats stats;
  };
  // model -> (batch, partition) -> row; std::map keeps both axes sorted.
  std::map<std::string, std::map<std::pair<int, int>, Row>> rows;
  const std::string source = "profiles";
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::IsBlankOrComment(line)) continue;
    auto f = csv::SplitRow(line);
    if (!header_seen) {
      const std::vector<std::string> expected = {
          "model", "batch", "partition_pct", "latency_ms", "l2_util",
          "mem_bw_util"};
      if (f != expected) {
        throw ParseError(csv::Where(source, line_no) +
                         ": missing header 'model,batch,partition_pct,"
                         "latency_ms,l2_util,mem_bw_util'");
      }
      header_seen = true;
      continue;
    }
    if (f.size() != 6 || f[0].empty()) {
      throw ParseError(csv::Where(source, line_no) +
                       ": expected 6 fields, got " + std::to_string(f.size()));
    }
    int batch = csv::ParseInt(f[1], source, line_no);
    int partition = csv::ParseInt(f[2], source, line_no);
    Row row{csv::ParseDouble(f[3], source, line_no),
            {csv::ParseDouble(f[4], source, line_no),
             csv::ParseDouble(f[5], source, line_no)}};
    if (batch < 1 || partition < 1 || partition > 100) {
      throw ParseError(csv::Where(source, line_no) +
                       ": batch must be >= 1 and partition in [1,100]");
    }
    if (!rows[f[0]].emplace(std::make_pair(batch, partition), row).second) {
      throw ParseError(csv::Where(source, line_no) + ": duplicate entry " +
                       Key(f[0], batch, partition));
    }
  }
  if (!header_seen) throw ParseError(source + ": empty profile file");

  ProfileSet set;
  for (auto& [model, table] : rows) {
    std::vector<int> batches;
    std::vector<int> partitions;
    for (const auto& [bp, row] : table) {
      if (batches.empty() || batches.back() != bp.first) {
        batches.push_back(bp.first);
      }
      if (batches.size() == 1) partitions.push_back(bp.second);
    }
    std::vector<double> latency;
    std::vector<SoloStats> stats(partitions.size());
    for (int b : batches) {
      for (size_t pi = 0; pi < partitions.size(); ++pi) {
        auto it = table.find({b, partitions[pi]});
        if (it == table.end()) {
          throw DataError("missing grid entry " +
                          Key(model, b, partitions[pi]));
        }
        latency.push_back(it->second.latency);
        if (b == batches.front()) {
          stats[pi] = it->second.stats;
        } else if (std::abs(stats[pi].l2_util - it->second.stats.l2_util) >
                       1e-9 ||
                   std::abs(stats[pi].mem_bw_util -
                            it->second.stats.mem_bw_util) > 1e-9) {
          throw DataError("utilization differs across batches at " +
                          Key(model, b, partitions[pi]));
        }
      }
    }
    if (latency.size() != table.size()) {
      throw DataError("partition grid of '" + model +
                      "' differs between batch sizes");
    }
    set.Add(LatencyProfile(model, std::move(batches), std::move(partitions),
                           std::move(latency), std::move(stats)));
  }
  return set;
}

ProfileSet LoadProfilesFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open profile file '" + path + "'");
  return LoadProfiles(in);
}

void WriteProfiles(std::ostream& out, const ProfileSet& profiles) {
  out << "model,batch,partition_pct,latency_ms,l2_util,mem_bw_util\n";
  std::ostringstream row;
  row << std::setprecision(17);
  for (const auto& [name, profile] : profiles) {
    auto batches = profile.batches();
    auto partitions = profile.partitions();
    for (size_t bi = 0; bi < batches.size(); ++bi) {
      for (size_t pi = 0; pi < partitions.size(); ++pi) {
        const SoloStats& s = profile.Stats(partitions[pi]);
        row.str("");
        row << name << ',' << batches[bi] << ',' << partitions[pi] << ','
            << profile.LatencyAt(bi, pi) << ',' << s.l2_util << ','
            << s.mem_bw_util << '\n';
        out << row.str();
      }
    }
  }
}

double LookupLatency(const LatencyProfile& profile, int batch, int partition) {
  size_t pi = profile.PartitionIndex(partition);
  auto batches = profile.batches();
  auto it = std::lower_bound(batches.begin(), batches.end(), batch);
  if (it == batches.end()) {
    throw CapacityError("batch " + std::to_string(batch) +
                        " exceeds the largest profiled batch " +
                        std::to_string(profile.max_batch()) + " of '" +
                        profile.model() + "'");
  }
  return profile.LatencyAt(static_cast<size_t>(it - batches.begin()), pi);
}

std::optional<int> MaxFeasibleBatch(const LatencyProfile& profile,
                                    int partition, double slo_ms,
                                    double overhead_ms) {
  size_t pi = profile.PartitionIndex(partition);
  auto batches = profile.batches();
  for (size_t bi = batches.size(); bi-- > 0;) {
    if (2.0 * profile.LatencyAt(bi, pi) + overhead_ms <=
        slo_ms + kFeasibilityEps) {
      return batches[bi];
    }
  }
  return std::nullopt;
}

double CapacityCurve::RateAt(int partition) const {
  auto it = std::find(partitions.begin(), partitions.end(), partition);
  if (it == partitions.end()) {
    throw GridError("partition " + std::to_string(partition) +
                    "% is not on the capacity curve of '" + model + "'");
  }
  return max_rate[static_cast<size_t>(it - partitions.begin())];
}

CapacityCurve ComputeCapacityCurve(const LatencyProfile& profile,
                                   double slo_ms) {
  return ComputeCapacityCurve(profile, slo_ms, profile.partitions());
}

CapacityCurve ComputeCapacityCurve(const LatencyProfile& profile,
                                   double slo_ms, std::span<const int> grid) {
  CapacityCurve curve;
  curve.model = profile.model();
  for (int p : grid) {
    double rate = 0.0;
    if (auto b = MaxFeasibleBatch(profile, p, slo_ms, 0.0)) {
      // b / L is non-decreasing in b, so the largest feasible batch wins.
      rate = 1000.0 * *b / LookupLatency(profile, *b, p);
    }
    curve.partitions.push_back(p);
    curve.max_rate.push_back(rate);
  }
  return curve;
}

int MaxEfficientPartition(const CapacityCurve& curve) {
  const auto& p = curve.partitions;
  const auto& r = curve.max_rate;
  if (p.empty()) throw DataError("empty capacity curve");
  if (p.size() < 3) return p.back();

  double top = *std::max_element(r.begin(), r.end());
  double span = static_cast<double>(p.back() - p.front());
  auto x = [&](size_t i) { return (p[i] - p.front()) / span; };
  auto y = [&](size_t i) { return top > 0.0 ? r[i] / top : 0.0; };

  int best = p[1];
  double best_kappa = -1.0;
  for (size_t i = 1; i + 1 < p.size(); ++i) {
    double hl = x(i) - x(i - 1);
    double hr = x(i + 1) - x(i);
    double second =
        2.0 * ((y(i + 1) - y(i)) / hr - (y(i) - y(i - 1)) / hl) / (hl + hr);
    double kappa = std::max(0.0, -second);
    if (kappa > best_kappa + kCurvatureTieEps) {
      best_kappa = kappa;
      best = p[i];
    }
  }
  return best;
}

RequiredPartition MinRequiredPartition(const CapacityCurve& curve,
                                       double rate) {
  if (curve.partitions.empty()) throw DataError("empty capacity curve");
  for (size_t i = 0; i < curve.partitions.size(); ++i) {
    if (curve.max_rate[i] >= rate) return {curve.partitions[i], false};
  }
  return {curve.partitions.back(), true};
}

}  // namespace gpulet
