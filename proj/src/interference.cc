#include "gpulet/interference.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>

#include "csv_util.h"
#include "gpulet/errors.h"

namespace gpulet {

double InterferenceModel::PredictRaw(const SoloStats& a,
                                     const SoloStats& b) const {
  const auto& c = coeffs_;
  return c[0] * a.l2_util + c[1] * b.l2_util + c[2] * a.mem_bw_util +
         c[3] * b.mem_bw_util + c[4];
}

double InterferenceModel::Predict(const SoloStats& a,
                                  const SoloStats& b) const {
  return std::max(1.0, PredictRaw(a, b));
}

double FitResult::ErrorPercentile(double q) const {
  if (validation_errors.empty()) return 0.0;
  q = std::clamp(q, 0.0, 1.0);
  auto rank = static_cast<size_t>(
      std::ceil(q * static_cast<double>(validation_errors.size())));
  return validation_errors[rank == 0 ? 0 : rank - 1];
}

InterferenceModel FitLeastSquares(std::span<const CoRunSample> samples) {
  if (samples.size() < 5) {
    throw FitError("need at least 5 co-run samples to fit 5 coefficients, got " +
                   std::to_string(samples.size()));
  }
  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd x(n, 5);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const CoRunSample& s = samples[static_cast<size_t>(i)];
    x.row(i) << s.l2_a, s.l2_b, s.mem_a, s.mem_b, 1.0;
    y(i) = s.observed_factor;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < 5) {
    throw FitError(
        "co-run samples are rank deficient (rank " +
        std::to_string(qr.rank()) +
        " < 5); collect samples with more diverse utilizations");
  }
  Eigen::VectorXd c = qr.solve(y);
  return InterferenceModel({c(0), c(1), c(2), c(3), c(4)});
}

FitResult FitInterference(std::span<const CoRunSample> samples,
                          double train_fraction, uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    throw ConfigError("train fraction must be in (0, 1]");
  }
  std::vector<CoRunSample> shuffled(samples.begin(), samples.end());
  std::mt19937_64 rng(seed);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  auto train = static_cast<size_t>(
      std::llround(train_fraction * static_cast<double>(shuffled.size())));
  std::span<const CoRunSample> all(shuffled);

  FitResult result;
  result.model = FitLeastSquares(all.first(train));
  for (const CoRunSample& s : all.subspan(train)) {
    double pred = result.model.PredictRaw({s.l2_a, s.mem_a}, {s.l2_b, s.mem_b});
    result.validation_errors.push_back(std::abs(pred - s.observed_factor) /
                                       s.observed_factor);
  }
  std::sort(result.validation_errors.begin(), result.validation_errors.end());
  return result;
}

std::vector<CoRunSample> GenerateCoRunSamples(const InterferenceModel& planted,
                                              size_t count, double noise_sigma,
                                              uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> util(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, noise_sigma);
  std::vector<CoRunSample> out;
  out.reserve(count);
  while (out.size() < count) {
    CoRunSample s;
    s.l2_a = util(rng);
    s.l2_b = util(rng);
    s.mem_a = util(rng);
    s.mem_b = util(rng);
    double truth = planted.PredictRaw({s.l2_a, s.mem_a}, {s.l2_b, s.mem_b});
    double eps = noise_sigma > 0.0 ? noise(rng) : 0.0;
    s.observed_factor = truth * (1.0 + eps);
    // Observed slowdowns are strictly positive.
    if (s.observed_factor <= 0.0) continue;
    out.push_back(s);
  }
  return out;
}

double OverheadMs(const InterferenceModel& model, const LatencyProfile& self,
                  const LatencyProfile* partner, int batch, int partition,
                  int partner_partition) {
  if (partner == nullptr) return 0.0;
  double factor = model.Predict(self.Stats(partition),
                                partner->Stats(partner_partition));
  return LookupLatency(self, batch, partition) * (factor - 1.0);
}

FactorFn PredictedFactor(InterferenceModel model) {
  return [model](const LatencyProfile& self, int self_size,
                 const LatencyProfile& partner, int partner_size) {
    return model.Predict(self.Stats(self_size), partner.Stats(partner_size));
  };
}

double FactorTable::Lookup(const std::string& self,
                           const std::string& partner) const {
  auto it = factors.find({self, partner});
  return it == factors.end() ? default_factor : it->second;
}

FactorFn TableFactor(FactorTable table) {
  return [table = std::move(table)](const LatencyProfile& self, int,
                                    const LatencyProfile& partner, int) {
    return table.Lookup(self.model(), partner.model());
  };
}

std::vector<CoRunSample> LoadCoRunSamples(std::istream& in) {
  const std::string source = "co-run samples";
  std::vector<CoRunSample> out;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::IsBlankOrComment(line)) continue;
    auto f = csv::SplitRow(line);
    if (!header_seen) {
      const std::vector<std::string> expected = {"l2_a", "l2_b", "mem_a",
                                                 "mem_b", "observed_factor"};
      if (f != expected) {
        throw ParseError(csv::Where(source, line_no) +
                         ": missing header 'l2_a,l2_b,mem_a,mem_b,"
                         "observed_factor'");
      }
      header_seen = true;
      continue;
    }
    if (f.size() != 5) {
      throw ParseError(csv::Where(source, line_no) +
                       ": expected 5 fields, got " + std::to_string(f.size()));
    }
    CoRunSample s{csv::ParseDouble(f[0], source, line_no),
                  csv::ParseDouble(f[1], source, line_no),
                  csv::ParseDouble(f[2], source, line_no),
                  csv::ParseDouble(f[3], source, line_no),
                  csv::ParseDouble(f[4], source, line_no)};
    for (double u : {s.l2_a, s.l2_b, s.mem_a, s.mem_b}) {
      if (!(u >= 0.0 && u <= 1.0)) {
        throw DataError(csv::Where(source, line_no) +
                        ": utilization outside [0,1]");
      }
    }
    if (!(s.observed_factor > 0.0)) {
      throw DataError(csv::Where(source, line_no) +
                      ": observed factor must be positive");
    }
    out.push_back(s);
  }
  if (!header_seen) throw ParseError(source + ": empty file");
  return out;
}

void WriteCoRunSamples(std::ostream& out,
                       std::span<const CoRunSample> samples) {
  out << "l2_a,l2_b,mem_a,mem_b,observed_factor\n" << std::setprecision(17);
  for (const CoRunSample& s : samples) {
    out << s.l2_a << ',' << s.l2_b << ',' << s.mem_a << ',' << s.mem_b << ','
        << s.observed_factor << '\n';
  }
}

}  // namespace gpulet
