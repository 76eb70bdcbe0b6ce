#ifndef GPULET_INTERFERENCE_H_
#define GPULET_INTERFERENCE_H_

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gpulet/profile.h"

namespace gpulet {

// One observed co-run: solo-run counters of the measured model (a) and its
// co-runner (b), and the measured slowdown of a.
struct CoRunSample {
  double l2_a = 0.0;
  double l2_b = 0.0;
  double mem_a = 0.0;
  double mem_b = 0.0;
  double observed_factor = 1.0;
};

// factor = c1*l2_a + c2*l2_b + c3*mem_a + c4*mem_b + c5
class InterferenceModel {
 public:
  InterferenceModel() : coeffs_{0.0, 0.0, 0.0, 0.0, 1.0} {}
  explicit InterferenceModel(std::array<double, 5> coeffs) : coeffs_(coeffs) {}

  const std::array<double, 5>& coeffs() const { return coeffs_; }

  double PredictRaw(const SoloStats& a, const SoloStats& b) const;
  // Raw prediction clamped below at 1: co-location never speeds a model up.
  double Predict(const SoloStats& a, const SoloStats& b) const;

 private:
  std::array<double, 5> coeffs_;
};

struct FitResult {
  InterferenceModel model;
  // Relative errors |pred - obs| / obs on the validation split, ascending.
  std::vector<double> validation_errors;

  // Error at quantile q in [0, 1] (nearest-rank).
  double ErrorPercentile(double q) const;
};

// Ordinary least squares over all samples. Throws FitError when fewer than
// five samples are given or the design matrix is rank deficient.
InterferenceModel FitLeastSquares(std::span<const CoRunSample> samples);

// Shuffles with `seed`, fits on the first `train_fraction` of the samples and
// reports the relative-error distribution on the rest.
FitResult FitInterference(std::span<const CoRunSample> samples,
                          double train_fraction, uint64_t seed);

// Samples drawn from a planted model with uniform utilizations in [0, 1] and
// multiplicative Gaussian noise of relative standard deviation `noise_sigma`.
std::vector<CoRunSample> GenerateCoRunSamples(const InterferenceModel& planted,
                                              size_t count, double noise_sigma,
                                              uint64_t seed);

// Additional latency L(b, p) * (factor - 1) of `self` at partition `p` when
// `partner` runs on a sibling gpulet of size `partner_partition`. Zero when
// there is no partner.
double OverheadMs(const InterferenceModel& model, const LatencyProfile& self,
                  const LatencyProfile* partner, int batch, int partition,
                  int partner_partition);

// Slowdown of `self` (at `self_size`) caused by `partner` (at `partner_size`).
using FactorFn = std::function<double(const LatencyProfile& self, int self_size,
                                      const LatencyProfile& partner,
                                      int partner_size)>;

FactorFn PredictedFactor(InterferenceModel model);

// Per model-pair slowdowns, used as simulation ground truth independent of
// the fitted model. Pairs are ordered (self, partner); missing pairs use
// `default_factor`.
struct FactorTable {
  std::map<std::pair<std::string, std::string>, double> factors;
  double default_factor = 1.0;

  double Lookup(const std::string& self, const std::string& partner) const;
};

FactorFn TableFactor(FactorTable table);

std::vector<CoRunSample> LoadCoRunSamples(std::istream& in);
void WriteCoRunSamples(std::ostream& out,
                       std::span<const CoRunSample> samples);

}  // namespace gpulet

#endif  // GPULET_INTERFERENCE_H_
