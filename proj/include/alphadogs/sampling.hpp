#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "alphadogs/errors.hpp"
#include "alphadogs/grid.hpp"
#include "alphadogs/rng.hpp"

namespace adogs {

// Standard deviation of a time-averaged estimate as a function of how many
// samples went into it.  Two flavours share the power-law form
// sigma(N) = amplitude * tau^-theta: for iid noise tau is the sample count,
// for the empirical fit tau is averaging time N * time_per_sample.
struct UncertaintyModel {
  enum class Kind { iid, empirical_sqrt };

  Kind kind = Kind::iid;
  double amplitude = 1.0;
  double theta = 0.5;
  double time_per_sample = 1.0;

  double sigma(std::int64_t samples) const {
    if (samples <= 0) return std::numeric_limits<double>::infinity();
    const double tau = kind == Kind::iid
                           ? static_cast<double>(samples)
                           : static_cast<double>(samples) * time_per_sample;
    return amplitude * std::pow(tau, -theta);
  }
};

// Everything needed to continue sampling a point where it left off: the
// point's private random stream plus whatever trajectory/accumulator data
// the objective needs.  Plain data, serialized as-is into run snapshots.
struct SampleState {
  RngStream rng;
  std::int64_t samples_taken = 0;
  std::int64_t transient_remaining = -1;  // -1: transient not yet started
  std::vector<double> extra;
};

// A noisy objective on the unit box [0,1]^n.  Estimates are running
// averages over all post-transient samples taken so far; extending a
// point's history never replays earlier samples.  Implementations must be
// safe to call concurrently on distinct SampleStates.
class StochasticObjective {
 public:
  virtual ~StochasticObjective() = default;

  virtual int dimension() const = 0;
  virtual const UncertaintyModel& uncertainty_model() const = 0;

  // Leading samples discarded once per point before averaging starts.
  virtual std::int64_t transient_samples() const { return 0; }

  // Draws `count` further samples at x and returns the estimate over the
  // point's whole post-transient history.
  virtual double extend(const Point& x, std::int64_t count,
                        SampleState& state) const = 0;

  // Noise-free objective value, when one is known in closed form.
  virtual std::optional<double> truth(const Point& x) const {
    (void)x;
    return std::nullopt;
  }
  virtual std::optional<double> truth_minimum() const { return std::nullopt; }
  virtual std::optional<Point> minimizer() const { return std::nullopt; }

  // Reporting-space mapping; the optimizer itself never leaves the unit box.
  virtual Point to_physical(const Point& x) const { return x; }
  virtual std::vector<std::string> coordinate_names() const {
    std::vector<std::string> names;
    for (int j = 0; j < dimension(); ++j)
      names.push_back("x" + std::to_string(j));
    return names;
  }
};

// Base for objectives whose estimate is the arithmetic mean of iid draws.
class MeanObjective : public StochasticObjective {
 public:
  double extend(const Point& x, std::int64_t count,
                SampleState& state) const final {
    if (count < 0)
      throw std::invalid_argument("extend: negative sample count");
    if (state.extra.empty()) state.extra.assign(1, 0.0);
    if (state.transient_remaining < 0)
      state.transient_remaining = transient_samples();
    while (state.transient_remaining > 0) {
      (void)draw_sample(x, state.rng);
      --state.transient_remaining;
    }
    double& sum = state.extra[0];
    for (std::int64_t k = 0; k < count; ++k) sum += draw_sample(x, state.rng);
    state.samples_taken += count;
    if (state.samples_taken == 0)
      return std::numeric_limits<double>::quiet_NaN();
    const double estimate = sum / static_cast<double>(state.samples_taken);
    if (!std::isfinite(estimate))
      throw NonFiniteState("extend: running mean is not finite");
    return estimate;
  }

  // One noisy draw of the objective at x.
  virtual double draw_sample(const Point& x, RngStream& rng) const = 0;
};

// One sampled location with its accumulated measurement.
struct EvaluatedPoint {
  Point location;  // unit-box coordinates
  std::int64_t sample_count = 0;
  double measurement = 0.0;
  double sigma = std::numeric_limits<double>::infinity();
  SampleState state;
};

// Starts a fresh measurement history at x with n0 samples, drawing from the
// given stream (each point owns exactly one stream for reproducibility).
inline EvaluatedPoint initial_measure(const StochasticObjective& objective,
                                      const Point& x, std::int64_t n0,
                                      RngStream stream) {
  if (n0 <= 0)
    throw std::invalid_argument("initial_measure: need at least one sample");
  if (x.size() != objective.dimension())
    throw std::invalid_argument("initial_measure: dimension mismatch");
  EvaluatedPoint ep;
  ep.location = x;
  ep.state.rng = stream;
  ep.measurement = objective.extend(x, n0, ep.state);
  ep.sample_count = ep.state.samples_taken;
  ep.sigma = objective.uncertainty_model().sigma(ep.sample_count);
  if (!std::isfinite(ep.measurement))
    throw SamplerFailure("initial_measure: non-finite estimate");
  return ep;
}

// Extends an existing history by n_delta samples in place.
inline void supplemental_measure(EvaluatedPoint& ep,
                                 const StochasticObjective& objective,
                                 std::int64_t n_delta) {
  if (n_delta <= 0)
    throw std::invalid_argument("supplemental_measure: need n_delta >= 1");
  ep.measurement = objective.extend(ep.location, n_delta, ep.state);
  ep.sample_count = ep.state.samples_taken;
  ep.sigma = objective.uncertainty_model().sigma(ep.sample_count);
  if (!std::isfinite(ep.measurement))
    throw SamplerFailure("supplemental_measure: non-finite estimate");
}

// One probe row of an uncertainty fit: averaging time, the spread actually
// observed across the ensemble there, and the fitted model's prediction.
struct UqProbe {
  double time = 0.0;
  double empirical_std = 0.0;
  double fitted = 0.0;
};

struct UqFitReport {
  std::vector<UqProbe> probes;
  double amplitude = 0.0;
  double relative_residual = 0.0;
  int ensemble_size = 0;
  bool low_confidence = false;  // fewer than 3 ensemble members
};

// Empirical A / sqrt(T) uncertainty fit: runs `ensemble_size` independent
// replicates at one probe point, extends each to the given sample counts,
// takes the cross-replicate standard deviation at every count, and fits the
// amplitude by least squares.  A deterministic objective fits A = 0.
inline UncertaintyModel fit_uq_model(
    const StochasticObjective& objective, int ensemble_size,
    const std::vector<std::int64_t>& probe_samples, std::uint64_t seed,
    const Point* probe_point = nullptr, UqFitReport* report = nullptr) {
  if (ensemble_size < 2)
    throw std::invalid_argument("fit_uq_model: need an ensemble of >= 2");
  if (probe_samples.empty())
    throw std::invalid_argument("fit_uq_model: no probe lengths");
  for (std::size_t j = 0; j < probe_samples.size(); ++j) {
    if (probe_samples[j] <= 0 ||
        (j > 0 && probe_samples[j] <= probe_samples[j - 1]))
      throw std::invalid_argument(
          "fit_uq_model: probe lengths must be positive and increasing");
  }

  Point x = probe_point
                ? *probe_point
                : Point::Constant(objective.dimension(), 0.5);
  if (x.size() != objective.dimension())
    throw std::invalid_argument("fit_uq_model: probe point dimension");

  const std::size_t np = probe_samples.size();
  std::vector<std::vector<double>> estimates(np,
                                             std::vector<double>(ensemble_size));
  for (int member = 0; member < ensemble_size; ++member) {
    SampleState st;
    st.rng = RngStream(seed, static_cast<std::uint64_t>(member));
    std::int64_t taken = 0;
    for (std::size_t j = 0; j < np; ++j) {
      estimates[j][member] =
          objective.extend(x, probe_samples[j] - taken, st);
      taken = probe_samples[j];
    }
  }

  const double h = objective.uncertainty_model().time_per_sample;
  double num = 0.0, den = 0.0;
  std::vector<UqProbe> probes(np);
  for (std::size_t j = 0; j < np; ++j) {
    double mean = 0.0;
    for (double e : estimates[j]) mean += e;
    mean /= ensemble_size;
    double var = 0.0;
    for (double e : estimates[j]) var += (e - mean) * (e - mean);
    var /= (ensemble_size - 1);
    const double sd = std::sqrt(var);
    const double time = static_cast<double>(probe_samples[j]) * h;
    probes[j].time = time;
    probes[j].empirical_std = sd;
    num += sd / std::sqrt(time);
    den += 1.0 / time;
  }
  const double amplitude = den > 0.0 ? num / den : 0.0;

  double res2 = 0.0, tot2 = 0.0;
  for (UqProbe& p : probes) {
    p.fitted = amplitude / std::sqrt(p.time);
    res2 += (p.empirical_std - p.fitted) * (p.empirical_std - p.fitted);
    tot2 += p.empirical_std * p.empirical_std;
  }

  if (report) {
    report->probes = std::move(probes);
    report->amplitude = amplitude;
    report->relative_residual = tot2 > 0.0 ? std::sqrt(res2 / tot2) : 0.0;
    report->ensemble_size = ensemble_size;
    report->low_confidence = ensemble_size < 3;
  }

  UncertaintyModel model;
  model.kind = UncertaintyModel::Kind::empirical_sqrt;
  model.amplitude = amplitude;
  model.theta = 0.5;
  model.time_per_sample = h;
  return model;
}

}  // namespace adogs
