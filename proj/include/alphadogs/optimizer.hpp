#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "alphadogs/errors.hpp"
#include "alphadogs/geometry.hpp"
#include "alphadogs/grid.hpp"
#include "alphadogs/regression.hpp"
#include "alphadogs/rng.hpp"
#include "alphadogs/sampling.hpp"
#include "alphadogs/search.hpp"

namespace adogs {

struct AlphaDogsParams {
  double alpha0 = 0.5;       // initial uncertainty weight
  double alpha_delta = 0.5;  // added per grid refinement
  double K0 = 0.5;           // initial exploration weight, doubled on refine
  int ell0 = 3;              // initial grid level
  double beta_strict = 4.0;  // strictness bound for the regression
  double gamma = 100.0;      // supplemental cap factor: N_j < gamma 2^level
  std::int64_t N0 = 1;       // samples for a fresh point
  std::int64_t N_delta = 1;  // samples per supplemental iteration
  double scale_lower = 1e-3;  // measurement scale clamp
  double scale_upper = 1e3;

  void validate() const {
    if (!(alpha0 > 0.0) || !(alpha_delta > 0.0) || !(K0 > 0.0) ||
        !(beta_strict > 0.0) || !(gamma >= 1.0))
      throw std::invalid_argument("AlphaDogsParams: positive parameters");
    if (ell0 < 0 || N0 < 1 || N_delta < 1)
      throw std::invalid_argument("AlphaDogsParams: ell0 >= 0, N0, Ndelta >= 1");
    if (!(scale_lower > 0.0) || !(scale_upper >= scale_lower))
      throw std::invalid_argument("AlphaDogsParams: bad scale clamp");
  }
};

// Deterministic baseline: fixed exploration weight, fixed per-point
// sampling length, interpolation instead of regression, and no
// uncertainty-driven branches (evaluate new grid points, refine on
// collision).
struct DeltaDogsConfig {
  double K = 0.5;
  int ell0 = 3;
  std::int64_t samples_per_point = 1;

  void validate() const {
    if (!(K > 0.0) || ell0 < 0 || samples_per_point < 1)
      throw std::invalid_argument("DeltaDogsConfig: bad parameters");
  }
};

enum class BranchKind { initialization, supplemental, identifying, refinement };

inline const char* branch_name(BranchKind b) {
  switch (b) {
    case BranchKind::initialization:
      return "initialization";
    case BranchKind::supplemental:
      return "supplemental";
    case BranchKind::identifying:
      return "identifying";
    case BranchKind::refinement:
      return "refinement";
  }
  return "?";
}

struct OptimizerState {
  std::vector<EvaluatedPoint> points;  // S^k, unit-box coordinates
  GridLevel grid;                      // current level ell
  double alpha_k = 0.5;
  double K_k = 0.5;
  int refinement_count = 0;
  std::int64_t iteration = 0;
  std::int64_t cumulative_samples = 0;
  std::uint64_t seed = 0;
  std::uint64_t next_stream = 0;  // per-point stream allocator

  explicit OptimizerState(GridLevel g) : grid(std::move(g)) {}
};

struct IterationRecord {
  std::int64_t iteration = 0;
  BranchKind branch = BranchKind::initialization;
  int point_count = 0;
  std::int64_t cumulative_samples = 0;
  int target_index = -1;  // point sampled this iteration; -1 on refinement
  double scale = 1.0;     // measurement scale r_s used by the searches
  Point candidate;        // unit coordinates of the current best guess
  double candidate_value = 0.0;
  double candidate_sigma = 0.0;
  std::optional<double> regret;
  std::optional<double> regret_best;  // running minimum over the history
  std::optional<double> reference_error;
  double alpha = 0.0;
  double K = 0.0;
  int level = 0;
};

struct CandidateReport {
  int index = -1;
  Point location;
  double value = 0.0;
  double sigma = 0.0;
  std::optional<double> regret;
  std::optional<double> reference_error;
};

// sigma0 / sqrt(k): the uncertainty an ideal sampler would reach had every
// sample been spent at a single point.
inline double reference_error(double sigma0, std::int64_t cumulative_samples) {
  if (cumulative_samples < 1)
    throw std::invalid_argument("reference_error: need >= 1 sample");
  return sigma0 / std::sqrt(static_cast<double>(cumulative_samples));
}

// Best measured point under the current uncertainty weight:
// argmin over S^k of y_i + alpha sigma_i (exact scan, lowest index wins).
inline CandidateReport candidate(const OptimizerState& state,
                                 const StochasticObjective& objective) {
  if (state.points.empty())
    throw std::invalid_argument("candidate: no points");
  CandidateReport best;
  double best_key = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < state.points.size(); ++i) {
    const EvaluatedPoint& ep = state.points[i];
    const double key = ep.measurement + state.alpha_k * ep.sigma;
    if (key < best_key) {
      best_key = key;
      best.index = static_cast<int>(i);
    }
  }
  const EvaluatedPoint& ep = state.points[static_cast<std::size_t>(best.index)];
  best.location = ep.location;
  best.value = ep.measurement;
  best.sigma = ep.sigma;
  if (objective.truth(ep.location) && objective.truth_minimum())
    best.regret = *objective.truth(ep.location) - *objective.truth_minimum();
  if (state.cumulative_samples > 0)
    best.reference_error =
        objective.uncertainty_model().sigma(state.cumulative_samples);
  return best;
}

namespace detail {

inline std::vector<Point> box_corners(int dim) {
  std::vector<Point> corners;
  corners.reserve(std::size_t{1} << dim);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << dim); ++mask) {
    Point c(dim);
    for (int j = 0; j < dim; ++j) c[j] = (mask >> j) & 1 ? 1.0 : 0.0;
    corners.push_back(c);
  }
  return corners;
}

inline bool contains_location(const std::vector<EvaluatedPoint>& points,
                              const Point& x) {
  for (const EvaluatedPoint& ep : points)
    if (ep.location == x) return true;  // grid nodes are exact dyadics
  return false;
}

inline IterationRecord make_record(const OptimizerState& state,
                                   const StochasticObjective& objective,
                                   BranchKind branch, int target, double scale,
                                   std::optional<double> prev_best_regret) {
  IterationRecord rec;
  rec.iteration = state.iteration;
  rec.branch = branch;
  rec.point_count = static_cast<int>(state.points.size());
  rec.cumulative_samples = state.cumulative_samples;
  rec.target_index = target;
  rec.scale = scale;
  const CandidateReport cand = candidate(state, objective);
  rec.candidate = cand.location;
  rec.candidate_value = cand.value;
  rec.candidate_sigma = cand.sigma;
  rec.regret = cand.regret;
  if (cand.regret) {
    rec.regret_best = prev_best_regret
                          ? std::min(*prev_best_regret, *cand.regret)
                          : *cand.regret;
  }
  rec.reference_error = cand.reference_error;
  rec.alpha = state.alpha_k;
  rec.K = state.K_k;
  rec.level = state.grid.level();
  return rec;
}

}  // namespace detail

// Measures the 2^n box corners plus any user points (quantized onto the
// initial grid, deduplicated) with N0 samples each.
inline OptimizerState initialize(const StochasticObjective& objective,
                                 const AlphaDogsParams& params,
                                 const std::vector<Point>& user_points = {},
                                 std::uint64_t seed = 0) {
  params.validate();
  const int dim = objective.dimension();
  if (dim < 1 || dim > Triangulation::kMaxDimension)
    throw std::invalid_argument("initialize: dimension must be in [1, 6]");

  OptimizerState state(GridLevel::unit(dim, params.ell0));
  state.alpha_k = params.alpha0;
  state.K_k = params.K0;
  state.seed = seed;

  std::vector<Point> locations = detail::box_corners(dim);
  for (const Point& u : user_points) {
    if (u.size() != dim)
      throw std::invalid_argument("initialize: user point dimension");
    const Point q = state.grid.quantize(u);
    bool duplicate = false;
    for (const Point& existing : locations)
      if (existing == q) duplicate = true;
    if (!duplicate) locations.push_back(q);
  }

  for (const Point& x : locations) {
    EvaluatedPoint ep = initial_measure(objective, x, params.N0,
                                        RngStream(seed, state.next_stream));
    ++state.next_stream;
    state.cumulative_samples += params.N0;
    state.points.push_back(std::move(ep));
  }
  return state;
}

// Carries reusable per-run scratch between step() calls: the incremental
// triangulation and the regression smoothing warm start.  Optional; a null
// workspace just rebuilds from scratch every iteration.
struct StepWorkspace {
  std::optional<Triangulation> triangulation;
  std::size_t built_points = 0;
  std::optional<double> rho_hint;
  std::optional<double> best_regret;
};

namespace detail {

inline const Triangulation& current_triangulation(
    const OptimizerState& state, StepWorkspace& ws) {
  std::vector<Point> locs;
  locs.reserve(state.points.size());
  for (const EvaluatedPoint& ep : state.points) locs.push_back(ep.location);
  if (!ws.triangulation || ws.built_points > locs.size()) {
    ws.triangulation = Triangulation::build(locs);
    ws.built_points = locs.size();
    return *ws.triangulation;
  }
  // Catch up on points appended since the last call; on any geometric
  // trouble fall back to a clean batch rebuild.
  try {
    for (std::size_t i = ws.built_points; i < locs.size(); ++i)
      ws.triangulation->insert(locs[i]);
  } catch (const std::exception&) {
    ws.triangulation = Triangulation::build(locs);
  }
  ws.built_points = locs.size();
  return *ws.triangulation;
}

}  // namespace detail

// One full iteration: fit, search, branch, execute.  Exactly one of the
// three branches runs; refinement never samples, supplemental never adds
// points.
inline IterationRecord step(OptimizerState& state,
                            const StochasticObjective& objective,
                            const AlphaDogsParams& params,
                            StepWorkspace* workspace = nullptr) {
  params.validate();
  StepWorkspace local;
  StepWorkspace& ws = workspace ? *workspace : local;

  const auto m = static_cast<Eigen::Index>(state.points.size());
  Eigen::VectorXd values(m), sigmas(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    values[i] = state.points[static_cast<std::size_t>(i)].measurement;
    sigmas[i] = state.points[static_cast<std::size_t>(i)].sigma;
  }
  const double rs =
      measurement_scale(values, params.scale_lower, params.scale_upper);

  WeightedDataset ds;
  ds.points.reserve(state.points.size());
  for (const EvaluatedPoint& ep : state.points) ds.points.push_back(ep.location);
  ds.values = rs * values;
  ds.sigmas = rs * sigmas;
  RegressionModel fit = fit_regression(ds, params.beta_strict, ws.rho_hint);
  ws.rho_hint = fit.rho();

  const Triangulation& tri = detail::current_triangulation(state, ws);

  SearchContext ctx;
  ctx.model = &fit;
  ctx.triangulation = &tri;
  ctx.scaled_values = ds.values;
  ctx.scaled_sigmas = ds.sigmas;
  ctx.K = state.K_k;
  ctx.alpha = state.alpha_k;

  const DiscreteSearchResult sd = discrete_search(ctx);
  const ContinuousSearchResult sc = continuous_search(ctx);
  const Point zq = state.grid.quantize(sc.location);
  const bool member = detail::contains_location(state.points, zq);

  const IterationDecision decision = classify_iteration(
      sc.value, sd,
      state.points[static_cast<std::size_t>(sd.index)].sample_count,
      params.gamma, state.grid.level(), member, zq);

  BranchKind branch = BranchKind::refinement;
  int target = -1;
  switch (decision.kind) {
    case IterationKind::supplemental: {
      target = decision.supplement_index;
      supplemental_measure(state.points[static_cast<std::size_t>(target)],
                           objective, params.N_delta);
      state.cumulative_samples += params.N_delta;
      branch = BranchKind::supplemental;
      break;
    }
    case IterationKind::identifying: {
      EvaluatedPoint ep =
          initial_measure(objective, decision.identify_location, params.N0,
                          RngStream(state.seed, state.next_stream));
      ++state.next_stream;
      state.cumulative_samples += params.N0;
      state.points.push_back(std::move(ep));
      target = static_cast<int>(state.points.size()) - 1;
      branch = BranchKind::identifying;
      break;
    }
    case IterationKind::refinement: {
      if (state.grid.level() >= GridLevel::kMaxLevel)
        throw OptimizationFailure(
            "step: refinement past the finest representable grid");
      state.alpha_k += params.alpha_delta;
      state.K_k *= 2.0;
      state.grid = state.grid.refined();
      ++state.refinement_count;
      branch = BranchKind::refinement;
      break;
    }
  }
  ++state.iteration;

  IterationRecord rec = detail::make_record(state, objective, branch, target,
                                            rs, ws.best_regret);
  ws.best_regret = rec.regret_best;
  return rec;
}

enum class StopReason {
  max_iterations,
  budget_exhausted,
  tolerance_met,
  // The grid cannot be refined past GridLevel::kMaxLevel; a run that
  // keeps landing on existing points at that level has converged to
  // machine resolution and is stopped rather than stepped into a throw.
  level_limit,
  // Identified points got so close together that the triangulation's
  // degeneracy guards refuse them.  Only reported once the grid is
  // already deep (see kResolutionStopLevel); at coarse levels the same
  // exceptions indicate a genuine defect and propagate.
  resolution_limit,
};

inline const char* stop_name(StopReason r) {
  switch (r) {
    case StopReason::max_iterations:
      return "max_iterations";
    case StopReason::budget_exhausted:
      return "budget_exhausted";
    case StopReason::tolerance_met:
      return "tolerance_met";
    case StopReason::level_limit:
      return "level_limit";
    case StopReason::resolution_limit:
      return "resolution_limit";
  }
  return "?";
}

// Grid spacing 2^-20 is far below any spacing the search can stall at
// for healthy geometry, and far above the ~1e-8 point separations where
// circumsphere predicates degrade.
inline constexpr int kResolutionStopLevel = 20;

// Any combination of limits; the run stops at the first one satisfied.
// The tolerance pair stops when the candidate measurement is within
// measure_tol of the known optimum AND its uncertainty is at most sigma_tol.
struct StoppingRule {
  std::optional<std::int64_t> max_iterations;
  std::optional<std::int64_t> max_samples;
  std::optional<double> measure_tol;
  std::optional<double> sigma_tol;
  double f_star = 0.0;

  static StoppingRule iterations(std::int64_t n) {
    StoppingRule r;
    r.max_iterations = n;
    return r;
  }
  static StoppingRule samples(std::int64_t n) {
    StoppingRule r;
    r.max_samples = n;
    return r;
  }
  static StoppingRule tolerance(double measure, double sigma,
                                double f_star = 0.0) {
    StoppingRule r;
    r.measure_tol = measure;
    r.sigma_tol = sigma;
    r.f_star = f_star;
    return r;
  }

  void validate() const {
    if (!max_iterations && !max_samples && !measure_tol)
      throw std::invalid_argument("StoppingRule: no stopping condition");
    if (bool(measure_tol) != bool(sigma_tol))
      throw std::invalid_argument(
          "StoppingRule: tolerance needs both measure_tol and sigma_tol");
  }
};

// Warm-start scalars that a snapshot carries along with the state so a
// resumed run retraces the uninterrupted one bit for bit.
struct ResumeInfo {
  std::optional<double> rho_hint;
  std::optional<double> best_regret;
};

struct RunResult {
  OptimizerState state;
  std::vector<IterationRecord> history;  // history[0] is the initialization
  StopReason reason = StopReason::max_iterations;
  ResumeInfo resume;  // pass to run_continue to pick up where this stopped
};

namespace detail {

inline std::optional<StopReason> should_stop(const OptimizerState& state,
                                             const StochasticObjective& obj,
                                             const StoppingRule& rule) {
  if (rule.measure_tol) {
    const CandidateReport c = candidate(state, obj);
    if (std::abs(c.value - rule.f_star) <= *rule.measure_tol &&
        c.sigma <= *rule.sigma_tol)
      return StopReason::tolerance_met;
  }
  if (rule.max_samples && state.cumulative_samples >= *rule.max_samples)
    return StopReason::budget_exhausted;
  if (rule.max_iterations && state.iteration >= *rule.max_iterations)
    return StopReason::max_iterations;
  if (state.grid.level() >= GridLevel::kMaxLevel)
    return StopReason::level_limit;
  return std::nullopt;
}

}  // namespace detail

namespace detail {

// Shared driver for fresh and resumed runs: steps until the rule stops,
// downgrading deep-grid geometric degeneracies to a resolution stop.
inline void drive(RunResult& result, StepWorkspace& ws,
                  const StochasticObjective& objective,
                  const AlphaDogsParams& params, const StoppingRule& rule) {
  for (bool running = true; running;) {
    if (auto stop = should_stop(result.state, objective, rule)) {
      result.reason = *stop;
      break;
    }
    try {
      result.history.push_back(step(result.state, objective, params, &ws));
    } catch (const DegeneratePointSet&) {
      if (result.state.grid.level() < kResolutionStopLevel) throw;
      result.reason = StopReason::resolution_limit;
      running = false;
    } catch (const DegenerateSimplex&) {
      if (result.state.grid.level() < kResolutionStopLevel) throw;
      result.reason = StopReason::resolution_limit;
      running = false;
    } catch (const OutsideHull&) {
      if (result.state.grid.level() < kResolutionStopLevel) throw;
      result.reason = StopReason::resolution_limit;
      running = false;
    }
  }
  result.resume = ResumeInfo{ws.rho_hint, ws.best_regret};
}

}  // namespace detail

inline RunResult run(const StochasticObjective& objective,
                     const AlphaDogsParams& params, const StoppingRule& rule,
                     const std::vector<Point>& user_points = {},
                     std::uint64_t seed = 0) {
  rule.validate();
  RunResult result{initialize(objective, params, user_points, seed), {}, {}};
  StepWorkspace ws;
  result.history.push_back(detail::make_record(
      result.state, objective, BranchKind::initialization, -1, 1.0,
      std::nullopt));
  ws.best_regret = result.history.back().regret_best;
  detail::drive(result, ws, objective, params, rule);
  return result;
}

// Continues a restored state under a (possibly new) stopping rule.  The
// returned history holds only the records produced after the resume;
// callers append them to whatever they already logged.
inline RunResult run_continue(OptimizerState state,
                              const StochasticObjective& objective,
                              const AlphaDogsParams& params,
                              const StoppingRule& rule,
                              const ResumeInfo& resume = {}) {
  rule.validate();
  params.validate();
  RunResult result{std::move(state), {}, {}};
  StepWorkspace ws;
  ws.rho_hint = resume.rho_hint;
  ws.best_regret = resume.best_regret;
  detail::drive(result, ws, objective, params, rule);
  return result;
}

// The deterministic baseline loop.  Every evaluated point gets the same
// fixed sampling length; the surrogate interpolates the measurements
// (sigmas handed to the fit are zero); a continuous-search collision with
// an existing point refines the grid, leaving K unchanged.
inline RunResult run_delta_dogs(const StochasticObjective& objective,
                                const DeltaDogsConfig& config,
                                const StoppingRule& rule,
                                const std::vector<Point>& user_points = {},
                                std::uint64_t seed = 0) {
  config.validate();
  rule.validate();
  AlphaDogsParams init_params;  // reused only for initialize()
  init_params.ell0 = config.ell0;
  init_params.K0 = config.K;
  init_params.N0 = config.samples_per_point;

  RunResult result{initialize(objective, init_params, user_points, seed),
                   {},
                   {}};
  OptimizerState& state = result.state;
  state.alpha_k = 0.0;  // candidate reduces to argmin y
  state.K_k = config.K;

  StepWorkspace ws;
  result.history.push_back(detail::make_record(
      state, objective, BranchKind::initialization, -1, 1.0, std::nullopt));
  ws.best_regret = result.history.back().regret_best;

  for (;;) {
    if (auto stop = detail::should_stop(state, objective, rule)) {
      result.reason = *stop;
      return result;
    }

    const auto m = static_cast<Eigen::Index>(state.points.size());
    WeightedDataset ds;
    ds.points.reserve(state.points.size());
    ds.values.resize(m);
    ds.sigmas = Eigen::VectorXd::Zero(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      ds.points.push_back(state.points[static_cast<std::size_t>(i)].location);
      ds.values[i] = state.points[static_cast<std::size_t>(i)].measurement;
    }
    RegressionModel fit = fit_regression(ds);

    Point z;
    try {
      const Triangulation& tri = detail::current_triangulation(state, ws);
      SearchContext ctx;
      ctx.model = &fit;
      ctx.triangulation = &tri;
      ctx.scaled_values = ds.values;
      ctx.scaled_sigmas = ds.sigmas;
      ctx.K = config.K;
      ctx.alpha = 0.0;
      z = continuous_search(ctx).location;
    } catch (const DegeneratePointSet&) {
      if (state.grid.level() < kResolutionStopLevel) throw;
      result.reason = StopReason::resolution_limit;
      return result;
    } catch (const DegenerateSimplex&) {
      if (state.grid.level() < kResolutionStopLevel) throw;
      result.reason = StopReason::resolution_limit;
      return result;
    } catch (const OutsideHull&) {
      if (state.grid.level() < kResolutionStopLevel) throw;
      result.reason = StopReason::resolution_limit;
      return result;
    }
    const Point zq = state.grid.quantize(z);

    BranchKind branch;
    int target = -1;
    if (!detail::contains_location(state.points, zq)) {
      EvaluatedPoint ep =
          initial_measure(objective, zq, config.samples_per_point,
                          RngStream(state.seed, state.next_stream));
      ++state.next_stream;
      state.cumulative_samples += config.samples_per_point;
      state.points.push_back(std::move(ep));
      target = static_cast<int>(state.points.size()) - 1;
      branch = BranchKind::identifying;
    } else {
      if (state.grid.level() >= GridLevel::kMaxLevel)
        throw OptimizationFailure(
            "run_delta_dogs: refinement past the finest representable grid");
      state.grid = state.grid.refined();
      ++state.refinement_count;
      branch = BranchKind::refinement;
    }
    ++state.iteration;

    result.history.push_back(detail::make_record(state, objective, branch,
                                                 target, 1.0, ws.best_regret));
    ws.best_regret = result.history.back().regret_best;
  }
}

}  // namespace adogs
