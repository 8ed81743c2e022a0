#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "alphadogs/optimizer.hpp"
#include "alphadogs/sampling.hpp"

// Machine-readable result emission: tab-separated tables with a schema
// comment, lossless JSON state snapshots, and the rank statistic used by
// the baseline comparison.  All numeric cells are printed with 17
// significant digits so a parsed-back value is bit-identical, and every
// formatter rejects non-finite cells up front.

namespace adogs {

inline constexpr const char* kSchemaHeader = "# schema v1\n";

namespace detail {

inline std::string fmt(double v) {
  if (!std::isfinite(v))
    throw std::invalid_argument("record: non-finite value in output");
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void append_row(std::string& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += '\t';
    out += cells[i];
  }
  out += '\n';
}

}  // namespace detail

// Per-iteration run log.  Candidate coordinates are reported in the
// problem's physical units; regret columns appear only when the problem
// knows its noise-free optimum.
inline std::string format_run_record(const StochasticObjective& objective,
                                     const std::vector<IterationRecord>& history) {
  if (history.empty())
    throw std::invalid_argument("format_run_record: empty history");
  const bool with_regret = history.front().regret.has_value();
  const std::vector<std::string> names = objective.coordinate_names();

  std::string out = kSchemaHeader;
  std::vector<std::string> cells;
  cells = {"iteration", "branch", "points", "samples"};
  for (const std::string& n : names) cells.push_back("candidate_" + n);
  cells.push_back("value");
  cells.push_back("sigma");
  if (with_regret) {
    cells.push_back("regret");
    cells.push_back("regret_best");
  }
  cells.push_back("reference_error");
  cells.push_back("scale");
  cells.push_back("alpha");
  cells.push_back("K");
  cells.push_back("level");
  detail::append_row(out, cells);

  for (const IterationRecord& rec : history) {
    cells = {std::to_string(rec.iteration), branch_name(rec.branch),
             std::to_string(rec.point_count),
             std::to_string(rec.cumulative_samples)};
    const Point phys = objective.to_physical(rec.candidate);
    for (Eigen::Index j = 0; j < phys.size(); ++j)
      cells.push_back(detail::fmt(phys[j]));
    cells.push_back(detail::fmt(rec.candidate_value));
    cells.push_back(detail::fmt(rec.candidate_sigma));
    if (with_regret) {
      if (!rec.regret || !rec.regret_best)
        throw std::invalid_argument(
            "format_run_record: regret missing mid-history");
      cells.push_back(detail::fmt(*rec.regret));
      cells.push_back(detail::fmt(*rec.regret_best));
    }
    if (!rec.reference_error)
      throw std::invalid_argument(
          "format_run_record: missing reference error");
    cells.push_back(detail::fmt(*rec.reference_error));
    cells.push_back(detail::fmt(rec.scale));
    cells.push_back(detail::fmt(rec.alpha));
    cells.push_back(detail::fmt(rec.K));
    cells.push_back(std::to_string(rec.level));
    detail::append_row(out, cells);
  }
  return out;
}

// Final point set: location, sampling effort, and the measurement it
// bought.  averaging_time is sample count times the model's time per
// sample (equal to the count itself for iid noise).
inline std::string format_points_table(const StochasticObjective& objective,
                                       const OptimizerState& state) {
  const std::vector<std::string> names = objective.coordinate_names();
  const UncertaintyModel& model = objective.uncertainty_model();

  std::string out = kSchemaHeader;
  std::vector<std::string> cells = {"index"};
  for (const std::string& n : names) cells.push_back(n);
  cells.push_back("samples");
  cells.push_back("measurement");
  cells.push_back("sigma");
  cells.push_back("averaging_time");
  detail::append_row(out, cells);

  for (std::size_t i = 0; i < state.points.size(); ++i) {
    const EvaluatedPoint& ep = state.points[i];
    cells = {std::to_string(i)};
    const Point phys = objective.to_physical(ep.location);
    for (Eigen::Index j = 0; j < phys.size(); ++j)
      cells.push_back(detail::fmt(phys[j]));
    cells.push_back(std::to_string(ep.sample_count));
    cells.push_back(detail::fmt(ep.measurement));
    cells.push_back(detail::fmt(ep.sigma));
    cells.push_back(detail::fmt(static_cast<double>(ep.sample_count) *
                                model.time_per_sample));
    detail::append_row(out, cells);
  }
  return out;
}

namespace detail {

// Cross-member statistics as a step function of cumulative samples.  Rows
// appear at every sample count where any member logged a record, starting
// once all members have; each member contributes its latest record at or
// before that count, so the table is recomputable exactly from the member
// records.
inline std::string aggregate_table(
    const std::vector<std::vector<IterationRecord>>& members,
    const UncertaintyModel& model, bool regret_mode) {
  if (members.empty())
    throw std::invalid_argument("format_aggregate: no members");
  std::int64_t start = 0;
  std::vector<std::int64_t> axis;
  for (const auto& h : members) {
    if (h.empty())
      throw std::invalid_argument("format_aggregate: empty member history");
    if (regret_mode && !h.front().regret)
      throw std::invalid_argument(
          "format_aggregate: members need truth-known histories");
    start = std::max(start, h.front().cumulative_samples);
    for (const IterationRecord& rec : h) axis.push_back(rec.cumulative_samples);
  }
  std::sort(axis.begin(), axis.end());
  axis.erase(std::unique(axis.begin(), axis.end()), axis.end());

  std::string out = kSchemaHeader;
  if (regret_mode)
    append_row(out, {"samples", "regret_mean", "regret_min", "regret_max",
                     "best_regret_mean", "reference_error"});
  else
    append_row(out, {"samples", "value_mean", "value_min", "value_max",
                     "reference_error"});

  std::vector<std::size_t> cursor(members.size(), 0);
  for (std::int64_t s : axis) {
    if (s < start) continue;
    double sum = 0, lo = std::numeric_limits<double>::infinity(),
           hi = -std::numeric_limits<double>::infinity(), best_sum = 0;
    for (std::size_t m = 0; m < members.size(); ++m) {
      const auto& h = members[m];
      std::size_t& c = cursor[m];
      while (c + 1 < h.size() && h[c + 1].cumulative_samples <= s) ++c;
      const double r = regret_mode ? *h[c].regret : h[c].candidate_value;
      sum += r;
      lo = std::min(lo, r);
      hi = std::max(hi, r);
      if (regret_mode) best_sum += *h[c].regret_best;
    }
    const double n = static_cast<double>(members.size());
    std::vector<std::string> cells = {std::to_string(s), fmt(sum / n),
                                      fmt(lo), fmt(hi)};
    if (regret_mode) cells.push_back(fmt(best_sum / n));
    cells.push_back(fmt(model.sigma(s)));
    append_row(out, cells);
  }
  return out;
}

}  // namespace detail

// Regret statistics across an ensemble; needs problems with a known
// optimum.
inline std::string format_aggregate(
    const std::vector<std::vector<IterationRecord>>& members,
    const UncertaintyModel& model) {
  return detail::aggregate_table(members, model, true);
}

// Candidate-measurement statistics for ensembles on problems without a
// known optimum.
inline std::string format_value_aggregate(
    const std::vector<std::vector<IterationRecord>>& members,
    const UncertaintyModel& model) {
  return detail::aggregate_table(members, model, false);
}

// Uncertainty-fit table plus the fitted curve parameters as comment rows.
inline std::string format_uq_table(const UqFitReport& report) {
  std::string out = kSchemaHeader;
  out += "# amplitude " + detail::fmt(report.amplitude) + "\n";
  out += "# relative_residual " + detail::fmt(report.relative_residual) + "\n";
  out += "# ensemble " + std::to_string(report.ensemble_size) + "\n";
  out += "# low_confidence " + std::string(report.low_confidence ? "1" : "0") +
         "\n";
  detail::append_row(out, {"time", "empirical_std", "fitted_sigma"});
  for (const UqProbe& p : report.probes)
    detail::append_row(out, {detail::fmt(p.time), detail::fmt(p.empirical_std),
                             detail::fmt(p.fitted)});
  return out;
}

// Spearman rank correlation with average ranks on ties.  Returns a value
// in [-1, 1]; degenerate inputs (fewer than two points, or a constant
// vector) return 0.
inline double spearman_rank_correlation(const std::vector<double>& a,
                                        const std::vector<double>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("spearman: length mismatch");
  const std::size_t n = a.size();
  if (n < 2) return 0.0;

  auto ranks = [](const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };

  const std::vector<double> ra = ranks(a), rb = ranks(b);
  const double mean = (static_cast<double>(n) + 1.0) / 2.0;
  double num = 0, da = 0, db = 0;
  for (std::size_t i = 0; i < n; ++i) {
    num += (ra[i] - mean) * (rb[i] - mean);
    da += (ra[i] - mean) * (ra[i] - mean);
    db += (rb[i] - mean) * (rb[i] - mean);
  }
  if (da == 0.0 || db == 0.0) return 0.0;
  return num / std::sqrt(da * db);
}

// ---- snapshots ----------------------------------------------------------

inline nlohmann::json state_to_json(const OptimizerState& state,
                                    const ResumeInfo& resume = {}) {
  nlohmann::json j;
  j["schema"] = 1;
  j["grid"]["lower"] = std::vector<double>(
      state.grid.lower().data(), state.grid.lower().data() + state.grid.lower().size());
  j["grid"]["upper"] = std::vector<double>(
      state.grid.upper().data(), state.grid.upper().data() + state.grid.upper().size());
  j["grid"]["level"] = state.grid.level();
  j["alpha"] = state.alpha_k;
  j["K"] = state.K_k;
  j["refinements"] = state.refinement_count;
  j["iteration"] = state.iteration;
  j["cumulative_samples"] = state.cumulative_samples;
  j["seed"] = state.seed;
  j["next_stream"] = state.next_stream;
  if (resume.rho_hint) j["rho_hint"] = *resume.rho_hint;
  if (resume.best_regret) j["best_regret"] = *resume.best_regret;

  nlohmann::json pts = nlohmann::json::array();
  for (const EvaluatedPoint& ep : state.points) {
    nlohmann::json p;
    p["location"] =
        std::vector<double>(ep.location.data(), ep.location.data() + ep.location.size());
    p["samples"] = ep.sample_count;
    p["measurement"] = ep.measurement;
    p["sigma"] = ep.sigma;
    p["rng_key"] = ep.state.rng.key();
    p["rng_counter"] = ep.state.rng.counter();
    p["samples_taken"] = ep.state.samples_taken;
    p["transient_remaining"] = ep.state.transient_remaining;
    p["extra"] = ep.state.extra;
    pts.push_back(std::move(p));
  }
  j["points"] = std::move(pts);
  return j;
}

inline OptimizerState state_from_json(const nlohmann::json& j,
                                      ResumeInfo* resume = nullptr) {
  if (!j.contains("schema") || j.at("schema").get<int>() != 1)
    throw std::invalid_argument("state_from_json: unsupported schema");
  const auto lower_v = j.at("grid").at("lower").get<std::vector<double>>();
  const auto upper_v = j.at("grid").at("upper").get<std::vector<double>>();
  Point lower = Eigen::Map<const Point>(lower_v.data(),
                                        static_cast<Eigen::Index>(lower_v.size()));
  Point upper = Eigen::Map<const Point>(upper_v.data(),
                                        static_cast<Eigen::Index>(upper_v.size()));
  OptimizerState state(
      GridLevel(lower, upper, j.at("grid").at("level").get<int>()));
  state.alpha_k = j.at("alpha").get<double>();
  state.K_k = j.at("K").get<double>();
  state.refinement_count = j.at("refinements").get<int>();
  state.iteration = j.at("iteration").get<std::int64_t>();
  state.cumulative_samples = j.at("cumulative_samples").get<std::int64_t>();
  state.seed = j.at("seed").get<std::uint64_t>();
  state.next_stream = j.at("next_stream").get<std::uint64_t>();

  for (const nlohmann::json& p : j.at("points")) {
    EvaluatedPoint ep;
    const auto loc = p.at("location").get<std::vector<double>>();
    ep.location =
        Eigen::Map<const Point>(loc.data(), static_cast<Eigen::Index>(loc.size()));
    ep.sample_count = p.at("samples").get<std::int64_t>();
    ep.measurement = p.at("measurement").get<double>();
    ep.sigma = p.at("sigma").get<double>();
    ep.state.rng = RngStream::restore(p.at("rng_key").get<std::uint64_t>(),
                                      p.at("rng_counter").get<std::uint64_t>());
    ep.state.samples_taken = p.at("samples_taken").get<std::int64_t>();
    ep.state.transient_remaining =
        p.at("transient_remaining").get<std::int64_t>();
    ep.state.extra = p.at("extra").get<std::vector<double>>();
    state.points.push_back(std::move(ep));
  }

  if (resume) {
    *resume = {};
    if (j.contains("rho_hint"))
      resume->rho_hint = j.at("rho_hint").get<double>();
    if (j.contains("best_regret"))
      resume->best_regret = j.at("best_regret").get<double>();
  }
  return state;
}

// Writes via a sibling temp file and a rename so readers never observe a
// partial file.
inline void write_text_atomic(const std::filesystem::path& path,
                              const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string());
    out.write(content.data(),
              static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace adogs
