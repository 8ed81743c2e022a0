// adogs: benchmark driver for the alphadogs library.
//
// Subcommands: run (single optimization), ensemble (seeded batch with an
// aggregate table), compare-lorenz (optimizer-controlled averaging vs the
// fixed-length baseline on the Lorenz statistics problem), fit-uq
// (empirical uncertainty fit).  All outputs are deterministic for a fixed
// configuration and seed; files are written atomically.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "alphadogs/alphadogs.hpp"

namespace fs = std::filesystem;
using namespace adogs;

namespace {

struct Options {
  std::string config_path;
  std::string problem = "parabola";
  int dim = 1;
  double noise = 0.3;
  std::string algorithm = "alpha";
  std::uint64_t seed = 0;
  std::string out = ".";

  std::int64_t budget = 0;  // samples; 0 means "not set"
  std::int64_t iters = 0;
  double tol = -1.0;  // with sigma_tol, a tolerance stop; negative = off
  double sigma_tol = -1.0;

  int runs = 20;
  int jobs = 0;        // 0: hardware concurrency
  int seed_level = -1;  // -1: problem-dependent default
  std::string resume_path;

  double uq_a = -1.0;  // Lorenz uncertainty amplitude; negative = fit it
  int uq_runs = 30;
  std::vector<std::int64_t> uq_probes = {1000, 2000, 4000, 8000, 16000};
  std::int64_t delta_samples = 50260;  // averaging window 2513 at h = 0.05

  AlphaDogsParams params;
};

std::unique_ptr<StochasticObjective> make_problem(const Options& o) {
  if (o.problem == "parabola")
    return std::make_unique<ParabolaProblem>(o.dim, o.noise);
  if (o.problem == "schwefel")
    return std::make_unique<SchwefelProblem>(o.dim, o.noise);
  if (o.problem == "lorenz") return std::make_unique<LorenzProblem>();
  throw std::invalid_argument("unknown problem: " + o.problem);
}

// Interior nodes of the level-L dyadic grid, used as initial points of
// interest alongside the box corners.  Level 1 is just the center.
std::vector<Point> interior_grid_nodes(int dim, int level) {
  if (level < 1 || level > 10)
    throw std::invalid_argument("seed level must be in [1, 10]");
  const std::int64_t per_axis = (std::int64_t{1} << level) - 1;
  double count = 1;
  for (int j = 0; j < dim; ++j) count *= static_cast<double>(per_axis);
  if (count > 512)
    throw std::invalid_argument("seed level yields more than 512 points");

  std::vector<Point> nodes;
  std::vector<std::int64_t> idx(dim, 1);
  for (;;) {
    Point p(dim);
    for (int j = 0; j < dim; ++j)
      p[j] = static_cast<double>(idx[j]) / static_cast<double>(per_axis + 1);
    nodes.push_back(p);
    int j = 0;
    while (j < dim && ++idx[j] > per_axis) idx[j++] = 1;
    if (j == dim) break;
  }
  return nodes;
}

std::vector<Point> seed_points(const Options& o, int dim) {
  int level = o.seed_level;
  if (level < 0) level = (o.problem == "schwefel" && dim == 1) ? 3 : 1;
  return interior_grid_nodes(dim, level);
}

StoppingRule build_rule(const Options& o, const StochasticObjective& obj) {
  StoppingRule r;
  if (o.budget > 0) r.max_samples = o.budget;
  if (o.iters > 0) r.max_iterations = o.iters;
  if (o.tol >= 0.0 || o.sigma_tol >= 0.0) {
    if (o.tol < 0.0 || o.sigma_tol < 0.0)
      throw std::invalid_argument("--tol and --sigma-tol go together");
    r.measure_tol = o.tol;
    r.sigma_tol = o.sigma_tol;
    if (auto f = obj.truth_minimum()) r.f_star = *f;
  }
  if (!r.max_samples && !r.max_iterations && !r.measure_tol) {
    if (o.problem == "lorenz") {
      r.measure_tol = 0.15;
      r.sigma_tol = 0.06;
      r.max_samples = 2000000;
    } else {
      r.max_samples = 2000;
    }
  }
  return r;
}

// Lorenz runs need a fitted noise amplitude before the optimizer can
// budget its averaging; synthetic problems carry theirs by construction.
void prepare_uncertainty(const Options& o, StochasticObjective& obj,
                         UqFitReport* report) {
  auto* lorenz = dynamic_cast<LorenzProblem*>(&obj);
  if (!lorenz) return;
  if (o.uq_a >= 0.0) {
    lorenz->set_uncertainty_amplitude(o.uq_a);
    return;
  }
  LorenzProblem probe;
  const UncertaintyModel fitted = fit_uq_model(
      probe, 10, {1000, 2000, 4000, 8000}, o.seed + 1000003, nullptr, report);
  lorenz->set_uncertainty_amplitude(fitted.amplitude);
}

void write_file(const fs::path& path, const std::string& content) {
  write_text_atomic(path, content);
  std::cout << "wrote " << path.string() << "\n";
}

std::string fmt(double v) { return detail::fmt(v); }

void print_summary(const StochasticObjective& obj, const RunResult& res) {
  const CandidateReport cand = candidate(res.state, obj);
  const double h = obj.uncertainty_model().time_per_sample;
  std::cout << "stop=" << stop_name(res.reason)
            << " iterations=" << res.state.iteration
            << " points=" << res.state.points.size()
            << " samples=" << res.state.cumulative_samples
            << " averaging_time="
            << fmt(static_cast<double>(res.state.cumulative_samples) * h)
            << "\n";
  const Point phys = obj.to_physical(cand.location);
  const std::vector<std::string> names = obj.coordinate_names();
  std::cout << "candidate";
  for (Eigen::Index j = 0; j < phys.size(); ++j)
    std::cout << " " << names[static_cast<std::size_t>(j)] << "="
              << fmt(phys[j]);
  std::cout << " value=" << fmt(cand.value) << " sigma=" << fmt(cand.sigma);
  if (cand.regret) std::cout << " regret=" << fmt(*cand.regret);
  std::cout << "\n";
}

RunResult execute(const Options& o, const StochasticObjective& obj,
                  const StoppingRule& rule, std::uint64_t seed) {
  const std::vector<Point> seeds = seed_points(o, obj.dimension());
  if (o.algorithm == "alpha") return run(obj, o.params, rule, seeds, seed);
  if (o.algorithm == "delta") {
    DeltaDogsConfig cfg;
    cfg.K = o.params.K0;
    cfg.ell0 = o.params.ell0;
    cfg.samples_per_point = o.delta_samples;
    return run_delta_dogs(obj, cfg, rule, seeds, seed);
  }
  throw std::invalid_argument("unknown algorithm: " + o.algorithm);
}

int cmd_run(const Options& o) {
  const fs::path out(o.out);
  fs::create_directories(out);
  auto obj = make_problem(o);
  UqFitReport uq;
  prepare_uncertainty(o, *obj, &uq);
  const StoppingRule rule = build_rule(o, *obj);

  std::optional<RunResult> res;
  if (!o.resume_path.empty()) {
    if (o.algorithm != "alpha")
      throw std::invalid_argument("--resume is only supported with alpha");
    std::ifstream in(o.resume_path);
    if (!in) throw std::runtime_error("cannot read " + o.resume_path);
    nlohmann::json j;
    in >> j;
    ResumeInfo resume;
    OptimizerState state = state_from_json(j, &resume);
    res.emplace(
        run_continue(std::move(state), *obj, o.params, rule, resume));
  } else {
    res.emplace(execute(o, *obj, rule, o.seed));
  }

  write_file(out / "record.tsv", format_run_record(*obj, res->history));
  write_file(out / "points.tsv", format_points_table(*obj, res->state));
  write_file(out / "snapshot.json",
             state_to_json(res->state, res->resume).dump(2) + "\n");
  print_summary(*obj, *res);
  return 0;
}

int cmd_ensemble(const Options& o) {
  if (o.runs < 1) throw std::invalid_argument("--runs must be >= 1");
  const fs::path out(o.out);
  fs::create_directories(out);
  auto obj = make_problem(o);
  prepare_uncertainty(o, *obj, nullptr);
  const StoppingRule rule = build_rule(o, *obj);

  int width = 2;
  for (int v = o.runs - 1; v >= 100; v /= 10) ++width;

  std::vector<std::optional<RunResult>> results(o.runs);
  std::vector<std::exception_ptr> errors(o.runs);
  std::atomic<int> cursor{0};
  auto worker = [&] {
    for (;;) {
      const int i = cursor.fetch_add(1);
      if (i >= o.runs) return;
      try {
        RunResult res = execute(o, *obj, rule, o.seed + i);
        std::string name = std::to_string(i);
        name.insert(0, static_cast<std::size_t>(width) > name.size()
                           ? width - name.size()
                           : 0,
                    '0');
        const fs::path dir = out / ("member_" + name);
        fs::create_directories(dir);
        write_text_atomic(dir / "record.tsv",
                          format_run_record(*obj, res.history));
        write_text_atomic(dir / "points.tsv",
                          format_points_table(*obj, res.state));
        write_text_atomic(dir / "snapshot.json",
                          state_to_json(res.state, res.resume).dump(2) + "\n");
        results[i].emplace(std::move(res));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  int jobs = o.jobs > 0 ? o.jobs
                        : static_cast<int>(std::thread::hardware_concurrency());
  jobs = std::max(1, std::min(jobs, o.runs));
  std::vector<std::thread> pool;
  for (int t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<std::vector<IterationRecord>> histories;
  for (const auto& res : results) histories.push_back(res->history);
  const bool truth = histories.front().front().regret.has_value();
  write_file(out / "aggregate.tsv",
             truth ? format_aggregate(histories, obj->uncertainty_model())
                   : format_value_aggregate(histories,
                                            obj->uncertainty_model()));

  std::cout << "runs=" << o.runs << " stop=" << stop_name(results[0]->reason)
            << "\n";
  if (truth) {
    double sum = 0;
    for (const auto& h : histories) sum += *h.back().regret;
    std::cout << "mean_final_regret=" << fmt(sum / o.runs)
              << " reference_error="
              << fmt(obj->uncertainty_model().sigma(
                     results[0]->state.cumulative_samples))
              << "\n";
  }
  return 0;
}

struct AlgoStats {
  std::string name;
  const RunResult* res;
};

int cmd_compare_lorenz(const Options& o) {
  if (o.problem != "lorenz")
    throw std::invalid_argument("compare-lorenz only runs on --problem lorenz");
  const fs::path out(o.out);
  fs::create_directories(out);

  LorenzProblem lorenz;
  UqFitReport uq;
  prepare_uncertainty(o, lorenz, &uq);
  if (o.uq_a < 0.0) write_file(out / "uq.tsv", format_uq_table(uq));
  std::cout << "uncertainty_amplitude="
            << fmt(lorenz.uncertainty_model().amplitude) << "\n";

  Options stop_opts = o;
  if (stop_opts.tol < 0.0 && stop_opts.sigma_tol < 0.0) {
    stop_opts.tol = 0.15;
    stop_opts.sigma_tol = 0.06;
  }
  if (stop_opts.budget <= 0) stop_opts.budget = 2000000;
  const StoppingRule rule = build_rule(stop_opts, lorenz);

  Options alpha_opts = stop_opts;
  alpha_opts.algorithm = "alpha";
  const RunResult alpha = execute(alpha_opts, lorenz, rule, o.seed);
  Options delta_opts = stop_opts;
  delta_opts.algorithm = "delta";
  const RunResult delta = execute(delta_opts, lorenz, rule, o.seed);

  write_file(out / "alpha_record.tsv",
             format_run_record(lorenz, alpha.history));
  write_file(out / "alpha_points.tsv",
             format_points_table(lorenz, alpha.state));
  write_file(out / "delta_record.tsv",
             format_run_record(lorenz, delta.history));
  write_file(out / "delta_points.tsv",
             format_points_table(lorenz, delta.state));

  const double h = lorenz.config().h;
  const double transient = static_cast<double>(lorenz.transient_samples()) * h;
  std::string table = kSchemaHeader;
  table +=
      "algorithm\tpoints\tsamples\taveraging_time\ttransient_time\t"
      "best_value\tbest_sigma\tspearman_value_vs_time\tstop\n";
  for (const AlgoStats& a : {AlgoStats{"alpha", &alpha},
                             AlgoStats{"delta", &delta}}) {
    const OptimizerState& st = a.res->state;
    std::vector<double> values, times;
    for (const EvaluatedPoint& ep : st.points) {
      values.push_back(ep.measurement);
      times.push_back(static_cast<double>(ep.sample_count) * h);
    }
    const CandidateReport cand = candidate(st, lorenz);
    table += a.name + "\t" + std::to_string(st.points.size()) + "\t" +
             std::to_string(st.cumulative_samples) + "\t" +
             fmt(static_cast<double>(st.cumulative_samples) * h) + "\t" +
             fmt(static_cast<double>(st.points.size()) * transient) + "\t" +
             fmt(cand.value) + "\t" + fmt(cand.sigma) + "\t" +
             fmt(spearman_rank_correlation(values, times)) + "\t" +
             stop_name(a.res->reason) + "\n";
  }
  write_file(out / "comparison.tsv", table);

  const double ta = static_cast<double>(alpha.state.cumulative_samples) * h;
  const double td = static_cast<double>(delta.state.cumulative_samples) * h;
  std::cout << "alpha: ";
  print_summary(lorenz, alpha);
  std::cout << "delta: ";
  print_summary(lorenz, delta);
  std::cout << "averaging_time alpha=" << fmt(ta) << " delta=" << fmt(td)
            << " factor=" << fmt(ta > 0.0 ? td / ta : 0.0) << "\n";
  return 0;
}

int cmd_fit_uq(const Options& o) {
  const fs::path out(o.out);
  fs::create_directories(out);
  auto obj = make_problem(o);
  UqFitReport report;
  fit_uq_model(*obj, o.uq_runs, o.uq_probes, o.seed, nullptr, &report);
  write_file(out / "uq.tsv", format_uq_table(report));
  std::cout << "amplitude=" << fmt(report.amplitude)
            << " relative_residual=" << fmt(report.relative_residual)
            << " ensemble=" << report.ensemble_size
            << " low_confidence=" << (report.low_confidence ? 1 : 0) << "\n";
  return 0;
}

void add_common(CLI::App* sub, Options& o, bool with_problem = true) {
  if (with_problem) {
    sub->add_option("--problem", o.problem, "parabola, schwefel, or lorenz")
        ->check(CLI::IsMember({"parabola", "schwefel", "lorenz"}));
    sub->add_option("--dim", o.dim,
                    "problem dimension, 1 to 6 (ignored for lorenz)");
    sub->add_option("--noise", o.noise,
                    "sampling noise level of the synthetic problems");
  }
  sub->add_option("--seed", o.seed, "master random seed");
  sub->add_option("--out", o.out, "output directory")
      ->envname("ADOGS_OUT");
  sub->add_option("--config", o.config_path,
                  "flat key=value configuration file; explicit flags "
                  "override its entries");
}

void add_stopping(CLI::App* sub, Options& o) {
  sub->add_option("--budget", o.budget, "stop after this many samples");
  sub->add_option("--iters", o.iters, "stop after this many iterations");
  sub->add_option("--tol", o.tol,
                  "stop when the candidate measurement is this close to the "
                  "optimum (needs --sigma-tol)");
  sub->add_option("--sigma-tol", o.sigma_tol,
                  "uncertainty the candidate must also reach for --tol");
}

void add_algorithm(CLI::App* sub, Options& o) {
  sub->add_option("--algorithm", o.algorithm,
                  "alpha (optimizer-controlled averaging) or delta "
                  "(fixed-length baseline)")
      ->check(CLI::IsMember({"alpha", "delta"}));
  sub->add_option("--seed-level", o.seed_level,
                  "grid level whose interior nodes seed the search "
                  "(default: 3 for 1-D schwefel, else 1 = center)");
  sub->add_option("--delta-samples", o.delta_samples,
                  "fixed samples per point for the delta baseline");
  sub->add_option("--uq-a", o.uq_a,
                  "lorenz noise amplitude; fitted from a 10-member probe "
                  "ensemble when not given");
  AlphaDogsParams& p = o.params;
  sub->add_option("--alpha0", p.alpha0, "initial candidate-vs-explore weight");
  sub->add_option("--alpha-delta", p.alpha_delta,
                  "per-refinement increment of alpha");
  sub->add_option("--K0", p.K0, "initial exploration gain (doubles on refine)");
  sub->add_option("--ell0", p.ell0, "initial grid level");
  sub->add_option("--beta", p.beta_strict,
                  "regression strictness in sigma units");
  sub->add_option("--gamma", p.gamma, "supplemental sampling cap multiplier");
  sub->add_option("--N0", p.N0,
                  "samples for a newly identified point "
                  "(default 1; 400 on lorenz)");
  sub->add_option("--N-delta", p.N_delta,
                  "samples per supplemental visit "
                  "(default 1; 140 on lorenz)");
}

// One Lorenz sample is a single integrator step, so meaningful measurement
// batches are hundreds of steps; the unit defaults of the synthetic
// problems would crawl.  Applied only where the user did not choose.
void apply_problem_defaults(Options& o, const CLI::App* sub) {
  if (o.problem != "lorenz") return;
  const CLI::Option* n0 = sub->get_option_no_throw("--N0");
  const CLI::Option* nd = sub->get_option_no_throw("--N-delta");
  if (n0 && n0->count() == 0) o.params.N0 = 400;
  if (nd && nd->count() == 0) o.params.N_delta = 140;
}

// ---- flat config files --------------------------------------------------
// A config file is a list of key=value lines ('#' comments allowed) whose
// keys are the long flag names, underscores welcome.  The pairs are
// spliced into the argument list right after the subcommand, and pairs
// whose flag was also given explicitly are dropped, so flags always win.

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> config_tokens(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read config file: " + path);
  std::vector<std::string> tokens;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos || eq == 0)
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": expected key=value");
    std::string key = trim(t.substr(0, eq));
    for (char& c : key)
      if (c == '_') c = '-';
    if (key == "config")
      throw std::invalid_argument(path + ": config files cannot nest");
    tokens.push_back("--" + key + "=" + trim(t.substr(eq + 1)));
  }
  return tokens;
}

std::vector<std::string> splice_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size())
      path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0)
      path = args[i].substr(9);
  }
  if (path.empty() || args.empty() || args[0].empty() || args[0][0] == '-')
    return args;

  std::set<std::string> given;
  for (const std::string& a : args)
    if (a.rfind("--", 0) == 0) given.insert(a.substr(0, a.find('=')));

  std::vector<std::string> spliced = {args[0]};
  for (const std::string& tok : config_tokens(path))
    if (!given.count(tok.substr(0, tok.find('='))))
      spliced.push_back(tok);
  spliced.insert(spliced.end(), args.begin() + 1, args.end());
  return spliced;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Benchmark driver for a Delaunay-surrogate optimizer of noisy "
      "time-averaged objectives"};
  app.require_subcommand(1);
  Options o;

  CLI::App* s_run = app.add_subcommand(
      "run", "one optimization run; writes record.tsv, points.tsv, "
             "snapshot.json");
  add_common(s_run, o);
  add_stopping(s_run, o);
  add_algorithm(s_run, o);
  s_run->add_option("--resume", o.resume_path,
                    "snapshot.json to continue from (alpha only)");

  CLI::App* s_ens = app.add_subcommand(
      "ensemble", "seeded batch of runs; member seeds are seed+0..runs-1; "
                  "writes member_*/ and aggregate.tsv");
  add_common(s_ens, o);
  add_stopping(s_ens, o);
  add_algorithm(s_ens, o);
  s_ens->add_option("--runs", o.runs, "ensemble size");
  s_ens->add_option("--jobs", o.jobs,
                    "worker threads (default: hardware concurrency)");

  CLI::App* s_cmp = app.add_subcommand(
      "compare-lorenz",
      "run both algorithms on the Lorenz problem to the same stopping rule; "
      "writes per-algorithm tables and comparison.tsv");
  add_common(s_cmp, o, false);
  add_stopping(s_cmp, o);
  add_algorithm(s_cmp, o);

  CLI::App* s_uq = app.add_subcommand(
      "fit-uq", "fit the measurement-uncertainty amplitude; writes uq.tsv");
  add_common(s_uq, o);
  s_uq->add_option("--runs", o.uq_runs, "probe ensemble size");
  s_uq->add_option("--probes", o.uq_probes,
                   "increasing sample counts to probe");

  std::vector<std::string> args;
  try {
    args = splice_config(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "adogs: " << e.what() << "\n";
    return 2;
  }
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (s_run->parsed()) {
      apply_problem_defaults(o, s_run);
      return cmd_run(o);
    }
    if (s_ens->parsed()) {
      apply_problem_defaults(o, s_ens);
      return cmd_ensemble(o);
    }
    if (s_cmp->parsed()) {
      o.problem = "lorenz";
      apply_problem_defaults(o, s_cmp);
      return cmd_compare_lorenz(o);
    }
    if (s_uq->parsed()) return cmd_fit_uq(o);
  } catch (const std::exception& e) {
    std::cerr << "adogs: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
