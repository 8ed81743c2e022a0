// End-to-end checks of the library's advertised guarantees, one test per
// guarantee, at a scale that runs on a desktop in a few minutes.  Each
// [ OK ] / [ FAILED ] line below is the verdict for one guarantee.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "alphadogs/alphadogs.hpp"

namespace {

using namespace adogs;

Point pt1(double x) {
  Point p(1);
  p[0] = x;
  return p;
}

std::vector<Point> random_points(int dim, int count, RngStream& r) {
  std::vector<Point> pts;
  pts.reserve(count);
  for (int i = 0; i < count; ++i) {
    Point p(dim);
    for (int j = 0; j < dim; ++j) p[j] = r.uniform01();
    pts.push_back(p);
  }
  return pts;
}

Point random_in_cell(const Triangulation& t, int s, RngStream& r) {
  const Simplex& cell = t.simplices()[s];
  Eigen::VectorXd w(cell.vertices.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    w[i] = 0.05 + r.uniform01();
    total += w[i];
  }
  Point x = Point::Zero(t.dimension());
  for (std::size_t i = 0; i < cell.vertices.size(); ++i)
    x += w[static_cast<Eigen::Index>(i)] / total *
         t.points()[cell.vertices[i]];
  return x;
}

// The randomized triangulation suite shared by the geometry guarantees:
// 200 builds over dimensions 1..4 with 5..40 points each.
std::vector<Triangulation> triangulation_suite() {
  RngStream r(811, 0);
  std::vector<Triangulation> suite;
  int attempts = 0;
  while (suite.size() < 200 && attempts < 400) {
    ++attempts;
    const int dim = 1 + static_cast<int>(suite.size()) % 4;
    const int cap = dim <= 2 ? 40 : dim == 3 ? 28 : 20;
    const int count =
        std::max(dim + 2, 5 + static_cast<int>(r.uniform01() * (cap - 4)));
    try {
      suite.push_back(Triangulation::build(random_points(dim, count, r)));
    } catch (const DegeneratePointSet&) {
      // vanishingly rare with uniform draws; redraw
    }
  }
  EXPECT_EQ(suite.size(), 200u);
  return suite;
}

double max_r2(const Triangulation& t) {
  double m = 1.0;
  for (const Simplex& s : t.simplices())
    m = std::max(m, s.circumradius * s.circumradius);
  return m;
}

TEST(Acceptance, ExplorationFunctionPropertySuite) {
  RngStream r(812, 0);
  const std::vector<Triangulation> suite = triangulation_suite();

  for (const Triangulation& t : suite) {
    const int cells = static_cast<int>(t.simplices().size());
    const double scale = max_r2(t);

    // zero at every datapoint (no point is strictly inside any circumball)
    for (const Point& v : t.points())
      EXPECT_LE(t.remoteness(v), 1e-8 * scale);

    // nonnegative, and equal to the best value over all circumballs
    for (int trial = 0; trial < 1000; ++trial) {
      const int s = static_cast<int>(cells * r.uniform01());
      const Point x = random_in_cell(t, s, r);
      double brute = 0.0;
      for (int c = 0; c < cells; ++c)
        brute = std::max(brute, t.local_remoteness(c, x));
      const double e = t.remoteness(x);
      EXPECT_GE(e, 0.0);
      EXPECT_NEAR(e, brute, 1e-9 * scale);
    }

    // continuous across shared facets: both neighbouring cells agree
    std::map<std::vector<int>, std::vector<int>> facets;
    for (int s = 0; s < cells; ++s) {
      const std::vector<int>& vs = t.simplices()[s].vertices;
      for (std::size_t drop = 0; drop < vs.size(); ++drop) {
        std::vector<int> f;
        for (std::size_t i = 0; i < vs.size(); ++i)
          if (i != drop) f.push_back(vs[i]);
        std::sort(f.begin(), f.end());
        facets[f].push_back(s);
      }
    }
    int probed = 0;
    for (const auto& [facet, owners] : facets) {
      if (owners.size() != 2 || probed >= 20) continue;
      ++probed;
      Eigen::VectorXd w(facet.size());
      double total = 0.0;
      for (Eigen::Index i = 0; i < w.size(); ++i) {
        w[i] = 0.1 + r.uniform01();
        total += w[i];
      }
      Point x = Point::Zero(t.dimension());
      for (std::size_t i = 0; i < facet.size(); ++i)
        x += w[static_cast<Eigen::Index>(i)] / total * t.points()[facet[i]];
      const double a = t.local_remoteness(owners[0], x);
      const double b = t.local_remoteness(owners[1], x);
      EXPECT_NEAR(a, b, 1e-8 * std::max({1.0,
          t.simplices()[owners[0]].circumradius *
              t.simplices()[owners[0]].circumradius,
          t.simplices()[owners[1]].circumradius *
              t.simplices()[owners[1]].circumradius}));
    }

    // within one cell the function is quadratic with Hessian exactly -2 I
    const int s = static_cast<int>(cells * r.uniform01());
    const Point x0 = random_in_cell(t, s, r);
    const double h = 1e-4;
    const int n = t.dimension();
    for (int i = 0; i < n; ++i) {
      Point xp = x0, xm = x0;
      xp[i] += h;
      xm[i] -= h;
      const double dii = (t.local_remoteness(s, xp) +
                          t.local_remoteness(s, xm) -
                          2.0 * t.local_remoteness(s, x0)) /
                         (h * h);
      EXPECT_NEAR(dii, -2.0, 2.0 * 1e-4 * scale);
      for (int j = i + 1; j < n; ++j) {
        Point xpp = x0, xpm = x0, xmp = x0, xmm = x0;
        xpp[i] += h; xpp[j] += h;
        xpm[i] += h; xpm[j] -= h;
        xmp[i] -= h; xmp[j] += h;
        xmm[i] -= h; xmm[j] -= h;
        const double dij = (t.local_remoteness(s, xpp) -
                            t.local_remoteness(s, xpm) -
                            t.local_remoteness(s, xmp) +
                            t.local_remoteness(s, xmm)) /
                           (4.0 * h * h);
        EXPECT_NEAR(dij, 0.0, 2.0 * 1e-4 * scale);
      }
    }
  }
}

TEST(Acceptance, DelaunayValidityAndInsertionOrderInvariance) {
  const std::vector<Triangulation> suite = triangulation_suite();
  for (const Triangulation& t : suite)
    EXPECT_GT(t.validity_margin(), -1e-9);

  // cells as canonical coordinate tuples, insensitive to internal indexing
  auto signature = [](const Triangulation& t) {
    std::set<std::vector<std::vector<double>>> sig;
    for (const Simplex& s : t.simplices()) {
      std::vector<std::vector<double>> cell;
      for (int v : s.vertices) {
        const Point& p = t.points()[v];
        cell.emplace_back(p.data(), p.data() + p.size());
      }
      std::sort(cell.begin(), cell.end());
      sig.insert(std::move(cell));
    }
    return sig;
  };

  RngStream r(813, 0);
  for (int rep = 0; rep < 50; ++rep) {
    const int dim = 1 + rep % 4;
    std::vector<Point> base = random_points(dim, dim + 4 + rep % 8, r);
    Triangulation inc = Triangulation::build(base);
    std::vector<Point> all = base;
    for (int extra = 0; extra < 3; ++extra) {
      const int s =
          static_cast<int>(inc.simplices().size() * r.uniform01());
      const Point x = random_in_cell(inc, s, r);
      inc.insert(x);
      all.push_back(x);
    }
    const Triangulation batch = Triangulation::build(all);
    EXPECT_EQ(signature(inc), signature(batch)) << "sequence " << rep;
    EXPECT_GT(inc.validity_margin(), -1e-9);
  }
}

TEST(Acceptance, RegressionStationarityAndStrictness) {
  RngStream r(814, 0);
  int finite_branch = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const int dim = 1 + rep % 3;
    const int m = 6 + rep % 12;
    WeightedDataset ds;
    ds.values.resize(m);
    ds.sigmas.resize(m);
    for (int i = 0; i < m; ++i) {
      Point p(dim);
      for (int j = 0; j < dim; ++j) p[j] = r.uniform01();
      ds.points.push_back(p);
      double f = 0.0;
      for (int j = 0; j < dim; ++j) f += std::cos(3.0 * p[j]) + p[j] * p[j];
      ds.sigmas[i] = 0.05 + 0.25 * r.uniform01();
      ds.values[i] = f + r.normal(0.0, ds.sigmas[i]);
    }
    const RegressionModel model = fit_regression(ds, 4.0);
    const double scale = ds.values.cwiseAbs().maxCoeff() + 1.0;

    for (int i = 0; i < m; ++i) {
      const double resid = model.value(ds.points[i]) - ds.values[i];
      // strictness: every datapoint within 4 sigma of the model
      EXPECT_LE(std::abs(resid), 4.0 * ds.sigmas[i] + 1e-9 * scale)
          << "rep " << rep << " i " << i;
      if (!model.is_linear()) {
        // stationarity of the smoothing system at the returned weights
        const double stat = resid + model.rho() * ds.sigmas[i] *
                                        ds.sigmas[i] * model.rbf_weights()[i];
        EXPECT_NEAR(stat, 0.0, 1e-8 * scale) << "rep " << rep << " i " << i;
      }
    }

    if (!model.is_linear() && model.rho() > 0.0 &&
        model.strictness_satisfied()) {
      // the smoothing level is tuned until the scaled residual norm is 1
      double t = 0.0;
      for (int i = 0; i < m; ++i) {
        const double q = (model.value(ds.points[i]) - ds.values[i]) / ds.sigmas[i];
        t += q * q;
      }
      if (std::abs(t - 1.0) <= 1e-6) ++finite_branch;
      EXPECT_NEAR(t, 1.0, 1e-6) << "rep " << rep;
    }
  }
  EXPECT_GT(finite_branch, 50);  // the tuned branch must actually be exercised
}

TEST(Acceptance, QuantizationErrorBoundAndGridMembership) {
  RngStream r(815, 0);
  for (int level = 0; level <= 6; ++level) {
    for (int trial = 0; trial < 10000; ++trial) {
      const int dim = 1 + trial % 6;
      Point lower(dim), upper(dim);
      for (int j = 0; j < dim; ++j) {
        lower[j] = -5.0 + 10.0 * r.uniform01();
        upper[j] = lower[j] + 0.5 + 9.5 * r.uniform01();
      }
      const GridLevel g(lower, upper, level);
      Point x(dim);
      for (int j = 0; j < dim; ++j)
        x[j] = lower[j] + (upper[j] - lower[j]) * r.uniform01();
      const Point q = g.quantize(x);
      EXPECT_LE((x - q).norm(),
                g.max_quantization_error() * (1.0 + 1e-14));
      EXPECT_TRUE(g.on_grid(q));
      EXPECT_TRUE(g.contains(q));
    }
  }
}

// ---- benchmark-scale statistical guarantees -----------------------------

RunResult parabola_run(int dim, std::int64_t budget, std::uint64_t seed) {
  ParabolaProblem prob(dim, 0.3);
  const AlphaDogsParams params;
  return run(prob, params, StoppingRule::samples(budget),
             {Point::Constant(dim, 0.5)}, seed);
}

TEST(Acceptance, ParabolaEnsembleRegretApproachesReferenceError) {
  {
    ParabolaProblem prob(1, 0.3);
    double mean_regret = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const RunResult res = parabola_run(1, 2000, seed);
      mean_regret += *candidate(res.state, prob).regret;
    }
    mean_regret /= 20.0;
    const double bound = 5.0 * 0.3 / std::sqrt(2000.0);
    EXPECT_LE(mean_regret, bound) << "1-D mean regret " << mean_regret;
  }
  {
    ParabolaProblem prob(2, 0.3);
    double mean_regret = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const RunResult res = parabola_run(2, 5000, seed);
      mean_regret += *candidate(res.state, prob).regret;
    }
    mean_regret /= 20.0;
    const double bound = 8.0 * 0.3 / std::sqrt(5000.0);
    EXPECT_LE(mean_regret, bound) << "2-D mean regret " << mean_regret;
  }
}

TEST(Acceptance, SchwefelEnsembleFindsTheGlobalWell) {
  SchwefelProblem prob(1, 0.3);
  const AlphaDogsParams params;
  std::vector<Point> seeds;
  for (int i = 1; i <= 7; ++i) seeds.push_back(pt1(i / 8.0));

  int hits = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const RunResult res =
        run(prob, params, StoppingRule::samples(3000), seeds, seed);
    const CandidateReport cand = candidate(res.state, prob);
    if (std::abs(cand.location[0] - SchwefelProblem::kArgmin) <= 0.05) ++hits;
  }
  EXPECT_GE(hits, 16) << hits << "/20 runs ended at the global minimum";
}

TEST(Acceptance, SamplingConcentratesNearTheMinimizer) {
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const RunResult res = parabola_run(1, 2000, seed);
    const EvaluatedPoint* most = &res.state.points.front();
    for (const EvaluatedPoint& ep : res.state.points)
      if (ep.sample_count > most->sample_count) most = &ep;
    if (std::abs(most->location[0] - 0.3) <= 0.15) ++hits;
  }
  EXPECT_GE(hits, 15) << hits << "/20 runs concentrated sampling at 0.3";
}

// ---- Lorenz statistics problem ------------------------------------------

TEST(Acceptance, LorenzWindowedCostMatchesFittedUncertainty) {
  LorenzProblem lorenz;
  UqFitReport rep;
  const UncertaintyModel fit =
      fit_uq_model(lorenz, 10, {1000, 2000, 4000, 8000}, 0, nullptr, &rep);
  const double sigma_T = fit.amplitude / std::sqrt(2513.0);

  // classic parameters mapped into the design box
  Point x(2);
  x[0] = (28.0 - 24.0) / (29.15 - 24.0);
  x[1] = (8.0 / 3.0 - 1.8) / (4.0 - 1.8);
  SampleState st;
  st.rng = RngStream(8, 0);
  const double cost = lorenz.extend(x, 50260, st);  // window T = 2513

  EXPECT_LE(cost, 0.04 + 3.0 * sigma_T)
      << "cost " << cost << " vs fitted sigma " << sigma_T;
}

TEST(Acceptance, LorenzAdaptiveAveragingBeatsFixedLength) {
  LorenzProblem lorenz;
  const UncertaintyModel fit =
      fit_uq_model(lorenz, 10, {1000, 2000, 4000, 8000}, 1000003);
  lorenz.set_uncertainty_amplitude(fit.amplitude);

  StoppingRule rule = StoppingRule::tolerance(0.15, 0.06);
  rule.max_samples = 2000000;
  const std::vector<Point> center = {Point::Constant(2, 0.5)};

  AlphaDogsParams params;
  params.N0 = 400;   // averaging window 20 for a fresh point
  params.N_delta = 140;  // increment 7 per revisit
  const RunResult adaptive = run(lorenz, params, rule, center, 0);

  DeltaDogsConfig fixed;
  fixed.samples_per_point = 50260;  // window 2513 for every point
  const RunResult baseline = run_delta_dogs(lorenz, fixed, rule, center, 0);

  EXPECT_EQ(adaptive.reason, StopReason::tolerance_met);
  EXPECT_EQ(baseline.reason, StopReason::tolerance_met);
  const double factor =
      static_cast<double>(baseline.state.cumulative_samples) /
      static_cast<double>(adaptive.state.cumulative_samples);
  EXPECT_GE(factor, 2.0) << "averaging-time reduction only " << factor;
}

TEST(Acceptance, UncertaintyFitQualityAndAmplitudeRecovery) {
  {
    LorenzProblem lorenz;
    UqFitReport rep;
    fit_uq_model(lorenz, 10, {1000, 2000, 4000, 8000}, 0, nullptr, &rep);
    EXPECT_LE(rep.relative_residual, 0.30);
    for (const UqProbe& p : rep.probes)
      EXPECT_LE(std::abs(p.empirical_std - p.fitted), 0.30 * p.empirical_std)
          << "probe T = " << p.time;
  }
  {
    ParabolaProblem prob(1, 0.3);  // iid noise with known amplitude
    const UncertaintyModel fit =
        fit_uq_model(prob, 30, {100, 200, 400, 800}, 0);
    EXPECT_NEAR(fit.amplitude, 0.3, 0.20 * 0.3);
  }
}

TEST(Acceptance, RecordsAreByteStableAcrossReruns) {
  ParabolaProblem prob(1, 0.3);
  const RunResult a = parabola_run(1, 2000, 0);
  const RunResult b = parabola_run(1, 2000, 0);
  EXPECT_EQ(format_run_record(prob, a.history),
            format_run_record(prob, b.history));
  EXPECT_EQ(format_points_table(prob, a.state),
            format_points_table(prob, b.state));
  EXPECT_EQ(state_to_json(a.state, a.resume).dump(2),
            state_to_json(b.state, b.resume).dump(2));

  const RunResult c = parabola_run(1, 2000, 1);
  EXPECT_NE(format_run_record(prob, a.history),
            format_run_record(prob, c.history));
}

}  // namespace
