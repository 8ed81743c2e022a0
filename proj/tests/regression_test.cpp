#include "alphadogs/regression.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "alphadogs/errors.hpp"
#include "alphadogs/rng.hpp"

namespace {

using adogs::fit_regression;
using adogs::fit_regression_at;
using adogs::Point;
using adogs::RegressionModel;
using adogs::WeightedDataset;

Point pt1(double x) {
  Point p(1);
  p[0] = x;
  return p;
}

// Sum of squared scaled residuals computed from scratch by evaluating the
// model, independent of any identity used inside the fitter.
double criterion_oracle(const RegressionModel& m, const WeightedDataset& ds) {
  double t = 0.0;
  for (int i = 0; i < ds.size(); ++i) {
    if (ds.sigmas[i] <= 1e-12) continue;
    const double r = (m.value(ds.points[i]) - ds.values[i]) / ds.sigmas[i];
    t += r * r;
  }
  return t;
}

WeightedDataset noisy_sine(int m, double sigma, adogs::RngStream& r) {
  WeightedDataset ds;
  ds.values.resize(m);
  ds.sigmas.resize(m);
  for (int i = 0; i < m; ++i) {
    const double x = static_cast<double>(i) / (m - 1);
    ds.points.push_back(pt1(x));
    ds.values[i] = std::sin(2.0 * M_PI * x) + r.normal(0.0, sigma);
    ds.sigmas[i] = sigma;
  }
  return ds;
}

WeightedDataset random_dataset(int dim, int m, adogs::RngStream& r) {
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
  return ds;
}

TEST(Regression, InterpolatesWhenSigmaIsZero) {
  adogs::RngStream r(101, 0);
  WeightedDataset ds;
  const int m = 7;
  ds.values.resize(m);
  ds.sigmas = Eigen::VectorXd::Zero(m);
  for (int i = 0; i < m; ++i) {
    Point p(2);
    p[0] = r.uniform01();
    p[1] = r.uniform01();
    ds.points.push_back(p);
    ds.values[i] = r.normal(0.0, 1.0);
  }
  RegressionModel model = fit_regression(ds);
  EXPECT_EQ(model.rho(), 0.0);
  for (int i = 0; i < m; ++i)
    EXPECT_NEAR(model.value(ds.points[i]), ds.values[i], 1e-9);
}

TEST(Regression, ExactlyLinearDataYieldsLinearBranch) {
  WeightedDataset ds;
  const int m = 9;
  ds.values.resize(m);
  ds.sigmas = Eigen::VectorXd::Ones(m);
  for (int i = 0; i < m; ++i) {
    const double x = static_cast<double>(i) / (m - 1);
    ds.points.push_back(pt1(x));
    ds.values[i] = 2.0 + 3.0 * x;
  }
  RegressionModel model = fit_regression(ds);
  EXPECT_TRUE(model.is_linear());
  EXPECT_NEAR(model.rbf_weights().norm(), 0.0, 1e-12);
  for (double x : {0.05, 0.35, 0.77}) {
    EXPECT_NEAR(model.value(pt1(x)), 2.0 + 3.0 * x, 1e-9);
  }
  // Against the closed-form weighted least-squares oracle.
  Eigen::MatrixXd a(m, 2);
  Eigen::VectorXd b(m);
  for (int i = 0; i < m; ++i) {
    a(i, 0) = 1.0;
    a(i, 1) = ds.points[i][0];
    b[i] = ds.values[i];
  }
  const Eigen::VectorXd beta =
      (a.transpose() * a).ldlt().solve(a.transpose() * b);
  EXPECT_NEAR(model.linear_coefficients()[0], beta[0], 1e-9);
  EXPECT_NEAR(model.linear_coefficients()[1], beta[1], 1e-9);
}

TEST(Regression, CriterionReachesOneOnNoisyData) {
  adogs::RngStream r(102, 0);
  WeightedDataset ds = noisy_sine(12, 0.1, r);
  RegressionModel model = fit_regression(ds);
  ASSERT_FALSE(model.is_linear());
  EXPECT_GT(model.rho(), 0.0);
  EXPECT_NEAR(criterion_oracle(model, ds), 1.0, 1e-6);
  // Identity with the weight form rho^2 sum (w_i sigma_i)^2.
  double t_identity = 0.0;
  for (int i = 0; i < ds.size(); ++i) {
    const double x = model.rho() * ds.sigmas[i] * model.rbf_weights()[i];
    t_identity += x * x;
  }
  EXPECT_NEAR(t_identity, 1.0, 1e-6);
}

TEST(Regression, StationarityIdentityHolds) {
  adogs::RngStream r(103, 0);
  for (int rep = 0; rep < 20; ++rep) {
    const int dim = 1 + rep % 2;
    WeightedDataset ds = random_dataset(dim, 8 + rep, r);
    RegressionModel model = fit_regression(ds);
    if (model.is_linear()) continue;
    const double scale = ds.values.cwiseAbs().maxCoeff() + 1.0;
    for (int i = 0; i < ds.size(); ++i) {
      const double resid = model.value(ds.points[i]) - ds.values[i];
      const double stat = resid + model.rho() * ds.sigmas[i] * ds.sigmas[i] *
                                      model.rbf_weights()[i];
      EXPECT_NEAR(stat, 0.0, 1e-8 * scale) << "rep " << rep << " i " << i;
    }
  }
}

TEST(Regression, CriterionIsMonotoneInRho) {
  adogs::RngStream r(104, 0);
  WeightedDataset ds = noisy_sine(14, 0.15, r);
  double prev = -1.0;
  for (double rho : {1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3}) {
    RegressionModel m = fit_regression_at(ds, rho);
    const double t = criterion_oracle(m, ds);
    EXPECT_GE(t, prev - 1e-12);
    prev = t;
  }
}

TEST(Regression, WeightDerivativeMatchesFiniteDifference) {
  // Independently rebuild the smoothing system, solve its derivative
  // equations, and compare with a centred difference of the fitted weights.
  adogs::RngStream r(105, 0);
  WeightedDataset ds = noisy_sine(10, 0.2, r);
  const int m = ds.size();
  const double rho = 0.7;
  const double h = 1e-6;

  Eigen::MatrixXd a(m + 2, m + 2);
  a.setZero();
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      const double d = std::abs(ds.points[i][0] - ds.points[j][0]);
      a(i, j) = d * d * d;
    }
    a(i, i) += rho * ds.sigmas[i] * ds.sigmas[i];
    a(i, m) = a(m, i) = 1.0;
    a(i, m + 1) = a(m + 1, i) = ds.points[i][0];
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + 2);
  rhs.head(m) = ds.values;
  const Eigen::VectorXd z = a.partialPivLu().solve(rhs);
  Eigen::VectorXd drhs = Eigen::VectorXd::Zero(m + 2);
  for (int i = 0; i < m; ++i)
    drhs[i] = -ds.sigmas[i] * ds.sigmas[i] * z[i];
  const Eigen::VectorXd dz = a.partialPivLu().solve(drhs);

  const Eigen::VectorXd w_plus = fit_regression_at(ds, rho + h).rbf_weights();
  const Eigen::VectorXd w_minus = fit_regression_at(ds, rho - h).rbf_weights();
  for (int i = 0; i < m; ++i) {
    const double fd = (w_plus[i] - w_minus[i]) / (2.0 * h);
    EXPECT_NEAR(dz[i], fd, 1e-4 * (1.0 + std::abs(fd)));
  }
}

TEST(Regression, StrictnessFallbackForSmallBeta) {
  adogs::RngStream r(106, 0);
  WeightedDataset ds = noisy_sine(12, 0.1, r);
  RegressionModel loose = fit_regression(ds, 4.0);
  RegressionModel tight = fit_regression(ds, 0.2);
  ASSERT_FALSE(loose.is_linear());
  // At the criterion solution the worst scaled residual is <= 1, so beta=4
  // is automatic while beta=0.2 forces the smoothing parameter downward.
  EXPECT_TRUE(loose.strictness_satisfied());
  EXPECT_LE(loose.max_strictness_ratio(), 1.0 + 1e-9);
  EXPECT_TRUE(tight.strictness_satisfied());
  EXPECT_LE(tight.max_strictness_ratio(), 0.2 * (1.0 + 1e-9));
  EXPECT_LT(tight.rho(), loose.rho());
  EXPECT_LT(criterion_oracle(tight, ds), 1.0);
}

TEST(Regression, MixedExactAndNoisyPoints) {
  adogs::RngStream r(107, 0);
  WeightedDataset ds = noisy_sine(10, 0.2, r);
  // Two exact anchor points appended; the system interpolates them for any
  // smoothing parameter because their regularization diagonal is zero.
  ds.points.push_back(pt1(0.317));
  ds.points.push_back(pt1(0.771));
  ds.values.conservativeResize(12);
  ds.sigmas.conservativeResize(12);
  ds.values[10] = 0.9;
  ds.sigmas[10] = 0.0;
  ds.values[11] = -0.4;
  ds.sigmas[11] = 0.0;
  RegressionModel model = fit_regression(ds);
  EXPECT_NEAR(model.value(pt1(0.317)), 0.9, 1e-7);
  EXPECT_NEAR(model.value(pt1(0.771)), -0.4, 1e-7);
  if (!model.is_linear()) EXPECT_NEAR(criterion_oracle(model, ds), 1.0, 1e-6);
}

TEST(Regression, WarmStartReproducesTheFit) {
  adogs::RngStream r(108, 0);
  WeightedDataset ds = noisy_sine(12, 0.12, r);
  RegressionModel cold = fit_regression(ds);
  RegressionModel warm = fit_regression(ds, 4.0, cold.rho());
  EXPECT_NEAR(warm.rho(), cold.rho(), 1e-6 * cold.rho());
  EXPECT_NEAR(warm.value(pt1(0.4)), cold.value(pt1(0.4)), 1e-8);
}

TEST(Regression, DuplicateExactPointsAreSingular) {
  WeightedDataset ds;
  ds.points = {pt1(0.2), pt1(0.2), pt1(0.8)};
  ds.values.resize(3);
  ds.values << 1.0, 2.0, 3.0;
  ds.sigmas = Eigen::VectorXd::Zero(3);
  EXPECT_THROW(fit_regression(ds), adogs::SingularSystem);
}

TEST(Regression, GradientAndHessianMatchFiniteDifferences) {
  adogs::RngStream r(109, 0);
  WeightedDataset ds = random_dataset(2, 12, r);
  RegressionModel model = fit_regression(ds);
  const double h = 1e-6;
  for (int trial = 0; trial < 5; ++trial) {
    Point x(2);
    x[0] = r.uniform01();
    x[1] = r.uniform01();
    const Eigen::VectorXd g = model.gradient(x);
    const Eigen::MatrixXd hess = model.hessian(x);
    for (int j = 0; j < 2; ++j) {
      Point xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      const double fd = (model.value(xp) - model.value(xm)) / (2.0 * h);
      EXPECT_NEAR(g[j], fd, 1e-5 * (1.0 + std::abs(fd)));
      const Eigen::VectorXd gfd =
          (model.gradient(xp) - model.gradient(xm)) / (2.0 * h);
      for (int k = 0; k < 2; ++k)
        EXPECT_NEAR(hess(j, k), gfd[k], 1e-4 * (1.0 + std::abs(gfd[k])));
    }
  }
}

TEST(Regression, InvalidInputsThrow) {
  WeightedDataset empty;
  EXPECT_THROW(fit_regression(empty), std::invalid_argument);

  WeightedDataset bad;
  bad.points = {pt1(0.1), pt1(0.9)};
  bad.values.resize(2);
  bad.values << 1.0, 2.0;
  bad.sigmas.resize(1);
  bad.sigmas << 0.1;
  EXPECT_THROW(fit_regression(bad), std::invalid_argument);

  WeightedDataset neg;
  neg.points = {pt1(0.1), pt1(0.9)};
  neg.values.resize(2);
  neg.values << 1.0, 2.0;
  neg.sigmas.resize(2);
  neg.sigmas << 0.1, -0.2;
  EXPECT_THROW(fit_regression(neg), std::invalid_argument);

  WeightedDataset ok;
  ok.points = {pt1(0.1), pt1(0.5), pt1(0.9)};
  ok.values.resize(3);
  ok.values << 1.0, 2.0, 3.0;
  ok.sigmas.resize(3);
  ok.sigmas << 0.1, 0.1, 0.1;
  EXPECT_THROW(fit_regression(ok, -1.0), std::invalid_argument);
  EXPECT_THROW(fit_regression_at(ok, -0.5), std::invalid_argument);
}

}  // namespace
