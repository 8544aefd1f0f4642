#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Dense>

#include "peerimport/estimator.hpp"
#include "peerimport/types.hpp"

using namespace peerimport;
using namespace peerimport::est;

namespace {

Clusters per_row(std::size_t n) {
  std::vector<std::uint64_t> k(n);
  std::iota(k.begin(), k.end(), 0);
  return Clusters::from_keys(k);
}

Clusters blocks(std::size_t n, std::size_t size) {
  std::vector<std::uint64_t> k(n);
  for (std::size_t r = 0; r < n; ++r) k[r] = r / size;
  return Clusters::from_keys(k);
}

// overidentified linear IV draw: x = Z pi + v, y = b x + e, corr(v, e) != 0;
// `bad` shifts the last instrument into the structural error
struct IvDraw {
  Eigen::VectorXd y;
  Eigen::MatrixXd x, Z;
};

IvDraw iv_draw(std::mt19937_64& g, int n, double bad = 0.0) {
  std::normal_distribution<double> N;
  IvDraw d{Eigen::VectorXd(n), Eigen::MatrixXd(n, 1), Eigen::MatrixXd(n, 3)};
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < 3; ++c) d.Z(r, c) = N(g);
    double v = N(g), e = 0.6 * v + 0.8 * N(g) + bad * d.Z(r, 2);
    d.x(r, 0) = 0.5 * d.Z(r, 0) + 0.4 * d.Z(r, 1) + 0.3 * d.Z(r, 2) + v;
    d.y[r] = 1.5 * d.x(r, 0) + e;
  }
  d.y.array() -= d.y.mean();
  d.x.col(0).array() -= d.x.col(0).mean();
  for (int c = 0; c < 3; ++c) d.Z.col(c).array() -= d.Z.col(c).mean();
  return d;
}

}  // namespace

TEST_CASE("ols: exact fit, rank errors") {
  Eigen::MatrixXd X(6, 1);
  X << 1, -2, 3, 0.5, -1, 2;
  Eigen::VectorXd y = 2.0 * X.col(0);
  auto r = ols(y, X, {"x"}, blocks(6, 2));
  CHECK(r.beta[0] == doctest::Approx(2.0));
  CHECK(r.se[0] < 1e-12);

  Eigen::MatrixXd D(6, 2);
  D << X, X;
  try {
    ols(y, D, {"a", "b"}, blocks(6, 2));
    FAIL("expected rank error");
  } catch (const Error& e) {
    std::string m = e.what();
    CHECK((m.find("a") != std::string::npos || m.find("b") != std::string::npos));
  }
}

TEST_CASE("ols: one cluster per row gives the HC sandwich times CR1") {
  std::mt19937_64 g(1);
  std::normal_distribution<double> N;
  const int n = 50;
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  for (int r = 0; r < n; ++r) {
    X(r, 0) = N(g);
    X(r, 1) = N(g);
    y[r] = X(r, 0) - X(r, 1) + (1 + std::abs(X(r, 0))) * N(g);
  }
  auto res = ols(y, X, {"a", "b"}, per_row(n));
  Eigen::VectorXd b = (X.transpose() * X).ldlt().solve(X.transpose() * y);
  Eigen::VectorXd e = y - X * b;
  Eigen::MatrixXd bread = (X.transpose() * X).inverse();
  Eigen::MatrixXd meat = X.transpose() * e.cwiseAbs2().asDiagonal() * X;
  double f = (double(n) / (n - 1)) * (double(n - 1) / (n - 2));
  Eigen::MatrixXd hc = bread * meat * bread * f;
  CHECK((res.beta - b).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((res.vcov - hc).cwiseAbs().maxCoeff() < 1e-12 * hc.cwiseAbs().maxCoeff());
  CHECK(cr1_factor(n, n, 2) == doctest::Approx(f));
}

TEST_CASE("ols: PSD covariance, cluster relabeling, y scaling") {
  std::mt19937_64 g(2);
  std::normal_distribution<double> N;
  const int n = 120;
  Eigen::MatrixXd X(n, 3);
  Eigen::VectorXd y(n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < 3; ++c) X(r, c) = N(g);
    y[r] = X.row(r).sum() + N(g);
  }
  std::vector<std::string> L{"a", "b", "c"};
  auto base = ols(y, X, L, blocks(n, 4));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(base.vcov);
  CHECK(es.eigenvalues().minCoeff() >= -1e-10 * base.vcov.trace());
  CHECK((base.vcov - base.vcov.transpose()).cwiseAbs().maxCoeff() == 0.0);

  std::vector<std::uint64_t> relabel(n);
  for (int r = 0; r < n; ++r) relabel[static_cast<std::size_t>(r)] = 1000003ULL * static_cast<std::uint64_t>(29 - r / 4);
  auto rl = ols(y, X, L, Clusters::from_keys(relabel));
  CHECK((rl.beta - base.beta).cwiseAbs().maxCoeff() == 0.0);
  CHECK((rl.se - base.se).cwiseAbs().maxCoeff() < 1e-14);

  auto sc = ols(3.0 * y, X, L, blocks(n, 4));
  CHECK((sc.beta - 3.0 * base.beta).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((sc.se - 3.0 * base.se).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((sc.t - base.t).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("ols: absorbed dof enters K_eff, nested groups leave it") {
  std::mt19937_64 g(3);
  std::normal_distribution<double> N;
  Eigen::MatrixXd X(40, 1);
  Eigen::VectorXd y(40);
  for (int r = 0; r < 40; ++r) {
    X(r, 0) = N(g);
    y[r] = N(g);
  }
  Options opt;
  opt.absorbed = {10, 4, false};
  auto r = ols(y, X, {"x"}, blocks(40, 2), opt);
  CHECK(r.K_eff == 1 + 10 - 4);
  CHECK(r.ss_factor == doctest::Approx(cr1_factor(40, 20, 7)));
}

TEST_CASE("tsls: closed form, self-instrumenting, under-identification") {
  std::mt19937_64 g(4);
  std::normal_distribution<double> N;
  const int n = 20;
  Eigen::MatrixXd x(n, 1), z(n, 1), none(n, 0);
  Eigen::VectorXd y(n);
  for (int r = 0; r < n; ++r) {
    z(r, 0) = N(g);
    x(r, 0) = z(r, 0) + 0.5 * N(g);
    y[r] = 0.7 * x(r, 0) + N(g);
  }
  auto c = blocks(n, 2);
  auto r = tsls(y, x, none, z, {"x"}, {}, c);
  CHECK(r.beta[0] == doctest::Approx(z.col(0).dot(y) / z.col(0).dot(x.col(0))).epsilon(1e-12));
  CHECK(r.iv->just_identified);
  CHECK(r.iv->hansen_j == 0.0);
  CHECK(r.iv->hansen_p == 1.0);

  auto self = tsls(y, x, none, x, {"x"}, {}, c);
  auto o = ols(y, x, {"x"}, c);
  CHECK(self.beta[0] == doctest::Approx(o.beta[0]).epsilon(1e-12));
  CHECK(self.iv->first_stage[0].capped);

  Eigen::MatrixXd x2(n, 2);
  x2 << x, z;
  CHECK_THROWS_AS(tsls(y, x2, none, z, {"a", "b"}, {}, c), Error);
}

TEST_CASE("first stage: irrelevant instrument is flagged weak, null F near 1") {
  std::mt19937_64 g(5);
  std::normal_distribution<double> N;
  const int n = 2000;
  double sumF = 0;
  int reps = 200, weak = 0;
  for (int rep = 0; rep < reps; ++rep) {
    Eigen::MatrixXd x(n, 1), z(n, 1), none(n, 0);
    Eigen::VectorXd y(n);
    for (int r = 0; r < n; ++r) {
      x(r, 0) = N(g);
      z(r, 0) = N(g);
      y[r] = x(r, 0) + N(g);
    }
    auto d = first_stage_diagnostics(x, z, none, per_row(n), {"x"});
    sumF += d.min_F;
    weak += d.weak;
  }
  double meanF = sumF / reps;
  // F(1, inf) has mean 1 and variance 2: the mean of 200 draws is within 0.3 w.h.p.
  CHECK(meanF > 0.7);
  CHECK(meanF < 1.3);
  CHECK(weak > reps * 9 / 10);
}

TEST_CASE("first stage: Cragg-Donald below the weaker per-regressor F") {
  std::mt19937_64 g(6);
  std::normal_distribution<double> N;
  const int n = 3000;
  Eigen::MatrixXd X(n, 2), Z(n, 2), none(n, 0);
  for (int r = 0; r < n; ++r) {
    Z(r, 0) = N(g);
    Z(r, 1) = N(g);
    // both regressors load on the strong instrument; only the weak one
    // separates them
    X(r, 0) = Z(r, 0) + N(g);
    X(r, 1) = Z(r, 0) + 0.05 * Z(r, 1) + N(g);
  }
  auto d = first_stage_diagnostics(X, Z, none, per_row(n), {"a", "b"});
  CHECK(d.cragg_donald < d.min_F);
  CHECK(d.anderson_lm >= 0.0);
}

TEST_CASE("hansen_j matches a direct computation") {
  std::mt19937_64 g(7);
  auto d = iv_draw(g, 200);
  Eigen::VectorXd e(200);
  std::normal_distribution<double> N;
  for (int r = 0; r < 200; ++r) e[r] = N(g);
  auto c = blocks(200, 5);
  auto j = hansen_j(e, d.Z, c, 1);
  Eigen::VectorXd gbar = d.Z.transpose() * e;
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(3, 3);
  for (std::size_t k = 0; k < c.count; ++k) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(3);
    for (int r = 0; r < 200; ++r)
      if (c.codes[static_cast<std::size_t>(r)] == k) s += d.Z.row(r).transpose() * e[r];
    S += s * s.transpose();
  }
  double want = gbar.dot(S.ldlt().solve(gbar));
  CHECK(j.stat == doctest::Approx(want).epsilon(1e-9));
  CHECK(j.dof == 2);
  CHECK(j.p == doctest::Approx(std::exp(-want / 2)).epsilon(1e-9));  // chi2(2) survival
}

TEST_CASE("hansen_j: size under valid instruments, power under an invalid one") {
  std::mt19937_64 g(8);
  const int reps = 500, n = 400;
  int reject = 0, reject_bad = 0;
  Eigen::MatrixXd none(n, 0);
  for (int rep = 0; rep < reps; ++rep) {
    auto d = iv_draw(g, n);
    auto c = blocks(n, 2);
    auto r = tsls(d.y, d.x, none, d.Z, {"x"}, {}, c);
    CHECK(r.iv->j_dof == 2);
    reject += r.iv->hansen_p < 0.05;
    if (rep < 100) {
      auto b = iv_draw(g, n, 0.5);
      reject_bad += tsls(b.y, b.x, none, b.Z, {"x"}, {}, c).iv->hansen_p < 0.05;
    }
  }
  double rate = double(reject) / reps;
  CHECK(rate >= 0.02);
  CHECK(rate <= 0.09);
  CHECK(reject_bad > 80);
}

TEST_CASE("distribution helpers") {
  CHECK(t_pvalue(1.959963984540054, 1e9) == doctest::Approx(0.05).epsilon(1e-6));
  CHECK(t_pvalue(0.0, 10) == doctest::Approx(1.0));
  CHECK(chi2_pvalue(5.991464547107979, 2) == doctest::Approx(0.05).epsilon(1e-9));
  // F(1, d) is the square of t(d)
  CHECK(f_pvalue(4.0, 1, 30) == doctest::Approx(t_pvalue(2.0, 30)).epsilon(1e-10));
  CHECK(stars(0.004) == "***");
  CHECK(stars(0.03) == "**");
  CHECK(stars(0.07) == "*");
  CHECK(stars(0.2) == "");
  CHECK(stars(0.01) == "**");
}
