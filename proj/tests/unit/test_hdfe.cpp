#include <doctest.h>

#include <map>
#include <random>

#include <Eigen/Dense>

#include "peerimport/hdfe.hpp"

using namespace peerimport;
using namespace peerimport::hdfe;

namespace {

Factor fac(std::vector<std::uint64_t> keys, std::string name = "f") { return from_keys(std::move(name), keys); }

panel::ObservationRow row(std::uint32_t firm, Origin o, int year, std::uint32_t zip = 0, std::uint32_t ind = 0) {
  return {firm_id(firm), o, year, 0, zip, ind};
}

// OLS of y on [X | dummies for every group of every factor] by dense QR; the
// dummy block is rank deficient, so use a rank-revealing solver and compare
// the X coefficients only.
Eigen::VectorXd dummy_ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const std::vector<Factor>& fs) {
  Eigen::Index cols = X.cols();
  for (auto& f : fs) cols += static_cast<Eigen::Index>(f.groups());
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(X.rows(), cols);
  D.leftCols(X.cols()) = X;
  Eigen::Index off = X.cols();
  for (auto& f : fs) {
    for (std::size_t r = 0; r < f.rows(); ++r) D(static_cast<Eigen::Index>(r), off + f.codes[r]) = 1.0;
    off += static_cast<Eigen::Index>(f.groups());
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(D);
  return cod.solve(y).head(X.cols());
}

}  // namespace

TEST_CASE("encode: firm-year and origin-cell keys") {
  std::vector<panel::ObservationRow> rows{row(1, Origin::EU, 2011), row(1, Origin::EU, 2012), row(2, Origin::EU, 2011)};
  std::vector<FactorKind> k{FactorKind::FirmYear};
  CHECK(encode(rows, k)[0].groups() == 3);

  std::vector<panel::ObservationRow> two{row(1, Origin::EU, 2011), row(1, Origin::NonEU, 2011)};
  auto f = encode(two, k)[0];
  CHECK(f.groups() == 1);

  std::vector<panel::ObservationRow> cell{row(1, Origin::EU, 2012, 9, 1), row(2, Origin::NonEU, 2012, 9, 1)};
  std::vector<FactorKind> e{FactorKind::OriginIndustryZipYear};
  CHECK(encode(cell, e)[0].groups() == 2);
  std::vector<FactorKind> s{FactorKind::IndustryZipYear};
  CHECK(encode(cell, s)[0].groups() == 1);

  for (auto kind : {FactorKind::Firm, FactorKind::FirmYear, FactorKind::OriginYear, FactorKind::OriginIndustryZipYear,
                    FactorKind::IndustryZipYear})
    CHECK(parse_factor(factor_label(kind)) == kind);
  CHECK(factor_label(FactorKind::FirmYear) == "id-y");
  CHECK(factor_label(FactorKind::OriginIndustryZipYear) == "eu-s-z-y");
}

TEST_CASE("drop_singletons: single pass, recursive fixpoint, identity") {
  // f1: A A B ; f2: x y y -> row 2 alone in B -> drop; then row 0 alone in x
  // under f2 -> drop on the second pass; row 1 then alone too
  auto f1 = fac({1, 1, 2}), f2 = fac({7, 8, 8});
  std::vector<Factor> fs{f1, f2};
  auto once = drop_singletons(fs, false);
  CHECK(once.keep == std::vector<std::size_t>{1});
  auto rec = drop_singletons(fs, true);
  CHECK(rec.keep.empty());
  CHECK(rec.dropped == 3);

  auto g1 = fac({1, 1, 2, 2}), g2 = fac({5, 6, 5, 6});
  std::vector<Factor> none{g1, g2};
  auto id = drop_singletons(none, true);
  CHECK(id.dropped == 0);
  CHECK(id.keep.size() == 4);

  // fixpoint oracle: brute-force repeated scans on random data
  std::mt19937_64 g(4);
  for (int rep = 0; rep < 50; ++rep) {
    std::uniform_int_distribution<int> a(0, 14), b(0, 9);
    std::vector<std::uint64_t> k1, k2;
    for (int r = 0; r < 40; ++r) {
      k1.push_back(static_cast<std::uint64_t>(a(g)));
      k2.push_back(static_cast<std::uint64_t>(b(g)));
    }
    std::vector<bool> alive(40, true);
    for (bool changed = true; changed;) {
      changed = false;
      for (auto* k : {&k1, &k2}) {
        std::map<std::uint64_t, int> cnt;
        for (int r = 0; r < 40; ++r)
          if (alive[static_cast<std::size_t>(r)]) ++cnt[(*k)[static_cast<std::size_t>(r)]];
        for (int r = 0; r < 40; ++r)
          if (alive[static_cast<std::size_t>(r)] && cnt[(*k)[static_cast<std::size_t>(r)]] == 1) {
            alive[static_cast<std::size_t>(r)] = false;
            changed = true;
          }
      }
    }
    std::vector<std::size_t> want;
    for (std::size_t r = 0; r < 40; ++r)
      if (alive[r]) want.push_back(r);
    std::vector<Factor> rf{fac(k1), fac(k2)};
    CHECK(drop_singletons(rf, true).keep == want);
  }
}

TEST_CASE("restrict re-encodes densely") {
  auto f = fac({3, 3, 9, 4, 9});
  std::vector<std::size_t> keep{2, 3, 4};
  auto r = restrict(f, keep);
  CHECK(r.codes == std::vector<std::uint32_t>{0, 1, 0});
  CHECK(r.sizes == std::vector<std::uint32_t>{2, 1});
}

TEST_CASE("demean: one factor, nested factors, additive two-way layout") {
  Eigen::MatrixXd y(4, 1);
  y << 1, 2, 3, 4;
  std::vector<Factor> one{fac({0, 0, 1, 1})};
  auto d = demean(y, one);
  CHECK(d.columns(0, 0) == doctest::Approx(-0.5));
  CHECK(d.columns(1, 0) == doctest::Approx(0.5));
  CHECK(d.columns(2, 0) == doctest::Approx(-0.5));
  CHECK(d.columns(3, 0) == doctest::Approx(0.5));
  CHECK(d.iterations <= 1);

  // nested: fine factor within coarse factor
  std::mt19937_64 g(8);
  std::normal_distribution<double> N;
  Eigen::MatrixXd v(12, 1);
  for (int r = 0; r < 12; ++r) v(r, 0) = N(g);
  auto fine = fac({0, 0, 1, 1, 2, 2, 3, 3, 4, 4, 5, 5}), coarse = fac({0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2});
  std::vector<Factor> nest{coarse, fine};
  std::vector<Factor> only{fine};
  auto a = demean(v, nest), b = demean(v, only);
  CHECK(a.iterations <= 2);
  CHECK((a.columns - b.columns).cwiseAbs().maxCoeff() < 1e-10);

  // 2x2 balanced crossed layout, y additive in row and column effects
  Eigen::MatrixXd add(4, 1);
  add << 1, 2, 3, 4;  // = 1 + 2*row + col with row,col in {0,1}
  std::vector<Factor> crossed{fac({0, 0, 1, 1}), fac({0, 1, 0, 1})};
  auto c = demean(add, crossed);
  CHECK(c.columns.cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("demean: projection, linearity, tolerance contract") {
  std::mt19937_64 g(12);
  std::normal_distribution<double> N;
  std::uniform_int_distribution<int> a(0, 19), b(0, 24);
  const int n = 300;
  std::vector<std::uint64_t> k1, k2;
  Eigen::MatrixXd X(n, 2);
  for (int r = 0; r < n; ++r) {
    k1.push_back(static_cast<std::uint64_t>(a(g)));
    k2.push_back(static_cast<std::uint64_t>(b(g)));
    X(r, 0) = N(g);
    X(r, 1) = N(g) + 0.1 * static_cast<double>(k1.back());
  }
  std::vector<Factor> fs{fac(k1), fac(k2)};
  DemeanOptions opt;
  auto d = demean(X, fs, opt);
  for (Eigen::Index c = 0; c < 2; ++c) {
    double scale = std::max(1.0, X.col(c).cwiseAbs().maxCoeff());
    CHECK(max_abs_group_mean(d.columns.col(c), fs) <= opt.tol * scale * 1.0001);
    CHECK(d.report[static_cast<std::size_t>(c)].max_group_mean <= opt.tol);
  }
  auto twice = demean(d.columns, fs, opt);
  CHECK((twice.columns - d.columns).cwiseAbs().maxCoeff() < 1e-7);

  Eigen::MatrixXd comb(n, 1);
  comb.col(0) = 2.0 * X.col(0) - 3.0 * X.col(1);
  auto dc = demean(comb, fs, opt);
  CHECK((dc.columns.col(0) - (2.0 * d.columns.col(0) - 3.0 * d.columns.col(1))).cwiseAbs().maxCoeff() < 1e-6);

  // non-convergence surfaces as an error
  DemeanOptions tight;
  tight.max_iter = 1;
  tight.accelerate = false;
  CHECK_THROWS_AS(demean(X, fs, tight), Error);
}

TEST_CASE("FWL: absorbed OLS equals dummy OLS on random crossed layouts") {
  std::mt19937_64 g(99);
  std::normal_distribution<double> N;
  for (int rep = 0; rep < 25; ++rep) {
    std::uniform_int_distribution<int> rows(60, 300), groups(3, 40);
    int n = rows(g), G1 = groups(g), G2 = groups(g);
    std::uniform_int_distribution<int> a(0, G1 - 1), b(0, G2 - 1);
    std::vector<std::uint64_t> k1, k2;
    for (int r = 0; r < n; ++r) {
      k1.push_back(static_cast<std::uint64_t>(a(g)));
      k2.push_back(static_cast<std::uint64_t>(b(g)));
    }
    std::vector<Factor> fs{fac(k1), fac(k2)};
    Eigen::MatrixXd X(n, 3);
    Eigen::VectorXd y(n);
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < 3; ++c) X(r, c) = N(g) + 0.3 * static_cast<double>(k1[static_cast<std::size_t>(r)] % 5);
      y[r] = X.row(r).dot(Eigen::Vector3d(1.0, -0.5, 0.25)) + static_cast<double>(k2[static_cast<std::size_t>(r)]) +
             N(g);
    }
    Eigen::MatrixXd all(n, 4);
    all << y, X;
    DemeanOptions opt;
    opt.tol = 1e-13;
    auto d = demean(all, fs, opt);
    Eigen::MatrixXd Xd = d.columns.rightCols(3);
    Eigen::VectorXd yd = d.columns.col(0);
    Eigen::VectorXd b_abs = Xd.colPivHouseholderQr().solve(yd);
    Eigen::VectorXd b_dum = dummy_ols(y, X, fs);
    CHECK(((b_abs - b_dum).cwiseAbs().array() / b_dum.cwiseAbs().array().max(1e-12)).maxCoeff() <= 1e-8);
  }
}

TEST_CASE("absorbed_dof and connected components") {
  std::vector<Factor> one{fac({0, 1, 2, 0})};
  CHECK(absorbed_dof(one).value == 3);

  // connected: 3 + 4 groups, one component
  auto a = fac({0, 0, 1, 1, 2, 2, 0}), b = fac({0, 1, 1, 2, 2, 3, 3});
  CHECK(connected_components(a, b) == 1);
  std::vector<Factor> c1{a, b};
  CHECK(absorbed_dof(c1).value == 6);
  CHECK(absorbed_dof(c1).exact);

  // two components: {A,B} x {0,1} and {C} x {2,3}
  auto p = fac({0, 0, 1, 1, 2, 2}), q = fac({0, 1, 0, 1, 2, 3});
  auto p3 = fac({0, 0, 1, 1, 2, 2}), q4 = fac({0, 1, 0, 1, 2, 3});
  CHECK(connected_components(p, q) == 2);
  std::vector<Factor> c2{p3, q4};
  CHECK(absorbed_dof(c2).value == 3 + 4 - 2);

  // dummy-rank oracle for random pairs
  std::mt19937_64 g(21);
  for (int rep = 0; rep < 30; ++rep) {
    std::uniform_int_distribution<int> u1(0, 7), u2(0, 9);
    std::vector<std::uint64_t> k1, k2;
    for (int r = 0; r < 25; ++r) {
      k1.push_back(static_cast<std::uint64_t>(u1(g)));
      k2.push_back(static_cast<std::uint64_t>(u2(g)));
    }
    std::vector<Factor> fs{fac(k1), fac(k2)};
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(25, static_cast<Eigen::Index>(fs[0].groups() + fs[1].groups()));
    for (int r = 0; r < 25; ++r) {
      D(r, fs[0].codes[static_cast<std::size_t>(r)]) = 1;
      D(r, static_cast<Eigen::Index>(fs[0].groups()) + fs[1].codes[static_cast<std::size_t>(r)]) = 1;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(D);
    CHECK(absorbed_dof(fs).value == static_cast<std::size_t>(lu.rank()));
  }

  auto inner = fac({0, 1, 2, 3}), outer = fac({0, 0, 1, 1});
  CHECK(nested(inner, outer.codes));
  CHECK_FALSE(nested(outer, inner.codes));
}
