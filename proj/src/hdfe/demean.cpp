#include <algorithm>
#include <cmath>
#include <sstream>

#include "peerimport/hdfe.hpp"
#include "peerimport/parallel.hpp"

namespace peerimport::hdfe {

namespace {

// Subtracts group means of one factor in place; returns the largest |mean|.
double project_out(Eigen::Ref<Eigen::VectorXd> v, const Factor& f, std::vector<double>& sums) {
  sums.assign(f.groups(), 0.0);
  const auto* codes = f.codes.data();
  const auto n = v.size();
  for (Eigen::Index r = 0; r < n; ++r) sums[codes[r]] += v[r];
  double worst = 0.0;
  for (std::size_t g = 0; g < sums.size(); ++g) {
    sums[g] /= f.sizes[g];
    worst = std::max(worst, std::abs(sums[g]));
  }
  for (Eigen::Index r = 0; r < n; ++r) v[r] -= sums[codes[r]];
  return worst;
}

double sweep(Eigen::Ref<Eigen::VectorXd> v, std::span<const Factor> factors, std::vector<double>& sums) {
  double worst = 0.0;
  for (auto& f : factors) worst = std::max(worst, project_out(v, f, sums));
  return worst;
}

double column_scale(const Eigen::Ref<const Eigen::VectorXd>& v) {
  double s = v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
  return s > 0 ? s : 1.0;
}

ColumnReport demean_column(Eigen::Ref<Eigen::VectorXd> v, std::span<const Factor> factors, const DemeanOptions& opt,
                           std::size_t col) {
  ColumnReport rep;
  const double scale = column_scale(v);
  const double tol = opt.tol * scale;
  std::vector<double> sums;
  std::vector<double> trace;

  if (factors.size() == 1) {
    project_out(v, factors[0], sums);
    rep.iterations = 1;
    rep.max_group_mean = max_abs_group_mean(v, factors) / scale;
    return rep;
  }

  Eigen::VectorXd r1, r2;
  for (int it = 0; it < opt.max_iter;) {
    if (!opt.accelerate) {
      double moved = sweep(v, factors, sums);
      ++it;
      trace.push_back(moved / scale);
      if (moved <= tol) {
        double audit = max_abs_group_mean(v, factors);
        if (audit <= tol) {
          rep.iterations = it;
          rep.max_group_mean = audit / scale;
          return rep;
        }
      }
      continue;
    }
    // Irons-Tuck step from x, F(x), F(F(x)); the affine combination stays in
    // x0 + span of the dummies, so it only changes the path.
    r1 = v;
    double m1 = sweep(r1, factors, sums);
    r2 = r1;
    double m2 = sweep(r2, factors, sums);
    it += 2;
    trace.push_back(m2 / scale);
    if (m1 <= tol || m2 <= tol) {
      v = r2;
      double audit = max_abs_group_mean(v, factors);
      if (audit <= tol) {
        rep.iterations = it;
        rep.max_group_mean = audit / scale;
        return rep;
      }
      continue;
    }
    Eigen::VectorXd d1 = r2 - r1;
    Eigen::VectorXd d2 = d1 - (r1 - v);
    double den = d2.squaredNorm();
    if (den > 0) v = r2 - (d1.dot(d2) / den) * d1;
    else v = r2;
  }
  std::ostringstream msg;
  msg << "column " << col << " did not converge in " << opt.max_iter << " sweeps; relative residual trace:";
  std::size_t from = trace.size() > 8 ? trace.size() - 8 : 0;
  for (std::size_t k = from; k < trace.size(); ++k) msg << ' ' << trace[k];
  throw Error("hdfe", msg.str(), "raise max_iter or check for a disconnected factor structure");
}

}  // namespace

double max_abs_group_mean(const Eigen::Ref<const Eigen::VectorXd>& v, std::span<const Factor> factors) {
  double worst = 0.0;
  std::vector<double> sums;
  for (auto& f : factors) {
    sums.assign(f.groups(), 0.0);
    for (Eigen::Index r = 0; r < v.size(); ++r) sums[f.codes[r]] += v[r];
    for (std::size_t g = 0; g < sums.size(); ++g) worst = std::max(worst, std::abs(sums[g] / f.sizes[g]));
  }
  return worst;
}

DemeanedMatrix demean(const Eigen::MatrixXd& m, std::span<const Factor> factors, const DemeanOptions& opt) {
  if (factors.empty()) throw Error("hdfe", "demean needs at least one factor");
  if (!(opt.tol > 0)) throw Error("hdfe", "tolerance must be positive");
  for (auto& f : factors)
    if (f.rows() != static_cast<std::size_t>(m.rows()))
      throw Error("hdfe", "factor " + f.name + " has " + std::to_string(f.rows()) + " rows, matrix has " +
                              std::to_string(m.rows()));
  DemeanedMatrix out;
  out.columns = m;
  out.report.resize(static_cast<std::size_t>(m.cols()));
  parallel_for(
      static_cast<std::size_t>(m.cols()),
      [&](std::size_t b, std::size_t e) {
        for (std::size_t c = b; c < e; ++c)
          out.report[c] = demean_column(out.columns.col(static_cast<Eigen::Index>(c)), factors, opt, c);
      },
      1);
  for (auto& r : out.report) {
    out.iterations = std::max(out.iterations, r.iterations);
    out.max_group_mean = std::max(out.max_group_mean, r.max_group_mean);
  }
  return out;
}

}  // namespace peerimport::hdfe
