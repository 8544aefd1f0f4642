#include <cmath>
#include <unordered_map>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "peerimport/estimator.hpp"
#include "peerimport/types.hpp"

namespace peerimport::est {

Clusters Clusters::from_keys(std::span<const std::uint64_t> keys) {
  Clusters c;
  c.codes.resize(keys.size());
  std::unordered_map<std::uint64_t, std::uint32_t> seen;
  seen.reserve(keys.size() / 2 + 1);
  for (std::size_t r = 0; r < keys.size(); ++r) {
    auto [it, fresh] = seen.try_emplace(keys[r], static_cast<std::uint32_t>(seen.size()));
    c.codes[r] = it->second;
  }
  c.count = seen.size();
  return c;
}

double cr1_factor(std::size_t N, std::size_t G, std::size_t K_eff) {
  if (G < 2) throw Error("estimator", "cluster-robust covariance needs at least two clusters");
  if (N <= K_eff)
    throw Error("estimator",
                "no residual degrees of freedom (N=" + std::to_string(N) + ", K_eff=" + std::to_string(K_eff) + ")",
                "use fewer fixed effects or more data");
  return (static_cast<double>(G) / static_cast<double>(G - 1)) *
         (static_cast<double>(N - 1) / static_cast<double>(N - K_eff));
}

Eigen::MatrixXd cluster_vcov(const Eigen::MatrixXd& scores, const Eigen::VectorXd& e, const Eigen::MatrixXd& bread,
                             const Clusters& clusters, double factor) {
  const auto N = scores.rows();
  const auto K = scores.cols();
  if (static_cast<std::size_t>(N) != clusters.rows()) throw Error("estimator", "cluster codes do not match rows");
  // counting sort by cluster so each cluster's rows are visited together
  std::vector<std::size_t> start(clusters.count + 1, 0);
  for (auto c : clusters.codes) ++start[c + 1];
  for (std::size_t g = 0; g < clusters.count; ++g) start[g + 1] += start[g];
  std::vector<Eigen::Index> order(static_cast<std::size_t>(N));
  {
    auto pos = start;
    for (Eigen::Index r = 0; r < N; ++r) order[pos[clusters.codes[r]]++] = r;
  }
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(K, K);
  Eigen::VectorXd s(K);
  for (std::size_t g = 0; g < clusters.count; ++g) {
    if (start[g] == start[g + 1]) continue;
    s.setZero();
    for (auto k = start[g]; k < start[g + 1]; ++k) s.noalias() += scores.row(order[k]).transpose() * e[order[k]];
    meat.selfadjointView<Eigen::Lower>().rankUpdate(s);
  }
  meat = meat.selfadjointView<Eigen::Lower>();
  Eigen::MatrixXd v = factor * (bread * meat * bread);
  return 0.5 * (v + v.transpose());
}

Eigen::VectorXd solve_ls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<std::string>& labels,
                         double rank_tol) {
  const auto K = X.cols();
  auto name = [&](Eigen::Index j) {
    return static_cast<std::size_t>(j) < labels.size() ? labels[static_cast<std::size_t>(j)] : "col" + std::to_string(j);
  };
  if (K == 0) return Eigen::VectorXd(0);
  Eigen::VectorXd norms = X.colwise().norm().transpose();
  std::string zero;
  for (Eigen::Index j = 0; j < K; ++j)
    if (!(norms[j] > 0)) zero += (zero.empty() ? "" : ", ") + name(j);
  if (!zero.empty())
    throw Error("estimator", "rank deficient design: columns identically zero after absorption: " + zero,
                "drop the listed regressors; they are collinear with the fixed effects");
  Eigen::MatrixXd Xs = X * norms.cwiseInverse().asDiagonal();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xs);
  qr.setThreshold(rank_tol);
  if (qr.rank() < K) {
    std::string cols;
    for (Eigen::Index k = qr.rank(); k < K; ++k)
      cols += (cols.empty() ? "" : ", ") + name(qr.colsPermutation().indices()[k]);
    throw Error("estimator", "rank deficient design: collinear columns: " + cols, "drop or combine the listed regressors");
  }
  Eigen::VectorXd b = qr.solve(y);
  return b.cwiseQuotient(norms);
}

double t_pvalue(double t, double df) {
  if (!std::isfinite(t)) return std::isnan(t) ? std::nan("") : 0.0;
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

double chi2_pvalue(double x, double df) {
  if (!(x > 0)) return 1.0;
  if (!std::isfinite(x)) return 0.0;
  boost::math::chi_squared dist(df);
  return boost::math::cdf(boost::math::complement(dist, x));
}

double f_pvalue(double F, double df1, double df2) {
  if (!(F > 0)) return 1.0;
  if (!std::isfinite(F)) return 0.0;
  boost::math::fisher_f dist(df1, df2);
  return boost::math::cdf(boost::math::complement(dist, F));
}

std::string stars(double p) {
  if (!(p >= 0)) return "";
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  if (p < 0.1) return "*";
  return "";
}

}  // namespace peerimport::est
