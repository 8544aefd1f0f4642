#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "peerimport/estimator.hpp"
#include "peerimport/types.hpp"

namespace peerimport::est {

std::size_t EstimationResult::index(const std::string& label) const {
  auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw Error("estimator", "no coefficient named " + label);
  return static_cast<std::size_t>(it - labels.begin());
}

namespace {

// (X'X)^-1 computed on unit-norm columns.
Eigen::MatrixXd inverse_gram(const Eigen::MatrixXd& X) {
  Eigen::VectorXd norms = X.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < norms.size(); ++j)
    if (!(norms[j] > 0)) norms[j] = 1.0;
  Eigen::MatrixXd Xs = X * norms.cwiseInverse().asDiagonal();
  Eigen::MatrixXd g = Xs.transpose() * Xs;
  Eigen::MatrixXd inv = g.ldlt().solve(Eigen::MatrixXd::Identity(g.rows(), g.cols()));
  return norms.cwiseInverse().asDiagonal() * inv * norms.cwiseInverse().asDiagonal();
}

std::size_t effective_k(std::size_t K, const AbsorbedInfo& a) {
  std::size_t absorbed = a.dof > a.nested ? a.dof - a.nested : 0;
  return K + absorbed;
}

void finish(EstimationResult& r) {
  const double df = static_cast<double>(r.G) - 1.0;
  const auto K = r.beta.size();
  r.se.resize(K);
  r.t.resize(K);
  r.p.resize(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    r.se[k] = std::sqrt(std::max(0.0, r.vcov(k, k)));
    r.t[k] = r.beta[k] / r.se[k];
    r.p[k] = t_pvalue(r.t[k], df);
  }
}

double within_r2(const Eigen::VectorXd& y, const Eigen::VectorXd& e) {
  double tss = y.squaredNorm();
  return tss > 0 ? 1.0 - e.squaredNorm() / tss : 0.0;
}

Eigen::MatrixXd unit_columns(const Eigen::MatrixXd& Z) {
  Eigen::VectorXd norms = Z.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < norms.size(); ++j)
    if (!(norms[j] > 0)) norms[j] = 1.0;
  return Z * norms.cwiseInverse().asDiagonal();
}

// sum_g s_g s_g' with s_g = sum over cluster g of Z_i e_i
Eigen::MatrixXd moment_covariance(const Eigen::MatrixXd& Z, const Eigen::VectorXd& e, const Clusters& cl) {
  Eigen::MatrixXd I = Eigen::MatrixXd::Identity(Z.cols(), Z.cols());
  return cluster_vcov(Z, e, I, cl, 1.0);
}

// Residual-maker projection of the columns of A on B (A - B (B'B)^-1 B'A).
Eigen::MatrixXd partial_out(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  if (B.cols() == 0 || A.cols() == 0) return A;
  Eigen::MatrixXd Bs = unit_columns(B);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Bs);
  return A - Bs * qr.solve(A);
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (auto& x : v) s += (s.empty() ? "" : ", ") + x;
  return s;
}

}  // namespace

EstimationResult ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const std::vector<std::string>& labels,
                     const Clusters& clusters, const Options& opt) {
  if (y.size() != X.rows() || static_cast<std::size_t>(y.size()) != clusters.rows())
    throw Error("estimator", "y, X and clusters disagree on the number of rows");
  if (labels.size() != static_cast<std::size_t>(X.cols())) throw Error("estimator", "one label per column required");
  EstimationResult r;
  r.labels = labels;
  r.N = static_cast<std::size_t>(y.size());
  r.G = clusters.count;
  r.K = static_cast<std::size_t>(X.cols());
  r.K_eff = effective_k(r.K, opt.absorbed);
  r.approximate_se = opt.absorbed.approximate;
  r.beta = solve_ls(X, y, labels, opt.rank_tol);
  r.residuals = y - X * r.beta;
  r.ss_factor = cr1_factor(r.N, r.G, r.K_eff);
  r.vcov = cluster_vcov(X, r.residuals, inverse_gram(X), clusters, r.ss_factor);
  r.r2_within = within_r2(y, r.residuals);
  finish(r);
  return r;
}

JTest hansen_j(const Eigen::VectorXd& residuals, const Eigen::MatrixXd& Z, const Clusters& clusters,
               std::size_t n_regressors, const Eigen::VectorXd* omega_residuals) {
  JTest j;
  const auto L = static_cast<std::size_t>(Z.cols());
  if (L < n_regressors) throw Error("estimator", "fewer instruments than regressors; model is under-identified");
  j.dof = L - n_regressors;
  if (j.dof == 0) {
    j.just_identified = true;
    return j;
  }
  // J is invariant to rescaling the columns of Z; unit norms keep Omega tame
  Eigen::MatrixXd Zs = unit_columns(Z);
  Eigen::VectorXd g = Zs.transpose() * residuals;
  Eigen::MatrixXd omega = moment_covariance(Zs, omega_residuals ? *omega_residuals : residuals, clusters);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(omega);
  j.stat = g.dot(ldlt.solve(g));
  if (!std::isfinite(j.stat) || j.stat < 0) j.stat = std::max(0.0, std::isfinite(j.stat) ? j.stat : kStatCap);
  j.p = chi2_pvalue(j.stat, static_cast<double>(j.dof));
  return j;
}

IvDiagnostics first_stage_diagnostics(const Eigen::MatrixXd& X_endog, const Eigen::MatrixXd& Z,
                                      const Eigen::MatrixXd& X_exog, const Clusters& clusters,
                                      const std::vector<std::string>& endog_labels, const Options& opt) {
  IvDiagnostics d;
  const auto N = static_cast<std::size_t>(X_endog.rows());
  const auto L = static_cast<std::size_t>(Z.cols());
  const auto Kx = static_cast<std::size_t>(X_endog.cols());
  const auto Kw = static_cast<std::size_t>(X_exog.cols());
  Eigen::MatrixXd Xt = partial_out(X_endog, X_exog);
  Eigen::MatrixXd Zt = partial_out(Z, X_exog);
  Eigen::MatrixXd Zs = unit_columns(Zt);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Zs);
  qr.setThreshold(opt.rank_tol);
  if (static_cast<std::size_t>(qr.rank()) < L)
    throw Error("estimator", "excluded instruments are collinear with each other or with the exogenous regressors");

  Eigen::MatrixXd coef = qr.solve(Xt);
  Eigen::MatrixXd fitted = Zs * coef;
  Eigen::MatrixXd resid = Xt - fitted;
  Eigen::MatrixXd bread = inverse_gram(Zs);
  const std::size_t K_eff = effective_k(L + Kw, opt.absorbed);
  const double factor = cr1_factor(N, clusters.count, K_eff);

  d.min_F = kStatCap;
  for (std::size_t k = 0; k < Kx; ++k) {
    FirstStage fs;
    fs.label = k < endog_labels.size() ? endog_labels[k] : "endog" + std::to_string(k);
    fs.df1 = L;
    fs.df2 = clusters.count - 1;
    Eigen::VectorXd b = coef.col(static_cast<Eigen::Index>(k));
    Eigen::MatrixXd V = cluster_vcov(Zs, resid.col(static_cast<Eigen::Index>(k)), bread, clusters, factor);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(V);
    double w = b.dot(ldlt.solve(b));
    double scale = b.squaredNorm();
    // numerically perfect first stage: residual covariance vanishes
    if (!std::isfinite(w) || V.diagonal().maxCoeff() <= 1e-24 * std::max(scale, 1e-300) || w / L > kStatCap) {
      fs.F = kStatCap;
      fs.capped = true;
    } else {
      fs.F = w / static_cast<double>(L);
    }
    fs.p = f_pvalue(fs.F, static_cast<double>(fs.df1), static_cast<double>(fs.df2));
    d.min_F = std::min(d.min_F, fs.F);
    d.first_stage.push_back(fs);
  }
  d.weak = d.min_F < 10.0;

  Eigen::MatrixXd A = fitted.transpose() * fitted;  // X~' P X~
  Eigen::MatrixXd XX = Xt.transpose() * Xt;
  const double dof_resid = static_cast<double>(N) - static_cast<double>(L + Kw + opt.absorbed.dof);
  Eigen::MatrixXd S = resid.transpose() * resid / std::max(dof_resid, 1.0);
  auto min_gen_eig = [&](const Eigen::MatrixXd& num, const Eigen::MatrixXd& den) {
    Eigen::LLT<Eigen::MatrixXd> llt(den);
    if (llt.info() != Eigen::Success) return kStatCap;
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(num, den);
    if (es.info() != Eigen::Success) return kStatCap;
    return es.eigenvalues().minCoeff();
  };
  d.cragg_donald = std::min(kStatCap, min_gen_eig(A, S) / static_cast<double>(L));
  double cc = std::clamp(min_gen_eig(A, XX), 0.0, 1.0);
  d.anderson_lm = static_cast<double>(N) * cc;
  d.anderson_p = chi2_pvalue(d.anderson_lm, static_cast<double>(L - Kx + 1));
  return d;
}

EstimationResult tsls(const Eigen::VectorXd& y, const Eigen::MatrixXd& X_endog, const Eigen::MatrixXd& X_exog,
                      const Eigen::MatrixXd& Z, const std::vector<std::string>& endog_labels,
                      const std::vector<std::string>& exog_labels, const Clusters& clusters, const Options& opt) {
  const auto N = y.size();
  if (X_endog.rows() != N || X_exog.rows() != N || Z.rows() != N || static_cast<std::size_t>(N) != clusters.rows())
    throw Error("estimator", "y, regressors, instruments and clusters disagree on the number of rows");
  const auto Kx = X_endog.cols(), Kw = X_exog.cols(), L = Z.cols();
  if (Kx == 0) throw Error("estimator", "2SLS needs at least one endogenous regressor");
  if (L < Kx)
    throw Error("estimator",
                "under-identified: " + std::to_string(L) + " excluded instruments for " + std::to_string(Kx) +
                    " endogenous regressors",
                "add instrument lags");

  EstimationResult r;
  r.labels = endog_labels;
  r.labels.insert(r.labels.end(), exog_labels.begin(), exog_labels.end());
  Eigen::MatrixXd X(N, Kx + Kw), Zf(N, L + Kw);
  X << X_endog, X_exog;
  Zf << Z, X_exog;

  Eigen::MatrixXd Zs = unit_columns(Zf);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Zs);
  qr.setThreshold(opt.rank_tol);
  if (qr.rank() < Zs.cols()) throw Error("estimator", "instrument matrix is rank deficient");
  Eigen::MatrixXd Xhat = Zs * qr.solve(X);

  r.N = static_cast<std::size_t>(N);
  r.G = clusters.count;
  r.K = static_cast<std::size_t>(Kx + Kw);
  r.K_eff = effective_k(r.K, opt.absorbed);
  r.approximate_se = opt.absorbed.approximate;
  try {
    r.beta = solve_ls(Xhat, y, r.labels, opt.rank_tol);
  } catch (const Error& e) {
    throw Error("estimator", std::string("under-identified, first-stage projection is rank deficient (") + e.what() + ")",
                "the excluded instruments do not move the endogenous regressors independently");
  }
  r.residuals = y - X * r.beta;
  r.ss_factor = cr1_factor(r.N, r.G, r.K_eff);
  r.vcov = cluster_vcov(Xhat, r.residuals, inverse_gram(Xhat), clusters, r.ss_factor);
  r.r2_within = within_r2(y, r.residuals);
  finish(r);

  auto diag = first_stage_diagnostics(X_endog, Z, X_exog, clusters, endog_labels, opt);
  if (L == Kx) {
    diag.just_identified = true;
    diag.hansen_j = 0.0;
    diag.hansen_p = 1.0;
    diag.j_dof = 0;
  } else {
    // two-step efficient GMM with the weight from 2SLS residuals; J at the
    // GMM residuals, same weight
    Eigen::MatrixXd omega = moment_covariance(Zs, r.residuals, clusters);
    Eigen::LDLT<Eigen::MatrixXd> W(omega);
    Eigen::MatrixXd ZX = Zs.transpose() * X;
    Eigen::VectorXd Zy = Zs.transpose() * y;
    Eigen::MatrixXd WZX = W.solve(ZX);
    Eigen::MatrixXd lhs = ZX.transpose() * WZX;
    Eigen::VectorXd rhs = WZX.transpose() * Zy;
    Eigen::VectorXd b_gmm = lhs.ldlt().solve(rhs);
    Eigen::VectorXd e_gmm = y - X * b_gmm;
    auto j = hansen_j(e_gmm, Zf, clusters, static_cast<std::size_t>(Kx + Kw), &r.residuals);
    diag.hansen_j = j.stat;
    diag.hansen_p = j.p;
    diag.j_dof = j.dof;
  }
  if (diag.weak)
    r.warnings.push_back("weak instruments: minimum first-stage F " + std::to_string(diag.min_F) + " below 10 (" +
                         join(endog_labels) + ")");
  r.iv = diag;
  return r;
}

}  // namespace peerimport::est
