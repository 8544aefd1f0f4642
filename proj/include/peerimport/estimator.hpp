#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace peerimport::est {

struct Clusters {
  std::vector<std::uint32_t> codes;  // dense 0..count-1
  std::size_t count = 0;

  static Clusters from_keys(std::span<const std::uint64_t> keys);
  std::size_t rows() const { return codes.size(); }
};

// Degrees of freedom taken by absorbed fixed effects. `nested` counts the
// groups of factors nested within clusters; those are left out of K_eff.
struct AbsorbedInfo {
  std::size_t dof = 0;
  std::size_t nested = 0;
  bool approximate = false;
};

struct Options {
  double rank_tol = 1e-10;
  AbsorbedInfo absorbed;
};

struct FirstStage {
  std::string label;
  double F = 0.0;
  std::size_t df1 = 0, df2 = 0;
  double p = 1.0;
  bool capped = false;
};

struct IvDiagnostics {
  std::vector<FirstStage> first_stage;
  double min_F = 0.0;
  double cragg_donald = 0.0;  // minimum-eigenvalue Wald F, homoskedastic
  double anderson_lm = 0.0;   // N * smallest squared canonical correlation
  double anderson_p = 1.0;
  double hansen_j = 0.0;
  double hansen_p = 1.0;
  std::size_t j_dof = 0;
  bool just_identified = false;
  bool weak = false;  // min first-stage F below 10
};

struct EstimationResult {
  std::vector<std::string> labels;
  Eigen::VectorXd beta, se, t, p;
  Eigen::MatrixXd vcov;
  std::size_t N = 0, G = 0, K = 0;
  std::size_t K_eff = 0;  // K + absorbed dof - nested groups
  double ss_factor = 1.0;
  double r2_within = 0.0;
  bool approximate_se = false;
  std::optional<IvDiagnostics> iv;
  Eigen::VectorXd residuals;
  std::vector<std::string> warnings;

  std::size_t index(const std::string& label) const;
};

// y on X, both already demeaned. CR1 cluster-robust covariance with
// t(G-1) p-values. Throws naming the collinear columns on rank deficiency.
EstimationResult ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const std::vector<std::string>& labels,
                     const Clusters& clusters, const Options& opt = {});

// Two-stage least squares; coefficients are ordered endogenous then exogenous.
// `Z` holds the excluded instruments only.
EstimationResult tsls(const Eigen::VectorXd& y, const Eigen::MatrixXd& X_endog, const Eigen::MatrixXd& X_exog,
                      const Eigen::MatrixXd& Z, const std::vector<std::string>& endog_labels,
                      const std::vector<std::string>& exog_labels, const Clusters& clusters, const Options& opt = {});

struct JTest {
  double stat = 0.0;
  double p = 1.0;
  std::size_t dof = 0;
  bool just_identified = false;
};

// J = (sum Z'e)' (sum_g s_g s_g')^-1 (sum Z'e) with s_g the cluster sums of
// Z_i * e_i; the moment covariance uses `omega_residuals` when given. Z is the
// full instrument set, dof = cols(Z) - n_regressors.
JTest hansen_j(const Eigen::VectorXd& residuals, const Eigen::MatrixXd& Z, const Clusters& clusters,
               std::size_t n_regressors, const Eigen::VectorXd* omega_residuals = nullptr);

// Per-endogenous cluster-robust F on the excluded instruments, Cragg-Donald
// minimum-eigenvalue statistic and Anderson canonical-correlation LM.
IvDiagnostics first_stage_diagnostics(const Eigen::MatrixXd& X_endog, const Eigen::MatrixXd& Z,
                                      const Eigen::MatrixXd& X_exog, const Clusters& clusters,
                                      const std::vector<std::string>& endog_labels, const Options& opt = {});

// CR1 sandwich: bread * (sum_g s_g s_g') * bread * factor, where s_g sums
// scores_i * e_i over cluster g.
Eigen::MatrixXd cluster_vcov(const Eigen::MatrixXd& scores, const Eigen::VectorXd& e, const Eigen::MatrixXd& bread,
                             const Clusters& clusters, double factor);

double cr1_factor(std::size_t N, std::size_t G, std::size_t K_eff);

// Least squares via column-pivoted QR on unit-norm columns. Throws when the
// rank falls short, naming the columns outside the leading pivots.
Eigen::VectorXd solve_ls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<std::string>& labels,
                         double rank_tol = 1e-10);

// Two-sided p-value of a t statistic with `df` degrees of freedom.
double t_pvalue(double t, double df);
double chi2_pvalue(double x, double df);
double f_pvalue(double F, double df1, double df2);

std::string stars(double p);

inline constexpr double kStatCap = 1e12;

}  // namespace peerimport::est
