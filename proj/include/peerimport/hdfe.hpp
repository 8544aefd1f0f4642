#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "peerimport/panel.hpp"

namespace peerimport::hdfe {

// Factor keys used by the specifications. Labels follow the table footers:
// id, id-y, eu-y, eu-s-z-y, s-z-y.
enum class FactorKind { Firm, FirmYear, OriginYear, OriginIndustryZipYear, IndustryZipYear };

std::string_view factor_label(FactorKind k);
FactorKind parse_factor(std::string_view label);

struct Factor {
  std::string name;
  std::vector<std::uint32_t> codes;  // per row, dense 0..groups-1
  std::vector<std::uint32_t> sizes;  // per group

  std::size_t groups() const { return sizes.size(); }
  std::size_t rows() const { return codes.size(); }
};

// Dense codes in order of first appearance, so canonical row order gives
// canonical codes.
Factor from_keys(std::string name, std::span<const std::uint64_t> keys);

std::uint64_t factor_key(FactorKind k, const panel::ObservationRow& r);

std::vector<Factor> encode(std::span<const panel::ObservationRow> rows, std::span<const FactorKind> kinds);

// Re-encodes a factor on a subset of rows (indices into the factor's rows).
Factor restrict(const Factor& f, std::span<const std::size_t> keep);

struct SingletonResult {
  std::vector<std::size_t> keep;  // surviving row indices, ascending
  std::size_t dropped = 0;
  int passes = 0;
};

// Rows alone in a group of any factor are removed; with `recursive` the
// removal repeats until no singleton is left.
SingletonResult drop_singletons(std::span<const Factor> factors, bool recursive = true);

struct DemeanOptions {
  double tol = 1e-8;  // on group means, relative to the column's scale
  int max_iter = 10000;
  bool accelerate = true;
};

struct ColumnReport {
  int iterations = 0;
  double max_group_mean = 0.0;  // audited after convergence, relative to scale
};

struct DemeanedMatrix {
  Eigen::MatrixXd columns;
  std::vector<ColumnReport> report;
  int iterations = 0;  // max over columns
  double max_group_mean = 0.0;
};

// Alternating projections over the factors; throws with the residual trace
// when a column fails to converge within max_iter sweeps.
DemeanedMatrix demean(const Eigen::MatrixXd& m, std::span<const Factor> factors, const DemeanOptions& opt = {});

// Largest absolute group mean of `v` over all factors.
double max_abs_group_mean(const Eigen::Ref<const Eigen::VectorXd>& v, std::span<const Factor> factors);

struct AbsorbedDof {
  std::size_t value = 0;        // used for small-sample corrections
  std::size_t lower_bound = 0;  // equals value when exact
  bool exact = true;
  std::vector<std::size_t> redundant_factors;  // factors spanned by another factor
};

// One factor: groups. Two: G1 + G2 - connected components of the bipartite
// group graph. More: pairwise components for the first two factors and one
// redundancy for each further factor, flagged inexact.
AbsorbedDof absorbed_dof(std::span<const Factor> factors);

// Bipartite connected components between two factors on the same rows.
std::size_t connected_components(const Factor& a, const Factor& b);

// True when every group of `inner` lies within a single group of `outer`.
bool nested(const Factor& inner, std::span<const std::uint32_t> outer_codes);

}  // namespace peerimport::hdfe
