#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "peerimport/netcore.hpp"
#include "peerimport/panel.hpp"

namespace peerimport::treatment {

enum class Weighting { Uniform, Value };

enum class Missing : std::uint8_t { None = 0, NoPeers = 1, LagUnavailable = 2 };

struct Share {
  double value = 0.0;
  Missing missing = Missing::None;
  std::size_t peers = 0;

  bool ok() const { return missing == Missing::None; }
};

// Share of side-peers importing from `origin` at year-1. Uniform weights give
// (#importing peers)/degree; value weights use the stable link values.
Share peer_share(const net::ProductionNetwork& net, const panel::StatusTable& statuses, FirmId i, Origin origin,
                 int year, Side side, Weighting weighting = Weighting::Uniform);

// Share of the exclusive second-order set importing at year-lag.
Share instrument_share(std::span<const FirmId> second_order, const panel::StatusTable& statuses, Origin origin,
                       int year, int lag);
Share instrument_share(const net::ProductionNetwork& net, const panel::StatusTable& statuses, FirmId i, Origin origin,
                       int year, Side side, int lag, bool strict);

struct SpatialSpillovers {
  double zip = 0, sec = 0, sec_zip = 0;
  std::size_t zip_den = 0, sec_den = 0, sec_zip_den = 0;
  bool zip_flag = false, sec_flag = false, sec_zip_flag = false;  // zero denominator
};

// Firm and importer counts per (zip | industry | industry x zip, origin, year).
class SpatialIndex {
 public:
  SpatialIndex(const panel::AttributeTable& attrs, const panel::StatusTable& statuses);

  // Proportions at year-1 among other firms sharing zip / industry / both.
  SpatialSpillovers props(FirmId i, Origin origin, int year) const;

 private:
  struct Cell {
    std::uint32_t firms = 0;
    std::uint32_t importers = 0;
  };
  static std::uint64_t key(int kind, std::uint64_t a, std::uint64_t b, Origin o, int year);

  const panel::AttributeTable* attrs_;
  const panel::StatusTable* statuses_;
  std::unordered_map<std::uint64_t, Cell> cells_;
};

SpatialSpillovers spatial_props(const panel::AttributeTable& attrs, const panel::StatusTable& statuses, FirmId i,
                                Origin origin, int year);

enum class LinkPredicate { SameIndustry, SameZip, SameProvince, Reciprocal };

std::string_view link_predicate_name(LinkPredicate p);
LinkPredicate parse_link_predicate(std::string_view s);

// Assigns each peer j of firm i to category 0 or 1: Low/High from a median
// split, or No/Yes from a link predicate.
class PeerCategorizer {
 public:
  static PeerCategorizer by_split(const panel::MedianSplit& split);
  static PeerCategorizer by_link(LinkPredicate p, const panel::AttributeTable& attrs,
                                 const net::ProductionNetwork& net, std::size_t province_digits = 2);

  // Throws when the peer has no category.
  int category(FirmId i, FirmId j, int year) const;
  bool assigned(FirmId i, FirmId j, int year) const;
  const std::array<std::string, 2>& labels() const { return labels_; }
  const std::string& name() const { return name_; }

 private:
  std::string name_;
  std::array<std::string, 2> labels_;
  const panel::MedianSplit* split_ = nullptr;
  std::optional<LinkPredicate> link_;
  const panel::AttributeTable* attrs_ = nullptr;
  const net::ProductionNetwork* net_ = nullptr;
  std::vector<std::uint32_t> province_of_zip_;
};

struct HeterogeneityShares {
  std::array<double, 2> by_category{0.0, 0.0};
  double total = 0.0;
  bool missing = false;
};

// Importing side-peers at year-1 in each category over the total side degree,
// so the two category shares add up to the plain peer share.
HeterogeneityShares category_shares(const net::ProductionNetwork& net, const panel::StatusTable& statuses,
                                    const PeerCategorizer& cat, FirmId i, Origin origin, int year, Side side);

struct TreatmentOptions {
  Weighting weighting = Weighting::Uniform;
  bool strict = true;
  std::vector<int> instrument_lags{2, 3};
  bool contextual = true;
  bool spatial = true;
  const PeerCategorizer* categorizer = nullptr;
};

struct TreatmentInputs {
  const net::ProductionNetwork& network;
  const panel::StatusTable& statuses;
  const panel::AttributeTable& attributes;
};

// Column-oriented treatments aligned with Panel::rows.
struct TreatmentTable {
  std::vector<double> ybar_D, ybar_U;
  std::vector<Missing> missing_D, missing_U;

  std::size_t context_width = 0;
  std::vector<double> xbar_D, xbar_U;  // rows x context_width, row-major
  std::vector<std::uint8_t> xbar_missing;

  std::map<int, std::vector<double>> zbar_D, zbar_U;  // by lag
  std::map<int, std::vector<Missing>> zmiss_D, zmiss_U;

  std::vector<double> prop_zip, prop_sec, prop_sec_zip;
  std::size_t spatial_zero_denominators = 0;

  std::vector<std::array<double, 2>> cat_D, cat_U;
  std::vector<std::uint8_t> cat_missing;  // some peer has no category
  std::array<std::string, 2> cat_labels;
};

TreatmentTable compute_treatments(const TreatmentInputs& in, const panel::Panel& panel, const TreatmentOptions& opt);

enum class Heterogeneity { None, FirmSplit, PeerSplit, FirmPeerSplit, Link };

struct DesignSpec {
  bool peer_characteristics = false;  // own controls plus contextual averages
  bool spatial_controls = false;
  Heterogeneity heterogeneity = Heterogeneity::None;
  std::vector<int> instrument_lags;  // empty: OLS
};

struct Design {
  std::vector<std::size_t> rows;  // indices into Panel::rows
  Eigen::VectorXd y;
  Eigen::MatrixXd exog, endog, instruments;
  std::vector<std::string> exog_labels, endog_labels, instrument_labels;
  panel::DropLedger drops;
  std::vector<std::string> notes;

  bool iv() const { return instruments.cols() > 0; }
};

// Assembles regressors for `spec`; rows missing any required field are
// dropped and recorded. `firm_split` is needed for FirmSplit/FirmPeerSplit.
Design build_design(const panel::Panel& panel, const TreatmentTable& tr, const DesignSpec& spec,
                    const panel::MedianSplit* firm_split = nullptr);

void write_design_csv(const std::filesystem::path& path, const Design& d);

}  // namespace peerimport::treatment
