#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "peerimport/types.hpp"

namespace peerimport::net {

// Bijection between external string identifiers and dense FirmIds.
class IdMap {
 public:
  FirmId intern(std::string_view external);
  std::optional<FirmId> find(std::string_view external) const;
  const std::string& external(FirmId id) const { return names_.at(to_index(id)); }
  std::size_t size() const { return names_.size(); }

  void write_csv(const std::filesystem::path& path) const;
  static IdMap read_csv(const std::filesystem::path& path);

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

struct EdgeRecord {
  FirmId supplier;
  FirmId customer;
  int year = 0;
  std::optional<double> value;
};

struct Edge {
  FirmId supplier;
  FirmId customer;
  double value = 0.0;
  bool has_value = false;

  friend bool operator==(const Edge& a, const Edge& b) {
    return a.supplier == b.supplier && a.customer == b.customer;
  }
};

struct IngestReport {
  std::size_t records = 0;
  std::size_t self_loops = 0;
  std::size_t below_threshold = 0;
  std::size_t duplicates = 0;
};

// Deduplicated edge sets for a contiguous range of years.
struct YearlyEdges {
  int first_year = 0;
  std::vector<std::vector<Edge>> by_year;  // each sorted by (supplier, customer)
  IdMap ids;
  IngestReport report;

  int last_year() const { return first_year + static_cast<int>(by_year.size()) - 1; }
  const std::vector<Edge>& year(int y) const { return by_year.at(static_cast<std::size_t>(y - first_year)); }
};

struct ValueThreshold {
  double min_value = 3005.0;
  // true keeps value == min_value
  bool inclusive = true;
};

// Drops self-loops and sub-threshold valued records; duplicate (pair, year)
// records collapse into one edge carrying the largest reported value.
YearlyEdges build_from_edges(std::span<const EdgeRecord> records, IdMap ids, ValueThreshold threshold = {});

// Edge CSV: supplier_id, customer_id, year[, value]. Unknown ids are added to
// `ids`; an empty value field means "no value reported".
YearlyEdges read_edge_csv(const std::filesystem::path& path, IdMap ids, ValueThreshold threshold = {});

class ProductionNetwork {
 public:
  ProductionNetwork() = default;
  // Builds both CSR indices. Throws on self-loops, duplicates, or ids >= n.
  // `weights` is either empty or parallel to `edges`.
  ProductionNetwork(std::size_t n, std::vector<std::pair<FirmId, FirmId>> edges, std::vector<double> weights = {});

  std::size_t size() const { return n_; }
  std::size_t edge_count() const { return fwd_targets_.size(); }
  bool weighted() const { return !fwd_weights_.empty(); }

  std::span<const FirmId> customers(FirmId i) const;
  std::span<const FirmId> suppliers(FirmId i) const;
  std::span<const FirmId> neighbors(FirmId i, Side side) const {
    return side == Side::Downstream ? suppliers(i) : customers(i);
  }
  // Weights aligned with customers(i) / suppliers(i); empty when unweighted.
  std::span<const double> customer_weights(FirmId i) const;
  std::span<const double> supplier_weights(FirmId i) const;
  std::span<const double> neighbor_weights(FirmId i, Side side) const {
    return side == Side::Downstream ? supplier_weights(i) : customer_weights(i);
  }

  std::size_t outdegree(FirmId i) const { return customers(i).size(); }
  std::size_t indegree(FirmId i) const { return suppliers(i).size(); }
  bool has_edge(FirmId supplier, FirmId customer) const;

  // All edges in (supplier, customer) order.
  std::vector<std::pair<FirmId, FirmId>> edges() const;
  std::vector<double> edge_weights() const { return fwd_weights_; }

  friend bool operator==(const ProductionNetwork& a, const ProductionNetwork& b);

 private:
  void check(FirmId i) const;

  std::size_t n_ = 0;
  std::vector<std::size_t> fwd_offsets_{0}, rev_offsets_{0};
  std::vector<FirmId> fwd_targets_, rev_targets_;
  std::vector<double> fwd_weights_, rev_weights_;
};

struct StableWindow {
  int first_year = 2011;
  int last_year = 2014;
  int max_gap = 1;
};

struct StableReport {
  std::size_t kept = 0;
  std::size_t dropped = 0;
  // Share of in-window trade value carried by dropped edges; absent when no
  // values were reported.
  std::optional<double> value_share_dropped;
};

struct StableResult {
  ProductionNetwork network;
  StableReport report;
};

// Keeps pairs present in at least (window length - max_gap) years of the
// window. Kept edges are weighted by their mean in-window value when values
// exist. Throws if nothing survives.
StableResult stable_subnetwork(const YearlyEdges& yearly, StableWindow window);

// Same network replicated in every window year; inverse of stable_subnetwork
// for an already-stable network.
YearlyEdges replicate(const ProductionNetwork& net, const IdMap& ids, StableWindow window);

std::vector<FirmId> neighbors(const ProductionNetwork& net, FirmId i, Side side);

// Second-order peers on `side` that are neither i nor first-order peers.
// strict additionally removes the three cross paths (for side U: suppliers of
// customers, customers of suppliers, suppliers of suppliers; mirrored for D).
std::vector<FirmId> second_order_exclusive(const ProductionNetwork& net, FirmId i, Side side, bool strict);

// CSR of second_order_exclusive for every firm.
struct SecondOrderSets {
  std::vector<std::size_t> offsets;
  std::vector<FirmId> members;

  std::span<const FirmId> of(FirmId i) const {
    auto k = to_index(i);
    return {members.data() + offsets[k], offsets[k + 1] - offsets[k]};
  }
};

SecondOrderSets compute_second_order(const ProductionNetwork& net, Side side, bool strict);

void write_edge_csv(const std::filesystem::path& path, const YearlyEdges& yearly);

}  // namespace peerimport::net
