#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "peerimport/netcore.hpp"
#include "peerimport/types.hpp"

namespace peerimport::panel {

// Interns string codes (zip, industry) to dense integers.
class Dictionary {
 public:
  std::uint32_t intern(std::string_view code);
  const std::string& name(std::uint32_t code) const { return names_.at(code); }
  std::size_t size() const { return names_.size(); }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

bool is_wholesale_industry(std::string_view industry);

struct FirmYearAttributes {
  double workers = 0;
  double labor_cost = 0;
  double total_sales = 0;
  double sales_to_firms = 0;
  double intermediate_input_cost = 0;
  std::uint32_t n_suppliers = 0;
  std::uint32_t n_customers = 0;
  std::uint32_t zip = 0;
  std::uint32_t industry = 0;
  bool wholesaler = false;
};

// Balanced firm-year attribute store; entries may be absent (attribute gaps).
class AttributeTable {
 public:
  AttributeTable() = default;
  AttributeTable(std::size_t n_firms, int first_year, int last_year);

  std::size_t firms() const { return n_; }
  int first_year() const { return first_year_; }
  int last_year() const { return last_year_; }
  bool covers(int year) const { return year >= first_year_ && year <= last_year_; }

  bool has(FirmId i, int year) const;
  const FirmYearAttributes& at(FirmId i, int year) const;
  void set(FirmId i, int year, const FirmYearAttributes& a);
  // Grows the firm dimension (new firms have no entries).
  void resize_firms(std::size_t n);

  // Fills n_suppliers / n_customers from the network for every present entry.
  void set_degrees(const net::ProductionNetwork& net);
  // Yearly partner counts from that year's edge records; other years keep
  // whatever is already set.
  void set_yearly_degrees(const net::YearlyEdges& yearly);

  Dictionary zips;
  Dictionary industries;

 private:
  std::size_t slot(FirmId i, int year) const;

  std::size_t n_ = 0;
  int first_year_ = 0, last_year_ = -1;
  std::vector<FirmYearAttributes> data_;
  std::vector<std::uint8_t> present_;
};

// Attributes CSV: firm_id, year, workers, labor_cost, total_sales,
// sales_to_firms, interm_cost, zip, industry. Unknown firms are interned.
AttributeTable read_attribute_csv(const std::filesystem::path& path, net::IdMap& ids);
void write_attribute_csv(const std::filesystem::path& path, const AttributeTable& attrs, const net::IdMap& ids);

// Yearly import status per origin. Missing entries are kept as missing.
class StatusTable {
 public:
  StatusTable() = default;
  StatusTable(std::size_t n_firms, int first_year, int last_year);

  std::size_t firms() const { return n_; }
  int first_year() const { return first_year_; }
  int last_year() const { return last_year_; }
  bool covers(int year) const { return year >= first_year_ && year <= last_year_; }

  // Throws on missing status. Origin::Any means "importing from any origin".
  bool importing(FirmId i, Origin o, int year) const;
  bool known(FirmId i, Origin o, int year) const;
  void set(FirmId i, Origin o, int year, bool importing);
  void resize_firms(std::size_t n);

  // Raw 0/1 vector for (origin, year); Any is computed on the fly.
  std::vector<std::uint8_t> snapshot(Origin o, int year) const;

 private:
  std::size_t slot(FirmId i, Origin o, int year) const;

  std::size_t n_ = 0;
  int first_year_ = 0, last_year_ = -1;
  std::vector<std::uint8_t> data_;  // 0, 1, or kMissing
};

inline constexpr std::uint8_t kMissing = 255;

// Import-status CSV: firm_id, year, eu_import, noneu_import.
StatusTable read_status_csv(const std::filesystem::path& path, net::IdMap& ids);
void write_status_csv(const std::filesystem::path& path, const StatusTable& st, const net::IdMap& ids);

struct YearWindow {
  int first_year = 2011;
  int last_year = 2014;
};

struct Starter {
  FirmId firm;
  int year = 0;
  std::uint8_t y = 0;
};

// (i, t) is a potential starter for `origin` iff the firm did not import from
// it in any observed year before t. Output sorted by (firm, year).
std::vector<Starter> potential_starters(const StatusTable& statuses, Origin origin, YearWindow window);

enum class PanelMode { PerOrigin, Pooled };

struct ObservationRow {
  FirmId firm;
  Origin origin = Origin::EU;
  int year = 0;
  std::uint8_t y = 0;
  std::uint32_t zip = 0;
  std::uint32_t industry = 0;
};

enum class DropReason : std::uint8_t {
  AttributeGap,
  NoSuppliers,
  NoCustomers,
  LagUnavailable,
  NoSecondOrderSuppliers,
  NoSecondOrderCustomers,
  UnassignedCategory,
  Singleton,
};

std::string_view drop_reason_code(DropReason r);

struct DroppedRow {
  FirmId firm;
  Origin origin;
  int year;
  DropReason reason;
};

// Every excluded row, with the first reason that excluded it.
struct DropLedger {
  std::size_t input_rows = 0;
  std::vector<DroppedRow> rows;

  void add(const ObservationRow& r, DropReason why) { rows.push_back({r.firm, r.origin, r.year, why}); }
  std::size_t count(DropReason why) const;
  std::size_t total() const { return rows.size(); }
};

// Names of the derived firm controls, in column order.
const std::vector<std::string>& control_names();

struct Panel {
  PanelMode mode = PanelMode::PerOrigin;
  std::vector<ObservationRow> rows;  // canonical (firm, origin, year) order
  std::vector<double> controls;      // rows x control_names().size(), row-major
  DropLedger drops;

  std::size_t width() const { return control_names().size(); }
  std::span<const double> controls_of(std::size_t r) const { return {controls.data() + r * width(), width()}; }
};

// Derived controls for one firm-year: levels, ratios and zero-denominator
// flags. Ratios with a zero denominator are 0 and raise the matching flag.
std::vector<double> derive_controls(const FirmYearAttributes& a);

// Per-origin mode: one row per (firm, origin, year) starter. Pooled mode: one
// row per (firm, year) with y = starts importing from any origin.
Panel build_rows(const StatusTable& statuses, const AttributeTable& attrs, PanelMode mode, YearWindow window);

void write_panel_csv(const std::filesystem::path& path, const Panel& panel, const net::IdMap& ids,
                     const AttributeTable& attrs);

enum class Characteristic { Workers, LaborProductivity, Suppliers, Customers, Wholesaler };

std::string_view characteristic_name(Characteristic c);
Characteristic parse_characteristic(std::string_view s);

enum class Level : std::uint8_t { Low = 0, High = 1, Unassigned = 255 };

struct MedianSplit {
  std::string characteristic;
  double cutoff = 0.0;
  std::vector<Level> assignment;  // by firm index
  std::size_t low = 0, high = 0, unassigned = 0;
  bool degenerate = false;  // all values equal

  Level of(FirmId i) const { return assignment[to_index(i)]; }
};

// High iff value > median of baseline-year values, Low otherwise. Wholesaler
// uses the sector flag instead of a median. Firms without a baseline entry are
// Unassigned.
MedianSplit median_split(const AttributeTable& attrs, Characteristic c, int baseline_year);

// Raw characteristic value (nullopt when the firm-year is absent).
std::optional<double> characteristic_value(const AttributeTable& attrs, Characteristic c, FirmId i, int year);

}  // namespace peerimport::panel
