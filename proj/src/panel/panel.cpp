#include <algorithm>
#include <fstream>

#include "peerimport/csv.hpp"
#include "peerimport/panel.hpp"

namespace peerimport::panel {

std::string_view drop_reason_code(DropReason r) {
  switch (r) {
    case DropReason::AttributeGap: return "attribute_gap";
    case DropReason::NoSuppliers: return "no_suppliers";
    case DropReason::NoCustomers: return "no_customers";
    case DropReason::LagUnavailable: return "lag_unavailable";
    case DropReason::NoSecondOrderSuppliers: return "no_second_order_suppliers";
    case DropReason::NoSecondOrderCustomers: return "no_second_order_customers";
    case DropReason::UnassignedCategory: return "unassigned_category";
    case DropReason::Singleton: return "singleton";
  }
  return "unknown";
}

std::size_t DropLedger::count(DropReason why) const {
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [&](auto& r) { return r.reason == why; }));
}

const std::vector<std::string>& control_names() {
  static const std::vector<std::string> names = {
      "workers",          "labor_cost",         "n_suppliers",          "n_customers",
      "interm_cost",      "sales_to_firms",     "sales_per_customer",   "labor_productivity",
      "interm_productivity", "avg_salary",      "flag_zero_workers",    "flag_zero_customers",
      "flag_zero_interm"};
  return names;
}

std::vector<double> derive_controls(const FirmYearAttributes& a) {
  auto ratio = [](double num, double den) { return den > 0 ? num / den : 0.0; };
  return {a.workers,
          a.labor_cost,
          static_cast<double>(a.n_suppliers),
          static_cast<double>(a.n_customers),
          a.intermediate_input_cost,
          a.sales_to_firms,
          ratio(a.sales_to_firms, a.n_customers),
          ratio(a.total_sales, a.workers),
          ratio(a.total_sales, a.intermediate_input_cost),
          ratio(a.labor_cost, a.workers),
          a.workers > 0 ? 0.0 : 1.0,
          a.n_customers > 0 ? 0.0 : 1.0,
          a.intermediate_input_cost > 0 ? 0.0 : 1.0};
}

std::vector<Starter> potential_starters(const StatusTable& statuses, Origin origin, YearWindow window) {
  if (window.first_year > window.last_year) throw Error("panel", "empty year window");
  if (!statuses.covers(window.first_year) || !statuses.covers(window.last_year))
    throw Error("panel", "status history does not cover the estimation window",
                "supply statuses from the baseline year through the last window year");
  std::vector<Starter> out;
  const int base = statuses.first_year();
  for (std::uint32_t k = 0; k < statuses.firms(); ++k) {
    FirmId i = firm_id(k);
    // Validate the full needed history up front so missing data never reads as 0.
    for (int s = base; s <= window.last_year; ++s) (void)statuses.importing(i, origin, s);
    bool imported_before = false;
    for (int s = base; s < window.first_year; ++s) imported_before = imported_before || statuses.importing(i, origin, s);
    if (imported_before) continue;
    for (int t = window.first_year; t <= window.last_year; ++t) {
      bool y = statuses.importing(i, origin, t);
      out.push_back({i, t, static_cast<std::uint8_t>(y ? 1 : 0)});
      if (y) break;
    }
  }
  return out;
}

Panel build_rows(const StatusTable& statuses, const AttributeTable& attrs, PanelMode mode, YearWindow window) {
  Panel p;
  p.mode = mode;
  std::vector<ObservationRow> cand;
  if (mode == PanelMode::PerOrigin) {
    auto eu = potential_starters(statuses, Origin::EU, window);
    auto ne = potential_starters(statuses, Origin::NonEU, window);
    cand.reserve(eu.size() + ne.size());
    for (auto& s : eu) cand.push_back({s.firm, Origin::EU, s.year, s.y, 0, 0});
    for (auto& s : ne) cand.push_back({s.firm, Origin::NonEU, s.year, s.y, 0, 0});
    std::sort(cand.begin(), cand.end(), [](const ObservationRow& a, const ObservationRow& b) {
      return std::tuple(to_index(a.firm), a.origin, a.year) < std::tuple(to_index(b.firm), b.origin, b.year);
    });
  } else {
    for (auto& s : potential_starters(statuses, Origin::Any, window))
      cand.push_back({s.firm, Origin::Any, s.year, s.y, 0, 0});
  }
  p.drops.input_rows = cand.size();
  const std::size_t w = control_names().size();
  p.rows.reserve(cand.size());
  p.controls.reserve(cand.size() * w);
  for (auto& r : cand) {
    if (!attrs.has(r.firm, r.year)) {
      p.drops.add(r, DropReason::AttributeGap);
      continue;
    }
    auto& a = attrs.at(r.firm, r.year);
    auto row = r;
    row.zip = a.zip;
    row.industry = a.industry;
    p.rows.push_back(row);
    auto c = derive_controls(a);
    p.controls.insert(p.controls.end(), c.begin(), c.end());
  }
  return p;
}

void write_panel_csv(const std::filesystem::path& path, const Panel& panel, const net::IdMap& ids,
                     const AttributeTable& attrs) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write " + path.string());
  out << "firm_id,origin,year,y,zip,industry";
  for (auto& n : control_names()) out << ',' << n;
  out << '\n';
  for (std::size_t r = 0; r < panel.rows.size(); ++r) {
    auto& row = panel.rows[r];
    out << ids.external(row.firm) << ',' << origin_name(row.origin) << ',' << row.year << ',' << int(row.y) << ','
        << attrs.zips.name(row.zip) << ',' << attrs.industries.name(row.industry);
    for (double v : panel.controls_of(r)) out << ',' << csv::format_double(v);
    out << '\n';
  }
}

std::string_view characteristic_name(Characteristic c) {
  switch (c) {
    case Characteristic::Workers: return "workers";
    case Characteristic::LaborProductivity: return "labor_productivity";
    case Characteristic::Suppliers: return "n_suppliers";
    case Characteristic::Customers: return "n_customers";
    case Characteristic::Wholesaler: return "wholesaler";
  }
  return "?";
}

Characteristic parse_characteristic(std::string_view s) {
  for (auto c : {Characteristic::Workers, Characteristic::LaborProductivity, Characteristic::Suppliers,
                 Characteristic::Customers, Characteristic::Wholesaler})
    if (characteristic_name(c) == s) return c;
  throw Error("panel", "unknown characteristic '" + std::string(s) + "'",
              "use workers, labor_productivity, n_suppliers, n_customers or wholesaler");
}

std::optional<double> characteristic_value(const AttributeTable& attrs, Characteristic c, FirmId i, int year) {
  if (!attrs.has(i, year)) return std::nullopt;
  auto& a = attrs.at(i, year);
  switch (c) {
    case Characteristic::Workers: return a.workers;
    case Characteristic::LaborProductivity: return a.workers > 0 ? a.total_sales / a.workers : 0.0;
    case Characteristic::Suppliers: return static_cast<double>(a.n_suppliers);
    case Characteristic::Customers: return static_cast<double>(a.n_customers);
    case Characteristic::Wholesaler: return a.wholesaler ? 1.0 : 0.0;
  }
  return std::nullopt;
}

MedianSplit median_split(const AttributeTable& attrs, Characteristic c, int baseline_year) {
  MedianSplit s;
  s.characteristic = std::string(characteristic_name(c));
  s.assignment.assign(attrs.firms(), Level::Unassigned);
  std::vector<double> values(attrs.firms(), 0.0);
  std::vector<double> sorted;
  for (std::uint32_t k = 0; k < attrs.firms(); ++k)
    if (auto v = characteristic_value(attrs, c, firm_id(k), baseline_year)) {
      values[k] = *v;
      sorted.push_back(*v);
      s.assignment[k] = Level::Low;
    }
  if (sorted.empty()) throw Error("panel", "no firm has attributes in baseline year " + std::to_string(baseline_year));

  if (c == Characteristic::Wholesaler) {
    s.cutoff = 0.5;
  } else {
    std::sort(sorted.begin(), sorted.end());
    auto m = sorted.size();
    s.cutoff = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
    s.degenerate = sorted.front() == sorted.back();
  }
  for (std::uint32_t k = 0; k < attrs.firms(); ++k) {
    if (s.assignment[k] == Level::Unassigned) {
      ++s.unassigned;
      continue;
    }
    if (values[k] > s.cutoff) {
      s.assignment[k] = Level::High;
      ++s.high;
    } else {
      ++s.low;
    }
  }
  return s;
}

}  // namespace peerimport::panel
