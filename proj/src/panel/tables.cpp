#include <fstream>

#include "peerimport/csv.hpp"
#include "peerimport/panel.hpp"

namespace peerimport::panel {

std::uint32_t Dictionary::intern(std::string_view code) {
  auto it = index_.find(std::string(code));
  if (it != index_.end()) return it->second;
  auto k = static_cast<std::uint32_t>(names_.size());
  names_.emplace_back(code);
  index_.emplace(names_.back(), k);
  return k;
}

bool is_wholesale_industry(std::string_view industry) {
  // NACE divisions 45-47 (motor trade, wholesale, retail)
  if (industry.size() < 2) return false;
  auto div = industry.substr(0, 2);
  return div == "45" || div == "46" || div == "47";
}

AttributeTable::AttributeTable(std::size_t n_firms, int first_year, int last_year)
    : n_(n_firms), first_year_(first_year), last_year_(last_year) {
  std::size_t years = static_cast<std::size_t>(last_year - first_year + 1);
  data_.resize(years * n_);
  present_.assign(years * n_, 0);
}

std::size_t AttributeTable::slot(FirmId i, int year) const {
  if (!covers(year)) throw Error("panel", "attribute year " + std::to_string(year) + " outside table");
  if (to_index(i) >= n_) throw Error("panel", "firm index out of range in attribute table");
  return static_cast<std::size_t>(year - first_year_) * n_ + to_index(i);
}

bool AttributeTable::has(FirmId i, int year) const {
  if (!covers(year) || to_index(i) >= n_) return false;
  return present_[slot(i, year)] != 0;
}

const FirmYearAttributes& AttributeTable::at(FirmId i, int year) const {
  auto s = slot(i, year);
  if (!present_[s])
    throw Error("panel", "no attributes for firm " + std::to_string(to_index(i)) + " in " + std::to_string(year));
  return data_[s];
}

void AttributeTable::set(FirmId i, int year, const FirmYearAttributes& a) {
  auto s = slot(i, year);
  data_[s] = a;
  present_[s] = 1;
}

void AttributeTable::resize_firms(std::size_t n) {
  if (n <= n_) return;
  std::size_t years = static_cast<std::size_t>(last_year_ - first_year_ + 1);
  std::vector<FirmYearAttributes> d(years * n);
  std::vector<std::uint8_t> p(years * n, 0);
  for (std::size_t y = 0; y < years; ++y)
    for (std::size_t k = 0; k < n_; ++k) {
      d[y * n + k] = data_[y * n_ + k];
      p[y * n + k] = present_[y * n_ + k];
    }
  data_ = std::move(d);
  present_ = std::move(p);
  n_ = n;
}

void AttributeTable::set_degrees(const net::ProductionNetwork& net) {
  std::size_t years = static_cast<std::size_t>(last_year_ - first_year_ + 1);
  std::size_t m = std::min(n_, net.size());
  for (std::size_t y = 0; y < years; ++y)
    for (std::size_t k = 0; k < m; ++k) {
      auto& a = data_[y * n_ + k];
      a.n_suppliers = static_cast<std::uint32_t>(net.indegree(firm_id(static_cast<std::uint32_t>(k))));
      a.n_customers = static_cast<std::uint32_t>(net.outdegree(firm_id(static_cast<std::uint32_t>(k))));
    }
}

void AttributeTable::set_yearly_degrees(const net::YearlyEdges& yearly) {
  for (int y = std::max(first_year_, yearly.first_year); y <= std::min(last_year_, yearly.last_year()); ++y) {
    auto* row = &data_[static_cast<std::size_t>(y - first_year_) * n_];
    for (std::size_t k = 0; k < n_; ++k) row[k].n_suppliers = row[k].n_customers = 0;
    for (const auto& e : yearly.year(y)) {
      if (to_index(e.supplier) < n_) ++row[to_index(e.supplier)].n_customers;
      if (to_index(e.customer) < n_) ++row[to_index(e.customer)].n_suppliers;
    }
  }
}

AttributeTable read_attribute_csv(const std::filesystem::path& path, net::IdMap& ids) {
  csv::Reader r(path);
  const std::size_t cf = r.column("firm_id"), cy = r.column("year"), cw = r.column("workers"),
                    cl = r.column("labor_cost"), cs = r.column("total_sales"), cst = r.column("sales_to_firms"),
                    ci = r.column("interm_cost"), cz = r.column("zip"), cn = r.column("industry");
  struct Raw {
    FirmId firm;
    int year;
    FirmYearAttributes a;
    std::string zip, industry;
  };
  std::vector<Raw> raw;
  std::vector<std::string_view> f;
  int y0 = 1 << 30, y1 = -(1 << 30);
  while (r.next(f)) {
    Raw x{ids.intern(f[cf]), static_cast<int>(csv::parse_int(f[cy], r, "year")), {}, std::string(f[cz]),
          std::string(f[cn])};
    x.a.workers = csv::parse_double(f[cw], r, "workers");
    x.a.labor_cost = csv::parse_double(f[cl], r, "labor_cost");
    x.a.total_sales = csv::parse_double(f[cs], r, "total_sales");
    x.a.sales_to_firms = csv::parse_double(f[cst], r, "sales_to_firms");
    x.a.intermediate_input_cost = csv::parse_double(f[ci], r, "interm_cost");
    if (x.a.workers < 0 || x.a.labor_cost < 0 || x.a.total_sales < 0 || x.a.sales_to_firms < 0 ||
        x.a.intermediate_input_cost < 0)
      throw Error("panel", path.string() + ":" + std::to_string(r.line()) + ": negative count or currency value",
                  "fix the malformed record");
    if (x.zip.empty() || x.industry.empty())
      throw Error("panel", path.string() + ":" + std::to_string(r.line()) + ": empty zip or industry",
                  "fix the malformed record");
    y0 = std::min(y0, x.year);
    y1 = std::max(y1, x.year);
    raw.push_back(std::move(x));
  }
  if (raw.empty()) throw Error("panel", path.string() + ": no attribute rows");
  AttributeTable t(ids.size(), y0, y1);
  for (auto& x : raw) {
    x.a.zip = t.zips.intern(x.zip);
    x.a.industry = t.industries.intern(x.industry);
    x.a.wholesaler = is_wholesale_industry(x.industry);
    t.set(x.firm, x.year, x.a);
  }
  return t;
}

void write_attribute_csv(const std::filesystem::path& path, const AttributeTable& attrs, const net::IdMap& ids) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write " + path.string());
  out << "firm_id,year,workers,labor_cost,total_sales,sales_to_firms,interm_cost,zip,industry\n";
  for (std::uint32_t k = 0; k < attrs.firms(); ++k)
    for (int y = attrs.first_year(); y <= attrs.last_year(); ++y) {
      if (!attrs.has(firm_id(k), y)) continue;
      auto& a = attrs.at(firm_id(k), y);
      out << ids.external(firm_id(k)) << ',' << y << ',' << csv::format_double(a.workers) << ','
          << csv::format_double(a.labor_cost) << ',' << csv::format_double(a.total_sales) << ','
          << csv::format_double(a.sales_to_firms) << ',' << csv::format_double(a.intermediate_input_cost) << ','
          << attrs.zips.name(a.zip) << ',' << attrs.industries.name(a.industry) << '\n';
    }
}

StatusTable::StatusTable(std::size_t n_firms, int first_year, int last_year)
    : n_(n_firms), first_year_(first_year), last_year_(last_year) {
  data_.assign(static_cast<std::size_t>(last_year - first_year + 1) * 2 * n_, kMissing);
}

std::size_t StatusTable::slot(FirmId i, Origin o, int year) const {
  if (!covers(year)) throw Error("panel", "status year " + std::to_string(year) + " outside table");
  if (to_index(i) >= n_) throw Error("panel", "firm index out of range in status table");
  return (static_cast<std::size_t>(year - first_year_) * 2 + static_cast<std::size_t>(o)) * n_ + to_index(i);
}

bool StatusTable::known(FirmId i, Origin o, int year) const {
  if (!covers(year) || to_index(i) >= n_) return false;
  if (o == Origin::Any) return known(i, Origin::EU, year) && known(i, Origin::NonEU, year);
  return data_[slot(i, o, year)] != kMissing;
}

bool StatusTable::importing(FirmId i, Origin o, int year) const {
  if (o == Origin::Any) return importing(i, Origin::EU, year) || importing(i, Origin::NonEU, year);
  auto v = data_[slot(i, o, year)];
  if (v == kMissing)
    throw Error("panel",
                "missing import status for firm " + std::to_string(to_index(i)) + ", " +
                    std::string(origin_name(o)) + ", " + std::to_string(year),
                "the status file must cover every firm in every year");
  return v != 0;
}

void StatusTable::set(FirmId i, Origin o, int year, bool importing) {
  if (o == Origin::Any) throw Error("panel", "cannot set status for the pooled origin");
  data_[slot(i, o, year)] = importing ? 1 : 0;
}

void StatusTable::resize_firms(std::size_t n) {
  if (n <= n_) return;
  std::size_t planes = static_cast<std::size_t>(last_year_ - first_year_ + 1) * 2;
  std::vector<std::uint8_t> d(planes * n, kMissing);
  for (std::size_t p = 0; p < planes; ++p)
    std::copy(data_.begin() + static_cast<long>(p * n_), data_.begin() + static_cast<long>((p + 1) * n_),
              d.begin() + static_cast<long>(p * n));
  data_ = std::move(d);
  n_ = n;
}

std::vector<std::uint8_t> StatusTable::snapshot(Origin o, int year) const {
  std::vector<std::uint8_t> out(n_);
  for (std::uint32_t k = 0; k < n_; ++k) out[k] = importing(firm_id(k), o, year) ? 1 : 0;
  return out;
}

StatusTable read_status_csv(const std::filesystem::path& path, net::IdMap& ids) {
  csv::Reader r(path);
  auto cf = r.column("firm_id"), cy = r.column("year"), ce = r.column("eu_import"), cn = r.column("noneu_import");
  struct Raw {
    FirmId firm;
    int year;
    bool eu, noneu;
  };
  std::vector<Raw> raw;
  std::vector<std::string_view> f;
  int y0 = 1 << 30, y1 = -(1 << 30);
  auto flag = [&](std::string_view s, const char* what) {
    auto v = csv::parse_int(s, r, what);
    if (v != 0 && v != 1)
      throw Error("panel", path.string() + ":" + std::to_string(r.line()) + ": " + what + " must be 0 or 1",
                  "fix the malformed record");
    return v == 1;
  };
  while (r.next(f)) {
    Raw x{ids.intern(f[cf]), static_cast<int>(csv::parse_int(f[cy], r, "year")), flag(f[ce], "eu_import"),
          flag(f[cn], "noneu_import")};
    y0 = std::min(y0, x.year);
    y1 = std::max(y1, x.year);
    raw.push_back(x);
  }
  if (raw.empty()) throw Error("panel", path.string() + ": no status rows");
  StatusTable t(ids.size(), y0, y1);
  for (auto& x : raw) {
    t.set(x.firm, Origin::EU, x.year, x.eu);
    t.set(x.firm, Origin::NonEU, x.year, x.noneu);
  }
  return t;
}

void write_status_csv(const std::filesystem::path& path, const StatusTable& st, const net::IdMap& ids) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write " + path.string());
  out << "firm_id,year,eu_import,noneu_import\n";
  for (std::uint32_t k = 0; k < st.firms(); ++k)
    for (int y = st.first_year(); y <= st.last_year(); ++y) {
      if (!st.known(firm_id(k), Origin::EU, y)) continue;
      out << ids.external(firm_id(k)) << ',' << y << ',' << (st.importing(firm_id(k), Origin::EU, y) ? 1 : 0) << ','
          << (st.importing(firm_id(k), Origin::NonEU, y) ? 1 : 0) << '\n';
    }
}

}  // namespace peerimport::panel
