#include <algorithm>
#include <fstream>
#include <set>

#include "peerimport/csv.hpp"
#include "peerimport/netcore.hpp"

namespace peerimport::net {

FirmId IdMap::intern(std::string_view external) {
  if (external.empty()) throw Error("netcore", "empty firm identifier", "every record needs a firm id");
  auto it = index_.find(std::string(external));
  if (it != index_.end()) return firm_id(it->second);
  auto k = static_cast<std::uint32_t>(names_.size());
  names_.emplace_back(external);
  index_.emplace(names_.back(), k);
  return firm_id(k);
}

std::optional<FirmId> IdMap::find(std::string_view external) const {
  auto it = index_.find(std::string(external));
  if (it == index_.end()) return std::nullopt;
  return firm_id(it->second);
}

void IdMap::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write " + path.string());
  out << "firm_id,index\n";
  for (std::size_t k = 0; k < names_.size(); ++k) out << names_[k] << ',' << k << '\n';
}

IdMap IdMap::read_csv(const std::filesystem::path& path) {
  csv::Reader r(path);
  auto cid = r.column("firm_id"), cix = r.column("index");
  std::vector<std::pair<long long, std::string>> rows;
  std::vector<std::string_view> f;
  while (r.next(f)) rows.emplace_back(csv::parse_int(f[cix], r, "index"), std::string(f[cid]));
  std::sort(rows.begin(), rows.end());
  IdMap m;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].first != static_cast<long long>(k))
      throw Error("netcore", "id map indices are not dense 0..n-1", "regenerate the id map");
    if (to_index(m.intern(rows[k].second)) != k) throw Error("netcore", "duplicate external id " + rows[k].second);
  }
  return m;
}

YearlyEdges build_from_edges(std::span<const EdgeRecord> records, IdMap ids, ValueThreshold threshold) {
  YearlyEdges out;
  out.ids = std::move(ids);
  out.report.records = records.size();
  if (records.empty()) throw Error("netcore", "no edge records", "the edge file is empty");

  std::set<int> years;
  for (auto& r : records) years.insert(r.year);
  int first = *years.begin(), last = *years.rbegin();
  if (static_cast<int>(years.size()) != last - first + 1)
    throw Error("netcore", "edge years are not a contiguous range", "supply every year between the first and last");
  out.first_year = first;
  out.by_year.resize(static_cast<std::size_t>(last - first + 1));

  for (auto& r : records) {
    if (to_index(r.supplier) >= out.ids.size() || to_index(r.customer) >= out.ids.size())
      throw Error("netcore", "edge record references unknown firm index");
    if (r.supplier == r.customer) {
      ++out.report.self_loops;
      continue;
    }
    Edge e{r.supplier, r.customer, r.value.value_or(0.0), r.value.has_value()};
    if (e.has_value && e.value < 0) throw Error("netcore", "negative edge value", "values must be >= 0");
    out.by_year[static_cast<std::size_t>(r.year - first)].push_back(e);
  }

  for (auto& ys : out.by_year) {
    std::sort(ys.begin(), ys.end(), [](const Edge& a, const Edge& b) {
      return std::pair(a.supplier, a.customer) < std::pair(b.supplier, b.customer);
    });
    std::vector<Edge> merged;
    merged.reserve(ys.size());
    for (auto& e : ys) {
      if (!merged.empty() && merged.back() == e) {
        ++out.report.duplicates;
        auto& m = merged.back();
        if (e.has_value) {
          m.value = m.has_value ? std::max(m.value, e.value) : e.value;
          m.has_value = true;
        }
        continue;
      }
      merged.push_back(e);
    }
    std::vector<Edge> kept;
    kept.reserve(merged.size());
    for (auto& e : merged) {
      bool below = e.has_value &&
                   (threshold.inclusive ? e.value < threshold.min_value : e.value <= threshold.min_value);
      if (below) {
        ++out.report.below_threshold;
        continue;
      }
      kept.push_back(e);
    }
    ys = std::move(kept);
  }
  return out;
}

YearlyEdges read_edge_csv(const std::filesystem::path& path, IdMap ids, ValueThreshold threshold) {
  csv::Reader r(path);
  auto cs = r.column("supplier_id"), cc = r.column("customer_id"), cy = r.column("year");
  long cv = r.find_column("value");
  std::vector<EdgeRecord> recs;
  std::vector<std::string_view> f;
  while (r.next(f)) {
    if (f[cs].empty() || f[cc].empty())
      throw Error("netcore", path.string() + ":" + std::to_string(r.line()) + ": empty firm id",
                  "fix the malformed record");
    EdgeRecord e{ids.intern(f[cs]), ids.intern(f[cc]), static_cast<int>(csv::parse_int(f[cy], r, "year")), {}};
    if (cv >= 0 && !f[static_cast<std::size_t>(cv)].empty()) {
      e.value = csv::parse_double(f[static_cast<std::size_t>(cv)], r, "value");
      if (*e.value < 0)
        throw Error("netcore", path.string() + ":" + std::to_string(r.line()) + ": negative value",
                    "fix the malformed record");
    }
    recs.push_back(e);
  }
  return build_from_edges(recs, std::move(ids), threshold);
}

void write_edge_csv(const std::filesystem::path& path, const YearlyEdges& yearly) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write " + path.string());
  out << "supplier_id,customer_id,year,value\n";
  for (std::size_t y = 0; y < yearly.by_year.size(); ++y)
    for (auto& e : yearly.by_year[y]) {
      out << yearly.ids.external(e.supplier) << ',' << yearly.ids.external(e.customer) << ','
          << yearly.first_year + static_cast<int>(y) << ',';
      if (e.has_value) out << csv::format_double(e.value);
      out << '\n';
    }
}

StableResult stable_subnetwork(const YearlyEdges& yearly, StableWindow window) {
  int len = window.last_year - window.first_year + 1;
  if (len < 2) throw Error("netcore", "stability window needs at least 2 years");
  if (window.first_year < yearly.first_year || window.last_year > yearly.last_year())
    throw Error("netcore",
                "stability window " + std::to_string(window.first_year) + "-" + std::to_string(window.last_year) +
                    " not covered by edge data",
                "adjust --window to the years present in the edge file");
  int need = std::max(1, len - window.max_gap);

  std::vector<Edge> all;
  for (int y = window.first_year; y <= window.last_year; ++y) {
    auto& ys = yearly.year(y);
    all.insert(all.end(), ys.begin(), ys.end());
  }
  std::stable_sort(all.begin(), all.end(), [](const Edge& a, const Edge& b) {
    return std::pair(a.supplier, a.customer) < std::pair(b.supplier, b.customer);
  });

  StableResult res;
  std::vector<std::pair<FirmId, FirmId>> edges;
  std::vector<double> weights;
  bool any_value = false;
  double total = 0.0, dropped_value = 0.0;
  for (std::size_t b = 0; b < all.size();) {
    std::size_t e = b;
    int valued = 0;
    double value = 0.0;
    while (e < all.size() && all[e] == all[b]) {
      if (all[e].has_value) {
        ++valued;
        value += all[e].value;
      }
      ++e;
    }
    int present = static_cast<int>(e - b);
    any_value = any_value || valued > 0;
    total += value;
    if (present >= need) {
      edges.emplace_back(all[b].supplier, all[b].customer);
      weights.push_back(valued > 0 ? value / valued : 0.0);
      ++res.report.kept;
    } else {
      dropped_value += value;
      ++res.report.dropped;
    }
    b = e;
  }
  if (edges.empty())
    throw Error("netcore", "no edge survives the stability filter", "widen max_gap or check the edge years");
  if (any_value) res.report.value_share_dropped = total > 0 ? dropped_value / total : 0.0;
  if (!any_value) weights.clear();
  res.network = ProductionNetwork(yearly.ids.size(), std::move(edges), std::move(weights));
  return res;
}

YearlyEdges replicate(const ProductionNetwork& net, const IdMap& ids, StableWindow window) {
  YearlyEdges out;
  out.ids = ids;
  out.first_year = window.first_year;
  auto edges = net.edges();
  auto w = net.edge_weights();
  std::vector<Edge> year;
  year.reserve(edges.size());
  for (std::size_t k = 0; k < edges.size(); ++k)
    year.push_back({edges[k].first, edges[k].second, w.empty() ? 0.0 : w[k], !w.empty()});
  out.by_year.assign(static_cast<std::size_t>(window.last_year - window.first_year + 1), year);
  return out;
}

}  // namespace peerimport::net
