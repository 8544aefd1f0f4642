#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "peerimport/pipeline.hpp"

namespace peerimport::pipeline {

namespace {

bool is_characteristic(const std::string& l) { return l.rfind("x_", 0) == 0 || l.rfind("xbar_", 0) == 0; }

std::string fmt(const char* f, double v) {
  if (std::isnan(v)) return ".";
  char b[64];
  std::snprintf(b, sizeof b, f, v);
  return b;
}

}  // namespace

std::string report_ladder(const std::vector<Column>& cols) {
  if (cols.empty()) throw Error("report", "nothing to report", "pass at least one run");
  std::vector<std::string> order;
  for (const auto& c : cols) {
    std::set<std::string> seen;
    for (const auto& l : c.labels) {
      if (!seen.insert(l).second)
        throw Error("report", "label collision: '" + l + "' appears twice in column " + c.name,
                    "rename the regressor or split the run");
      if (is_characteristic(l)) continue;
      if (std::find(order.begin(), order.end(), l) == order.end()) order.push_back(l);
    }
  }

  // cells[row][col]; first column holds the row label
  std::vector<std::vector<std::string>> cells;
  auto add = [&](std::string label, auto&& cell) {
    std::vector<std::string> row{std::move(label)};
    for (const auto& c : cols) row.push_back(cell(c));
    cells.push_back(std::move(row));
  };
  std::vector<std::size_t> rules;  // horizontal rules before these rows
  {
    std::vector<std::string> h{""}, n{""};
    for (std::size_t k = 0; k < cols.size(); ++k) {
      h.push_back("(" + std::to_string(k + 1) + ")");
      n.push_back(cols[k].name);
    }
    cells.push_back(h);
    cells.push_back(n);
    rules.push_back(cells.size());
  }
  for (const auto& l : order) {
    auto find = [&](const Column& c) -> long {
      auto it = std::find(c.labels.begin(), c.labels.end(), l);
      return it == c.labels.end() ? -1 : it - c.labels.begin();
    };
    add(l, [&](const Column& c) {
      auto k = find(c);
      return k < 0 ? std::string() : fmt("%.4f", c.coef[static_cast<std::size_t>(k)]) + est::stars(c.p[static_cast<std::size_t>(k)]);
    });
    add("", [&](const Column& c) {
      auto k = find(c);
      return k < 0 ? std::string() : "(" + fmt("%.4f", c.se[static_cast<std::size_t>(k)]) + ")";
    });
  }
  add("Own/Peers' characteristics", [](const Column& c) { return std::string(c.characteristics ? "Yes" : "No"); });
  rules.push_back(cells.size());
  add("r2", [](const Column& c) { return fmt("%.4f", c.r2); });
  add("N", [](const Column& c) { return std::to_string(c.N); });
  bool any_iv = std::any_of(cols.begin(), cols.end(), [](const Column& c) { return c.iv; });
  if (any_iv) {
    add("idstat", [](const Column& c) { return c.iv ? fmt("%.3f", c.idstat) : std::string(); });
    add("idp", [](const Column& c) { return c.iv ? fmt("%.4f", c.idp) : std::string(); });
    add("widstat", [](const Column& c) { return c.iv ? fmt("%.3f", c.widstat) : std::string(); });
    add("j", [](const Column& c) { return c.j ? fmt("%.3f", *c.j) : std::string(); });
    add("jp", [](const Column& c) { return c.jp ? fmt("%.4f", *c.jp) : std::string(); });
    std::size_t ni = 0;
    for (auto& c : cols) ni = std::max(ni, c.instruments.size());
    for (std::size_t k = 0; k < ni; ++k)
      add(k == 0 ? "instruments" : "", [&](const Column& c) { return k < c.instruments.size() ? c.instruments[k] : std::string(); });
  }
  std::size_t nf = 0;
  for (auto& c : cols) nf = std::max(nf, c.factors.size());
  for (std::size_t k = 0; k < nf; ++k)
    add(k == 0 ? "fixed effects" : "", [&](const Column& c) { return k < c.factors.size() ? c.factors[k] : std::string(); });
  add("clustering variable", [](const Column& c) { return c.cluster; });

  std::vector<std::size_t> width(cols.size() + 1, 0);
  for (auto& r : cells)
    for (std::size_t k = 0; k < r.size(); ++k) width[k] = std::max(width[k], r[k].size());
  std::size_t total = width[0];
  for (std::size_t k = 1; k < width.size(); ++k) total += 2 + std::max<std::size_t>(width[k], 10);

  std::ostringstream out;
  std::string rule(total, '-');
  out << std::string(total, '=') << '\n';
  for (std::size_t r = 0; r < cells.size(); ++r) {
    if (std::find(rules.begin(), rules.end(), r) != rules.end()) out << rule << '\n';
    std::string line = cells[r][0] + std::string(width[0] - cells[r][0].size(), ' ');
    for (std::size_t k = 1; k < cells[r].size(); ++k) {
      auto w = std::max<std::size_t>(width[k], 10);
      line += "  " + std::string(w - cells[r][k].size(), ' ') + cells[r][k];
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << '\n';
  }
  out << std::string(total, '=') << '\n';
  out << "* p<0.1; ** p<0.05; *** p<0.01\n";
  return out.str();
}

}  // namespace peerimport::pipeline
