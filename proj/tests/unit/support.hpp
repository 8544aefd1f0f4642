#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "peerimport/netcore.hpp"
#include "peerimport/panel.hpp"

namespace testsupport {

using peerimport::FirmId;
using peerimport::firm_id;
using peerimport::to_index;

inline peerimport::net::ProductionNetwork graph(std::size_t n, const std::vector<std::pair<int, int>>& e) {
  std::vector<std::pair<FirmId, FirmId>> edges;
  for (auto [a, b] : e) edges.emplace_back(firm_id(static_cast<std::uint32_t>(a)), firm_id(static_cast<std::uint32_t>(b)));
  return peerimport::net::ProductionNetwork(n, std::move(edges));
}

// G0: 1->2, 2->3, 2->4, 5->1 (index 0 unused)
inline peerimport::net::ProductionNetwork g0(std::vector<std::pair<int, int>> extra = {}) {
  std::vector<std::pair<int, int>> e{{1, 2}, {2, 3}, {2, 4}, {5, 1}};
  e.insert(e.end(), extra.begin(), extra.end());
  return graph(6, e);
}

inline std::vector<int> ints(const std::vector<FirmId>& v) {
  std::vector<int> out;
  for (auto f : v) out.push_back(static_cast<int>(to_index(f)));
  return out;
}

inline std::vector<int> ints(std::span<const FirmId> v) { return ints(std::vector<FirmId>(v.begin(), v.end())); }

// Random simple digraph as a set of pairs.
inline std::set<std::pair<int, int>> random_edges(std::mt19937_64& g, int n, double p) {
  std::set<std::pair<int, int>> e;
  std::bernoulli_distribution b(p);
  for (int a = 0; a < n; ++a)
    for (int c = 0; c < n; ++c)
      if (a != c && b(g)) e.insert({a, c});
  return e;
}

inline peerimport::net::ProductionNetwork from_set(int n, const std::set<std::pair<int, int>>& e) {
  return graph(static_cast<std::size_t>(n), std::vector<std::pair<int, int>>(e.begin(), e.end()));
}

// Status table with every cell set to 0 for both origins.
inline peerimport::panel::StatusTable zeros(std::size_t n, int first, int last) {
  peerimport::panel::StatusTable st(n, first, last);
  for (std::uint32_t i = 0; i < n; ++i)
    for (int y = first; y <= last; ++y)
      for (auto o : {peerimport::Origin::EU, peerimport::Origin::NonEU}) st.set(firm_id(i), o, y, false);
  return st;
}

}  // namespace testsupport
