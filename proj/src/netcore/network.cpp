#include <algorithm>
#include <numeric>

#include "peerimport/netcore.hpp"
#include "peerimport/parallel.hpp"

namespace peerimport::net {

namespace {

void build_csr(std::size_t n, const std::vector<std::pair<FirmId, FirmId>>& edges, const std::vector<double>& weights,
               bool reverse, std::vector<std::size_t>& offsets, std::vector<FirmId>& targets,
               std::vector<double>& wout) {
  offsets.assign(n + 1, 0);
  for (auto& [s, c] : edges) ++offsets[to_index(reverse ? c : s) + 1];
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
  targets.resize(edges.size());
  if (!weights.empty()) wout.resize(edges.size());
  std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
  // edges are sorted by (supplier, customer) so forward lists come out sorted;
  // reverse lists are filled in supplier order, also sorted.
  for (std::size_t e = 0; e < edges.size(); ++e) {
    auto [s, c] = edges[e];
    auto from = to_index(reverse ? c : s);
    auto slot = cursor[from]++;
    targets[slot] = reverse ? s : c;
    if (!weights.empty()) wout[slot] = weights[e];
  }
}

}  // namespace

ProductionNetwork::ProductionNetwork(std::size_t n, std::vector<std::pair<FirmId, FirmId>> edges,
                                     std::vector<double> weights)
    : n_(n) {
  if (!weights.empty() && weights.size() != edges.size())
    throw Error("netcore", "weight vector does not match edge count");
  std::vector<std::size_t> order(edges.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return edges[a] < edges[b]; });
  std::vector<std::pair<FirmId, FirmId>> sorted(edges.size());
  std::vector<double> sw(weights.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    sorted[k] = edges[order[k]];
    if (!weights.empty()) sw[k] = weights[order[k]];
  }
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    auto [s, c] = sorted[k];
    if (to_index(s) >= n || to_index(c) >= n) throw Error("netcore", "edge endpoint out of range");
    if (s == c) throw Error("netcore", "self-loop on firm " + std::to_string(to_index(s)));
    if (k > 0 && sorted[k - 1] == sorted[k])
      throw Error("netcore", "duplicate edge " + std::to_string(to_index(s)) + "->" + std::to_string(to_index(c)));
  }
  build_csr(n, sorted, sw, false, fwd_offsets_, fwd_targets_, fwd_weights_);
  build_csr(n, sorted, sw, true, rev_offsets_, rev_targets_, rev_weights_);
}

void ProductionNetwork::check(FirmId i) const {
  if (to_index(i) >= n_)
    throw Error("netcore", "firm index " + std::to_string(to_index(i)) + " out of range (n=" + std::to_string(n_) + ")");
}

std::span<const FirmId> ProductionNetwork::customers(FirmId i) const {
  check(i);
  auto k = to_index(i);
  return {fwd_targets_.data() + fwd_offsets_[k], fwd_offsets_[k + 1] - fwd_offsets_[k]};
}

std::span<const FirmId> ProductionNetwork::suppliers(FirmId i) const {
  check(i);
  auto k = to_index(i);
  return {rev_targets_.data() + rev_offsets_[k], rev_offsets_[k + 1] - rev_offsets_[k]};
}

std::span<const double> ProductionNetwork::customer_weights(FirmId i) const {
  if (fwd_weights_.empty()) return {};
  check(i);
  auto k = to_index(i);
  return {fwd_weights_.data() + fwd_offsets_[k], fwd_offsets_[k + 1] - fwd_offsets_[k]};
}

std::span<const double> ProductionNetwork::supplier_weights(FirmId i) const {
  if (rev_weights_.empty()) return {};
  check(i);
  auto k = to_index(i);
  return {rev_weights_.data() + rev_offsets_[k], rev_offsets_[k + 1] - rev_offsets_[k]};
}

bool ProductionNetwork::has_edge(FirmId supplier, FirmId customer) const {
  auto c = customers(supplier);
  return std::binary_search(c.begin(), c.end(), customer);
}

std::vector<std::pair<FirmId, FirmId>> ProductionNetwork::edges() const {
  std::vector<std::pair<FirmId, FirmId>> out;
  out.reserve(edge_count());
  for (std::uint32_t s = 0; s < n_; ++s)
    for (auto c : customers(firm_id(s))) out.emplace_back(firm_id(s), c);
  return out;
}

bool operator==(const ProductionNetwork& a, const ProductionNetwork& b) {
  return a.n_ == b.n_ && a.fwd_offsets_ == b.fwd_offsets_ && a.fwd_targets_ == b.fwd_targets_ &&
         a.fwd_weights_ == b.fwd_weights_;
}

std::vector<FirmId> neighbors(const ProductionNetwork& net, FirmId i, Side side) {
  auto s = net.neighbors(i, side);
  return {s.begin(), s.end()};
}

std::vector<FirmId> second_order_exclusive(const ProductionNetwork& net, FirmId i, Side side, bool strict) {
  const Side other = side == Side::Upstream ? Side::Downstream : Side::Upstream;
  auto first = net.neighbors(i, side);

  std::vector<FirmId> candidates;
  for (auto j : first) {
    auto nn = net.neighbors(j, side);
    candidates.insert(candidates.end(), nn.begin(), nn.end());
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  std::vector<FirmId> excluded{i};
  auto ins = [&](std::span<const FirmId> s) { excluded.insert(excluded.end(), s.begin(), s.end()); };
  ins(net.suppliers(i));
  ins(net.customers(i));
  if (strict) {
    // For side U these are suppliers-of-customers, suppliers-of-suppliers and
    // customers-of-suppliers; side D mirrors them.
    for (auto j : first) ins(net.neighbors(j, other));
    for (auto j : net.neighbors(i, other)) {
      ins(net.neighbors(j, other));
      ins(net.neighbors(j, side));
    }
  }
  std::sort(excluded.begin(), excluded.end());
  excluded.erase(std::unique(excluded.begin(), excluded.end()), excluded.end());

  std::vector<FirmId> out;
  out.reserve(candidates.size());
  std::set_difference(candidates.begin(), candidates.end(), excluded.begin(), excluded.end(), std::back_inserter(out));
  return out;
}

SecondOrderSets compute_second_order(const ProductionNetwork& net, Side side, bool strict) {
  const std::size_t n = net.size();
  std::vector<std::vector<FirmId>> per(n);
  parallel_for(n, [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) per[k] = second_order_exclusive(net, firm_id(static_cast<std::uint32_t>(k)), side, strict);
  }, 256);
  SecondOrderSets out;
  out.offsets.assign(n + 1, 0);
  for (std::size_t k = 0; k < n; ++k) out.offsets[k + 1] = out.offsets[k] + per[k].size();
  out.members.reserve(out.offsets[n]);
  for (auto& v : per) out.members.insert(out.members.end(), v.begin(), v.end());
  return out;
}

}  // namespace peerimport::net
