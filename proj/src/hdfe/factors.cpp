#include <algorithm>
#include <numeric>
#include <unordered_map>

#include "peerimport/hdfe.hpp"

namespace peerimport::hdfe {

std::string_view factor_label(FactorKind k) {
  switch (k) {
    case FactorKind::Firm: return "id";
    case FactorKind::FirmYear: return "id-y";
    case FactorKind::OriginYear: return "eu-y";
    case FactorKind::OriginIndustryZipYear: return "eu-s-z-y";
    case FactorKind::IndustryZipYear: return "s-z-y";
  }
  return "?";
}

FactorKind parse_factor(std::string_view label) {
  for (auto k : {FactorKind::Firm, FactorKind::FirmYear, FactorKind::OriginYear, FactorKind::OriginIndustryZipYear,
                 FactorKind::IndustryZipYear})
    if (factor_label(k) == label) return k;
  throw Error("hdfe", "unknown factor '" + std::string(label) + "'", "use id, id-y, eu-y, eu-s-z-y or s-z-y");
}

Factor from_keys(std::string name, std::span<const std::uint64_t> keys) {
  Factor f;
  f.name = std::move(name);
  f.codes.resize(keys.size());
  std::unordered_map<std::uint64_t, std::uint32_t> seen;
  seen.reserve(keys.size() / 2 + 1);
  for (std::size_t r = 0; r < keys.size(); ++r) {
    auto [it, fresh] = seen.try_emplace(keys[r], static_cast<std::uint32_t>(f.sizes.size()));
    if (fresh) f.sizes.push_back(0);
    f.codes[r] = it->second;
    ++f.sizes[it->second];
  }
  return f;
}

std::uint64_t factor_key(FactorKind k, const panel::ObservationRow& r) {
  const auto firm = static_cast<std::uint64_t>(to_index(r.firm));
  const auto year = static_cast<std::uint64_t>(static_cast<std::uint16_t>(r.year));
  const auto origin = static_cast<std::uint64_t>(r.origin);
  if (r.industry >= (1u << 20) || r.zip >= (1u << 26))
    throw Error("hdfe", "industry or zip code index too large for the factor key");
  const auto cell = (static_cast<std::uint64_t>(r.industry) << 42) | (static_cast<std::uint64_t>(r.zip) << 16) | year;
  switch (k) {
    case FactorKind::Firm: return firm;
    case FactorKind::FirmYear: return (firm << 16) | year;
    case FactorKind::OriginYear: return (origin << 16) | year;
    case FactorKind::OriginIndustryZipYear: return (origin << 62) | cell;
    case FactorKind::IndustryZipYear: return cell;
  }
  return 0;
}

std::vector<Factor> encode(std::span<const panel::ObservationRow> rows, std::span<const FactorKind> kinds) {
  std::vector<Factor> out;
  std::vector<std::uint64_t> keys(rows.size());
  for (auto k : kinds) {
    for (std::size_t r = 0; r < rows.size(); ++r) keys[r] = factor_key(k, rows[r]);
    out.push_back(from_keys(std::string(factor_label(k)), keys));
  }
  return out;
}

Factor restrict(const Factor& f, std::span<const std::size_t> keep) {
  std::vector<std::uint64_t> keys(keep.size());
  for (std::size_t r = 0; r < keep.size(); ++r) keys[r] = f.codes[keep[r]];
  return from_keys(f.name, keys);
}

SingletonResult drop_singletons(std::span<const Factor> factors, bool recursive) {
  SingletonResult res;
  if (factors.empty()) return res;
  const std::size_t n = factors[0].rows();
  std::vector<std::uint8_t> alive(n, 1);
  std::vector<std::vector<std::uint32_t>> sizes;
  for (auto& f : factors) sizes.push_back(f.sizes);

  for (;;) {
    ++res.passes;
    std::vector<std::size_t> kill;
    for (std::size_t r = 0; r < n; ++r) {
      if (!alive[r]) continue;
      for (std::size_t k = 0; k < factors.size(); ++k)
        if (sizes[k][factors[k].codes[r]] == 1) {
          kill.push_back(r);
          break;
        }
    }
    // remove after the scan so one pass sees a consistent snapshot
    for (auto r : kill) {
      alive[r] = 0;
      for (std::size_t k = 0; k < factors.size(); ++k) --sizes[k][factors[k].codes[r]];
    }
    res.dropped += kill.size();
    if (kill.empty() || !recursive) break;
  }
  for (std::size_t r = 0; r < n; ++r)
    if (alive[r]) res.keep.push_back(r);
  return res;
}

namespace {

struct UnionFind {
  std::vector<std::uint32_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0u); }
  std::uint32_t find(std::uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[std::max(a, b)] = std::min(a, b);
    return true;
  }
};

}  // namespace

std::size_t connected_components(const Factor& a, const Factor& b) {
  if (a.rows() != b.rows()) throw Error("hdfe", "factors cover different rows");
  const auto ga = a.groups();
  UnionFind uf(ga + b.groups());
  std::size_t comps = ga + b.groups();
  for (std::size_t r = 0; r < a.rows(); ++r)
    if (uf.unite(a.codes[r], static_cast<std::uint32_t>(ga + b.codes[r]))) --comps;
  return comps;
}

bool nested(const Factor& inner, std::span<const std::uint32_t> outer_codes) {
  if (outer_codes.size() != inner.rows()) throw Error("hdfe", "nesting check on different rows");
  constexpr auto unset = static_cast<std::uint32_t>(-1);
  std::vector<std::uint32_t> owner(inner.groups(), unset);
  for (std::size_t r = 0; r < inner.rows(); ++r) {
    auto& o = owner[inner.codes[r]];
    if (o == unset) o = outer_codes[r];
    else if (o != outer_codes[r]) return false;
  }
  return true;
}

AbsorbedDof absorbed_dof(std::span<const Factor> factors) {
  AbsorbedDof d;
  if (factors.empty()) return d;

  // A factor whose groups are unions of another factor's groups adds nothing.
  std::vector<std::size_t> active;
  for (std::size_t k = 0; k < factors.size(); ++k) {
    bool spanned = false;
    for (std::size_t j = 0; j < factors.size() && !spanned; ++j) {
      if (j == k) continue;
      if (!nested(factors[j], factors[k].codes)) continue;
      // identical partitions: keep the first one
      spanned = factors[j].groups() != factors[k].groups() || j < k;
    }
    if (spanned) d.redundant_factors.push_back(k);
    else active.push_back(k);
  }

  if (active.size() == 1) {
    d.value = d.lower_bound = factors[active[0]].groups();
    return d;
  }
  auto pair_dof = [&](std::size_t a, std::size_t b) {
    return factors[a].groups() + factors[b].groups() - connected_components(factors[a], factors[b]);
  };
  if (active.size() == 2) {
    d.value = d.lower_bound = pair_dof(active[0], active[1]);
    return d;
  }
  std::size_t total = 0;
  for (auto k : active) total += factors[k].groups();
  const std::size_t c12 = connected_components(factors[active[0]], factors[active[1]]);
  d.value = total - c12 - (active.size() - 2);
  for (std::size_t a = 0; a < active.size(); ++a)
    for (std::size_t b = a + 1; b < active.size(); ++b) d.lower_bound = std::max(d.lower_bound, pair_dof(active[a], active[b]));
  d.lower_bound = std::min(d.lower_bound, d.value);
  d.exact = false;
  return d;
}

}  // namespace peerimport::hdfe
