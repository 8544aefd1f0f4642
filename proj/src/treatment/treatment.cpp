#include <algorithm>

#include "peerimport/parallel.hpp"
#include "peerimport/treatment.hpp"

namespace peerimport::treatment {

Share peer_share(const net::ProductionNetwork& net, const panel::StatusTable& statuses, FirmId i, Origin origin,
                 int year, Side side, Weighting weighting) {
  Share s;
  if (!statuses.covers(year - 1)) {
    s.missing = Missing::LagUnavailable;
    return s;
  }
  auto peers = net.neighbors(i, side);
  s.peers = peers.size();
  if (peers.empty()) {
    s.missing = Missing::NoPeers;
    return s;
  }
  if (weighting == Weighting::Uniform) {
    std::size_t hits = 0;
    for (auto j : peers) hits += statuses.importing(j, origin, year - 1) ? 1 : 0;
    s.value = static_cast<double>(hits) / static_cast<double>(peers.size());
    return s;
  }
  if (!net.weighted()) throw Error("treatment", "value weighting requested but the network has no edge values");
  auto w = net.neighbor_weights(i, side);
  double num = 0, den = 0;
  for (std::size_t k = 0; k < peers.size(); ++k) {
    den += w[k];
    if (statuses.importing(peers[k], origin, year - 1)) num += w[k];
  }
  if (den <= 0) {
    s.missing = Missing::NoPeers;
    return s;
  }
  s.value = num / den;
  return s;
}

Share instrument_share(std::span<const FirmId> second_order, const panel::StatusTable& statuses, Origin origin,
                       int year, int lag) {
  Share s;
  if (!statuses.covers(year - lag)) {
    s.missing = Missing::LagUnavailable;
    return s;
  }
  s.peers = second_order.size();
  if (second_order.empty()) {
    s.missing = Missing::NoPeers;
    return s;
  }
  std::size_t hits = 0;
  for (auto j : second_order) hits += statuses.importing(j, origin, year - lag) ? 1 : 0;
  s.value = static_cast<double>(hits) / static_cast<double>(second_order.size());
  return s;
}

Share instrument_share(const net::ProductionNetwork& net, const panel::StatusTable& statuses, FirmId i, Origin origin,
                       int year, Side side, int lag, bool strict) {
  auto set = net::second_order_exclusive(net, i, side, strict);
  return instrument_share(set, statuses, origin, year, lag);
}

std::uint64_t SpatialIndex::key(int kind, std::uint64_t a, std::uint64_t b, Origin o, int year) {
  return (static_cast<std::uint64_t>(kind) << 62) | (static_cast<std::uint64_t>(o) << 60) |
         (static_cast<std::uint64_t>((year + 4096) & 0xFFF) << 48) | ((a & 0xFFFFFF) << 24) | (b & 0xFFFFFF);
}

SpatialIndex::SpatialIndex(const panel::AttributeTable& attrs, const panel::StatusTable& statuses)
    : attrs_(&attrs), statuses_(&statuses) {
  int y0 = std::max(attrs.first_year(), statuses.first_year());
  int y1 = std::min(attrs.last_year(), statuses.last_year());
  std::size_t n = std::min(attrs.firms(), statuses.firms());
  for (int y = y0; y <= y1; ++y)
    for (std::uint32_t k = 0; k < n; ++k) {
      FirmId i = firm_id(k);
      if (!attrs.has(i, y) || !statuses.known(i, Origin::Any, y)) continue;
      auto& a = attrs.at(i, y);
      for (auto o : {Origin::EU, Origin::NonEU, Origin::Any}) {
        std::uint32_t imp = statuses.importing(i, o, y) ? 1 : 0;
        for (auto kk : {key(0, a.zip, 0, o, y), key(1, a.industry, 0, o, y), key(2, a.industry, a.zip, o, y)}) {
          auto& c = cells_[kk];
          ++c.firms;
          c.importers += imp;
        }
      }
    }
}

SpatialSpillovers SpatialIndex::props(FirmId i, Origin origin, int year) const {
  SpatialSpillovers s;
  int y = year - 1;
  if (!attrs_->has(i, y) || !statuses_->known(i, Origin::Any, y)) {
    s.zip_flag = s.sec_flag = s.sec_zip_flag = true;
    return s;
  }
  auto& a = attrs_->at(i, y);
  std::uint32_t own = statuses_->importing(i, origin, y) ? 1 : 0;
  auto fill = [&](std::uint64_t k, double& v, std::size_t& den, bool& flag) {
    auto it = cells_.find(k);
    std::uint32_t firms = it == cells_.end() ? 0 : it->second.firms;
    std::uint32_t imps = it == cells_.end() ? 0 : it->second.importers;
    // the focal firm is excluded from numerator and denominator
    den = firms > 0 ? firms - 1 : 0;
    if (den == 0) {
      flag = true;
      v = 0;
      return;
    }
    v = static_cast<double>(imps - own) / static_cast<double>(den);
  };
  fill(key(0, a.zip, 0, origin, y), s.zip, s.zip_den, s.zip_flag);
  fill(key(1, a.industry, 0, origin, y), s.sec, s.sec_den, s.sec_flag);
  fill(key(2, a.industry, a.zip, origin, y), s.sec_zip, s.sec_zip_den, s.sec_zip_flag);
  return s;
}

SpatialSpillovers spatial_props(const panel::AttributeTable& attrs, const panel::StatusTable& statuses, FirmId i,
                                Origin origin, int year) {
  return SpatialIndex(attrs, statuses).props(i, origin, year);
}

std::string_view link_predicate_name(LinkPredicate p) {
  switch (p) {
    case LinkPredicate::SameIndustry: return "same_industry";
    case LinkPredicate::SameZip: return "same_zip";
    case LinkPredicate::SameProvince: return "same_province";
    case LinkPredicate::Reciprocal: return "reciprocal";
  }
  return "?";
}

LinkPredicate parse_link_predicate(std::string_view s) {
  for (auto p : {LinkPredicate::SameIndustry, LinkPredicate::SameZip, LinkPredicate::SameProvince,
                 LinkPredicate::Reciprocal})
    if (link_predicate_name(p) == s) return p;
  throw Error("treatment", "unknown link predicate '" + std::string(s) + "'",
              "use same_industry, same_zip, same_province or reciprocal");
}

PeerCategorizer PeerCategorizer::by_split(const panel::MedianSplit& split) {
  PeerCategorizer c;
  c.name_ = split.characteristic;
  c.labels_ = {"Low", "High"};
  c.split_ = &split;
  return c;
}

PeerCategorizer PeerCategorizer::by_link(LinkPredicate p, const panel::AttributeTable& attrs,
                                         const net::ProductionNetwork& net, std::size_t province_digits) {
  PeerCategorizer c;
  c.name_ = std::string(link_predicate_name(p));
  c.labels_ = {"No", "Yes"};
  c.link_ = p;
  c.attrs_ = &attrs;
  c.net_ = &net;
  if (p == LinkPredicate::SameProvince) {
    panel::Dictionary provinces;
    c.province_of_zip_.resize(attrs.zips.size());
    for (std::uint32_t z = 0; z < attrs.zips.size(); ++z)
      c.province_of_zip_[z] = provinces.intern(std::string_view(attrs.zips.name(z)).substr(0, province_digits));
  }
  return c;
}

bool PeerCategorizer::assigned(FirmId i, FirmId j, int year) const {
  if (split_) return split_->of(j) != panel::Level::Unassigned;
  if (*link_ == LinkPredicate::Reciprocal) return true;
  return attrs_->has(i, year) && attrs_->has(j, year);
}

int PeerCategorizer::category(FirmId i, FirmId j, int year) const {
  if (split_) {
    auto l = split_->of(j);
    if (l == panel::Level::Unassigned)
      throw Error("treatment", "peer " + std::to_string(to_index(j)) + " has no " + name_ + " category",
                  "every peer needs a baseline-year value for the split characteristic");
    return l == panel::Level::High ? 1 : 0;
  }
  switch (*link_) {
    case LinkPredicate::Reciprocal: return net_->has_edge(i, j) && net_->has_edge(j, i) ? 1 : 0;
    default: break;
  }
  if (!attrs_->has(i, year) || !attrs_->has(j, year))
    throw Error("treatment", "link predicate " + name_ + " needs attributes for both firms in " + std::to_string(year));
  auto& a = attrs_->at(i, year);
  auto& b = attrs_->at(j, year);
  switch (*link_) {
    case LinkPredicate::SameIndustry: return a.industry == b.industry ? 1 : 0;
    case LinkPredicate::SameZip: return a.zip == b.zip ? 1 : 0;
    case LinkPredicate::SameProvince: return province_of_zip_[a.zip] == province_of_zip_[b.zip] ? 1 : 0;
    default: return 0;
  }
}

HeterogeneityShares category_shares(const net::ProductionNetwork& net, const panel::StatusTable& statuses,
                                    const PeerCategorizer& cat, FirmId i, Origin origin, int year, Side side) {
  HeterogeneityShares h;
  auto peers = net.neighbors(i, side);
  if (peers.empty() || !statuses.covers(year - 1)) {
    h.missing = true;
    return h;
  }
  std::array<std::size_t, 2> hits{0, 0};
  for (auto j : peers) {
    int c = cat.category(i, j, year - 1);
    if (statuses.importing(j, origin, year - 1)) ++hits[static_cast<std::size_t>(c)];
  }
  double d = static_cast<double>(peers.size());
  h.by_category = {static_cast<double>(hits[0]) / d, static_cast<double>(hits[1]) / d};
  h.total = static_cast<double>(hits[0] + hits[1]) / d;
  return h;
}

TreatmentTable compute_treatments(const TreatmentInputs& in, const panel::Panel& panel, const TreatmentOptions& opt) {
  const auto& net = in.network;
  const auto& st = in.statuses;
  const auto& attrs = in.attributes;
  const std::size_t n = panel.rows.size();
  TreatmentTable t;
  t.ybar_D.resize(n);
  t.ybar_U.resize(n);
  t.missing_D.resize(n);
  t.missing_U.resize(n);

  // Derived controls per (firm, year), shared by every row that needs them.
  const std::size_t K = panel::control_names().size();
  std::vector<double> ctl;
  std::vector<std::uint8_t> ctl_ok;
  const int ay0 = attrs.first_year();
  const std::size_t nf = attrs.firms();
  if (opt.contextual) {
    t.context_width = K;
    std::size_t years = static_cast<std::size_t>(attrs.last_year() - ay0 + 1);
    ctl.assign(years * nf * K, 0.0);
    ctl_ok.assign(years * nf, 0);
    parallel_for(nf, [&](std::size_t b, std::size_t e) {
      for (std::size_t y = 0; y < years; ++y)
        for (std::size_t k = b; k < e; ++k) {
          FirmId i = firm_id(static_cast<std::uint32_t>(k));
          int yr = ay0 + static_cast<int>(y);
          if (!attrs.has(i, yr)) continue;
          auto c = panel::derive_controls(attrs.at(i, yr));
          std::copy(c.begin(), c.end(), ctl.begin() + static_cast<long>((y * nf + k) * K));
          ctl_ok[y * nf + k] = 1;
        }
    });
    t.xbar_D.assign(n * K, 0.0);
    t.xbar_U.assign(n * K, 0.0);
    t.xbar_missing.assign(n, 0);
  }

  net::SecondOrderSets so_D, so_U;
  if (!opt.instrument_lags.empty()) {
    so_D = net::compute_second_order(net, Side::Downstream, opt.strict);
    so_U = net::compute_second_order(net, Side::Upstream, opt.strict);
    for (int lag : opt.instrument_lags) {
      t.zbar_D[lag].resize(n);
      t.zbar_U[lag].resize(n);
      t.zmiss_D[lag].resize(n);
      t.zmiss_U[lag].resize(n);
    }
  }

  std::optional<SpatialIndex> spatial;
  if (opt.spatial) {
    spatial.emplace(attrs, st);
    t.prop_zip.resize(n);
    t.prop_sec.resize(n);
    t.prop_sec_zip.resize(n);
  }
  if (opt.categorizer) {
    t.cat_D.resize(n);
    t.cat_U.resize(n);
    t.cat_missing.assign(n, 0);
    t.cat_labels = opt.categorizer->labels();
  }

  std::vector<std::size_t> zero_den(n, 0);
  parallel_for(n, [&](std::size_t b, std::size_t e) {
    for (std::size_t r = b; r < e; ++r) {
      const auto& row = panel.rows[r];
      auto sd = peer_share(net, st, row.firm, row.origin, row.year, Side::Downstream, opt.weighting);
      auto su = peer_share(net, st, row.firm, row.origin, row.year, Side::Upstream, opt.weighting);
      t.ybar_D[r] = sd.value;
      t.ybar_U[r] = su.value;
      t.missing_D[r] = sd.missing;
      t.missing_U[r] = su.missing;

      if (opt.contextual) {
        int py = row.year - 1;
        if (py < ay0 || py > attrs.last_year()) {
          t.xbar_missing[r] = 1;
        } else {
          std::size_t y = static_cast<std::size_t>(py - ay0);
          auto avg = [&](std::span<const FirmId> peers, double* out) {
            std::size_t m = 0;
            for (auto j : peers) {
              std::size_t s = y * nf + to_index(j);
              if (!ctl_ok[s]) continue;
              ++m;
              for (std::size_t k = 0; k < K; ++k) out[k] += ctl[s * K + k];
            }
            if (m == 0) return peers.empty();  // no peers is handled by the ybar flag
            for (std::size_t k = 0; k < K; ++k) out[k] /= static_cast<double>(m);
            return true;
          };
          bool okD = avg(net.suppliers(row.firm), &t.xbar_D[r * K]);
          bool okU = avg(net.customers(row.firm), &t.xbar_U[r * K]);
          t.xbar_missing[r] = okD && okU ? 0 : 1;
        }
      }

      for (int lag : opt.instrument_lags) {
        auto zd = instrument_share(so_D.of(row.firm), st, row.origin, row.year, lag);
        auto zu = instrument_share(so_U.of(row.firm), st, row.origin, row.year, lag);
        t.zbar_D[lag][r] = zd.value;
        t.zbar_U[lag][r] = zu.value;
        t.zmiss_D[lag][r] = zd.missing;
        t.zmiss_U[lag][r] = zu.missing;
      }

      if (spatial) {
        auto s = spatial->props(row.firm, row.origin, row.year);
        t.prop_zip[r] = s.zip;
        t.prop_sec[r] = s.sec;
        t.prop_sec_zip[r] = s.sec_zip;
        zero_den[r] = (s.zip_flag ? 1 : 0) + (s.sec_flag ? 1 : 0) + (s.sec_zip_flag ? 1 : 0);
      }

      auto all_assigned = [&](Side side) {
        for (auto j : net.neighbors(row.firm, side))
          if (!opt.categorizer->assigned(row.firm, j, row.year - 1)) return false;
        return true;
      };
      if (opt.categorizer && !(all_assigned(Side::Downstream) && all_assigned(Side::Upstream))) {
        t.cat_missing[r] = 1;
      } else if (opt.categorizer) {
        auto hd = category_shares(net, st, *opt.categorizer, row.firm, row.origin, row.year, Side::Downstream);
        auto hu = category_shares(net, st, *opt.categorizer, row.firm, row.origin, row.year, Side::Upstream);
        t.cat_D[r] = hd.by_category;
        t.cat_U[r] = hu.by_category;
      }
    }
  }, 512);
  for (auto z : zero_den) t.spatial_zero_denominators += z;
  return t;
}

}  // namespace peerimport::treatment
