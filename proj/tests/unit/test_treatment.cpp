#include <doctest.h>

#include <random>

#include "peerimport/treatment.hpp"
#include "support.hpp"

using namespace peerimport;
using namespace peerimport::treatment;
using panel::Level;

namespace {

FirmId F(int k) { return firm_id(static_cast<std::uint32_t>(k)); }

panel::AttributeTable located(const std::vector<std::pair<const char*, const char*>>& zip_ind, int first, int last) {
  panel::AttributeTable t(zip_ind.size(), first, last);
  for (std::uint32_t i = 0; i < zip_ind.size(); ++i)
    for (int y = first; y <= last; ++y) {
      panel::FirmYearAttributes a;
      a.workers = 1 + i;
      a.zip = t.zips.intern(zip_ind[i].first);
      a.industry = t.industries.intern(zip_ind[i].second);
      t.set(firm_id(i), y, a);
    }
  return t;
}

}  // namespace

TEST_CASE("peer_share: counts and value weights") {
  // 1 <- a(2); firm 3 with suppliers {4,5,6}
  auto net = testsupport::graph(7, {{2, 1}, {4, 3}, {5, 3}, {6, 3}});
  auto st = testsupport::zeros(7, 2010, 2012);
  st.set(F(2), Origin::EU, 2011, true);
  st.set(F(4), Origin::EU, 2011, true);
  auto a = peer_share(net, st, F(1), Origin::EU, 2012, Side::Downstream);
  CHECK(a.value == 1.0);
  auto b = peer_share(net, st, F(3), Origin::EU, 2012, Side::Downstream);
  CHECK(b.value == doctest::Approx(1.0 / 3.0));
  CHECK(b.value * static_cast<double>(b.peers) == doctest::Approx(1.0));
  auto none = peer_share(net, st, F(3), Origin::EU, 2012, Side::Upstream);
  CHECK(none.missing == Missing::NoPeers);
  auto lag = peer_share(net, st, F(3), Origin::EU, 2010, Side::Downstream);
  CHECK(lag.missing == Missing::LagUnavailable);

  std::vector<std::pair<FirmId, FirmId>> e{{F(0), F(2)}, {F(1), F(2)}};
  net::ProductionNetwork w(3, e, {300.0, 100.0});
  auto sw = testsupport::zeros(3, 2010, 2011);
  sw.set(F(0), Origin::EU, 2010, true);
  CHECK(peer_share(w, sw, F(2), Origin::EU, 2011, Side::Downstream, Weighting::Value).value == doctest::Approx(0.75));

  // scale invariance of value weights
  net::ProductionNetwork w2(3, e, {3000.0, 1000.0});
  CHECK(peer_share(w2, sw, F(2), Origin::EU, 2011, Side::Downstream, Weighting::Value).value ==
        doctest::Approx(0.75));
}

TEST_CASE("instrument_share on G0") {
  auto g = testsupport::g0();
  auto st = testsupport::zeros(6, 2009, 2013);
  st.set(F(3), Origin::EU, 2011, true);
  auto s = instrument_share(g, st, F(1), Origin::EU, 2013, Side::Upstream, 2, false);
  CHECK(s.value == 0.5);
  CHECK(s.peers == 2);
  // lag 3 reads 2010: nobody importing there
  CHECK(instrument_share(g, st, F(1), Origin::EU, 2013, Side::Upstream, 3, false).value == 0.0);
  st.set(F(4), Origin::EU, 2010, true);
  CHECK(instrument_share(g, st, F(1), Origin::EU, 2013, Side::Upstream, 3, false).value == 0.5);
  CHECK(instrument_share(g, st, F(3), Origin::EU, 2013, Side::Upstream, 2, true).missing == Missing::NoPeers);
  CHECK(instrument_share(g, st, F(1), Origin::EU, 2010, Side::Upstream, 2, false).missing == Missing::LagUnavailable);
}

TEST_CASE("spatial_props excludes the focal firm") {
  // firm 0 with zip peers 1,2,3; 1 and 2 importing; firm 4 alone in its zip;
  // firm 5 shares zip and industry with 4? no: 5 shares industry only
  auto at = located({{"01001", "10"}, {"01001", "20"}, {"01001", "20"}, {"01001", "10"}, {"02001", "30"}, {"03001", "30"}},
                    2010, 2011);
  auto st = testsupport::zeros(6, 2010, 2011);
  st.set(F(1), Origin::EU, 2010, true);
  st.set(F(2), Origin::EU, 2010, true);
  st.set(F(3), Origin::EU, 2010, true);
  auto s = spatial_props(at, st, F(0), Origin::EU, 2011);
  CHECK(s.zip == doctest::Approx(1.0));
  CHECK(s.zip_den == 3);
  CHECK(s.sec_zip == 1.0);  // only firm 3 shares both
  CHECK(s.sec_zip_den == 1);
  st.set(F(3), Origin::EU, 2010, false);
  auto s2 = spatial_props(at, st, F(0), Origin::EU, 2011);
  CHECK(s2.zip == doctest::Approx(2.0 / 3.0));
  auto alone = spatial_props(at, st, F(4), Origin::EU, 2011);
  CHECK(alone.zip == 0.0);
  CHECK(alone.zip_flag);
  CHECK_FALSE(alone.sec_flag);

  // the index gives the same answers as the one-off function
  SpatialIndex idx(at, st);
  for (int i = 0; i < 6; ++i) {
    auto a = idx.props(F(i), Origin::EU, 2011);
    auto b = spatial_props(at, st, F(i), Origin::EU, 2011);
    CHECK(a.zip == b.zip);
    CHECK(a.sec == b.sec);
    CHECK(a.sec_zip == b.sec_zip);
  }
}

TEST_CASE("category_shares: split and reciprocal link") {
  // suppliers of 0: 1 (Low, importing), 2 (High, importing), 3 (Low, not)
  auto net = testsupport::graph(4, {{1, 0}, {2, 0}, {3, 0}, {0, 2}});
  auto st = testsupport::zeros(4, 2010, 2011);
  st.set(F(1), Origin::EU, 2010, true);
  st.set(F(2), Origin::EU, 2010, true);
  panel::MedianSplit split;
  split.assignment = {Level::Low, Level::Low, Level::High, Level::Low};
  auto cat = PeerCategorizer::by_split(split);
  auto h = category_shares(net, st, cat, F(0), Origin::EU, 2011, Side::Downstream);
  CHECK(h.by_category[0] == doctest::Approx(1.0 / 3.0));
  CHECK(h.by_category[1] == doctest::Approx(1.0 / 3.0));
  CHECK(h.by_category[0] + h.by_category[1] == peer_share(net, st, F(0), Origin::EU, 2011, Side::Downstream).value);

  panel::AttributeTable at(4, 2010, 2011);
  auto rec = PeerCategorizer::by_link(LinkPredicate::Reciprocal, at, net);
  auto r = category_shares(net, st, rec, F(0), Origin::EU, 2011, Side::Downstream);
  CHECK(r.by_category[1] == doctest::Approx(1.0 / 3.0));  // 2 is both supplier and customer
  CHECK(r.by_category[0] == doctest::Approx(1.0 / 3.0));

  split.assignment[3] = Level::Unassigned;
  auto bad = PeerCategorizer::by_split(split);
  CHECK_THROWS_AS(category_shares(net, st, bad, F(0), Origin::EU, 2011, Side::Downstream), Error);
}

TEST_CASE("compute_treatments: shares bounded, partition identity, disjoint instrument sets") {
  std::mt19937_64 g(17);
  const int n = 60;
  auto es = testsupport::random_edges(g, n, 0.06);
  auto net = testsupport::from_set(n, es);
  std::vector<std::pair<const char*, const char*>> loc;
  const char* zips[] = {"01001", "01002", "02001"};
  const char* inds[] = {"10", "20"};
  for (int i = 0; i < n; ++i) loc.emplace_back(zips[i % 3], inds[i % 2]);
  auto at = located(loc, 2010, 2014);
  at.set_degrees(net);
  auto st = testsupport::zeros(n, 2010, 2014);
  std::bernoulli_distribution b(0.15);
  for (int i = 0; i < n; ++i)
    for (auto o : {Origin::EU, Origin::NonEU}) {
      bool on = false;
      for (int y = 2010; y <= 2014; ++y) {
        on = on || b(g);
        st.set(F(i), o, y, on);
      }
    }
  auto p = panel::build_rows(st, at, panel::PanelMode::PerOrigin, {2011, 2014});
  for (auto pred : {LinkPredicate::SameIndustry, LinkPredicate::SameZip, LinkPredicate::SameProvince,
                    LinkPredicate::Reciprocal}) {
    auto cat = PeerCategorizer::by_link(pred, at, net);
    TreatmentOptions opt;
    opt.categorizer = &cat;
    auto t = compute_treatments({net, st, at}, p, opt);
    for (std::size_t r = 0; r < p.rows.size(); ++r) {
      for (double v : {t.ybar_D[r], t.ybar_U[r], t.prop_zip[r], t.prop_sec[r], t.prop_sec_zip[r]}) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
      if (t.missing_D[r] == Missing::None) CHECK(t.cat_D[r][0] + t.cat_D[r][1] == doctest::Approx(t.ybar_D[r]).epsilon(1e-15));
      if (t.missing_U[r] == Missing::None) CHECK(t.cat_U[r][0] + t.cat_U[r][1] == doctest::Approx(t.ybar_U[r]).epsilon(1e-15));
      auto i = p.rows[r].firm;
      if (t.missing_D[r] == Missing::None) {
        double cnt = t.ybar_D[r] * static_cast<double>(net.indegree(i));
        CHECK(cnt == doctest::Approx(std::round(cnt)));
      }
      // xbar lies within the range of peer values (workers column)
      if (!t.xbar_missing[r] && net.indegree(i) > 0) {
        double lo = 1e300, hi = -1e300;
        for (auto j : net.suppliers(i)) {
          lo = std::min(lo, at.at(j, p.rows[r].year - 1).workers);
          hi = std::max(hi, at.at(j, p.rows[r].year - 1).workers);
        }
        double x = t.xbar_D[r * t.context_width];
        CHECK(x >= lo - 1e-12);
        CHECK(x <= hi + 1e-12);
      }
    }
  }
  for (std::uint32_t i = 0; i < static_cast<std::uint32_t>(n); ++i)
    for (auto side : {Side::Downstream, Side::Upstream})
      for (auto j : net::second_order_exclusive(net, firm_id(i), side, true)) {
        CHECK_FALSE(net.has_edge(firm_id(i), j));
        CHECK_FALSE(net.has_edge(j, firm_id(i)));
      }
}

TEST_CASE("build_design: H1 and H3 column layouts") {
  panel::Panel p;
  p.rows.push_back({F(0), Origin::EU, 2012, 0, 0, 0});
  p.controls.assign(p.width(), 1.0);
  TreatmentTable t;
  t.ybar_D = {0.5};
  t.ybar_U = {0.2};
  t.missing_D = {Missing::None};
  t.missing_U = {Missing::None};
  t.cat_D = {{0.25, 0.25}};
  t.cat_U = {{0.2, 0.0}};
  t.cat_labels = {"Low", "High"};
  panel::MedianSplit split;
  split.assignment = {Level::High};

  auto h1 = build_design(p, t, {false, false, Heterogeneity::FirmSplit, {}}, &split);
  REQUIRE(h1.exog_labels.size() == 4);
  CHECK(h1.exog_labels[0] == "zLow*ybar_D");
  CHECK(h1.exog(0, 0) == 0.0);
  CHECK(h1.exog(0, 1) == 0.5);

  auto h3 = build_design(p, t, {false, false, Heterogeneity::FirmPeerSplit, {}}, &split);
  std::vector<std::string> want{"ybar_D", "ybar_D*zHigh", "ybar_D^High", "ybar_D^High*zHigh"};
  for (std::size_t k = 0; k < 4; ++k) CHECK(h3.exog_labels[k] == want[k]);
  CHECK(h3.exog(0, 0) == 0.5);
  CHECK(h3.exog(0, 1) == 0.5);
  CHECK(h3.exog(0, 2) == 0.25);
  CHECK(h3.exog(0, 3) == 0.25);

  // missing treatments for the spec: explicit error
  CHECK_THROWS_AS(build_design(p, t, {false, true, Heterogeneity::None, {}}), Error);
  CHECK_THROWS_AS(build_design(p, t, {false, false, Heterogeneity::None, {2}}), Error);
}

TEST_CASE("build_design drops rows with missing fields and ledgers them") {
  panel::Panel p;
  p.drops.input_rows = 3;
  for (int k = 0; k < 3; ++k) p.rows.push_back({F(k), Origin::EU, 2012, 0, 0, 0});
  p.controls.assign(3 * p.width(), 1.0);
  TreatmentTable t;
  t.ybar_D = {0.5, 0.0, 0.1};
  t.ybar_U = {0.2, 0.3, 0.0};
  t.missing_D = {Missing::None, Missing::NoPeers, Missing::None};
  t.missing_U = {Missing::None, Missing::None, Missing::NoPeers};
  auto d = build_design(p, t, {});
  CHECK(d.rows == std::vector<std::size_t>{0});
  CHECK(d.drops.count(panel::DropReason::NoSuppliers) == 1);
  CHECK(d.drops.count(panel::DropReason::NoCustomers) == 1);
  CHECK(d.rows.size() + d.drops.total() == d.drops.input_rows);
}
