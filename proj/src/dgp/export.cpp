#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <unordered_set>

#include "peerimport/csv.hpp"
#include "peerimport/dgp.hpp"
#include "peerimport/rng.hpp"

namespace peerimport::dgp {

namespace {
constexpr std::uint64_t kEdgeTag = 12;

double link_value(Stream& s) { return std::round(3005.0 + 20000.0 * std::exp(1.2 * std::normal_distribution<double>{}(s))); }
}  // namespace

std::vector<net::EdgeRecord> noisy_edge_records(const SyntheticDataset& d, net::StableWindow window, std::uint64_t seed) {
  const int len = window.last_year - window.first_year + 1;
  if (len < 2) throw Error("dgp", "edge window needs at least two years");
  const auto& netw = d.network;
  const auto n = static_cast<std::uint32_t>(netw.size());
  std::vector<net::EdgeRecord> out;
  Stream s(seed, kEdgeTag);
  std::uniform_int_distribution<int> pick_year(window.first_year, window.last_year);

  auto edges = netw.edges();
  out.reserve(edges.size() * static_cast<std::size_t>(len) + 64);
  for (auto [a, b] : edges) {
    // a dropped year only when the filter tolerates it
    int missing = (window.max_gap >= 1 && s.uniform() < d.truth.config.dropout_prob) ? pick_year(s) : 0;
    double base = link_value(s);
    for (int y = window.first_year; y <= window.last_year; ++y) {
      if (y == missing) continue;
      out.push_back({a, b, y, std::max(3005.0, std::round(base * (0.8 + 0.4 * s.uniform())))});
      if (s.uniform() < 0.002) out.push_back(out.back());  // exact duplicate report
    }
  }

  std::unordered_set<std::uint64_t> used;
  std::uniform_int_distribution<std::uint32_t> pick_firm(0, n - 1);
  auto fresh_pair = [&](FirmId& a, FirmId& b) {
    for (int tries = 0; tries < 1000; ++tries) {
      auto i = pick_firm(s), j = pick_firm(s);
      if (i == j || netw.has_edge(firm_id(i), firm_id(j))) continue;
      if (!used.insert((static_cast<std::uint64_t>(i) << 32) | j).second) continue;
      a = firm_id(i);
      b = firm_id(j);
      return true;
    }
    return false;
  };
  // transient links: a single year, never enough to pass the filter when the window is long enough
  const int need = len - window.max_gap;
  if (need >= 2) {
    auto k = static_cast<std::size_t>(std::llround(d.truth.config.transient_edge_share * static_cast<double>(edges.size())));
    for (std::size_t e = 0; e < k; ++e) {
      FirmId a{}, b{};
      if (!fresh_pair(a, b)) break;
      out.push_back({a, b, pick_year(s), link_value(s)});
    }
  }
  // persistent but below the value threshold every year
  auto k = static_cast<std::size_t>(std::llround(d.truth.config.sub_threshold_share * static_cast<double>(edges.size())));
  for (std::size_t e = 0; e < k; ++e) {
    FirmId a{}, b{};
    if (!fresh_pair(a, b)) break;
    for (int y = window.first_year; y <= window.last_year; ++y) out.push_back({a, b, y, std::floor(3004.0 * s.uniform())});
  }
  std::stable_sort(out.begin(), out.end(), [](const net::EdgeRecord& x, const net::EdgeRecord& y) {
    if (x.year != y.year) return x.year < y.year;
    if (x.supplier != y.supplier) return x.supplier < y.supplier;
    return x.customer < y.customer;
  });
  return out;
}

void write_dataset(const std::filesystem::path& dir, const SyntheticDataset& d, std::uint64_t seed,
                   net::StableWindow window) {
  std::filesystem::create_directories(dir);
  auto records = noisy_edge_records(d, window, seed);
  {
    std::ofstream f(dir / "edges.csv");
    if (!f) throw Error("dgp", "cannot write " + (dir / "edges.csv").string(), "check the output directory");
    f << "supplier_id,customer_id,year,value\n";
    for (const auto& r : records) {
      f << d.ids.external(r.supplier) << ',' << d.ids.external(r.customer) << ',' << r.year << ',';
      if (r.value) f << csv::format_double(*r.value);
      f << '\n';
    }
  }
  panel::write_attribute_csv(dir / "attributes.csv", d.attributes, d.ids);
  panel::write_status_csv(dir / "imports.csv", d.statuses, d.ids);
  d.ids.write_csv(dir / "ids.csv");

  const auto& c = d.truth.config;
  std::ofstream f(dir / "truth.csv");
  f << "parameter,value\n";
  auto row = [&](const char* k, const std::string& v) { f << k << ',' << v << '\n'; };
  auto num = [&](const char* k, double v) { row(k, csv::format_double(v)); };
  row("preset", c.name);
  row("seed", std::to_string(seed));
  row("n_firms", std::to_string(c.n_firms));
  row("first_year", std::to_string(c.first_year));
  row("last_year", std::to_string(c.last_year));
  row("burn_in", std::to_string(c.burn_in));
  num("mean_degree", c.mean_degree);
  num("distance_decay", c.distance_decay);
  num("industry_boost", c.industry_boost);
  num("alpha", c.alpha);
  num("beta_D", c.beta_D);
  num("beta_U", c.beta_U);
  num("gamma", c.gamma);
  num("delta_D", c.delta_D);
  num("delta_U", c.delta_U);
  num("zeta", c.zeta);
  num("zeta_D", c.zeta_D);
  num("zeta_U", c.zeta_U);
  num("sigma_mu", c.sigma_mu);
  num("sigma_eta", c.sigma_eta);
  num("sigma_eps", c.sigma_eps);
  row("u_process", std::string(u_process_name(c.u_process)));
  num("theta", c.theta);
  num("rho", c.rho);
  num("sigma_u", c.sigma_u);
  num("initial_share", c.initial_share);
  row("edges", std::to_string(d.network.edge_count()));
  num("clamp_rate", d.truth.clamp_rate);
  num("mean_start_rate", d.truth.mean_start_rate);
  num("importer_share_baseline", d.truth.importer_share_baseline);
}

}  // namespace peerimport::dgp
