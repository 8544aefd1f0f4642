#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <unordered_set>

#include "peerimport/dgp.hpp"
#include "peerimport/parallel.hpp"
#include "peerimport/rng.hpp"

namespace peerimport::dgp {

namespace {

enum Tag : std::uint64_t { kGeo = 1, kNet, kInit, kU, kEps, kMu, kEta, kUniform, kSize, kAttr, kGap, kEdges };

double normal(Stream& s) { return std::normal_distribution<double>{}(s); }

double normal_at(std::uint64_t seed, Tag tag, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
  Stream s(seed, tag, a, b, c);
  return normal(s);
}

const char* const kIndustryCodes[] = {"10", "20", "25", "28", "41", "45", "46", "47", "62", "70",
                                      "13", "22", "43", "49", "55", "68", "71", "86"};
constexpr int kMaxIndustries = static_cast<int>(std::size(kIndustryCodes));

}  // namespace

std::string_view u_process_name(UProcess p) {
  switch (p) {
    case UProcess::Iid: return "iid";
    case UProcess::MA1: return "ma1";
    case UProcess::AR1: return "ar1";
  }
  return "?";
}

UProcess parse_u_process(std::string_view s) {
  for (auto p : {UProcess::Iid, UProcess::MA1, UProcess::AR1})
    if (u_process_name(p) == s) return p;
  throw Error("dgp", "unknown u process '" + std::string(s) + "'", "use iid, ma1 or ar1");
}

std::vector<std::string> preset_names() { return {"calibration", "valid-iv", "violated-iv", "no-contextual"}; }

DgpConfig preset(std::string_view name) {
  DgpConfig c;
  if (name == "calibration") {
    c.name = "calibration";
    c.alpha = 0.036;
    c.initial_share = 0.10;
    c.sigma_mu = 0.004;
    c.sigma_eta = 0.004;
    c.sigma_eps = 0.004;
    c.attribute_gap_share = 0.001;
    return c;
  }
  if (name == "valid-iv" || name == "violated-iv" || name == "no-contextual") {
    c.name = "valid-iv";
    // coarser grid: eu-s-z-y cells of about 20 firms at n=20k
    c.grid_side = 10;
    c.burn_in = 2;
    c.alpha = 0.05;
    c.initial_share = 0.05;
    c.beta_D = 0.05;
    c.beta_U = 0.10;
    c.gamma = 0.005;
    c.delta_D = 0.004;
    c.delta_U = 0.004;
    // contextual loadings well above the own one: OLS bias scales with
    // zeta*zeta_D*sigma_u^2 while clamping scales with the own term
    c.zeta = 1.0;
    c.zeta_D = 4.0;
    c.zeta_U = 4.0;
    c.sigma_mu = 0.004;
    c.sigma_eta = 0.006;
    c.sigma_eps = 0.004;
    c.u_process = UProcess::MA1;
    c.theta = 0.6;
    c.sigma_u = 0.015;
    if (name == "violated-iv") return regime(c, Regime::ViolatedIV);
    if (name == "no-contextual") return regime(c, Regime::NoContextual);
    return c;
  }
  throw Error("dgp", "unknown preset '" + std::string(name) + "'",
              "use calibration, valid-iv, violated-iv or no-contextual");
}

Regime parse_regime(std::string_view s) {
  if (s == "valid-iv" || s == "valid") return Regime::ValidIV;
  if (s == "violated-iv" || s == "violated") return Regime::ViolatedIV;
  if (s == "no-contextual") return Regime::NoContextual;
  throw Error("dgp", "unknown regime '" + std::string(s) + "'", "use valid-iv, violated-iv or no-contextual");
}

std::string_view regime_name(Regime r) {
  switch (r) {
    case Regime::ValidIV: return "valid-iv";
    case Regime::ViolatedIV: return "violated-iv";
    case Regime::NoContextual: return "no-contextual";
  }
  return "?";
}

DgpConfig regime(const DgpConfig& base, Regime r) {
  DgpConfig c = base;
  c.name = std::string(regime_name(r));
  switch (r) {
    case Regime::ValidIV:
      c.u_process = UProcess::MA1;
      if (c.theta == 0.0) c.theta = 0.6;
      if (c.zeta_D == 0.0) c.zeta_D = 1.0;
      if (c.zeta_U == 0.0) c.zeta_U = 1.0;
      break;
    case Regime::ViolatedIV:
      c.u_process = UProcess::AR1;
      c.rho = std::max(c.rho, 0.8);
      if (c.zeta_D == 0.0) c.zeta_D = 1.0;
      if (c.zeta_U == 0.0) c.zeta_U = 1.0;
      break;
    case Regime::NoContextual:
      c.zeta_D = 0.0;
      c.zeta_U = 0.0;
      break;
  }
  return c;
}

void validate(const DgpConfig& c) {
  auto fail = [](const std::string& m) { throw Error("dgp", m, "fix the DGP configuration"); };
  if (c.n_firms < 10) fail("need at least 10 firms");
  if (c.last_year <= c.first_year) fail("need at least two emitted years");
  if (c.burn_in < 0) fail("burn_in must be >= 0");
  if (c.grid_side < 1 || c.province_side < 1) fail("grid sizes must be positive");
  if ((c.grid_side + c.province_side - 1) / c.province_side > 9) fail("at most 9 provinces per grid axis");
  if (c.province_side * c.province_side > 999) fail("at most 999 zips per province");
  if (c.n_industries < 1 || c.n_industries > kMaxIndustries)
    fail("n_industries must be in 1.." + std::to_string(kMaxIndustries));
  if (!(c.mean_degree > 0)) fail("mean_degree must be positive");
  if (c.mean_degree > 0.5 * static_cast<double>(c.n_firms - 1))
    fail("target degree " + std::to_string(c.mean_degree) + " infeasible for " + std::to_string(c.n_firms) + " firms");
  if (c.distance_decay < 0 || c.industry_boost < 0) fail("homophily parameters must be >= 0");
  if (c.alpha < 0 || c.alpha > 1) fail("alpha must be a probability");
  if (c.initial_share < 0 || c.initial_share > 1) fail("initial_share must be a probability");
  if (c.sigma_mu < 0 || c.sigma_eta < 0 || c.sigma_eps < 0 || c.sigma_u < 0) fail("scales must be >= 0");
  if (c.u_process == UProcess::AR1 && !(std::abs(c.rho) < 1)) fail("AR(1) needs |rho| < 1");
  for (double p : {c.transient_edge_share, c.dropout_prob, c.sub_threshold_share, c.attribute_gap_share,
                   c.zero_worker_share})
    if (p < 0 || p > 1) fail("noise shares must be in [0, 1]");
}

Geography gen_geography(const DgpConfig& c, std::uint64_t seed) {
  Geography g;
  const int side = c.grid_side, ps = c.province_side;
  const int prov_per_axis = (side + ps - 1) / ps;
  g.zip_codes.resize(static_cast<std::size_t>(side * side));
  for (int gx = 0; gx < side; ++gx)
    for (int gy = 0; gy < side; ++gy) {
      int prov = (gx / ps) * prov_per_axis + (gy / ps) + 1;
      int local = (gx % ps) * ps + (gy % ps) + 1;
      char buf[32];
      std::snprintf(buf, sizeof buf, "%02d%03d", prov, local);
      g.zip_codes[static_cast<std::size_t>(gx * side + gy)] = buf;
    }
  for (int k = 0; k < c.n_industries; ++k) g.industry_codes.emplace_back(kIndustryCodes[k]);
  Stream s(seed, kGeo);
  std::uniform_int_distribution<std::uint32_t> zip(0, static_cast<std::uint32_t>(side * side - 1));
  std::uniform_int_distribution<std::uint32_t> ind(0, static_cast<std::uint32_t>(c.n_industries - 1));
  g.zip.resize(c.n_firms);
  g.industry.resize(c.n_firms);
  for (std::size_t i = 0; i < c.n_firms; ++i) {
    g.zip[i] = zip(s);
    g.industry[i] = ind(s);
  }
  return g;
}

net::ProductionNetwork gen_network(const DgpConfig& c, const Geography& geo, std::uint64_t seed) {
  validate(c);
  const std::size_t n = c.n_firms;
  const int side = c.grid_side;
  const std::size_t Z = static_cast<std::size_t>(side * side);
  std::vector<std::vector<std::uint32_t>> members(Z);
  for (std::uint32_t i = 0; i < n; ++i) members[geo.zip[i]].push_back(i);

  // per origin zip: cumulative weight n_z * exp(-d / lambda) over target zips
  std::vector<std::vector<double>> cum(Z, std::vector<double>(Z, 0.0));
  for (std::size_t a = 0; a < Z; ++a) {
    double acc = 0.0;
    const double ax = static_cast<double>(a / side), ay = static_cast<double>(a % side);
    for (std::size_t b = 0; b < Z; ++b) {
      double w = static_cast<double>(members[b].size());
      if (c.distance_decay == 0.0) {
        if (a != b) w = 0.0;
      } else if (std::isfinite(c.distance_decay)) {
        double d = std::hypot(ax - static_cast<double>(b / side), ay - static_cast<double>(b % side));
        w *= std::exp(-d / c.distance_decay);
      }
      acc += w;
      cum[a][b] = acc;
    }
  }

  const auto m = static_cast<std::size_t>(std::llround(static_cast<double>(n) * c.mean_degree));
  std::vector<std::pair<FirmId, FirmId>> edges;
  edges.reserve(m);
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(m * 2);
  Stream s(seed, kNet);
  std::uniform_int_distribution<std::uint32_t> pick_firm(0, static_cast<std::uint32_t>(n - 1));
  const double accept_other = 1.0 / (1.0 + c.industry_boost);
  std::size_t attempts = 0;
  const std::size_t max_attempts = 200 * m + 1000;
  while (edges.size() < m) {
    if (++attempts > max_attempts)
      throw Error("dgp", "network sampler could not place " + std::to_string(m) + " edges",
                  "raise distance_decay or lower mean_degree");
    std::uint32_t cust = pick_firm(s);
    const auto& row = cum[geo.zip[cust]];
    double u = s.uniform() * row.back();
    auto zb = static_cast<std::size_t>(std::upper_bound(row.begin(), row.end(), u) - row.begin());
    if (zb >= Z || members[zb].empty()) continue;
    const auto& pool = members[zb];
    std::uint32_t sup = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(s)];
    if (sup == cust) continue;
    if (geo.industry[sup] != geo.industry[cust] && s.uniform() >= accept_other) continue;
    std::uint64_t key = (static_cast<std::uint64_t>(sup) << 32) | cust;
    if (!seen.insert(key).second) continue;
    edges.emplace_back(firm_id(sup), firm_id(cust));
  }
  return net::ProductionNetwork(n, std::move(edges));
}

namespace {

struct YearState {
  const std::uint8_t* prev_status;  // origin status at t-1
  const double* u_now;              // u at t
  const double* u_prev;             // u at t-1
  const double* x_now;
  const double* x_prev;
  const double* mu_now;
  const double* eps_now;
  const double* eta_now;  // by cell
};

// Structural index for firm i given the state; shared by simulation and audit.
double structural_index(const DgpConfig& c, const net::ProductionNetwork& net, const Geography& geo,
                        const YearState& st, std::uint32_t i) {
  auto avg = [&](std::span<const FirmId> peers, auto&& f) {
    if (peers.empty()) return 0.0;
    double acc = 0.0;
    for (auto j : peers) acc += f(to_index(j));
    return acc / static_cast<double>(peers.size());
  };
  auto sup = net.suppliers(firm_id(i));
  auto cus = net.customers(firm_id(i));
  auto status = [&](std::uint32_t j) { return static_cast<double>(st.prev_status[j]); };
  auto xprev = [&](std::uint32_t j) { return st.x_prev[j]; };
  auto uprev = [&](std::uint32_t j) { return st.u_prev[j]; };
  const std::size_t cell = static_cast<std::size_t>(geo.zip[i]) * static_cast<std::size_t>(c.n_industries) + geo.industry[i];
  return c.alpha + c.gamma * st.x_now[i] + c.delta_D * avg(sup, xprev) + c.delta_U * avg(cus, xprev) +
         c.beta_D * avg(sup, status) + c.beta_U * avg(cus, status) + c.zeta * st.u_now[i] +
         c.zeta_D * avg(sup, uprev) + c.zeta_U * avg(cus, uprev) + st.mu_now[i] + st.eta_now[cell] + st.eps_now[i];
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

SyntheticDataset simulate_panel(const net::ProductionNetwork& net, const Geography& geo, const DgpConfig& c,
                                std::uint64_t seed) {
  validate(c);
  const std::size_t n = c.n_firms;
  if (net.size() != n || geo.zip.size() != n) throw Error("dgp", "network and geography sizes differ from n_firms");
  SyntheticDataset d;
  d.network = net;
  d.geography = geo;
  d.truth.config = c;
  d.truth.seed = seed;
  for (std::uint32_t i = 0; i < n; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "F%07u", i);
    d.ids.intern(buf);
  }

  const int sim_first = c.first_year - c.burn_in;
  const int years = c.last_year - sim_first + 1;
  const std::size_t cells = geo.zip_codes.size() * static_cast<std::size_t>(c.n_industries);
  Draws& dr = d.draws;
  dr.sim_first = sim_first;
  auto yslot = [&](int y) { return static_cast<std::size_t>(y - sim_first); };

  // firm size process: log workers = base + AR(1) noise; x is its standardized value
  std::vector<double> base(n), wage(n), prod(n), sales_share(n), interm_share(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    Stream s(seed, kSize, i);
    base[i] = 2.0 + 1.1 * normal(s);
    wage[i] = 30000.0 * std::exp(0.3 * normal(s));
    prod[i] = 120000.0 * std::exp(0.5 * normal(s));
    sales_share[i] = 0.3 + 0.6 * s.uniform();
    interm_share[i] = 0.3 + 0.4 * s.uniform();
  }
  dr.x.assign(static_cast<std::size_t>(years), std::vector<double>(n));
  std::vector<std::vector<double>> logw(static_cast<std::size_t>(years), std::vector<double>(n));
  for (std::uint32_t i = 0; i < n; ++i) {
    double e = 0.15 / std::sqrt(1 - 0.25) * normal_at(seed, kSize, i, 1, 0);
    for (int y = sim_first; y <= c.last_year; ++y) {
      if (y > sim_first) e = 0.5 * e + 0.15 * normal_at(seed, kSize, i, 2, static_cast<std::uint64_t>(y));
      logw[yslot(y)][i] = base[i] + e;
      dr.x[yslot(y)][i] = (base[i] + e - 2.0) / 1.1;
    }
  }

  // unobservables
  const double s_ma = c.sigma_u / std::sqrt(1.0 + c.theta * c.theta);
  const double s_ar = c.sigma_u * std::sqrt(1.0 - c.rho * c.rho);
  auto innov = [&](int o, std::uint32_t i, int y) {
    return normal_at(seed, kU, static_cast<std::uint64_t>(o), i, static_cast<std::uint64_t>(y - sim_first + 1));
  };
  dr.u.assign(static_cast<std::size_t>(years), std::vector<std::vector<double>>(2, std::vector<double>(n)));
  dr.eps = dr.uniform = dr.u;
  dr.mu.assign(static_cast<std::size_t>(years), std::vector<double>(n));
  dr.eta.assign(static_cast<std::size_t>(years), std::vector<std::vector<double>>(2, std::vector<double>(cells)));
  parallel_for(n, [&](std::size_t b, std::size_t e) {
    for (auto i = static_cast<std::uint32_t>(b); i < e; ++i)
      for (int y = sim_first; y <= c.last_year; ++y) {
        auto ys = yslot(y);
        dr.mu[ys][i] = c.sigma_mu * normal_at(seed, kMu, i, static_cast<std::uint64_t>(y));
        for (int o = 0; o < 2; ++o) {
          double u = 0.0;
          switch (c.u_process) {
            case UProcess::Iid: u = c.sigma_u * innov(o, i, y); break;
            case UProcess::MA1: u = s_ma * (innov(o, i, y) + c.theta * innov(o, i, y - 1)); break;
            case UProcess::AR1:
              u = y == sim_first ? c.sigma_u * innov(o, i, y) : c.rho * dr.u[ys - 1][static_cast<std::size_t>(o)][i] +
                                                                     s_ar * innov(o, i, y);
              break;
          }
          dr.u[ys][static_cast<std::size_t>(o)][i] = u;
          dr.eps[ys][static_cast<std::size_t>(o)][i] =
              c.sigma_eps * normal_at(seed, kEps, static_cast<std::uint64_t>(o), i, static_cast<std::uint64_t>(y));
          dr.uniform[ys][static_cast<std::size_t>(o)][i] =
              Stream(seed, kUniform, static_cast<std::uint64_t>(o), i, static_cast<std::uint64_t>(y)).uniform();
        }
      }
  });
  for (int y = sim_first; y <= c.last_year; ++y)
    for (int o = 0; o < 2; ++o)
      for (std::size_t k = 0; k < cells; ++k)
        dr.eta[yslot(y)][static_cast<std::size_t>(o)][k] =
            c.sigma_eta * normal_at(seed, kEta, static_cast<std::uint64_t>(o), k, static_cast<std::uint64_t>(y));

  // status dynamics
  d.full_history = panel::StatusTable(n, sim_first, c.last_year);
  std::vector<std::vector<std::uint8_t>> status(2, std::vector<std::uint8_t>(n));
  dr.initial.assign(2, std::vector<std::uint8_t>(n));
  for (int o = 0; o < 2; ++o)
    for (std::uint32_t i = 0; i < n; ++i) {
      bool imp = Stream(seed, kInit, static_cast<std::uint64_t>(o), i).uniform() < c.initial_share;
      dr.initial[static_cast<std::size_t>(o)][i] = imp;
      status[static_cast<std::size_t>(o)][i] = imp;
      d.full_history.set(firm_id(i), static_cast<Origin>(o), sim_first, imp);
    }
  std::size_t at_risk = 0, clamped = 0, window_risk = 0, window_starts = 0;
  std::vector<std::uint8_t> next(n), outside(n);
  for (int y = sim_first + 1; y <= c.last_year; ++y) {
    auto ys = yslot(y);
    for (int o = 0; o < 2; ++o) {
      auto so = static_cast<std::size_t>(o);
      YearState st{status[so].data(),   dr.u[ys][so].data(),   dr.u[ys - 1][so].data(), dr.x[ys].data(),
                   dr.x[ys - 1].data(), dr.mu[ys].data(),      dr.eps[ys][so].data(),   dr.eta[ys][so].data()};
      parallel_for(n, [&](std::size_t b, std::size_t e) {
        for (auto i = static_cast<std::uint32_t>(b); i < e; ++i) {
          outside[i] = 0;
          if (status[so][i]) {
            next[i] = 1;
            continue;
          }
          double idx = structural_index(c, net, geo, st, i);
          outside[i] = idx < 0 || idx > 1;
          next[i] = dr.uniform[ys][so][i] < clamp01(idx);
        }
      });
      for (std::uint32_t i = 0; i < n; ++i) {
        if (!status[so][i]) {
          ++at_risk;
          clamped += outside[i];
          if (y > c.first_year) {
            ++window_risk;
            window_starts += next[i];
          }
        }
        d.full_history.set(firm_id(i), static_cast<Origin>(o), y, next[i]);
      }
      status[so].swap(next);
    }
  }
  d.truth.clamp_rate = at_risk ? static_cast<double>(clamped) / static_cast<double>(at_risk) : 0.0;
  d.truth.mean_start_rate = window_risk ? static_cast<double>(window_starts) / static_cast<double>(window_risk) : 0.0;
  if (d.truth.clamp_rate > 0.2)
    d.warnings.push_back("clamping rate " + std::to_string(d.truth.clamp_rate) +
                         " above 20%: the parameterization leaves the linear region");

  d.statuses = panel::StatusTable(n, c.first_year, c.last_year);
  std::size_t base_imp = 0;
  for (std::uint32_t i = 0; i < n; ++i)
    for (int y = c.first_year; y <= c.last_year; ++y)
      for (int o = 0; o < 2; ++o) {
        bool v = d.full_history.importing(firm_id(i), static_cast<Origin>(o), y);
        d.statuses.set(firm_id(i), static_cast<Origin>(o), y, v);
        if (y == c.first_year) base_imp += v;
      }
  d.truth.importer_share_baseline = static_cast<double>(base_imp) / (2.0 * static_cast<double>(n));

  // attributes for the emitted years
  d.attributes = panel::AttributeTable(n, c.first_year, c.last_year);
  for (auto& z : geo.zip_codes) d.attributes.zips.intern(z);
  for (auto& s : geo.industry_codes) d.attributes.industries.intern(s);
  for (std::uint32_t i = 0; i < n; ++i)
    for (int y = c.first_year; y <= c.last_year; ++y) {
      Stream s(seed, kAttr, i, static_cast<std::uint64_t>(y));
      if (s.uniform() < c.attribute_gap_share) continue;
      panel::FirmYearAttributes a;
      double w = s.uniform() < c.zero_worker_share ? 0.0 : std::max(1.0, std::round(std::exp(logw[yslot(y)][i])));
      a.workers = w;
      a.labor_cost = std::round(w * wage[i] * std::exp(0.05 * normal(s)));
      a.total_sales = std::round(std::max(w, 1.0) * prod[i] * std::exp(0.1 * normal(s)));
      a.sales_to_firms = std::round(a.total_sales * sales_share[i]);
      a.intermediate_input_cost = std::round(a.total_sales * interm_share[i]);
      a.zip = geo.zip[i];
      a.industry = geo.industry[i];
      a.wholesaler = panel::is_wholesale_industry(geo.industry_codes[geo.industry[i]]);
      // yearly partner counts: stable links plus one-off partners
      std::poisson_distribution<int> extra(0.5);
      a.n_suppliers = static_cast<std::uint32_t>(net.indegree(firm_id(i)) + static_cast<std::size_t>(extra(s)));
      a.n_customers = static_cast<std::uint32_t>(net.outdegree(firm_id(i)) + static_cast<std::size_t>(extra(s)));
      d.attributes.set(firm_id(i), y, a);
    }

  if (!c.retain_draws) d.draws = Draws{sim_first, {}, {}, {}, {}, {}, {}, {}};
  return d;
}

SyntheticDataset simulate(const DgpConfig& c, std::uint64_t seed) {
  validate(c);
  auto geo = gen_geography(c, seed);
  auto net = gen_network(c, geo, seed);
  return simulate_panel(net, geo, c, seed);
}

double latent_index(const SyntheticDataset& d, FirmId i, Origin o, int year) {
  const auto& c = d.truth.config;
  const auto& dr = d.draws;
  if (dr.u.empty()) throw Error("dgp", "draws were not retained", "simulate with retain_draws on");
  if (year <= dr.sim_first || year > c.last_year) throw Error("dgp", "no structural equation for that year");
  auto ys = static_cast<std::size_t>(year - dr.sim_first);
  auto so = static_cast<std::size_t>(o);
  auto prev = d.full_history.snapshot(o, year - 1);
  YearState st{prev.data(),         dr.u[ys][so].data(), dr.u[ys - 1][so].data(), dr.x[ys].data(),
               dr.x[ys - 1].data(), dr.mu[ys].data(),    dr.eps[ys][so].data(),   dr.eta[ys][so].data()};
  return structural_index(c, d.network, d.geography, st, to_index(i));
}

std::size_t audit(const SyntheticDataset& d) {
  const auto& c = d.truth.config;
  const auto& dr = d.draws;
  if (dr.u.empty()) throw Error("dgp", "draws were not retained", "simulate with retain_draws on");
  std::size_t bad = 0;
  const std::size_t n = c.n_firms;
  for (int o = 0; o < 2; ++o) {
    auto origin = static_cast<Origin>(o);
    auto so = static_cast<std::size_t>(o);
    for (std::uint32_t i = 0; i < n; ++i)
      bad += d.full_history.importing(firm_id(i), origin, dr.sim_first) != static_cast<bool>(dr.initial[so][i]);
    for (int y = dr.sim_first + 1; y <= c.last_year; ++y) {
      auto ys = static_cast<std::size_t>(y - dr.sim_first);
      auto prev = d.full_history.snapshot(origin, y - 1);
      YearState st{prev.data(),         dr.u[ys][so].data(), dr.u[ys - 1][so].data(), dr.x[ys].data(),
                   dr.x[ys - 1].data(), dr.mu[ys].data(),    dr.eps[ys][so].data(),   dr.eta[ys][so].data()};
      for (std::uint32_t i = 0; i < n; ++i) {
        bool expect = prev[i] ? true : dr.uniform[ys][so][i] < clamp01(structural_index(c, d.network, d.geography, st, i));
        bad += d.full_history.importing(firm_id(i), origin, y) != expect;
      }
    }
  }
  return bad;
}

}  // namespace peerimport::dgp
