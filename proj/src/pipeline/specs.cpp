#include <algorithm>
#include <fstream>
#include <limits>
#include <set>
#include <tuple>

#include <nlohmann/json.hpp>

#include "peerimport/pipeline.hpp"

namespace peerimport::pipeline {

using hdfe::FactorKind;
using panel::PanelMode;
using treatment::Heterogeneity;

namespace {

SpecDef make(std::string name, std::string desc, PanelMode mode, std::vector<FactorKind> f, FactorKind cl,
             bool chars = false, bool spatial = false, std::vector<int> lags = {},
             Heterogeneity het = Heterogeneity::None) {
  SpecDef s;
  s.name = std::move(name);
  s.description = std::move(desc);
  s.mode = mode;
  s.factors = std::move(f);
  s.cluster = cl;
  s.design.peer_characteristics = chars;
  s.design.spatial_controls = spatial;
  s.design.instrument_lags = std::move(lags);
  s.design.heterogeneity = het;
  return s;
}

}  // namespace

const std::vector<SpecDef>& spec_registry() {
  using F = FactorKind;
  static const std::vector<SpecDef> specs = [] {
    auto P = PanelMode::PerOrigin, Q = PanelMode::Pooled;
    std::vector<SpecDef> v;
    v.push_back(make("s1-col1", "firm and origin-year effects", P, {F::Firm, F::OriginYear}, F::Firm));
    v.push_back(make("s1-col2", "adds own and peer characteristics", P, {F::Firm, F::OriginYear}, F::Firm, true));
    v.push_back(make("s1-col3", "firm-year effects", P, {F::FirmYear, F::OriginYear}, F::FirmYear));
    v.push_back(make("s1-col4", "adds zip/sector spillover shares", P, {F::FirmYear, F::OriginYear}, F::FirmYear,
                     false, true));
    v.push_back(make("s1-col5", "origin-sector-zip-year effects", P, {F::FirmYear, F::OriginIndustryZipYear},
                     F::FirmYear));
    v.push_back(make("pooled", "any origin, firm and sector-zip-year effects", Q, {F::Firm, F::IndustryZipYear},
                     F::Firm, true));
    v.push_back(make("iv-t2", "second-order instruments at t-2", P, {F::FirmYear, F::OriginIndustryZipYear},
                     F::FirmYear, false, false, {2}));
    v.push_back(make("iv-t23", "second-order instruments at t-2 and t-3", P,
                     {F::FirmYear, F::OriginIndustryZipYear}, F::FirmYear, false, false, {2, 3}));
    v.push_back(make("iv-pooled-t2", "pooled, instruments at t-2", Q, {F::Firm, F::IndustryZipYear}, F::Firm, true,
                     false, {2}));
    v.push_back(make("iv-pooled-t23", "pooled, instruments at t-2 and t-3", Q, {F::Firm, F::IndustryZipYear},
                     F::Firm, true, false, {2, 3}));
    const std::vector<F> s5{F::FirmYear, F::OriginIndustryZipYear};
    v.push_back(make("h1", "firm split", P, s5, F::FirmYear, false, false, {}, Heterogeneity::FirmSplit));
    v.push_back(make("h2", "peer split", P, s5, F::FirmYear, false, false, {}, Heterogeneity::PeerSplit));
    v.push_back(make("h3", "firm and peer split", P, s5, F::FirmYear, false, false, {}, Heterogeneity::FirmPeerSplit));
    v.push_back(make("h4", "link type", P, s5, F::FirmYear, false, false, {}, Heterogeneity::Link));
    return v;
  }();
  return specs;
}

const SpecDef& find_spec(const std::string& name) {
  for (auto& s : spec_registry())
    if (s.name == name) return s;
  std::string all;
  for (auto& s : spec_registry()) all += (all.empty() ? "" : ", ") + s.name;
  throw Error("cli", "unknown specification '" + name + "'", "choose one of: " + all);
}

std::vector<std::string> ladder(const std::string& name) {
  if (name == "ols") return {"s1-col1", "s1-col2", "s1-col3", "s1-col4", "s1-col5", "pooled"};
  if (name == "iv") return {"iv-t2", "iv-t23", "iv-pooled-t2", "iv-pooled-t23"};
  if (name == "het") return {"h1", "h2", "h3", "h4"};
  throw Error("cli", "unknown ladder '" + name + "'", "use ols, iv or het");
}

SpecDef resolve(const RunConfig& cfg) {
  SpecDef s = find_spec(cfg.spec);
  if (!cfg.factors.empty()) s.factors = cfg.factors;
  if (cfg.cluster) s.cluster = *cfg.cluster;
  if (s.factors.empty()) throw Error("cli", "at least one fixed-effect factor is required", "pass --factors");
  if (s.cluster != FactorKind::Firm && s.cluster != FactorKind::FirmYear)
    throw Error("cli", "clustering must be by id or id-y", "pass --cluster id or --cluster id-y");
  if (s.mode == PanelMode::Pooled) {
    for (auto f : s.factors)
      if (f == FactorKind::FirmYear || f == FactorKind::OriginYear || f == FactorKind::OriginIndustryZipYear)
        throw Error("cli",
                    "pooled specification '" + s.name + "' cannot use the " + std::string(hdfe::factor_label(f)) +
                        " factor",
                    "pooled rows are one per firm-year; use id and s-z-y");
    if (s.cluster == FactorKind::FirmYear)
      throw Error("cli", "pooled specification cannot cluster by id-y", "cluster by id");
  }
  if (cfg.window.last_year < cfg.window.first_year || cfg.window.first_year <= cfg.baseline_year)
    throw Error("cli", "estimation window must start after the baseline year");
  if (!(cfg.demean.tol > 0)) throw Error("cli", "tolerance must be positive");
  if (s.design.heterogeneity == Heterogeneity::FirmSplit || s.design.heterogeneity == Heterogeneity::FirmPeerSplit)
    (void)panel::parse_characteristic(cfg.characteristic);
  if (s.design.heterogeneity == Heterogeneity::PeerSplit || s.design.heterogeneity == Heterogeneity::FirmPeerSplit)
    (void)panel::parse_characteristic(cfg.peer_characteristic.empty() ? cfg.characteristic : cfg.peer_characteristic);
  if (s.design.heterogeneity == Heterogeneity::Link) (void)treatment::parse_link_predicate(cfg.link);
  return s;
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cli", "cannot open config file " + path.string(), "check the --config path");
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int no = 0;
  auto trim = [](std::string s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++no;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error("cli", path.string() + ":" + std::to_string(no) + ": expected key = value");
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

std::string config_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["spec"] = cfg.spec;
  std::vector<std::string> f;
  for (auto k : cfg.factors) f.emplace_back(hdfe::factor_label(k));
  j["factors"] = f;
  j["cluster"] = cfg.cluster ? std::string(hdfe::factor_label(*cfg.cluster)) : std::string();
  j["window"] = {cfg.window.first_year, cfg.window.last_year};
  j["baseline_year"] = cfg.baseline_year;
  j["stable_window"] = {cfg.stable.first_year, cfg.stable.last_year};
  j["max_gap"] = cfg.stable.max_gap;
  j["min_value"] = cfg.threshold.min_value;
  j["inclusive"] = cfg.threshold.inclusive;
  j["weighting"] = cfg.weighting == treatment::Weighting::Uniform ? "uniform" : "value";
  j["strict"] = cfg.strict;
  j["tol"] = cfg.demean.tol;
  j["max_iter"] = cfg.demean.max_iter;
  j["accelerate"] = cfg.demean.accelerate;
  j["drop_singletons"] = cfg.drop_singletons;
  j["characteristic"] = cfg.characteristic;
  j["peer_characteristic"] = cfg.peer_characteristic;
  j["link"] = cfg.link;
  return j.dump();
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace peerimport::pipeline

namespace peerimport::pipeline {

namespace {

double to_double(const std::string& k, const std::string& v) {
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw Error("cli", "setting '" + k + "' expects a number, got '" + v + "'");
}

long to_int(const std::string& k, const std::string& v) {
  try {
    std::size_t pos = 0;
    long d = std::stol(v, &pos);
    if (pos == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw Error("cli", "setting '" + k + "' expects an integer, got '" + v + "'");
}

bool to_bool(const std::string& k, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw Error("cli", "setting '" + k + "' expects true/false, got '" + v + "'");
}

std::pair<int, int> to_range(const std::string& k, const std::string& v) {
  auto c = v.find(':');
  if (c == std::string::npos) throw Error("cli", "setting '" + k + "' expects FIRST:LAST, got '" + v + "'");
  return {static_cast<int>(to_int(k, v.substr(0, c))), static_cast<int>(to_int(k, v.substr(c + 1)))};
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= v.size()) {
    auto e = v.find(',', pos);
    auto item = v.substr(pos, e == std::string::npos ? std::string::npos : e - pos);
    auto b = item.find_first_not_of(" \t"), l = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, l - b + 1));
    if (e == std::string::npos) break;
    pos = e + 1;
  }
  return out;
}

}  // namespace

void apply_run_key(RunConfig& cfg, const std::string& k, const std::string& v) {
  if (k == "spec") cfg.spec = v;
  else if (k == "factors") {
    cfg.factors.clear();
    for (auto& f : split_list(v)) cfg.factors.push_back(hdfe::parse_factor(f));
  } else if (k == "cluster") cfg.cluster = hdfe::parse_factor(v);
  else if (k == "window") std::tie(cfg.window.first_year, cfg.window.last_year) = to_range(k, v);
  else if (k == "baseline_year") cfg.baseline_year = static_cast<int>(to_int(k, v));
  else if (k == "stable_window") std::tie(cfg.stable.first_year, cfg.stable.last_year) = to_range(k, v);
  else if (k == "max_gap") cfg.stable.max_gap = static_cast<int>(to_int(k, v));
  else if (k == "min_value") cfg.threshold.min_value = to_double(k, v);
  else if (k == "inclusive") cfg.threshold.inclusive = to_bool(k, v);
  else if (k == "weighting") {
    if (v == "uniform") cfg.weighting = treatment::Weighting::Uniform;
    else if (v == "value") cfg.weighting = treatment::Weighting::Value;
    else throw Error("cli", "weighting must be uniform or value");
  } else if (k == "strict") cfg.strict = to_bool(k, v);
  else if (k == "tol") cfg.demean.tol = to_double(k, v);
  else if (k == "max_iter") cfg.demean.max_iter = static_cast<int>(to_int(k, v));
  else if (k == "accelerate") cfg.demean.accelerate = to_bool(k, v);
  else if (k == "drop_singletons") cfg.drop_singletons = to_bool(k, v);
  else if (k == "characteristic") cfg.characteristic = v;
  else if (k == "peer_characteristic") cfg.peer_characteristic = v;
  else if (k == "link") cfg.link = v;
  else throw Error("cli", "unknown setting '" + k + "'", "see README for the list of settings");
}

bool is_dgp_key(const std::string& k) {
  static const std::set<std::string> keys{
      "n_firms", "first_year", "last_year", "burn_in", "grid_side", "province_side", "n_industries",
      "mean_degree", "distance_decay", "industry_boost", "transient_edge_share", "dropout_prob",
      "sub_threshold_share", "alpha", "beta_D", "beta_U", "gamma", "delta_D", "delta_U", "zeta", "zeta_D",
      "zeta_U", "sigma_mu", "sigma_eta", "sigma_eps", "u_process", "theta", "rho", "sigma_u", "initial_share",
      "attribute_gap_share", "zero_worker_share", "preset"};
  return keys.count(k) > 0;
}

void apply_dgp_key(dgp::DgpConfig& c, const std::string& k, const std::string& v) {
  auto d = [&] { return to_double(k, v); };
  auto i = [&] { return static_cast<int>(to_int(k, v)); };
  if (k == "preset") {
    c = dgp::preset(v);
  } else if (k == "n_firms") {
    auto n = to_int(k, v);
    if (n <= 0) throw Error("cli", "n_firms must be positive");
    c.n_firms = static_cast<std::size_t>(n);
  } else if (k == "first_year") c.first_year = i();
  else if (k == "last_year") c.last_year = i();
  else if (k == "burn_in") c.burn_in = i();
  else if (k == "grid_side") c.grid_side = i();
  else if (k == "province_side") c.province_side = i();
  else if (k == "n_industries") c.n_industries = i();
  else if (k == "mean_degree") c.mean_degree = d();
  else if (k == "distance_decay") c.distance_decay = v == "inf" ? std::numeric_limits<double>::infinity() : d();
  else if (k == "industry_boost") c.industry_boost = d();
  else if (k == "transient_edge_share") c.transient_edge_share = d();
  else if (k == "dropout_prob") c.dropout_prob = d();
  else if (k == "sub_threshold_share") c.sub_threshold_share = d();
  else if (k == "alpha") c.alpha = d();
  else if (k == "beta_D") c.beta_D = d();
  else if (k == "beta_U") c.beta_U = d();
  else if (k == "gamma") c.gamma = d();
  else if (k == "delta_D") c.delta_D = d();
  else if (k == "delta_U") c.delta_U = d();
  else if (k == "zeta") c.zeta = d();
  else if (k == "zeta_D") c.zeta_D = d();
  else if (k == "zeta_U") c.zeta_U = d();
  else if (k == "sigma_mu") c.sigma_mu = d();
  else if (k == "sigma_eta") c.sigma_eta = d();
  else if (k == "sigma_eps") c.sigma_eps = d();
  else if (k == "u_process") c.u_process = dgp::parse_u_process(v);
  else if (k == "theta") c.theta = d();
  else if (k == "rho") c.rho = d();
  else if (k == "sigma_u") c.sigma_u = d();
  else if (k == "initial_share") c.initial_share = d();
  else if (k == "attribute_gap_share") c.attribute_gap_share = d();
  else if (k == "zero_worker_share") c.zero_worker_share = d();
  else throw Error("cli", "unknown DGP setting '" + k + "'", "see README for the list of settings");
}

}  // namespace peerimport::pipeline
