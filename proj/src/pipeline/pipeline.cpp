#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <tuple>

#include <nlohmann/json.hpp>

#include "peerimport/csv.hpp"
#include "peerimport/pipeline.hpp"

namespace peerimport::pipeline {

using treatment::Heterogeneity;

Inputs load_inputs(const std::filesystem::path& dir, const RunConfig& cfg) {
  for (const char* f : {"attributes.csv", "imports.csv", "edges.csv"})
    if (!std::filesystem::exists(dir / f))
      throw Error("cli", "missing input file " + (dir / f).string(), "run simulate first or point --data elsewhere");
  Inputs in;
  // attributes first so dense ids follow the attribute file's firm order
  in.attributes = panel::read_attribute_csv(dir / "attributes.csv", in.ids);
  in.statuses = panel::read_status_csv(dir / "imports.csv", in.ids);
  auto yearly = net::read_edge_csv(dir / "edges.csv", in.ids, cfg.threshold);
  in.ids = yearly.ids;
  in.ingest = yearly.report;
  in.attributes.resize_firms(in.ids.size());
  in.statuses.resize_firms(in.ids.size());
  auto stable = net::stable_subnetwork(yearly, cfg.stable);
  in.network = std::move(stable.network);
  in.stable = stable.report;
  in.attributes.set_degrees(in.network);
  in.attributes.set_yearly_degrees(yearly);
  return in;
}

Inputs inputs_from(dgp::SyntheticDataset&& d) {
  Inputs in;
  in.ids = std::move(d.ids);
  in.network = std::move(d.network);
  in.attributes = std::move(d.attributes);
  in.statuses = std::move(d.statuses);
  return in;
}

PrepareOptions needs(const SpecDef& s) {
  PrepareOptions o;
  o.contextual = s.design.peer_characteristics;
  o.spatial = s.design.spatial_controls;
  o.instrument_lags = s.design.instrument_lags;
  auto h = s.design.heterogeneity;
  o.categories = h == Heterogeneity::PeerSplit || h == Heterogeneity::FirmPeerSplit || h == Heterogeneity::Link;
  o.firm_split = h == Heterogeneity::FirmSplit || h == Heterogeneity::FirmPeerSplit;
  o.link = h == Heterogeneity::Link;
  return o;
}

std::unique_ptr<Prepared> prepare(const Inputs& in, const RunConfig& cfg, panel::PanelMode mode,
                                  const PrepareOptions& what) {
  auto p = std::make_unique<Prepared>();
  p->panel = panel::build_rows(in.statuses, in.attributes, mode, cfg.window);
  treatment::TreatmentOptions o;
  o.weighting = cfg.weighting;
  o.strict = cfg.strict;
  o.instrument_lags = what.instrument_lags;
  o.contextual = what.contextual;
  o.spatial = what.spatial;
  if (what.firm_split)
    p->firm_split = std::make_unique<panel::MedianSplit>(
        panel::median_split(in.attributes, panel::parse_characteristic(cfg.characteristic), cfg.baseline_year));
  if (what.categories) {
    if (what.link) {
      p->categorizer = std::make_unique<treatment::PeerCategorizer>(
          treatment::PeerCategorizer::by_link(treatment::parse_link_predicate(cfg.link), in.attributes, in.network));
    } else {
      const auto& pc = cfg.peer_characteristic.empty() ? cfg.characteristic : cfg.peer_characteristic;
      p->peer_split = std::make_unique<panel::MedianSplit>(
          panel::median_split(in.attributes, panel::parse_characteristic(pc), cfg.baseline_year));
      p->categorizer = std::make_unique<treatment::PeerCategorizer>(treatment::PeerCategorizer::by_split(*p->peer_split));
    }
  }
  o.categorizer = p->categorizer.get();
  p->treatments = treatment::compute_treatments({in.network, in.statuses, in.attributes}, p->panel, o);
  return p;
}

namespace {

PartitionCheck check_partition(const Inputs& in, const Prepared& prep, const treatment::Design& d, const RunConfig& cfg) {
  PartitionCheck pc;
  const auto& t = prep.treatments;
  if (!t.cat_D.empty()) {
    pc.applicable = true;
    for (auto r : d.rows) {
      pc.max_abs_gap = std::max(pc.max_abs_gap, std::abs(t.cat_D[r][0] + t.cat_D[r][1] - t.ybar_D[r]));
      pc.max_abs_gap = std::max(pc.max_abs_gap, std::abs(t.cat_U[r][0] + t.cat_U[r][1] - t.ybar_U[r]));
    }
  }
  for (const panel::MedianSplit* s : {prep.firm_split.get(), prep.peer_split.get()}) {
    if (!s) continue;
    pc.applicable = true;
    pc.low = s->low;
    pc.high = s->high;
    pc.unassigned = s->unassigned;
    std::size_t low = 0, high = 0, un = 0, above = 0;
    auto c = panel::parse_characteristic(s->characteristic);
    for (std::uint32_t i = 0; i < s->assignment.size(); ++i) {
      auto lv = s->assignment[i];
      low += lv == panel::Level::Low;
      high += lv == panel::Level::High;
      un += lv == panel::Level::Unassigned;
      if (c != panel::Characteristic::Wholesaler && lv != panel::Level::Unassigned) {
        auto v = panel::characteristic_value(in.attributes, c, firm_id(i), cfg.baseline_year);
        above += v && *v > s->cutoff;
      }
    }
    bool ok = low == s->low && high == s->high && un == s->unassigned && low + high + un == in.attributes.firms();
    if (c != panel::Characteristic::Wholesaler) ok = ok && above == high;
    pc.split_counts_ok = pc.split_counts_ok && ok;
  }
  return pc;
}

}  // namespace

RunResult estimate(const Inputs& in, const Prepared& prep, const SpecDef& spec, const RunConfig& cfg) {
  RunResult out;
  out.spec = spec;
  auto design = treatment::build_design(prep.panel, prep.treatments, spec.design, prep.firm_split.get());
  out.notes = design.notes;
  out.partition = check_partition(in, prep, design, cfg);
  out.instrument_labels = design.instrument_labels;

  std::vector<panel::ObservationRow> rows;
  rows.reserve(design.rows.size());
  for (auto r : design.rows) rows.push_back(prep.panel.rows[r]);
  if (rows.empty())
    throw Error("pipeline", "no rows left for '" + spec.name + "' after dropping incomplete rows",
                "inspect drops.csv; the network or window may be too small");
  auto factors = hdfe::encode(rows, spec.factors);
  std::vector<std::size_t> keep(rows.size());
  std::iota(keep.begin(), keep.end(), std::size_t{0});
  if (cfg.drop_singletons) {
    auto s = hdfe::drop_singletons(factors, true);
    out.singletons = s.dropped;
    out.singleton_passes = s.passes;
    if (s.dropped) {
      std::size_t k = 0;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (k < s.keep.size() && s.keep[k] == i) {
          ++k;
          continue;
        }
        design.drops.add(rows[i], panel::DropReason::Singleton);
      }
      keep = std::move(s.keep);
      for (auto& f : factors) f = hdfe::restrict(f, keep);
    }
  }
  if (keep.size() < 2) throw Error("pipeline", "fewer than two rows survive singleton removal");

  std::vector<std::uint64_t> ckeys(keep.size());
  for (std::size_t k = 0; k < keep.size(); ++k) ckeys[k] = hdfe::factor_key(spec.cluster, rows[keep[k]]);
  auto clusters = est::Clusters::from_keys(ckeys);

  const auto n = static_cast<Eigen::Index>(keep.size());
  const auto ke = design.endog.cols(), kx = design.exog.cols(), kz = design.instruments.cols();
  Eigen::MatrixXd M(n, 1 + ke + kx + kz);
  for (Eigen::Index k = 0; k < n; ++k) {
    auto r = static_cast<Eigen::Index>(keep[static_cast<std::size_t>(k)]);
    M(k, 0) = design.y[r];
    if (ke) M.block(k, 1, 1, ke) = design.endog.row(r);
    if (kx) M.block(k, 1 + ke, 1, kx) = design.exog.row(r);
    if (kz) M.block(k, 1 + ke + kx, 1, kz) = design.instruments.row(r);
  }
  auto dm = hdfe::demean(M, factors, cfg.demean);
  std::vector<std::string> names{"y"};
  for (auto* v : {&design.endog_labels, &design.exog_labels, &design.instrument_labels})
    names.insert(names.end(), v->begin(), v->end());
  for (std::size_t c = 0; c < names.size(); ++c)
    out.convergence.push_back({names[c], dm.report[c].iterations, dm.report[c].max_group_mean});

  out.dof = hdfe::absorbed_dof(factors);
  for (std::size_t f = 0; f < factors.size(); ++f) {
    if (std::find(out.dof.redundant_factors.begin(), out.dof.redundant_factors.end(), f) !=
        out.dof.redundant_factors.end())
      continue;
    if (hdfe::nested(factors[f], clusters.codes)) out.nested_groups += factors[f].groups();
  }
  out.nested_groups = std::min(out.nested_groups, out.dof.value);
  est::Options eo;
  eo.absorbed = {out.dof.value, out.nested_groups, !out.dof.exact};

  Eigen::VectorXd y = dm.columns.col(0);
  if (kz == 0) {
    out.est = est::ols(y, dm.columns.middleCols(1 + ke, kx), design.exog_labels, clusters, eo);
  } else {
    out.est = est::tsls(y, dm.columns.middleCols(1, ke), dm.columns.middleCols(1 + ke, kx),
                        dm.columns.middleCols(1 + ke + kx, kz), design.endog_labels, design.exog_labels, clusters, eo);
  }
  auto& dr = design.drops.rows;
  std::sort(dr.begin(), dr.end(), [](const panel::DroppedRow& a, const panel::DroppedRow& b) {
    return std::tuple(to_index(a.firm), a.origin, a.year) < std::tuple(to_index(b.firm), b.origin, b.year);
  });
  out.drops = std::move(design.drops);
  out.input_rows = out.drops.input_rows;
  out.ledger_reconciles = out.drops.input_rows == out.drops.total() + out.est.N;
  return out;
}

RunResult run(const Inputs& in, const RunConfig& cfg) {
  auto spec = resolve(cfg);
  auto prep = prepare(in, cfg, spec.mode, needs(spec));
  return estimate(in, *prep, spec, cfg);
}

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p);
  if (!f) throw Error("io", "cannot write " + p.string(), "check the output directory");
  return f;
}

std::string join_factors(const std::vector<hdfe::FactorKind>& f) {
  std::string s;
  for (auto k : f) s += (s.empty() ? "" : " / ") + std::string(hdfe::factor_label(k));
  return s;
}

}  // namespace

void write_run(const std::filesystem::path& dir, const RunResult& r, const Inputs& in, const RunConfig& cfg,
               const std::string& data_source) {
  std::filesystem::create_directories(dir);
  using csv::format_double;
  const auto& e = r.est;
  {
    auto f = open_out(dir / "results.csv");
    f << "label,coef,se,t,p,stars\n";
    for (std::size_t k = 0; k < e.labels.size(); ++k) {
      auto i = static_cast<Eigen::Index>(k);
      f << e.labels[k] << ',' << format_double(e.beta[i]) << ',' << format_double(e.se[i]) << ','
        << format_double(e.t[i]) << ',' << format_double(e.p[i]) << ',' << est::stars(e.p[i]) << '\n';
    }
  }
  {
    auto f = open_out(dir / "summary.csv");
    f << "key,value\n";
    auto kv = [&](const std::string& k, const std::string& v) { f << k << ',' << v << '\n'; };
    kv("spec", r.spec.name);
    kv("mode", r.spec.mode == panel::PanelMode::Pooled ? "pooled" : "per-origin");
    kv("fixed_effects", join_factors(r.spec.factors));
    kv("cluster", std::string(hdfe::factor_label(r.spec.cluster)));
    kv("characteristics", r.spec.design.peer_characteristics ? "yes" : "no");
    kv("N", std::to_string(e.N));
    kv("G", std::to_string(e.G));
    kv("K", std::to_string(e.K));
    kv("K_eff", std::to_string(e.K_eff));
    kv("absorbed_dof", std::to_string(r.dof.value));
    kv("absorbed_dof_lower_bound", std::to_string(r.dof.lower_bound));
    kv("absorbed_dof_exact", r.dof.exact ? "yes" : "no");
    kv("nested_groups", std::to_string(r.nested_groups));
    kv("ss_factor", format_double(e.ss_factor));
    kv("r2_within", format_double(e.r2_within));
    kv("approximate_se", e.approximate_se ? "yes" : "no");
    kv("input_rows", std::to_string(r.input_rows));
    kv("dropped_rows", std::to_string(r.drops.total()));
    kv("singletons", std::to_string(r.singletons));
    kv("singleton_passes", std::to_string(r.singleton_passes));
    kv("ledger_reconciles", r.ledger_reconciles ? "yes" : "no");
    if (r.partition.applicable) {
      kv("partition_max_gap", format_double(r.partition.max_abs_gap));
      kv("split_counts_ok", r.partition.split_counts_ok ? "yes" : "no");
      kv("split_low", std::to_string(r.partition.low));
      kv("split_high", std::to_string(r.partition.high));
      kv("split_unassigned", std::to_string(r.partition.unassigned));
    }
    if (e.iv) {
      const auto& d = *e.iv;
      kv("iv", "yes");
      std::string inst;
      for (auto& l : r.instrument_labels) inst += (inst.empty() ? "" : ";") + l;
      kv("instruments", inst);
      kv("idstat", format_double(d.anderson_lm));
      kv("idp", format_double(d.anderson_p));
      kv("widstat", format_double(d.cragg_donald));
      for (auto& fs : d.first_stage) kv("first_stage_F:" + fs.label, format_double(fs.F));
      kv("min_first_stage_F", format_double(d.min_F));
      if (!d.just_identified) {
        kv("j", format_double(d.hansen_j));
        kv("jp", format_double(d.hansen_p));
        kv("j_dof", std::to_string(d.j_dof));
      }
    } else {
      kv("iv", "no");
    }
    if (in.stable) {
      kv("stable_edges_kept", std::to_string(in.stable->kept));
      kv("stable_edges_dropped", std::to_string(in.stable->dropped));
    }
    kv("network_edges", std::to_string(in.network.edge_count()));
  }
  {
    auto f = open_out(dir / "convergence.csv");
    f << "column,iterations,max_group_mean,tol\n";
    for (auto& c : r.convergence)
      f << c.column << ',' << c.iterations << ',' << format_double(c.max_group_mean) << ','
        << format_double(cfg.demean.tol) << '\n';
  }
  {
    auto f = open_out(dir / "drops.csv");
    f << "firm_id,origin,year,reason\n";
    for (auto& d : r.drops.rows)
      f << in.ids.external(d.firm) << ',' << origin_name(d.origin) << ',' << d.year << ','
        << panel::drop_reason_code(d.reason) << '\n';
  }
  {
    auto f = open_out(dir / "table.txt");
    f << report_ladder({column_of(r)});
  }
  {
    nlohmann::ordered_json m;
    m["tool"] = "peerimport";
    m["version"] = kVersion;
    m["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                 std::to_string(EIGEN_MINOR_VERSION);
    m["compiler"] = __VERSION__;
    m["data"] = data_source;
    auto cj = config_json(cfg);
    m["config"] = nlohmann::ordered_json::parse(cj);
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a(cj)));
    m["config_hash"] = hex;
    std::filesystem::path truth = std::filesystem::path(data_source) / "truth.csv";
    if (!data_source.empty() && std::filesystem::exists(truth)) {
      csv::Reader rd(truth);
      std::vector<std::string_view> fields;
      while (rd.next(fields))
        if (fields.size() >= 2 && fields[0] == "seed") m["seed"] = std::stoull(std::string(fields[1]));
    }
    m["warnings"] = e.warnings;
    m["notes"] = r.notes;
    auto f = open_out(dir / "manifest.json");
    f << m.dump(2) << '\n';
  }
}

Column column_of(const RunResult& r) {
  Column c;
  c.name = r.spec.name;
  c.labels = r.est.labels;
  for (Eigen::Index k = 0; k < r.est.beta.size(); ++k) {
    c.coef.push_back(r.est.beta[k]);
    c.se.push_back(r.est.se[k]);
    c.p.push_back(r.est.p[k]);
  }
  c.N = r.est.N;
  c.r2 = r.est.r2_within;
  for (auto f : r.spec.factors) c.factors.emplace_back(hdfe::factor_label(f));
  c.cluster = hdfe::factor_label(r.spec.cluster);
  c.characteristics = r.spec.design.peer_characteristics;
  if (r.est.iv) {
    c.iv = true;
    c.idstat = r.est.iv->anderson_lm;
    c.idp = r.est.iv->anderson_p;
    c.widstat = r.est.iv->cragg_donald;
    if (!r.est.iv->just_identified) {
      c.j = r.est.iv->hansen_j;
      c.jp = r.est.iv->hansen_p;
    }
    c.instruments = r.instrument_labels;
  }
  return c;
}

Column read_column(const std::filesystem::path& dir) {
  Column c;
  {
    csv::Reader rd(dir / "results.csv");
    auto li = rd.column("label"), ci = rd.column("coef"), si = rd.column("se"), pi = rd.column("p");
    std::vector<std::string_view> f;
    while (rd.next(f)) {
      c.labels.emplace_back(f[li]);
      c.coef.push_back(csv::parse_double(f[ci], rd, "coef"));
      c.se.push_back(csv::parse_double(f[si], rd, "se"));
      c.p.push_back(csv::parse_double(f[pi], rd, "p"));
    }
  }
  csv::Reader rd(dir / "summary.csv");
  std::vector<std::string_view> f;
  while (rd.next(f)) {
    if (f.size() < 2) continue;
    std::string k(f[0]), v(f[1]);
    if (k == "spec") c.name = v;
    else if (k == "N") c.N = std::stoull(v);
    else if (k == "r2_within") c.r2 = csv::parse_double(f[1], rd, "r2");
    else if (k == "cluster") c.cluster = v;
    else if (k == "characteristics") c.characteristics = v == "yes";
    else if (k == "iv") c.iv = v == "yes";
    else if (k == "idstat") c.idstat = csv::parse_double(f[1], rd, k);
    else if (k == "idp") c.idp = csv::parse_double(f[1], rd, k);
    else if (k == "widstat") c.widstat = csv::parse_double(f[1], rd, k);
    else if (k == "j") c.j = csv::parse_double(f[1], rd, k);
    else if (k == "jp") c.jp = csv::parse_double(f[1], rd, k);
    else if (k == "fixed_effects") {
      std::size_t pos = 0;
      while (pos <= v.size()) {
        auto e = v.find(" / ", pos);
        c.factors.push_back(v.substr(pos, e == std::string::npos ? std::string::npos : e - pos));
        if (e == std::string::npos) break;
        pos = e + 3;
      }
    } else if (k == "instruments") {
      std::size_t pos = 0;
      while (pos < v.size()) {
        auto e = v.find(';', pos);
        c.instruments.push_back(v.substr(pos, e == std::string::npos ? std::string::npos : e - pos));
        if (e == std::string::npos) break;
        pos = e + 1;
      }
    }
  }
  if (c.name.empty()) throw Error("report", "no spec name in " + (dir / "summary.csv").string());
  return c;
}

}  // namespace peerimport::pipeline
