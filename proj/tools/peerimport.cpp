#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "peerimport/csv.hpp"
#include "peerimport/dgp.hpp"
#include "peerimport/pipeline.hpp"

using namespace peerimport;
namespace fs = std::filesystem;
using Settings = std::vector<std::pair<std::string, std::string>>;

namespace {

// Flag-bound options; each given flag becomes a key/value pair applied after
// the config file, so flags win.
struct Flags {
  std::vector<std::pair<CLI::Option*, std::string>> bound;
  std::vector<std::unique_ptr<std::string>> store;

  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    store.push_back(std::make_unique<std::string>());
    bound.emplace_back(app->add_option(flag, *store.back(), help), key);
  }
  void collect(Settings& out) const {
    for (std::size_t k = 0; k < bound.size(); ++k)
      if (bound[k].first->count() > 0) out.emplace_back(bound[k].second, *store[k]);
  }
};

void add_run_flags(CLI::App* app, Flags& f) {
  f.add(app, "--factors", "factors", "Comma-separated fixed effects: id, id-y, eu-y, eu-s-z-y, s-z-y");
  f.add(app, "--cluster", "cluster", "Cluster key: id or id-y");
  f.add(app, "--window", "window", "Estimation years FIRST:LAST (default 2011:2014)");
  f.add(app, "--baseline-year", "baseline_year", "Baseline year for starters and median splits");
  f.add(app, "--stable-window", "stable_window", "Stable-link window FIRST:LAST");
  f.add(app, "--max-gap", "max_gap", "Missing years tolerated in the stable window");
  f.add(app, "--min-value", "min_value", "Edge value threshold");
  f.add(app, "--weighting", "weighting", "Peer weights: uniform or value");
  f.add(app, "--strict", "strict", "Strict second-order exclusion (true/false)");
  f.add(app, "--tol", "tol", "Demeaning tolerance");
  f.add(app, "--max-iter", "max_iter", "Demeaning sweep limit");
  f.add(app, "--drop-singletons", "drop_singletons", "Drop singleton groups (true/false)");
  f.add(app, "--characteristic", "characteristic", "Firm split characteristic for h1/h3");
  f.add(app, "--peer-characteristic", "peer_characteristic", "Peer split characteristic for h2/h3");
  f.add(app, "--link", "link", "Link predicate for h4");
}

Settings load_settings(const std::string& config) {
  return config.empty() ? Settings{} : pipeline::read_config_file(config);
}

pipeline::RunConfig run_config(const Settings& s) {
  pipeline::RunConfig cfg;
  for (auto& [k, v] : s)
    if (!pipeline::is_dgp_key(k) && k != "seed" && k != "reps" && k != "regimes") pipeline::apply_run_key(cfg, k, v);
  return cfg;
}

dgp::DgpConfig dgp_config(const std::string& preset, const Settings& s) {
  auto c = dgp::preset(preset);
  for (auto& [k, v] : s)
    if (pipeline::is_dgp_key(k)) pipeline::apply_dgp_key(c, k, v);
  return c;
}

void parse_sets(const std::vector<std::string>& sets, Settings& out) {
  for (auto& s : sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos) throw Error("cli", "--set expects key=value, got '" + s + "'");
    out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Peer effects in import entry through production networks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", pipeline::kVersion);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset from the structural model");
  std::string sim_preset = "calibration", sim_out, sim_config, sim_regime;
  std::uint64_t sim_seed = 0;
  std::vector<std::string> sim_sets;
  Flags sim_flags;
  sim->add_option("--preset", sim_preset, "calibration, valid-iv, violated-iv or no-contextual");
  sim->add_option("--seed", sim_seed, "Master seed")->required();
  sim->add_option("--out", sim_out, "Output directory")->required();
  sim->add_option("--config", sim_config, "key = value file");
  sim->add_option("--regime", sim_regime, "Apply a regime on top of the preset");
  sim->add_option("--set", sim_sets, "DGP override key=value (repeatable)");
  sim_flags.add(sim, "--n-firms", "n_firms", "Number of firms");
  sim_flags.add(sim, "--mean-degree", "mean_degree", "Edges per firm");

  // build-panel
  auto* bp = app.add_subcommand("build-panel", "Assemble the potential-starter panel and write it as CSV");
  std::string bp_data, bp_out, bp_mode = "per-origin", bp_config;
  Flags bp_flags;
  bp->add_option("--data", bp_data, "Input directory with edges.csv, attributes.csv, imports.csv")->required();
  bp->add_option("--out", bp_out, "Output directory")->required();
  bp->add_option("--mode", bp_mode, "per-origin or pooled");
  bp->add_option("--config", bp_config, "key = value file");
  bp_flags.add(bp, "--window", "window", "Estimation years FIRST:LAST");
  bp_flags.add(bp, "--stable-window", "stable_window", "Stable-link window FIRST:LAST");
  bp_flags.add(bp, "--max-gap", "max_gap", "Missing years tolerated in the stable window");
  bp_flags.add(bp, "--min-value", "min_value", "Edge value threshold");

  // estimate
  auto* es = app.add_subcommand("estimate", "Estimate one specification");
  std::string es_data, es_out, es_config;
  Flags es_flags;
  es->add_option("--data", es_data, "Input directory")->required();
  es->add_option("--out", es_out, "Output directory for the run artifacts")->required();
  es->add_option("--config", es_config, "key = value file");
  es_flags.add(es, "--spec", "spec", "Specification name (s1-col1..5, pooled, iv-*, h1..h4)");
  add_run_flags(es, es_flags);

  // report
  auto* rp = app.add_subcommand("report", "Regression table across runs");
  std::vector<std::string> rp_runs;
  std::string rp_data, rp_ladder, rp_out, rp_config;
  Flags rp_flags;
  rp->add_option("--runs", rp_runs, "Run directories written by estimate");
  rp->add_option("--data", rp_data, "Input directory (with --ladder)");
  rp->add_option("--ladder", rp_ladder, "Run a spec group: ols, iv or het");
  rp->add_option("--out", rp_out, "Output directory (with --ladder) or table file (with --runs)");
  rp->add_option("--config", rp_config, "key = value file");
  add_run_flags(rp, rp_flags);

  // montecarlo
  auto* mc = app.add_subcommand("montecarlo", "Replications over DGP regimes");
  std::uint64_t mc_seed = 0;
  std::size_t mc_reps = 200;
  std::string mc_regimes = "valid-iv", mc_out, mc_preset = "valid-iv", mc_config, mc_cluster, mc_ols = "s1-col5",
              mc_iv = "iv-t23";
  std::vector<std::string> mc_sets;
  Flags mc_flags;
  mc->add_option("--seed", mc_seed, "Master seed")->required();
  mc->add_option("--reps", mc_reps, "Replications per regime");
  mc->add_option("--regimes", mc_regimes, "Comma-separated: valid-iv, violated-iv, no-contextual");
  mc->add_option("--preset", mc_preset, "Base DGP preset");
  mc->add_option("--out", mc_out, "Output directory")->required();
  mc->add_option("--config", mc_config, "key = value file (DGP settings)");
  mc->add_option("--cluster", mc_cluster, "Cluster override: id or id-y");
  mc->add_option("--ols-spec", mc_ols, "OLS specification");
  mc->add_option("--iv-spec", mc_iv, "IV specification");
  mc->add_option("--set", mc_sets, "DGP override key=value (repeatable)");
  mc_flags.add(mc, "--n-firms", "n_firms", "Number of firms");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      auto s = load_settings(sim_config);
      parse_sets(sim_sets, s);
      sim_flags.collect(s);
      auto c = dgp_config(sim_preset, s);
      if (!sim_regime.empty()) c = dgp::regime(c, dgp::parse_regime(sim_regime));
      auto d = dgp::simulate(c, sim_seed);
      dgp::write_dataset(sim_out, d, sim_seed);
      for (auto& w : d.warnings) std::cerr << "warning: " << w << '\n';
      std::cout << "simulated " << c.n_firms << " firms, " << d.network.edge_count() << " edges, start rate "
                << csv::format_double(d.truth.mean_start_rate) << ", clamp rate "
                << csv::format_double(d.truth.clamp_rate) << " -> " << sim_out << '\n';
    } else if (bp->parsed()) {
      auto s = load_settings(bp_config);
      bp_flags.collect(s);
      auto cfg = run_config(s);
      panel::PanelMode mode;
      if (bp_mode == "per-origin") mode = panel::PanelMode::PerOrigin;
      else if (bp_mode == "pooled") mode = panel::PanelMode::Pooled;
      else throw Error("cli", "unknown panel mode '" + bp_mode + "'", "use per-origin or pooled");
      auto in = pipeline::load_inputs(bp_data, cfg);
      auto p = panel::build_rows(in.statuses, in.attributes, mode, cfg.window);
      fs::create_directories(bp_out);
      panel::write_panel_csv(fs::path(bp_out) / "panel.csv", p, in.ids, in.attributes);
      std::ofstream f(fs::path(bp_out) / "drops.csv");
      f << "firm_id,origin,year,reason\n";
      for (auto& d : p.drops.rows)
        f << in.ids.external(d.firm) << ',' << origin_name(d.origin) << ',' << d.year << ','
          << panel::drop_reason_code(d.reason) << '\n';
      std::cout << p.rows.size() << " rows (" << p.drops.total() << " dropped of " << p.drops.input_rows << "); "
                << in.network.edge_count() << " stable edges -> " << bp_out << '\n';
    } else if (es->parsed()) {
      auto s = load_settings(es_config);
      es_flags.collect(s);
      auto cfg = run_config(s);
      pipeline::resolve(cfg);  // config errors before any I/O
      auto in = pipeline::load_inputs(es_data, cfg);
      auto r = pipeline::run(in, cfg);
      pipeline::write_run(es_out, r, in, cfg, es_data);
      for (auto& w : r.est.warnings) std::cerr << "warning: " << w << '\n';
      std::cout << pipeline::report_ladder({pipeline::column_of(r)});
    } else if (rp->parsed()) {
      std::vector<pipeline::Column> cols;
      if (!rp_ladder.empty()) {
        if (rp_data.empty() || rp_out.empty()) throw Error("cli", "--ladder needs --data and --out");
        auto s = load_settings(rp_config);
        rp_flags.collect(s);
        auto base = run_config(s);
        auto specs = pipeline::ladder(rp_ladder);
        for (auto& name : specs) {
          auto c = base;
          c.spec = name;
          c.factors.clear();
          c.cluster.reset();
          pipeline::resolve(c);
        }
        auto in = pipeline::load_inputs(rp_data, base);
        for (auto& name : specs) {
          auto c = base;
          c.spec = name;
          c.factors.clear();
          c.cluster.reset();
          auto r = pipeline::run(in, c);
          pipeline::write_run(fs::path(rp_out) / name, r, in, c, rp_data);
          cols.push_back(pipeline::column_of(r));
        }
        auto table = pipeline::report_ladder(cols);
        std::ofstream(fs::path(rp_out) / "table.txt") << table;
        std::cout << table;
      } else {
        if (rp_runs.empty()) throw Error("cli", "nothing to report", "pass --runs DIR... or --ladder with --data");
        for (auto& d : rp_runs) cols.push_back(pipeline::read_column(d));
        auto table = pipeline::report_ladder(cols);
        if (!rp_out.empty()) std::ofstream(rp_out) << table;
        std::cout << table;
      }
    } else if (mc->parsed()) {
      auto s = load_settings(mc_config);
      parse_sets(mc_sets, s);
      mc_flags.collect(s);
      pipeline::McOptions o;
      o.base = dgp_config(mc_preset, s);
      o.seed = mc_seed;
      o.reps = mc_reps;
      o.ols_spec = mc_ols;
      o.iv_spec = mc_iv;
      o.progress = true;
      if (!mc_cluster.empty()) o.cluster = hdfe::parse_factor(mc_cluster);
      o.regimes.clear();
      std::size_t pos = 0;
      while (pos <= mc_regimes.size()) {
        auto e = mc_regimes.find(',', pos);
        o.regimes.push_back(dgp::parse_regime(mc_regimes.substr(pos, e == std::string::npos ? e : e - pos)));
        if (e == std::string::npos) break;
        pos = e + 1;
      }
      auto r = pipeline::montecarlo(o);
      pipeline::write_montecarlo(mc_out, r, o);
      std::cout << "regime,estimator,coefficient,truth,mean,mc_se,bias_z,coverage\n";
      for (auto& x : r.summary)
        std::cout << x.regime << ',' << x.estimator << ',' << x.coefficient << ',' << x.truth << ',' << x.mean << ','
                  << x.mc_se << ',' << x.bias_z << ',' << x.coverage << '\n';
      for (auto& [g, rate] : r.j_reject) std::cout << g << ",hansen_j reject@5%," << rate << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error [" << e.module() << "]: " << e.what() << '\n';
    if (!e.hint().empty()) std::cerr << "hint: " << e.hint() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
