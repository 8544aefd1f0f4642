#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "peerimport/dgp.hpp"
#include "peerimport/estimator.hpp"
#include "peerimport/hdfe.hpp"
#include "peerimport/netcore.hpp"
#include "peerimport/panel.hpp"
#include "peerimport/treatment.hpp"

namespace peerimport::pipeline {

inline constexpr const char* kVersion = "0.3.0";

struct SpecDef {
  std::string name;
  std::string description;
  panel::PanelMode mode = panel::PanelMode::PerOrigin;
  std::vector<hdfe::FactorKind> factors;
  hdfe::FactorKind cluster = hdfe::FactorKind::FirmYear;
  treatment::DesignSpec design;
};

// Built-in specifications: s1-col1..s1-col5, pooled, iv-t2, iv-t23,
// iv-pooled-t2, iv-pooled-t23, h1..h4.
const std::vector<SpecDef>& spec_registry();
const SpecDef& find_spec(const std::string& name);

// Named groups of specs: ols, iv, het.
std::vector<std::string> ladder(const std::string& name);

struct RunConfig {
  std::string spec = "s1-col5";
  std::vector<hdfe::FactorKind> factors;          // empty: the spec's own
  std::optional<hdfe::FactorKind> cluster;        // unset: the spec's own
  panel::YearWindow window{2011, 2014};
  int baseline_year = 2010;
  net::StableWindow stable{2011, 2014, 1};
  net::ValueThreshold threshold{};
  treatment::Weighting weighting = treatment::Weighting::Uniform;
  bool strict = true;
  hdfe::DemeanOptions demean{};
  bool drop_singletons = true;
  std::string characteristic = "workers";  // firm split for h1 and h3
  std::string peer_characteristic;         // peer split for h2 and h3; empty: same as characteristic
  std::string link = "same_industry";      // h4
};

// Spec with overrides applied; throws on invalid combinations before any
// data is touched.
SpecDef resolve(const RunConfig& cfg);

struct Inputs {
  net::IdMap ids;
  net::ProductionNetwork network;
  panel::AttributeTable attributes;
  panel::StatusTable statuses;
  net::IngestReport ingest;
  std::optional<net::StableReport> stable;
};

// Reads attributes.csv, imports.csv and edges.csv from `dir`.
Inputs load_inputs(const std::filesystem::path& dir, const RunConfig& cfg);
Inputs inputs_from(dgp::SyntheticDataset&& d);

// Panel plus treatments; the categorizer points into this object, so it is
// kept behind a unique_ptr.
struct Prepared {
  panel::Panel panel;
  treatment::TreatmentTable treatments;
  std::unique_ptr<panel::MedianSplit> firm_split, peer_split;
  std::unique_ptr<treatment::PeerCategorizer> categorizer;
};

struct PrepareOptions {
  bool contextual = false;
  bool spatial = false;
  std::vector<int> instrument_lags;
  bool categories = false;
  bool link = false;  // categories from a link predicate rather than a peer split
  bool firm_split = false;
};

PrepareOptions needs(const SpecDef& s);
std::unique_ptr<Prepared> prepare(const Inputs& in, const RunConfig& cfg, panel::PanelMode mode,
                                  const PrepareOptions& what);

struct ConvergenceRow {
  std::string column;
  int iterations = 0;
  double max_group_mean = 0.0;
};

struct PartitionCheck {
  bool applicable = false;
  double max_abs_gap = 0.0;  // |sum_v ybar^v - ybar| over estimation rows
  bool split_counts_ok = true;
  std::size_t low = 0, high = 0, unassigned = 0;
};

struct RunResult {
  SpecDef spec;
  est::EstimationResult est;
  std::size_t input_rows = 0;
  std::size_t singletons = 0;
  int singleton_passes = 0;
  hdfe::AbsorbedDof dof;
  std::size_t nested_groups = 0;
  std::vector<ConvergenceRow> convergence;
  panel::DropLedger drops;
  std::vector<std::string> notes;
  std::vector<std::string> instrument_labels;
  PartitionCheck partition;
  bool ledger_reconciles = false;  // input rows - dropped rows == N
};

RunResult estimate(const Inputs& in, const Prepared& prep, const SpecDef& spec, const RunConfig& cfg);
RunResult run(const Inputs& in, const RunConfig& cfg);

// Artifacts: results.csv, summary.csv, table.txt, convergence.csv, drops.csv, manifest.json.
void write_run(const std::filesystem::path& dir, const RunResult& r, const Inputs& in, const RunConfig& cfg,
               const std::string& data_source);

// One column of a regression table.
struct Column {
  std::string name;
  std::vector<std::string> labels;
  std::vector<double> coef, se, p;
  std::size_t N = 0;
  double r2 = 0.0;
  std::vector<std::string> factors;
  std::string cluster;
  bool characteristics = false;
  bool iv = false;
  double idstat = 0, idp = 1, widstat = 0;
  std::optional<double> j, jp;
  std::vector<std::string> instruments;
};

Column column_of(const RunResult& r);
// Reads results.csv and summary.csv written by write_run.
Column read_column(const std::filesystem::path& run_dir);

// Columns aligned by coefficient label, with significance stars and footer
// rows. Characteristic controls collapse into one Yes/No row.
std::string report_ladder(const std::vector<Column>& cols);

// Key/value config files: `key = value` per line, '#' comments.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path);

// Apply one `key = value` setting; unknown keys and bad values throw.
void apply_run_key(RunConfig& cfg, const std::string& key, const std::string& value);
void apply_dgp_key(dgp::DgpConfig& c, const std::string& key, const std::string& value);
bool is_dgp_key(const std::string& key);

std::string config_json(const RunConfig& cfg);
std::uint64_t fnv1a(const std::string& s);

// Monte Carlo over regimes.
struct McOptions {
  std::vector<dgp::Regime> regimes{dgp::Regime::ValidIV};
  std::size_t reps = 200;
  std::uint64_t seed = 1;
  dgp::DgpConfig base = dgp::preset("valid-iv");
  std::string ols_spec = "s1-col5";
  std::string iv_spec = "iv-t23";
  std::optional<hdfe::FactorKind> cluster;
  double level = 0.95;
  bool progress = false;
};

struct McRep {
  std::string regime;
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  double ols_D = 0, ols_U = 0, ols_se_D = 0, ols_se_U = 0;
  double iv_D = 0, iv_U = 0, iv_se_D = 0, iv_se_U = 0;
  double j = 0, jp = 1, min_F = 0;
  std::size_t N_ols = 0, N_iv = 0;
  double start_rate = 0, clamp_rate = 0;
};

struct McSummary {
  std::string regime;
  std::string estimator;  // ols or tsls
  std::string coefficient;
  double truth = 0;
  std::size_t reps = 0;
  double mean = 0, mc_se = 0, bias = 0, bias_z = 0, coverage = 0;
};

struct McResult {
  std::vector<McRep> reps;
  std::vector<McSummary> summary;
  // J rejection rate at 5% per regime
  std::vector<std::pair<std::string, double>> j_reject;
};

// Seed of replication `rep`; shared by every regime so regimes differ only in the DGP.
std::uint64_t mc_rep_seed(std::uint64_t master, std::size_t rep);
McRep mc_replication(const dgp::DgpConfig& c, std::uint64_t seed, std::size_t rep, const McOptions& opt);
McResult summarize(const std::vector<McRep>& reps, const std::vector<dgp::DgpConfig>& configs, double level);
McResult montecarlo(const McOptions& opt);
void write_montecarlo(const std::filesystem::path& dir, const McResult& r, const McOptions& opt);

}  // namespace peerimport::pipeline
