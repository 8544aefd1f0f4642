#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "peerimport/netcore.hpp"
#include "peerimport/panel.hpp"

namespace peerimport::dgp {

enum class UProcess { Iid, MA1, AR1 };

std::string_view u_process_name(UProcess p);
UProcess parse_u_process(std::string_view s);

struct DgpConfig {
  std::string name = "custom";
  std::size_t n_firms = 20000;
  int first_year = 2010;  // first emitted year (baseline)
  int last_year = 2014;
  int burn_in = 8;        // simulated, unobserved years before first_year

  // geography and sectors
  int grid_side = 20;      // zips on a grid_side x grid_side lattice
  int province_side = 5;   // zips per province edge
  int n_industries = 10;

  // network shape
  double mean_degree = 6.7;  // edges per firm; mean in- and out-degree both equal this
  double distance_decay = 3.0;  // lambda in grid units; 0 = same zip only, inf = no decay
  double industry_boost = 1.0;  // relative acceptance of same-industry suppliers

  // reporting noise in the emitted edge file
  double transient_edge_share = 0.05;  // extra one-year links per true edge
  double dropout_prob = 0.1;           // true link missing in one window year
  double sub_threshold_share = 0.02;   // extra records below the value threshold

  // structural parameters
  double alpha = 0.036;  // baseline start probability
  double beta_D = 0.0, beta_U = 0.0;
  double gamma = 0.0, delta_D = 0.0, delta_U = 0.0;
  double zeta = 0.0, zeta_D = 0.0, zeta_U = 0.0;
  double sigma_mu = 0.0, sigma_eta = 0.0, sigma_eps = 0.0;
  UProcess u_process = UProcess::Iid;
  double theta = 0.0;  // MA(1)
  double rho = 0.0;    // AR(1)
  double sigma_u = 0.0;  // stationary standard deviation of u
  double initial_share = 0.036;  // importer share at the start of the burn-in

  double attribute_gap_share = 0.0;
  double zero_worker_share = 0.01;
  bool retain_draws = true;
};

// Presets: calibration, valid-iv, violated-iv, no-contextual.
DgpConfig preset(std::string_view name);
std::vector<std::string> preset_names();

enum class Regime { ValidIV, ViolatedIV, NoContextual };
Regime parse_regime(std::string_view s);
std::string_view regime_name(Regime r);

// valid-IV: MA(1) with theta != 0 and zeta_* != 0. violated-IV: AR(1) with
// rho >= 0.6. no-contextual: zeta_D = zeta_U = 0.
DgpConfig regime(const DgpConfig& base, Regime r);

// Throws when the configuration cannot be simulated.
void validate(const DgpConfig& c);

struct Geography {
  std::vector<std::uint32_t> zip;       // per firm, index into zip_codes
  std::vector<std::uint32_t> industry;  // per firm, index into industry_codes
  std::vector<std::string> zip_codes;   // "PPCCC": province then local cell
  std::vector<std::string> industry_codes;
};

Geography gen_geography(const DgpConfig& c, std::uint64_t seed);

// Fixed number of edges n * mean_degree. Each edge picks a uniform customer
// and a supplier with probability proportional to exp(-distance/lambda) *
// (1 + boost * same_industry); duplicates and self-loops are redrawn.
net::ProductionNetwork gen_network(const DgpConfig& c, const Geography& geo, std::uint64_t seed);

// Retained draws, indexed [year - sim_first][origin][firm] (u, eps, draw) or
// [year - sim_first][firm] (mu, x); eta by [year - sim_first][origin][zip*n_ind+ind].
struct Draws {
  int sim_first = 0;
  std::vector<std::vector<std::vector<double>>> u, eps, uniform;
  std::vector<std::vector<double>> mu, x;
  std::vector<std::vector<std::vector<double>>> eta;
  std::vector<std::vector<std::uint8_t>> initial;  // [origin][firm]
};

struct Truth {
  DgpConfig config;
  std::uint64_t seed = 0;
  double clamp_rate = 0.0;  // share of index values outside [0, 1]
  double mean_start_rate = 0.0;  // among at-risk firm-origin-years in the window
  double importer_share_baseline = 0.0;
};

struct SyntheticDataset {
  net::ProductionNetwork network;
  net::IdMap ids;
  Geography geography;
  panel::AttributeTable attributes;
  panel::StatusTable statuses;      // emitted years only
  panel::StatusTable full_history;  // including burn-in
  Draws draws;
  Truth truth;
  std::vector<std::string> warnings;
};

SyntheticDataset simulate_panel(const net::ProductionNetwork& net, const Geography& geo, const DgpConfig& c,
                                std::uint64_t seed);

// Network plus panel from one master seed.
SyntheticDataset simulate(const DgpConfig& c, std::uint64_t seed);

// Structural index recomputed from retained draws and lagged statuses.
double latent_index(const SyntheticDataset& d, FirmId i, Origin o, int year);

// Number of status bits that the retained draws fail to reproduce.
std::size_t audit(const SyntheticDataset& d);

// Yearly edge records for the stable window with reporting noise; the stable
// filter recovers the simulated network exactly.
std::vector<net::EdgeRecord> noisy_edge_records(const SyntheticDataset& d, net::StableWindow window,
                                                std::uint64_t seed);

// Writes edges.csv, attributes.csv, imports.csv, truth.csv and ids.csv.
void write_dataset(const std::filesystem::path& dir, const SyntheticDataset& d, std::uint64_t seed,
                   net::StableWindow window = {});

}  // namespace peerimport::dgp
