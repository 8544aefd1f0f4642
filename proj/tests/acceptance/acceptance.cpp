// Acceptance harness: one PASS/FAIL line per criterion.
//
//   acceptance [criteria...] [--reps-valid N] [--reps-violated N] [--known-failure K]...
//
// Exit status is non-zero when a criterion fails that was not declared with
// --known-failure.

#include <CLI11.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <unistd.h>

#include "peerimport/parallel.hpp"
#include "peerimport/pipeline.hpp"

using namespace peerimport;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
  // parts of the criterion that must hold even when it is a declared known failure
  bool core = true;
};

std::string fmt(const char* f, double v) {
  char b[96];
  std::snprintf(b, sizeof b, f, v);
  return b;
}

// ---- 1: FWL -------------------------------------------------------------

Outcome fwl() {
  auto t0 = Clock::now();
  std::mt19937_64 g(11);
  std::normal_distribution<double> N;
  double worst = 0;
  for (int rep = 0; rep < 50; ++rep) {
    std::uniform_int_distribution<int> rows(40, 300), groups(2, 30);
    const int n = rows(g), G1 = groups(g), G2 = groups(g);
    std::uniform_int_distribution<int> a(0, G1 - 1), b(0, G2 - 1);
    std::vector<std::uint64_t> k1(static_cast<std::size_t>(n)), k2(static_cast<std::size_t>(n));
    for (int r = 0; r < n; ++r) {
      k1[static_cast<std::size_t>(r)] = static_cast<std::uint64_t>(a(g));
      k2[static_cast<std::size_t>(r)] = static_cast<std::uint64_t>(b(g));
    }
    std::vector<hdfe::Factor> f{hdfe::from_keys("a", k1), hdfe::from_keys("b", k2)};
    const int K = 3;
    Eigen::MatrixXd X(n, K);
    Eigen::VectorXd y(n);
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < K; ++c) X(r, c) = N(g) + 0.5 * static_cast<double>(k1[static_cast<std::size_t>(r)] % 4);
      y[r] = X(r, 0) - 0.5 * X(r, 1) + 0.25 * X(r, 2) + 0.1 * static_cast<double>(k2[static_cast<std::size_t>(r)]) + N(g);
    }

    // absorbed: demean then the production OLS
    Eigen::MatrixXd M(n, K + 1);
    M << y, X;
    hdfe::DemeanOptions o;
    o.tol = 1e-14;
    o.max_iter = 100000;
    auto dm = hdfe::demean(M, f, o);
    std::vector<std::uint64_t> rowkeys(static_cast<std::size_t>(n));
    for (int r = 0; r < n; ++r) rowkeys[static_cast<std::size_t>(r)] = static_cast<std::uint64_t>(r);
    auto res = est::ols(dm.columns.col(0), dm.columns.rightCols(K), {"x1", "x2", "x3"},
                        est::Clusters::from_keys(rowkeys));

    // explicit dummies
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, K + G1 + G2);
    D.leftCols(K) = X;
    for (int r = 0; r < n; ++r) {
      D(r, K + static_cast<Eigen::Index>(k1[static_cast<std::size_t>(r)])) = 1;
      D(r, K + G1 + static_cast<Eigen::Index>(k2[static_cast<std::size_t>(r)])) = 1;
    }
    Eigen::VectorXd bd = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(D).solve(y).head(K);
    for (int c = 0; c < K; ++c)
      worst = std::max(worst, std::abs(res.beta[c] - bd[c]) / std::max(std::abs(bd[c]), 1e-12));
  }
  double t = seconds_since(t0);
  return {worst <= 1e-8 && t < 10, "max rel diff " + fmt("%.2e", worst) + ", " + fmt("%.2f", t) + " s"};
}

// ---- 2: second-order neighbors ------------------------------------------

std::vector<std::uint32_t> oracle_2path(const std::vector<std::vector<char>>& A, int i, Side side, bool strict) {
  const int n = static_cast<int>(A.size());
  auto E = [&](int a, int b) { return A[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] != 0; };
  std::set<std::uint32_t> out;
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      bool path = side == Side::Upstream ? E(i, j) && E(j, k) : E(j, i) && E(k, j);
      if (!path || k == i || E(i, k) || E(k, i)) continue;
      bool cross = false;
      for (int m = 0; strict && m < n && !cross; ++m)
        cross = (E(i, m) && E(k, m)) || (E(m, i) && E(m, k)) ||
                (side == Side::Upstream ? E(m, i) && E(k, m) : E(i, m) && E(m, k));
      if (!cross) out.insert(static_cast<std::uint32_t>(k));
    }
  return {out.begin(), out.end()};
}

Outcome neighbors() {
  auto t0 = Clock::now();
  std::mt19937_64 g(12);
  std::size_t mismatches = 0, queries = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const int n = std::uniform_int_distribution<int>(2, 50)(g);
    const double p = std::uniform_real_distribution<double>(0.01, 0.25)(g);
    std::bernoulli_distribution e(p);
    std::vector<std::vector<char>> A(static_cast<std::size_t>(n), std::vector<char>(static_cast<std::size_t>(n), 0));
    std::vector<std::pair<FirmId, FirmId>> edges;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        if (a != b && e(g)) {
          A[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = 1;
          edges.emplace_back(firm_id(static_cast<std::uint32_t>(a)), firm_id(static_cast<std::uint32_t>(b)));
        }
    net::ProductionNetwork G(static_cast<std::size_t>(n), edges);
    for (int i = 0; i < n; ++i)
      for (auto side : {Side::Downstream, Side::Upstream})
        for (bool strict : {false, true}) {
          auto got = net::second_order_exclusive(G, firm_id(static_cast<std::uint32_t>(i)), side, strict);
          std::vector<std::uint32_t> gi;
          for (auto f : got) gi.push_back(to_index(f));
          ++queries;
          mismatches += gi != oracle_2path(A, i, side, strict);
        }
  }
  double t = seconds_since(t0);
  return {mismatches == 0 && t < 10,
          std::to_string(mismatches) + "/" + std::to_string(queries) + " mismatches, " + fmt("%.2f", t) + " s"};
}

// ---- 3, 4, 5: Monte Carlo ------------------------------------------------

const pipeline::McSummary& find(const pipeline::McResult& r, const std::string& est, const std::string& coef) {
  for (auto& s : r.summary)
    if (s.estimator == est && s.coefficient == coef) return s;
  throw Error("acceptance", "missing summary row " + est + " " + coef);
}

double j_rate(const std::vector<pipeline::McRep>& reps) {
  std::size_t n = 0, rej = 0;
  for (auto& r : reps)
    if (!std::isnan(r.jp)) {
      ++n;
      rej += r.jp < 0.05;
    }
  return n ? static_cast<double>(rej) / static_cast<double>(n) : std::nan("");
}

std::vector<pipeline::McRep> run_mc(dgp::Regime g, std::size_t reps, std::size_t first = 0) {
  pipeline::McOptions opt;
  opt.regimes = {g};
  opt.reps = reps;
  opt.seed = 20240601;
  auto c = dgp::regime(opt.base, g);
  std::vector<pipeline::McRep> out;
  // same per-rep seeds as the montecarlo subcommand
  auto all = first + reps;
  for (std::size_t k = first; k < all; ++k) {
    out.push_back(pipeline::mc_replication(c, pipeline::mc_rep_seed(opt.seed, k), k, opt));
    if ((k + 1) % 50 == 0) std::cerr << "acceptance: " << c.name << ' ' << (k + 1) << " reps\n";
  }
  return out;
}

std::string coef_line(const pipeline::McSummary& s) {
  return s.estimator + " " + s.coefficient + " mean " + fmt("%.4f", s.mean) + " (truth " + fmt("%.3f", s.truth) +
         ", bias z " + fmt("%.2f", s.bias_z) + ", cover " + fmt("%.3f", s.coverage) + ")";
}

Outcome valid_recovery(const std::vector<pipeline::McRep>& reps, double secs) {
  auto c = dgp::regime(dgp::preset("valid-iv"), dgp::Regime::ValidIV);
  auto r = pipeline::summarize(reps, {c}, 0.95);
  bool a = true, b = true, cov = true;
  std::string d;
  for (const char* coef : {"ybar_D", "ybar_U"}) {
    auto& o = find(r, "ols", coef);
    auto& i = find(r, "tsls", coef);
    a = a && std::abs(o.bias_z) > 2;
    b = b && std::abs(i.bias_z) <= 2;
    cov = cov && i.coverage >= 0.90 && i.coverage <= 0.98;
    d += coef_line(o) + "; " + coef_line(i) + "; ";
  }
  d += "(a) " + std::string(a ? "ok" : "no") + " (b) " + (b ? "ok" : "no") + " (c) " + (cov ? "ok" : "no") + ", " +
       std::to_string(reps.size()) + " reps, " + fmt("%.0f", secs) + " s";
  return {a && b && cov && secs < 1800, d};
}

Outcome violated(const std::vector<pipeline::McRep>& reps, double secs) {
  auto c = dgp::regime(dgp::preset("valid-iv"), dgp::Regime::ViolatedIV);
  auto r = pipeline::summarize(reps, {c}, 0.95);
  auto& d = find(r, "tsls", "ybar_D");
  auto& u = find(r, "tsls", "ybar_U");
  bool bias = std::abs(d.bias_z) > 2 || std::abs(u.bias_z) > 2;
  double jr = j_rate(reps);
  bool j = jr > 0.15;
  return {bias && j && secs < 1800, coef_line(d) + "; " + coef_line(u) + "; bias " + (bias ? "ok" : "no") +
                                        ", J reject " + fmt("%.3f", jr) + " (need > 0.15), " +
                                        std::to_string(reps.size()) + " reps, " + fmt("%.0f", secs) + " s",
          bias};
}

Outcome j_size(const std::vector<pipeline::McRep>& reps) {
  double jr = j_rate(reps);
  return {jr >= 0.02 && jr <= 0.09, "J reject " + fmt("%.3f", jr) + " over " + std::to_string(reps.size()) + " reps"};
}

// ---- 6: partition identities and ledgers ---------------------------------

Outcome partitions() {
  std::size_t runs = 0, bad = 0;
  double worst = 0;
  std::string fails;
  for (std::uint64_t seed : {31, 32}) {
    auto c = dgp::preset("valid-iv");
    c.n_firms = 6000;
    c.grid_side = 6;
    c.attribute_gap_share = 0.02;
    auto in = pipeline::inputs_from(dgp::simulate(c, seed));
    for (const auto& s : pipeline::spec_registry()) {
      for (const char* ch : {"workers", "wholesaler", "labor_productivity"}) {
        bool split = s.design.heterogeneity != treatment::Heterogeneity::None &&
                     s.design.heterogeneity != treatment::Heterogeneity::Link;
        if (!split && std::string(ch) != "workers") continue;
        pipeline::RunConfig cfg;
        cfg.spec = s.name;
        cfg.characteristic = ch;
        auto r = pipeline::run(in, cfg);
        ++runs;
        worst = std::max(worst, r.partition.max_abs_gap);
        bool ok = r.ledger_reconciles && r.partition.split_counts_ok && r.partition.max_abs_gap <= 1e-12;
        // independent median rule on the baseline year
        if (split) {
          std::vector<double> v;
          for (std::uint32_t i = 0; i < in.attributes.firms(); ++i) {
            auto x = panel::characteristic_value(in.attributes, panel::parse_characteristic(ch), firm_id(i), 2010);
            if (x) v.push_back(*x);
          }
          std::size_t high;
          if (std::string(ch) == "wholesaler") {
            high = static_cast<std::size_t>(std::count(v.begin(), v.end(), 1.0));
          } else {
            std::sort(v.begin(), v.end());
            auto m = v.size();
            double med = m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
            high = static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [&](double x) { return x > med; }));
          }
          ok = ok && r.partition.high == high && r.partition.low == v.size() - high;
        }
        if (!ok) {
          ++bad;
          fails += " " + s.name + "/" + ch;
        }
      }
    }
  }
  return {bad == 0, std::to_string(runs) + " runs, " + std::to_string(bad) + " failing" + fails +
                        ", max |sum_v ybar^v - ybar| " + fmt("%.1e", worst)};
}

// ---- 7: calibration moments ----------------------------------------------

Outcome calibration() {
  auto c = dgp::preset("calibration");
  auto d = dgp::simulate(c, 7);
  // means over firms with at least one supplier / customer
  double in_sum = 0, in_n = 0, out_sum = 0, out_n = 0;
  for (std::uint32_t i = 0; i < d.network.size(); ++i) {
    auto a = d.network.indegree(firm_id(i)), b = d.network.outdegree(firm_id(i));
    if (a) in_sum += static_cast<double>(a), ++in_n;
    if (b) out_sum += static_cast<double>(b), ++out_n;
  }
  double din = in_sum / in_n, dout = out_sum / out_n;
  bool ok = std::abs(din - 6.9) <= 0.15 * 6.9 && std::abs(dout - 6.5) <= 0.15 * 6.5 &&
            std::abs(d.truth.mean_start_rate - 0.036) <= 0.005;
  return {ok, "suppliers " + fmt("%.2f", din) + ", customers " + fmt("%.2f", dout) + ", start rate " +
                  fmt("%.4f", d.truth.mean_start_rate)};
}

// ---- 8: determinism -------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::map<std::string, std::string> one_pass(const fs::path& root, const char* threads) {
  setenv("PEERIMPORT_THREADS", threads, 1);
  auto c = dgp::preset("valid-iv");
  c.n_firms = 8000;
  c.attribute_gap_share = 0.01;
  auto data = root / "data";
  dgp::write_dataset(data, dgp::simulate(c, 99), 99);
  std::map<std::string, std::string> files;
  for (auto f : {"edges.csv", "attributes.csv", "imports.csv", "truth.csv", "ids.csv"})
    files[std::string("data/") + f] = slurp(data / f);
  for (const char* spec : {"s1-col5", "iv-t23", "h3", "pooled"}) {
    pipeline::RunConfig cfg;
    cfg.spec = spec;
    auto in = pipeline::load_inputs(data, cfg);
    auto r = pipeline::run(in, cfg);
    auto out = root / spec;
    pipeline::write_run(out, r, in, cfg, data.string());
    for (auto f : {"results.csv", "summary.csv", "drops.csv", "convergence.csv", "table.txt"})
      files[std::string(spec) + "/" + f] = slurp(out / f);
  }
  pipeline::McOptions mo;
  mo.regimes = {dgp::Regime::ValidIV, dgp::Regime::ViolatedIV};
  mo.reps = 2;
  mo.base.n_firms = 4000;
  mo.seed = 5;
  pipeline::write_montecarlo(root / "mc", pipeline::montecarlo(mo), mo);
  for (auto f : {"mc_reps.csv", "mc_summary.csv"}) files[std::string("mc/") + f] = slurp(root / "mc" / f);
  return files;
}

Outcome determinism() {
  auto base = fs::temp_directory_path() / ("peerimport_acc_" + std::to_string(::getpid()));
  const char* old = std::getenv("PEERIMPORT_THREADS");
  std::string saved = old ? old : "";
  auto a = one_pass(base / "a", "1");
  auto b = one_pass(base / "b", "1");
  auto c = one_pass(base / "c", "4");
  if (old) setenv("PEERIMPORT_THREADS", saved.c_str(), 1);
  else unsetenv("PEERIMPORT_THREADS");
  fs::remove_all(base);
  std::string diff;
  for (auto& [k, v] : a) {
    if (v.empty()) diff += " " + k + "(empty)";
    if (b[k] != v) diff += " " + k + "(rerun)";
    if (c[k] != v) diff += " " + k + "(threads)";
  }
  return {diff.empty(), std::to_string(a.size()) + " files compared across reruns and 1 vs 4 threads" +
                            (diff.empty() ? std::string() : ", differ:" + diff)};
}

// ---- 9: throughput --------------------------------------------------------

Outcome throughput() {
  auto root = fs::temp_directory_path() / ("peerimport_big_" + std::to_string(::getpid()));
  auto t0 = Clock::now();
  auto c = dgp::preset("calibration");
  c.n_firms = 100000;
  c.mean_degree = 7.0;
  c.retain_draws = false;
  auto d = dgp::simulate(c, 2024);
  auto edges = d.network.edge_count();
  dgp::write_dataset(root, d, 2024);
  double t_sim = seconds_since(t0);

  pipeline::RunConfig cfg;
  auto in = pipeline::load_inputs(root, cfg);
  auto spec = pipeline::resolve(cfg);
  auto prep = pipeline::prepare(in, cfg, spec.mode, pipeline::needs(spec));
  double t_panel = seconds_since(t0);
  auto r1 = pipeline::estimate(in, *prep, spec, cfg);
  auto alt = spec;
  alt.factors = {hdfe::FactorKind::FirmYear, hdfe::FactorKind::OriginYear};
  auto r2 = pipeline::estimate(in, *prep, alt, cfg);
  double t = seconds_since(t0);
  fs::remove_all(root);
  return {t < 300, std::to_string(c.n_firms) + " firms, " + std::to_string(edges) + " edges, N " +
                       std::to_string(r1.est.N) + "/" + std::to_string(r2.est.N) + "; simulate+write " +
                       fmt("%.1f", t_sim) + " s, load+panel " + fmt("%.1f", t_panel - t_sim) + " s, total " +
                       fmt("%.1f", t) + " s on " + std::to_string(thread_count()) + " thread(s)"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"peerimport acceptance criteria"};
  std::vector<int> only;
  std::vector<int> known;
  std::size_t reps_valid = 500, reps_violated = 200;
  app.add_option("criteria", only, "Criteria to run (default: all)")->check(CLI::Range(1, 9));
  app.add_option("--reps-valid", reps_valid, "Valid-regime replications (first 200 feed criterion 3)");
  app.add_option("--reps-violated", reps_violated, "Violated-regime replications");
  app.add_option("--known-failure", known, "Criterion expected to fail; does not affect the exit status");
  CLI11_PARSE(app, argc, argv);
  auto want = [&](int k) { return only.empty() || std::count(only.begin(), only.end(), k); };

  std::map<int, Outcome> res;
  auto report = [&](int k, Outcome o) {
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << k << ": " << o.detail << std::endl;
    res[k] = std::move(o);
  };
  auto guarded = [&](int k, auto&& f) {
    if (!want(k)) return;
    try {
      report(k, f());
    } catch (const std::exception& e) {
      report(k, {false, std::string("error: ") + e.what()});
    }
  };

  guarded(1, fwl);
  guarded(2, neighbors);
  if (want(3) || want(5)) {
    try {
      auto t0 = Clock::now();
      auto head = run_mc(dgp::Regime::ValidIV, std::min<std::size_t>(200, reps_valid));
      double secs = seconds_since(t0);
      if (want(3)) report(3, valid_recovery(head, secs));
      if (want(5)) {
        auto all = head;
        if (reps_valid > head.size()) {
          auto tail = run_mc(dgp::Regime::ValidIV, reps_valid - head.size(), head.size());
          all.insert(all.end(), tail.begin(), tail.end());
        }
        report(5, j_size(all));
      }
    } catch (const std::exception& e) {
      for (int k : {3, 5})
        if (want(k)) report(k, {false, std::string("error: ") + e.what()});
    }
  }
  guarded(4, [&] {
    auto t0 = Clock::now();
    auto reps = run_mc(dgp::Regime::ViolatedIV, reps_violated);
    return violated(reps, seconds_since(t0));
  });
  guarded(6, partitions);
  guarded(7, calibration);
  guarded(8, determinism);
  guarded(9, throughput);

  int unexpected = 0;
  for (auto& [k, o] : res)
    if (!o.pass && (!o.core || !std::count(known.begin(), known.end(), k))) ++unexpected;
  for (int k : known)
    if (res.count(k) && !res[k].pass) std::cout << "note: criterion " << k << " is a declared known failure\n";
  return unexpected ? 1 : 0;
}
