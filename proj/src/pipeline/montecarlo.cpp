#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>

#include <boost/math/distributions/normal.hpp>

#include "peerimport/csv.hpp"
#include "peerimport/pipeline.hpp"
#include "peerimport/rng.hpp"

namespace peerimport::pipeline {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

std::uint64_t mc_rep_seed(std::uint64_t master, std::size_t rep) { return Stream(master, 0x4d43u, rep)(); }

McRep mc_replication(const dgp::DgpConfig& c0, std::uint64_t seed, std::size_t rep, const McOptions& opt) {
  McRep r;
  r.regime = c0.name;
  r.rep = rep;
  r.seed = seed;
  auto c = c0;
  c.retain_draws = false;
  auto d = dgp::simulate(c, seed);
  r.start_rate = d.truth.mean_start_rate;
  r.clamp_rate = d.truth.clamp_rate;
  auto in = inputs_from(std::move(d));

  RunConfig cfg;
  cfg.window = {c.first_year + 1, c.last_year};
  cfg.baseline_year = c.first_year;
  cfg.cluster = opt.cluster;
  cfg.spec = opt.ols_spec;
  auto so = resolve(cfg);
  cfg.spec = opt.iv_spec;
  auto si = resolve(cfg);
  if (so.mode != si.mode) throw Error("montecarlo", "OLS and IV specs must share the panel mode");
  auto a = needs(so), b = needs(si);
  PrepareOptions both;
  both.contextual = a.contextual || b.contextual;
  both.spatial = a.spatial || b.spatial;
  both.instrument_lags = b.instrument_lags;
  auto prep = prepare(in, cfg, so.mode, both);

  auto pick = [](const est::EstimationResult& e, const char* l, double& coef, double& se) {
    auto k = static_cast<Eigen::Index>(e.index(l));
    coef = e.beta[k];
    se = e.se[k];
  };
  r.ols_D = r.ols_U = r.ols_se_D = r.ols_se_U = kNaN;
  r.iv_D = r.iv_U = r.iv_se_D = r.iv_se_U = r.j = r.jp = r.min_F = kNaN;
  try {
    auto ro = estimate(in, *prep, so, cfg);
    pick(ro.est, "ybar_D", r.ols_D, r.ols_se_D);
    pick(ro.est, "ybar_U", r.ols_U, r.ols_se_U);
    r.N_ols = ro.est.N;
  } catch (const Error& e) {
    std::cerr << "montecarlo: rep " << rep << " OLS failed: " << e.what() << '\n';
  }
  try {
    auto ri = estimate(in, *prep, si, cfg);
    pick(ri.est, "ybar_D", r.iv_D, r.iv_se_D);
    pick(ri.est, "ybar_U", r.iv_U, r.iv_se_U);
    r.N_iv = ri.est.N;
    if (ri.est.iv) {
      r.min_F = ri.est.iv->min_F;
      if (!ri.est.iv->just_identified) {
        r.j = ri.est.iv->hansen_j;
        r.jp = ri.est.iv->hansen_p;
      }
    }
  } catch (const Error& e) {
    std::cerr << "montecarlo: rep " << rep << " 2SLS failed: " << e.what() << '\n';
  }
  return r;
}

McResult summarize(const std::vector<McRep>& reps, const std::vector<dgp::DgpConfig>& configs, double level) {
  McResult out;
  out.reps = reps;
  const double z = boost::math::quantile(boost::math::normal(), 0.5 + level / 2);
  for (const auto& c : configs) {
    struct Pick {
      const char* est;
      const char* coef;
      double truth;
      double McRep::*b;
      double McRep::*s;
    };
    const Pick picks[] = {{"ols", "ybar_D", c.beta_D, &McRep::ols_D, &McRep::ols_se_D},
                          {"ols", "ybar_U", c.beta_U, &McRep::ols_U, &McRep::ols_se_U},
                          {"tsls", "ybar_D", c.beta_D, &McRep::iv_D, &McRep::iv_se_D},
                          {"tsls", "ybar_U", c.beta_U, &McRep::iv_U, &McRep::iv_se_U}};
    for (const auto& p : picks) {
      McSummary s;
      s.regime = c.name;
      s.estimator = p.est;
      s.coefficient = p.coef;
      s.truth = p.truth;
      double sum = 0, sum2 = 0, cover = 0;
      for (const auto& r : reps) {
        if (r.regime != c.name || std::isnan(r.*p.b)) continue;
        ++s.reps;
        sum += r.*p.b;
        sum2 += (r.*p.b) * (r.*p.b);
        cover += std::abs(r.*p.b - p.truth) <= z * (r.*p.s);
      }
      if (s.reps > 1) {
        auto R = static_cast<double>(s.reps);
        s.mean = sum / R;
        double var = std::max(0.0, (sum2 - R * s.mean * s.mean) / (R - 1));
        s.mc_se = std::sqrt(var / R);
        s.bias = s.mean - p.truth;
        s.bias_z = s.mc_se > 0 ? s.bias / s.mc_se : 0.0;
        s.coverage = cover / R;
      }
      out.summary.push_back(s);
    }
    std::size_t nj = 0, rej = 0;
    for (const auto& r : reps)
      if (r.regime == c.name && !std::isnan(r.jp)) {
        ++nj;
        rej += r.jp < 0.05;
      }
    out.j_reject.emplace_back(c.name, nj ? static_cast<double>(rej) / static_cast<double>(nj) : kNaN);
  }
  return out;
}

McResult montecarlo(const McOptions& opt) {
  std::vector<McRep> reps;
  std::vector<dgp::DgpConfig> configs;
  for (auto g : opt.regimes) {
    auto c = dgp::regime(opt.base, g);
    dgp::validate(c);
    configs.push_back(c);
    for (std::size_t k = 0; k < opt.reps; ++k) {
      reps.push_back(mc_replication(c, mc_rep_seed(opt.seed, k), k, opt));
      if (opt.progress && (k + 1) % 10 == 0)
        std::cerr << "montecarlo: " << c.name << ' ' << (k + 1) << '/' << opt.reps << '\n';
    }
  }
  return summarize(reps, configs, opt.level);
}

void write_montecarlo(const std::filesystem::path& dir, const McResult& r, const McOptions& opt) {
  std::filesystem::create_directories(dir);
  using csv::format_double;
  {
    std::ofstream f(dir / "mc_reps.csv");
    if (!f) throw Error("io", "cannot write " + (dir / "mc_reps.csv").string());
    f << "regime,rep,seed,ols_D,ols_se_D,ols_U,ols_se_U,tsls_D,tsls_se_D,tsls_U,tsls_se_U,j,jp,min_F,N_ols,N_tsls,"
         "start_rate,clamp_rate\n";
    for (const auto& x : r.reps)
      f << x.regime << ',' << x.rep << ',' << x.seed << ',' << format_double(x.ols_D) << ','
        << format_double(x.ols_se_D) << ',' << format_double(x.ols_U) << ',' << format_double(x.ols_se_U) << ','
        << format_double(x.iv_D) << ',' << format_double(x.iv_se_D) << ',' << format_double(x.iv_U) << ','
        << format_double(x.iv_se_U) << ',' << format_double(x.j) << ',' << format_double(x.jp) << ','
        << format_double(x.min_F) << ',' << x.N_ols << ',' << x.N_iv << ',' << format_double(x.start_rate) << ','
        << format_double(x.clamp_rate) << '\n';
  }
  std::ofstream f(dir / "mc_summary.csv");
  f << "regime,estimator,coefficient,truth,reps,mean,mc_se,bias,bias_z,coverage\n";
  for (const auto& s : r.summary)
    f << s.regime << ',' << s.estimator << ',' << s.coefficient << ',' << format_double(s.truth) << ',' << s.reps
      << ',' << format_double(s.mean) << ',' << format_double(s.mc_se) << ',' << format_double(s.bias) << ','
      << format_double(s.bias_z) << ',' << format_double(s.coverage) << '\n';
  for (const auto& [g, rate] : r.j_reject)
    f << g << ",hansen_j,reject_5pct,0.05," << opt.reps << ',' << format_double(rate) << ",,,,\n";
}

}  // namespace peerimport::pipeline
