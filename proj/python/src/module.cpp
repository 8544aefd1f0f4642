#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "peerimport/pipeline.hpp"

namespace py = pybind11;
using namespace peerimport;

namespace {

using Settings = std::map<std::string, std::string>;

dgp::DgpConfig dgp_config(const std::string& preset, const Settings& s) {
  auto c = dgp::preset(preset);
  if (auto it = s.find("preset"); it != s.end()) c = dgp::preset(it->second);
  for (auto& [k, v] : s)
    if (k != "preset") pipeline::apply_dgp_key(c, k, v);
  return c;
}

py::dict truth_dict(const dgp::Truth& t) {
  py::dict d;
  d["preset"] = t.config.name;
  d["seed"] = t.seed;
  d["beta_D"] = t.config.beta_D;
  d["beta_U"] = t.config.beta_U;
  d["clamp_rate"] = t.clamp_rate;
  d["mean_start_rate"] = t.mean_start_rate;
  d["importer_share_baseline"] = t.importer_share_baseline;
  return d;
}

py::dict result_dict(const pipeline::RunResult& r) {
  const auto& e = r.est;
  py::dict d;
  d["spec"] = r.spec.name;
  d["labels"] = e.labels;
  d["coef"] = e.beta;
  d["se"] = e.se;
  d["p"] = e.p;
  d["N"] = e.N;
  d["clusters"] = e.G;
  d["K_eff"] = e.K_eff;
  d["r2_within"] = e.r2_within;
  d["singletons"] = r.singletons;
  d["ledger_reconciles"] = r.ledger_reconciles;
  py::dict drops;
  for (auto why : {panel::DropReason::AttributeGap, panel::DropReason::NoSuppliers, panel::DropReason::NoCustomers,
                   panel::DropReason::LagUnavailable, panel::DropReason::NoSecondOrderSuppliers,
                   panel::DropReason::NoSecondOrderCustomers, panel::DropReason::UnassignedCategory,
                   panel::DropReason::Singleton})
    drops[py::str(std::string(panel::drop_reason_code(why)))] = r.drops.count(why);
  d["drops"] = drops;
  if (e.iv) {
    py::dict iv;
    iv["idstat"] = e.iv->anderson_lm;
    iv["idp"] = e.iv->anderson_p;
    iv["widstat"] = e.iv->cragg_donald;
    iv["min_F"] = e.iv->min_F;
    iv["weak"] = e.iv->weak;
    iv["instruments"] = r.instrument_labels;
    if (!e.iv->just_identified) {
      iv["j"] = e.iv->hansen_j;
      iv["jp"] = e.iv->hansen_p;
    }
    d["iv"] = iv;
  }
  d["warnings"] = e.warnings;
  return d;
}

template <class F>
auto guard(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw py::value_error(e.what());
  }
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Peer effects in firm import decisions on production networks";
  m.attr("__version__") = pipeline::kVersion;

  m.def("presets", &dgp::preset_names, "Names of the built-in DGP presets.");
  m.def("specs", [] {
    std::vector<std::string> out;
    for (auto& s : pipeline::spec_registry()) out.push_back(s.name);
    return out;
  });

  m.def(
      "simulate",
      [](const std::filesystem::path& out, std::uint64_t seed, const std::string& preset, const Settings& settings,
         const std::string& regime) {
        return guard([&] {
          auto c = dgp_config(preset, settings);
          if (!regime.empty()) c = dgp::regime(c, dgp::parse_regime(regime));
          py::gil_scoped_release nogil;
          auto d = dgp::simulate(c, seed);
          dgp::write_dataset(out, d, seed);
          py::gil_scoped_acquire gil;
          auto t = truth_dict(d.truth);
          t["edges"] = d.network.edge_count();
          t["warnings"] = d.warnings;
          return t;
        });
      },
      py::arg("out"), py::arg("seed"), py::arg("preset") = "calibration", py::arg("settings") = Settings{},
      py::arg("regime") = "",
      "Simulate a synthetic dataset and write edges, attributes, imports, truth and ids CSVs to `out`.");

  m.def(
      "estimate",
      [](const std::filesystem::path& data, const std::string& spec, const Settings& settings,
         const std::optional<std::filesystem::path>& out) {
        return guard([&] {
          pipeline::RunConfig cfg;
          cfg.spec = spec;
          for (auto& [k, v] : settings) pipeline::apply_run_key(cfg, k, v);
          pipeline::RunResult r;
          {
            py::gil_scoped_release nogil;
            auto in = pipeline::load_inputs(data, cfg);
            r = pipeline::run(in, cfg);
            if (out) pipeline::write_run(*out, r, in, cfg, data.string());
          }
          return result_dict(r);
        });
      },
      py::arg("data"), py::arg("spec") = "s1-col5", py::arg("settings") = Settings{},
      py::arg("out") = std::nullopt, "Estimate one specification on a dataset directory.");

  m.def(
      "report",
      [](const std::vector<std::filesystem::path>& runs) {
        return guard([&] {
          std::vector<pipeline::Column> cols;
          for (auto& r : runs) cols.push_back(pipeline::read_column(r));
          return pipeline::report_ladder(cols);
        });
      },
      py::arg("runs"), "Regression table from run directories written by estimate(out=...).");

  m.def(
      "montecarlo",
      [](std::uint64_t seed, std::size_t reps, const std::vector<std::string>& regimes, const std::string& preset,
         const Settings& settings, const std::optional<std::filesystem::path>& out) {
        return guard([&] {
          pipeline::McOptions o;
          o.seed = seed;
          o.reps = reps;
          o.base = dgp_config(preset, settings);
          o.regimes.clear();
          for (auto& g : regimes) o.regimes.push_back(dgp::parse_regime(g));
          pipeline::McResult r;
          {
            py::gil_scoped_release nogil;
            r = pipeline::montecarlo(o);
            if (out) pipeline::write_montecarlo(*out, r, o);
          }
          py::list summary;
          for (auto& s : r.summary) {
            py::dict d;
            d["regime"] = s.regime;
            d["estimator"] = s.estimator;
            d["coefficient"] = s.coefficient;
            d["truth"] = s.truth;
            d["reps"] = s.reps;
            d["mean"] = s.mean;
            d["mc_se"] = s.mc_se;
            d["bias"] = s.bias;
            d["bias_z"] = s.bias_z;
            d["coverage"] = s.coverage;
            summary.append(d);
          }
          py::dict res;
          res["summary"] = summary;
          py::dict j;
          for (auto& [g, rate] : r.j_reject) j[py::str(g)] = rate;
          res["j_reject"] = j;
          return res;
        });
      },
      py::arg("seed"), py::arg("reps") = 200, py::arg("regimes") = std::vector<std::string>{"valid-iv"},
      py::arg("preset") = "valid-iv", py::arg("settings") = Settings{}, py::arg("out") = std::nullopt,
      "Monte Carlo over DGP regimes; returns bias, coverage and J rejection summaries.");

  m.def(
      "second_order_exclusive",
      [](std::size_t n, const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges, std::uint32_t firm,
         const std::string& side, bool strict) {
        return guard([&] {
          std::vector<std::pair<FirmId, FirmId>> e;
          for (auto [a, b] : edges) e.emplace_back(firm_id(a), firm_id(b));
          net::ProductionNetwork g(n, std::move(e));
          Side s;
          if (side == "downstream") s = Side::Downstream;
          else if (side == "upstream") s = Side::Upstream;
          else throw Error("python", "side must be downstream or upstream");
          std::vector<std::uint32_t> out;
          for (auto f : net::second_order_exclusive(g, firm_id(firm), s, strict)) out.push_back(to_index(f));
          return out;
        });
      },
      py::arg("n"), py::arg("edges"), py::arg("firm"), py::arg("side"), py::arg("strict") = true,
      "Second-order exclusive neighbors of `firm` in a graph given as (supplier, customer) pairs.");

  m.def(
      "demean",
      [](const Eigen::MatrixXd& x, const std::vector<std::vector<std::int64_t>>& factors, double tol) {
        return guard([&] {
          std::vector<hdfe::Factor> fs;
          for (std::size_t k = 0; k < factors.size(); ++k) {
            if (factors[k].size() != static_cast<std::size_t>(x.rows()))
              throw Error("python", "factor " + std::to_string(k) + " length does not match the rows of x");
            std::vector<std::uint64_t> keys(factors[k].begin(), factors[k].end());
            fs.push_back(hdfe::from_keys("f" + std::to_string(k), keys));
          }
          hdfe::DemeanOptions o;
          o.tol = tol;
          return hdfe::demean(x, fs, o).columns;
        });
      },
      py::arg("x"), py::arg("factors"), py::arg("tol") = 1e-10,
      "Residuals of the columns of `x` after projecting out every factor's group means.");
}
