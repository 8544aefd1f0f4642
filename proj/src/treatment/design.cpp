#include <fstream>

#include "peerimport/csv.hpp"
#include "peerimport/treatment.hpp"

namespace peerimport::treatment {

namespace {

using panel::DropReason;

std::optional<DropReason> first_missing(const panel::Panel& p, const TreatmentTable& t, const DesignSpec& spec,
                                        const panel::MedianSplit* split, std::size_t r) {
  auto lag_reason = [](Missing m, DropReason empty) {
    return m == Missing::LagUnavailable ? DropReason::LagUnavailable : empty;
  };
  if (t.missing_D[r] != Missing::None) return lag_reason(t.missing_D[r], DropReason::NoSuppliers);
  if (t.missing_U[r] != Missing::None) return lag_reason(t.missing_U[r], DropReason::NoCustomers);
  for (int lag : spec.instrument_lags) {
    auto md = t.zmiss_D.at(lag)[r], mu = t.zmiss_U.at(lag)[r];
    if (md != Missing::None) return lag_reason(md, DropReason::NoSecondOrderSuppliers);
    if (mu != Missing::None) return lag_reason(mu, DropReason::NoSecondOrderCustomers);
  }
  if (spec.peer_characteristics && t.xbar_missing[r]) return DropReason::AttributeGap;
  if ((spec.heterogeneity == Heterogeneity::FirmSplit || spec.heterogeneity == Heterogeneity::FirmPeerSplit) &&
      split->of(p.rows[r].firm) == panel::Level::Unassigned)
    return DropReason::UnassignedCategory;
  if (spec.heterogeneity != Heterogeneity::None && !t.cat_missing.empty() && t.cat_missing[r])
    return DropReason::UnassignedCategory;
  return std::nullopt;
}

}  // namespace

Design build_design(const panel::Panel& panel, const TreatmentTable& tr, const DesignSpec& spec,
                    const panel::MedianSplit* firm_split) {
  std::vector<std::string> missing_cols;
  if (tr.ybar_D.size() != panel.rows.size()) missing_cols.push_back("ybar_D/ybar_U");
  for (int lag : spec.instrument_lags)
    if (!tr.zbar_D.count(lag)) missing_cols.push_back("zbar_t" + std::to_string(lag));
  if (spec.spatial_controls && tr.prop_zip.empty()) missing_cols.push_back("prop_imp_*");
  if (spec.peer_characteristics && tr.context_width == 0) missing_cols.push_back("xbar_*");
  bool needs_cat = spec.heterogeneity == Heterogeneity::PeerSplit ||
                   spec.heterogeneity == Heterogeneity::FirmPeerSplit || spec.heterogeneity == Heterogeneity::Link;
  if (needs_cat && tr.cat_D.empty()) missing_cols.push_back("ybar^v category shares");
  bool needs_split =
      spec.heterogeneity == Heterogeneity::FirmSplit || spec.heterogeneity == Heterogeneity::FirmPeerSplit;
  if (needs_split && !firm_split) missing_cols.push_back("firm split z_i");
  if (!spec.instrument_lags.empty() && spec.heterogeneity != Heterogeneity::None)
    throw Error("treatment", "instrumented heterogeneity specifications are not supported");
  if (!missing_cols.empty()) {
    std::string m;
    for (auto& c : missing_cols) m += (m.empty() ? "" : ", ") + c;
    throw Error("treatment", "specification needs treatments that were not computed: " + m,
                "enable the matching treatment options");
  }

  Design d;
  d.drops = panel.drops;
  for (std::size_t r = 0; r < panel.rows.size(); ++r) {
    if (auto why = first_missing(panel, tr, spec, firm_split, r)) {
      d.drops.add(panel.rows[r], *why);
      continue;
    }
    d.rows.push_back(r);
  }
  const auto n = static_cast<Eigen::Index>(d.rows.size());

  std::vector<std::pair<std::string, Eigen::VectorXd>> peer_cols, other_cols, inst_cols;
  auto column = [&](auto&& f) {
    Eigen::VectorXd v(n);
    for (Eigen::Index k = 0; k < n; ++k) v[k] = f(d.rows[static_cast<std::size_t>(k)]);
    return v;
  };
  auto zhigh = [&](std::size_t r) { return firm_split->of(panel.rows[r].firm) == panel::Level::High ? 1.0 : 0.0; };

  switch (spec.heterogeneity) {
    case Heterogeneity::None:
      peer_cols.emplace_back("ybar_D", column([&](auto r) { return tr.ybar_D[r]; }));
      peer_cols.emplace_back("ybar_U", column([&](auto r) { return tr.ybar_U[r]; }));
      break;
    case Heterogeneity::FirmSplit:
      for (const char* s : {"D", "U"}) {
        const auto& yb = s[0] == 'D' ? tr.ybar_D : tr.ybar_U;
        peer_cols.emplace_back(std::string("zLow*ybar_") + s, column([&](auto r) { return (1 - zhigh(r)) * yb[r]; }));
        peer_cols.emplace_back(std::string("zHigh*ybar_") + s, column([&](auto r) { return zhigh(r) * yb[r]; }));
      }
      break;
    case Heterogeneity::PeerSplit:
    case Heterogeneity::Link:
      for (const char* s : {"D", "U"}) {
        const auto& cs = s[0] == 'D' ? tr.cat_D : tr.cat_U;
        for (std::size_t c = 0; c < 2; ++c)
          peer_cols.emplace_back(std::string("ybar_") + s + "^" + tr.cat_labels[c],
                                 column([&](auto r) { return cs[r][c]; }));
      }
      break;
    case Heterogeneity::FirmPeerSplit:
      for (const char* s : {"D", "U"}) {
        const auto& yb = s[0] == 'D' ? tr.ybar_D : tr.ybar_U;
        const auto& cs = s[0] == 'D' ? tr.cat_D : tr.cat_U;
        std::string base = std::string("ybar_") + s;
        peer_cols.emplace_back(base, column([&](auto r) { return yb[r]; }));
        peer_cols.emplace_back(base + "*zHigh", column([&](auto r) { return yb[r] * zhigh(r); }));
        peer_cols.emplace_back(base + "^High", column([&](auto r) { return cs[r][1]; }));
        peer_cols.emplace_back(base + "^High*zHigh", column([&](auto r) { return cs[r][1] * zhigh(r); }));
      }
      break;
  }

  if (spec.spatial_controls) {
    other_cols.emplace_back("prop_imp_zip", column([&](auto r) { return tr.prop_zip[r]; }));
    other_cols.emplace_back("prop_imp_sec", column([&](auto r) { return tr.prop_sec[r]; }));
    other_cols.emplace_back("prop_imp_sec_zip", column([&](auto r) { return tr.prop_sec_zip[r]; }));
  }
  if (spec.peer_characteristics) {
    const auto& names = panel::control_names();
    const std::size_t K = names.size();
    auto add = [&](const std::string& label, auto&& f) {
      auto v = column(f);
      // all-zero columns (typically zero-denominator flags that never fire) carry no information
      if (v.cwiseAbs().maxCoeff() == 0.0 && label.find("flag_") != std::string::npos) {
        d.notes.push_back("dropped all-zero column " + label);
        return;
      }
      other_cols.emplace_back(label, std::move(v));
    };
    for (std::size_t k = 0; k < K; ++k) add("x_" + names[k], [&](auto r) { return panel.controls_of(r)[k]; });
    for (std::size_t k = 0; k < K; ++k) add("xbar_D_" + names[k], [&](auto r) { return tr.xbar_D[r * K + k]; });
    for (std::size_t k = 0; k < K; ++k) add("xbar_U_" + names[k], [&](auto r) { return tr.xbar_U[r * K + k]; });
  }
  for (int lag : spec.instrument_lags) {
    inst_cols.emplace_back("zbar_D_t" + std::to_string(lag), column([&](auto r) { return tr.zbar_D.at(lag)[r]; }));
    inst_cols.emplace_back("zbar_U_t" + std::to_string(lag), column([&](auto r) { return tr.zbar_U.at(lag)[r]; }));
  }

  auto pack = [&](const std::vector<std::pair<std::string, Eigen::VectorXd>>& cols, Eigen::MatrixXd& m,
                  std::vector<std::string>& labels) {
    m.resize(n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
      m.col(static_cast<Eigen::Index>(c)) = cols[c].second;
      labels.push_back(cols[c].first);
    }
  };
  d.y = column([&](auto r) { return static_cast<double>(panel.rows[r].y); });
  if (spec.instrument_lags.empty()) {
    peer_cols.insert(peer_cols.end(), other_cols.begin(), other_cols.end());
    pack(peer_cols, d.exog, d.exog_labels);
    d.endog.resize(n, 0);
    d.instruments.resize(n, 0);
  } else {
    pack(peer_cols, d.endog, d.endog_labels);
    pack(other_cols, d.exog, d.exog_labels);
    pack(inst_cols, d.instruments, d.instrument_labels);
  }
  return d;
}

void write_design_csv(const std::filesystem::path& path, const Design& d) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write " + path.string());
  out << "row,y";
  for (auto& l : d.endog_labels) out << ',' << l;
  for (auto& l : d.exog_labels) out << ',' << l;
  for (auto& l : d.instrument_labels) out << ',' << l;
  out << '\n';
  for (Eigen::Index r = 0; r < d.y.size(); ++r) {
    out << d.rows[static_cast<std::size_t>(r)] << ',' << csv::format_double(d.y[r]);
    for (const Eigen::MatrixXd* m : {&d.endog, &d.exog, &d.instruments})
      for (Eigen::Index c = 0; c < m->cols(); ++c) out << ',' << csv::format_double((*m)(r, c));
    out << '\n';
  }
}

}  // namespace peerimport::treatment
