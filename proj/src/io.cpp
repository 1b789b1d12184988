#include "bandgap/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace bandgap {

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  for (size_t i = 0; i < header.size(); ++i) {
    out << header[i] << (i + 1 < header.size() ? "," : "\n");
  }
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      out << format_full(row[i]) << (i + 1 < row.size() ? "," : "\n");
    }
  }
}

void write_json(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

namespace {

Json vector_json(const Eigen::VectorXd& v) {
  Json j = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

Json matrix_json(const Eigen::MatrixXd& m) {
  Json j = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    j.push_back(row);
  }
  return j;
}

}  // namespace

Json to_json(const BandEdge& edge) {
  Json j;
  j["band"] = edge.band();
  j["k_star"] = vector_json(edge.k_star());
  j["energy"] = edge.energy();
  j["simplicity_gap"] = edge.simplicity_gap();
  j["gradient_residual"] = edge.gradient_residual();
  j["realness_defect"] = edge.realness_defect();
  Json coeffs = Json::array();
  const CellCoeffs& w = edge.w();
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (std::abs(w[i]) < 1e-14) continue;
    WaveIndex m = edge.basis().index_to_wave(i);
    Json entry = Json::array();
    for (int jdim = 0; jdim < edge.basis().dimension(); ++jdim) {
      entry.push_back(m[jdim]);
    }
    entry.push_back(w[i].real());
    entry.push_back(w[i].imag());
    coeffs.push_back(entry);
  }
  j["coefficients"] = coeffs;
  return j;
}

Json to_json(const GapInterval& gap) {
  Json j;
  j["lower"] = gap.lower ? Json(*gap.lower) : Json(nullptr);
  j["upper"] = gap.upper ? Json(*gap.upper) : Json(nullptr);
  j["side"] = gap.side == GapSide::Below ? "below" : "above";
  return j;
}

Json to_json(const EffectiveMassTensor& t) {
  Json j;
  j["A"] = matrix_json(t.A);
  j["method"] = t.method == EffectiveMassTensor::Method::Hessian
                    ? "hessian"
                    : "inner_product";
  switch (t.definiteness) {
    case EffectiveMassTensor::Definiteness::Positive:
      j["definiteness"] = "positive";
      break;
    case EffectiveMassTensor::Definiteness::Negative:
      j["definiteness"] = "negative";
      break;
    case EffectiveMassTensor::Definiteness::Indefinite:
      j["definiteness"] = "indefinite";
      break;
  }
  j["eigenvalues"] = vector_json(t.eigenvalues);
  j["eigenvalues_I_minus_A"] = vector_json(t.eigenvalues_I_minus_A);
  j["asymmetry"] = t.asymmetry;
  return j;
}

Json to_json(const HypothesisReport& r) {
  Json j;
  j["H2a"] = r.h2a;
  j["H2b"] = r.h2b;
  j["H2c"] = r.h2c;
  j["H3"] = r.h3;
  j["simplicity_gap"] = r.simplicity_gap;
  j["gradient_residual"] = r.gradient_residual;
  j["A_eigenvalues"] = vector_json(r.a_eigenvalues);
  j["sign_times_e"] = r.sign_times_e;
  return j;
}

Json to_json(const HomogenizedEigenpair& p) {
  Json j;
  j["e"] = p.e;
  j["multiplicity"] = p.multiplicity;
  j["boundary_mass"] = p.boundary_mass;
  j["discrete"] = p.discrete;
  return j;
}

Json to_json(const MultiscaleExpansion& e) {
  Json j;
  j["order"] = e.order();
  Json mu = Json::array();
  for (int n = 1; n <= e.order(); ++n) mu.push_back(e.mu(n));
  j["mu"] = mu;
  Json logs = Json::array();
  for (int n = 0; n <= e.order(); ++n) {
    Json l;
    l["order"] = n;
    l["terms"] = e.log(n).term_count;
    l["solvability_defect"] = e.log(n).solvability_defect;
    l["envelope_defect"] = e.log(n).laq_defect;
    l["residual"] = e.log(n).residual;
    logs.push_back(l);
  }
  j["orders"] = logs;
  j["mu1_witness"] = vector_json(e.mu1_witness());
  j["max_solvability_defect"] = e.max_solvability_defect();
  return j;
}

Json to_json(const ConvergenceReport& r) {
  Json j;
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    Json x;
    x["eps"] = row.eps;
    x["cells_half_width"] = row.cells_half_width;
    x["mu_direct"] = row.mu_direct;
    x["mu_expansion"] = row.mu_n;
    x["err_order2"] = row.err_order2;
    x["err_order3"] = row.err_order3;
    x["eigenfunction_err"] = row.eigenfunction_err;
    x["overlap"] = row.overlap;
    x["residual"] = row.residual;
    x["rayleigh_check"] = row.rayleigh_check;
    rows.push_back(x);
  }
  j["rows"] = rows;
  j["slope_order2"] = r.slope_order2;
  j["slope_order3"] = r.slope_order3;
  j["slope_eigenfunction"] = r.slope_eigenfunction;
  j["slope_residual"] = r.slope_residual;
  j["monotone"] = r.monotone;
  j["at_floor"] = r.at_floor;
  j["resolution_change"] = r.resolution_change;
  j["resolution_ok"] = r.resolution_ok;
  return j;
}

}  // namespace bandgap
