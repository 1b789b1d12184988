// Command-line front end: configuration in, machine-readable results out.
//
//   bandgap bands|effmass|homog|defect --config <path> --out <dir>
//
// Exit codes: 0 success, 2 configuration error, 3 hypothesis violation,
// 4 no spectral gap, 1 any other failure.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "bandgap/config.hpp"
#include "bandgap/io.hpp"

namespace {

using namespace bandgap;

std::vector<Eigen::VectorXd> brillouin_grid(int d, int n) {
  std::vector<Eigen::VectorXd> ks;
  if (d == 1) {
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd k(1);
      k[0] = -0.5 + static_cast<double>(i) / (n - 1);
      ks.push_back(k);
    }
  } else {
    // Tensor grid, n points per axis.
    int per = std::max(2, static_cast<int>(std::lround(std::pow(
                              static_cast<double>(n), 1.0 / d))));
    std::vector<int> idx(d, 0);
    while (true) {
      Eigen::VectorXd k(d);
      for (int j = 0; j < d; ++j) {
        k[j] = -0.5 + static_cast<double>(idx[j]) / (per - 1);
      }
      ks.push_back(k);
      int j = d - 1;
      while (j >= 0 && ++idx[j] == per) idx[j--] = 0;
      if (j < 0) break;
    }
  }
  return ks;
}

// Finite gaps adjacent to band b in the sampled band structure.
struct BandGaps {
  std::optional<std::pair<double, double>> below, above;
};

BandGaps finite_band_gaps(const BandStructure& bands, int b) {
  BandGaps g;
  double lo = bands.energies.col(b).minCoeff();
  double hi = bands.energies.col(b).maxCoeff();
  const double tol = 1e-10 * std::max(1.0, std::abs(hi));
  if (b > 0) {
    double prev_hi = bands.energies.col(b - 1).maxCoeff();
    if (lo - prev_hi > tol) g.below = {prev_hi, lo};
  }
  if (b + 1 < bands.n_bands()) {
    double next_lo = bands.energies.col(b + 1).minCoeff();
    if (next_lo - hi > tol) g.above = {hi, next_lo};
  }
  return g;
}

Json interval_json(const std::optional<std::pair<double, double>>& iv) {
  if (!iv) return Json(nullptr);
  Json j;
  j["lower"] = iv->first;
  j["upper"] = iv->second;
  return j;
}

BandStructure sweep(const RunConfig& c, bool vectors = false) {
  return solve_bands(c.periodic,
                     brillouin_grid(c.periodic.dimension(), c.k_points),
                     c.n_bands, c.pw_cutoff, vectors);
}

void write_bands_csv(const std::string& path, const BandStructure& bands) {
  std::vector<std::string> header;
  int d = static_cast<int>(bands.k_grid.empty() ? 1 : bands.k_grid[0].size());
  for (int j = 0; j < d; ++j) header.push_back("k" + std::to_string(j + 1));
  for (int b = 0; b < bands.n_bands(); ++b) {
    header.push_back("E" + std::to_string(b));
  }
  std::vector<std::vector<double>> rows;
  for (size_t i = 0; i < bands.k_grid.size(); ++i) {
    std::vector<double> row;
    for (int j = 0; j < d; ++j) row.push_back(bands.k_grid[i][j]);
    for (int b = 0; b < bands.n_bands(); ++b) {
      row.push_back(bands.energies(static_cast<Eigen::Index>(i), b));
    }
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

int cmd_bands(const RunConfig& c, const std::string& out) {
  BandStructure bands = sweep(c);
  write_bands_csv(out + "/bands.csv", bands);

  BandEdge edge(c.periodic, c.band, c.k_star, c.pw_cutoff, c.tol);
  BandGaps gaps = finite_band_gaps(bands, c.band);
  Json j;
  j["edge"] = to_json(edge);
  j["gap_below_band"] = interval_json(gaps.below);
  j["gap_above_band"] = interval_json(gaps.above);
  write_json(out + "/gap.json", j);
  if (!gaps.below && !gaps.above) {
    std::cerr << "no gap: band " << c.band
              << " touches its neighbors on both sides\n";
    return 4;
  }
  return 0;
}

int cmd_effmass(const RunConfig& c, const std::string& out) {
  BandEdge edge(c.periodic, c.band, c.k_star, c.pw_cutoff, c.tol);
  EffectiveMassTensor inner = effective_mass_inner_product(edge);
  EffectiveMassTensor hess = effective_mass_hessian(
      c.periodic, c.band, c.k_star, c.pw_cutoff, c.hessian_step, c.tol);
  double scale = inner.A.cwiseAbs().maxCoeff();
  double disc = (inner.A - hess.A).cwiseAbs().maxCoeff() /
                (scale > 0.0 ? scale : 1.0);
  Json j;
  j["edge"] = to_json(edge);
  j["inner_product"] = to_json(inner);
  j["hessian"] = to_json(hess);
  j["dual_method_discrepancy"] = disc;
  j["min_eig_I_minus_A"] = check_I_minus_A(inner);
  write_json(out + "/effective_mass.json", j);
  if (!inner.is_definite()) {
    throw HypothesisError("H2(c)", "effective mass tensor is indefinite");
  }
  return 0;
}

EffectiveMassTensor pipeline_tensor(const RunConfig& c, const BandEdge& edge) {
  if (c.tensor_override) {
    return EffectiveMassTensor::from_matrix(
        *c.tensor_override, EffectiveMassTensor::Method::InnerProduct, 0.0,
        c.tol);
  }
  return effective_mass_inner_product(edge);
}

int cmd_homog(const RunConfig& c, const std::string& out) {
  BandEdge edge(c.periodic, c.band, c.k_star, c.pw_cutoff, c.tol);
  EffectiveMassTensor A = pipeline_tensor(c, edge);
  HomogenizedProblem problem(A, c.localized, c.box_half_width, c.box_spacing);
  std::vector<HomogenizedEigenpair> eigs =
      solve_homogenized(problem, c.n_eigs, c.tol);
  Json j;
  j["tensor"] = to_json(A);
  Json list = Json::array();
  for (const auto& p : eigs) list.push_back(to_json(p));
  j["eigenpairs"] = list;
  write_json(out + "/homogenized.json", j);
  // Grid dump of the leading discrete eigenfunction for plotting.
  for (const auto& p : eigs) {
    if (!p.discrete) continue;
    std::vector<std::vector<double>> rows;
    for (Eigen::Index i = 0; i < problem.grid.size(); ++i) {
      Eigen::VectorXd y = problem.grid.node(i);
      std::vector<double> row(y.data(), y.data() + y.size());
      row.push_back(p.F[i]);
      rows.push_back(std::move(row));
    }
    std::vector<std::string> header;
    for (int jdim = 0; jdim < problem.grid.dimension(); ++jdim) {
      header.push_back("y" + std::to_string(jdim + 1));
    }
    header.push_back("F");
    write_csv(out + "/envelope.csv", header, rows);
    break;
  }
  return 0;
}

int cmd_defect(const RunConfig& c, const std::string& out) {
  if (c.eps_list.size() < 3) {
    throw ConfigError("defect study needs an epsilons list of length >= 3");
  }
  BandEdge edge(c.periodic, c.band, c.k_star, c.pw_cutoff, c.tol);
  EffectiveMassTensor A = pipeline_tensor(c, edge);
  if (!A.is_definite()) {
    throw HypothesisError("H2(c)", "effective mass tensor is indefinite");
  }
  HomogenizedProblem problem(A, c.localized, c.box_half_width, c.box_spacing);
  std::vector<HomogenizedEigenpair> eigs =
      solve_homogenized(problem, c.n_eigs, c.tol);
  HypothesisReport report = certify_hypotheses(edge, A, eigs);
  if (!report.all()) {
    throw HypothesisError(report.first_failure(), "pipeline halted");
  }
  const HomogenizedEigenpair* ground = nullptr;
  for (const auto& p : eigs) {
    if (p.discrete) {
      ground = &p;
      break;
    }
  }
  MultiscaleExpansion expansion(edge, problem, *ground, c.expansion_order);

  BandStructure bands = sweep(c);
  GapInterval gap = spectral_gap(
      bands, edge, A.sign() > 0 ? GapSide::Below : GapSide::Above);

  ConvergenceReport conv = convergence_study(expansion, gap, c.eps_list,
                                             c.expansion_order, c.study);

  Json j;
  j["edge"] = to_json(edge);
  j["tensor"] = to_json(A);
  j["hypotheses"] = to_json(report);
  j["gap"] = to_json(gap);
  j["homogenized_ground"] = to_json(*ground);
  j["expansion"] = to_json(expansion);
  j["convergence"] = to_json(conv);
  write_json(out + "/defect.json", j);

  std::vector<std::vector<double>> rows;
  for (const auto& r : conv.rows) {
    rows.push_back({r.eps, r.mu_direct, r.mu_n, r.err_order2, r.err_order3,
                    r.eigenfunction_err, r.residual});
  }
  write_csv(out + "/convergence.csv",
            {"eps", "mu_direct", "mu_expansion", "err_order2", "err_order3",
             "eigenfunction_err", "residual"},
            rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral band edges, homogenized defect modes and their "
               "direct validation"};
  app.require_subcommand(1);
  std::string config_path, out_dir = ".";

  auto add = [&](const std::string& name, const std::string& desc) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", config_path, "run configuration file")
        ->required();
    sub->add_option("--out", out_dir, "output directory");
    return sub;
  };
  CLI::App* bands = add("bands", "band structure sweep and gap report");
  CLI::App* effmass = add("effmass", "effective mass tensor by both routes");
  CLI::App* homog = add("homog", "homogenized eigenpairs");
  CLI::App* defect = add("defect", "full defect-mode pipeline with "
                                   "direct validation");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig config = RunConfig::load(config_path);
    std::filesystem::create_directories(out_dir);
    if (bands->parsed()) return cmd_bands(config, out_dir);
    if (effmass->parsed()) return cmd_effmass(config, out_dir);
    if (homog->parsed()) return cmd_homog(config, out_dir);
    if (defect->parsed()) return cmd_defect(config, out_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const HypothesisError& e) {
    std::cerr << e.what() << "\n";
    return 3;
  } catch (const GaplessError& e) {
    std::cerr << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
