#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bandgap/homogenized.hpp"
#include "bandgap/validator.hpp"

namespace bandgap {

// Raw structured-text configuration: [section] headers and key = value
// lines; '#' starts a comment; repeated keys accumulate in order.
class ConfigFile {
 public:
  static ConfigFile parse(const std::string& text);
  static ConfigFile load(const std::string& path);

  bool has(const std::string& section, const std::string& key) const;
  // Single value; throws ConfigError when absent (no fallback given).
  std::string get(const std::string& section, const std::string& key) const;
  std::string get(const std::string& section, const std::string& key,
                  const std::string& fallback) const;
  std::vector<std::string> get_all(const std::string& section,
                                   const std::string& key) const;
  double number(const std::string& section, const std::string& key) const;
  double number(const std::string& section, const std::string& key,
                double fallback) const;
  int integer(const std::string& section, const std::string& key,
              int fallback) const;
  std::vector<double> numbers(const std::string& section,
                              const std::string& key) const;

 private:
  std::map<std::string, std::vector<std::pair<std::string, std::string>>>
      sections_;
};

// Fully validated run configuration for the pipeline commands.
struct RunConfig {
  PeriodicPotential periodic = PeriodicPotential::zero(1);
  LocalizedPotential localized = LocalizedPotential::zero(1);

  int band = 0;
  Eigen::VectorXd k_star;

  int pw_cutoff = 16;
  double hessian_step = 1e-3;
  int n_bands = 8;
  int k_points = 128;

  double box_half_width = 20.0;
  double box_spacing = 0.05;
  int n_eigs = 2;
  std::optional<Eigen::MatrixXd> tensor_override;

  int expansion_order = 4;

  StudyOptions study;
  std::vector<double> eps_list;

  Tolerances tol;

  static RunConfig from_file(const ConfigFile& f);
  static RunConfig load(const std::string& path);
};

}  // namespace bandgap
