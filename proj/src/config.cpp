#include "bandgap/config.hpp"

#include <fstream>
#include <sstream>

namespace bandgap {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<double> split_numbers(const std::string& s) {
  std::istringstream in(s);
  std::vector<double> out;
  double v;
  while (in >> v) out.push_back(v);
  if (!in.eof()) throw ConfigError("malformed numeric list: '" + s + "'");
  return out;
}

}  // namespace

ConfigFile ConfigFile::parse(const std::string& text) {
  ConfigFile f;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("line " + std::to_string(lineno) +
                          ": unterminated section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      f.sections_[section];
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) +
                        ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    }
    f.sections_[section].emplace_back(key, value);
  }
  return f;
}

ConfigFile ConfigFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
  auto it = sections_.find(section);
  if (it == sections_.end()) return false;
  for (const auto& [k, v] : it->second) {
    if (k == key) return true;
  }
  return false;
}

std::string ConfigFile::get(const std::string& section,
                            const std::string& key) const {
  auto it = sections_.find(section);
  if (it != sections_.end()) {
    for (const auto& [k, v] : it->second) {
      if (k == key) return v;
    }
  }
  throw ConfigError("missing config key [" + section + "] " + key);
}

std::string ConfigFile::get(const std::string& section, const std::string& key,
                            const std::string& fallback) const {
  return has(section, key) ? get(section, key) : fallback;
}

std::vector<std::string> ConfigFile::get_all(const std::string& section,
                                             const std::string& key) const {
  std::vector<std::string> out;
  auto it = sections_.find(section);
  if (it == sections_.end()) return out;
  for (const auto& [k, v] : it->second) {
    if (k == key) out.push_back(v);
  }
  return out;
}

double ConfigFile::number(const std::string& section,
                          const std::string& key) const {
  std::string s = get(section, key);
  try {
    size_t pos;
    double v = std::stod(s, &pos);
    if (trim(s.substr(pos)).empty()) return v;
  } catch (...) {
  }
  throw ConfigError("config key [" + section + "] " + key +
                    " is not a number: '" + s + "'");
}

double ConfigFile::number(const std::string& section, const std::string& key,
                          double fallback) const {
  return has(section, key) ? number(section, key) : fallback;
}

int ConfigFile::integer(const std::string& section, const std::string& key,
                        int fallback) const {
  if (!has(section, key)) return fallback;
  double v = number(section, key);
  int i = static_cast<int>(v);
  if (i != v) {
    throw ConfigError("config key [" + section + "] " + key +
                      " must be an integer");
  }
  return i;
}

std::vector<double> ConfigFile::numbers(const std::string& section,
                                        const std::string& key) const {
  return split_numbers(get(section, key));
}

namespace {

PeriodicPotential read_periodic(const ConfigFile& f) {
  int d = f.integer("periodic", "dimension", 1);
  std::string family = f.get("periodic", "family", "zero");
  if (family == "zero") return PeriodicPotential::zero(d);
  if (family == "cosine") {
    std::vector<double> amps = f.numbers("periodic", "amplitude");
    if (static_cast<int>(amps.size()) == 1 && d > 1) {
      amps.assign(d, amps[0]);
    }
    return PeriodicPotential::cosine(d, amps);
  }
  if (family == "fourier") {
    int cutoff = f.integer("periodic", "cutoff", -1);
    if (cutoff < 0) throw ConfigError("fourier family needs cutoff >= 0");
    std::map<WaveIndex, Complex> coeffs;
    for (const std::string& line : f.get_all("periodic", "coeff")) {
      std::vector<double> v = split_numbers(line);
      if (static_cast<int>(v.size()) != d + 2) {
        throw ConfigError("coeff needs d integer indices plus re im: '" +
                          line + "'");
      }
      WaveIndex z{0, 0, 0};
      for (int j = 0; j < d; ++j) z[j] = static_cast<int>(v[j]);
      coeffs[z] += Complex(v[d], v[d + 1]);
    }
    return PeriodicPotential(d, cutoff, coeffs);
  }
  throw ConfigError("unknown periodic family '" + family + "'");
}

LocalizedPotential read_localized(const ConfigFile& f, int d) {
  std::string family = f.get("localized", "family", "zero");
  if (family == "zero") return LocalizedPotential::zero(d);
  auto center = [&]() -> Eigen::VectorXd {
    if (!f.has("localized", "center")) return Eigen::VectorXd::Zero(d);
    std::vector<double> c = f.numbers("localized", "center");
    if (static_cast<int>(c.size()) != d) {
      throw ConfigError("defect center needs one value per dimension");
    }
    return Eigen::Map<Eigen::VectorXd>(c.data(), d);
  };
  if (family == "gaussian") {
    return LocalizedPotential::gaussian(d, f.number("localized", "depth"),
                                        f.number("localized", "width"),
                                        center());
  }
  if (family == "sech_squared") {
    return LocalizedPotential::sech_squared(d, f.number("localized", "depth"),
                                            f.number("localized", "width"),
                                            center());
  }
  if (family == "box") {
    return LocalizedPotential::box(d, f.number("localized", "depth"),
                                   f.number("localized", "width"), center());
  }
  if (family == "sum_of_gaussians") {
    std::vector<LocalizedPotential::Component> parts;
    for (const std::string& line : f.get_all("localized", "component")) {
      std::vector<double> v = split_numbers(line);
      if (static_cast<int>(v.size()) != 2 + d) {
        throw ConfigError("component needs depth width center...: '" + line +
                          "'");
      }
      LocalizedPotential::Component c;
      c.depth = v[0];
      c.width = v[1];
      c.center = Eigen::Map<Eigen::VectorXd>(v.data() + 2, d);
      parts.push_back(std::move(c));
    }
    if (parts.empty()) {
      throw ConfigError("sum_of_gaussians needs component lines");
    }
    return LocalizedPotential::sum_of_gaussians(d, std::move(parts));
  }
  throw ConfigError("unknown localized family '" + family + "'");
}

}  // namespace

RunConfig RunConfig::from_file(const ConfigFile& f) {
  RunConfig c;
  c.periodic = read_periodic(f);
  const int d = c.periodic.dimension();
  c.localized = read_localized(f, d);

  c.band = f.integer("edge", "band", 0);
  if (c.band < 0) throw ConfigError("band index must be >= 0");
  c.k_star = Eigen::VectorXd::Zero(d);
  if (f.has("edge", "k_star")) {
    std::vector<double> k = f.numbers("edge", "k_star");
    if (static_cast<int>(k.size()) != d) {
      throw ConfigError("k_star needs one component per dimension");
    }
    c.k_star = Eigen::Map<Eigen::VectorXd>(k.data(), d);
  }

  c.pw_cutoff = f.integer("solver", "pw_cutoff", d >= 2 ? 10 : 16);
  if (c.pw_cutoff < 1) throw ConfigError("pw_cutoff must be >= 1");
  c.hessian_step = f.number("solver", "hessian_step", 1e-3);
  if (c.hessian_step <= 0.0) throw ConfigError("hessian_step must be > 0");
  c.n_bands = f.integer("solver", "n_bands", 8);
  c.k_points = f.integer("solver", "k_points", 128);
  if (c.n_bands < 1 || c.k_points < 2) {
    throw ConfigError("n_bands >= 1 and k_points >= 2 required");
  }

  c.box_half_width =
      f.number("homogenized", "half_width", d >= 2 ? 12.0 : 20.0);
  c.box_spacing = f.number("homogenized", "spacing", d >= 2 ? 0.1 : 0.05);
  c.n_eigs = f.integer("homogenized", "n_eigs", 2);
  if (c.n_eigs < 1) throw ConfigError("n_eigs must be >= 1");
  if (f.has("homogenized", "tensor_override")) {
    std::vector<double> a = f.numbers("homogenized", "tensor_override");
    if (static_cast<int>(a.size()) != d * d) {
      throw ConfigError("tensor_override needs d*d row-major entries");
    }
    c.tensor_override =
        Eigen::Map<Eigen::MatrixXd>(a.data(), d, d).transpose();
  }

  c.expansion_order = f.integer("expansion", "order", 4);
  if (c.expansion_order < 2 || c.expansion_order > 6) {
    throw ConfigError("expansion order must lie in 2..6");
  }

  c.study.n_per_cell = f.integer("validator", "points_per_cell", 64);
  c.study.fd_order = f.integer("validator", "fd_order", 4);
  c.study.domain_scale = f.number("validator", "domain_scale", 6.0);
  c.study.memory_budget = static_cast<Eigen::Index>(
      f.number("validator", "memory_budget", 6e6));
  if (f.has("validator", "epsilons")) {
    c.eps_list = f.numbers("validator", "epsilons");
    for (size_t i = 0; i < c.eps_list.size(); ++i) {
      if (c.eps_list[i] <= 0.0) throw ConfigError("epsilons must be positive");
      if (i > 0 && c.eps_list[i] >= c.eps_list[i - 1]) {
        throw ConfigError("epsilons must be strictly decreasing");
      }
    }
  }

  c.tol.grad = f.number("tolerances", "grad", 1e-6);
  c.tol.solvability = f.number("tolerances", "solvability", 1e-8);
  c.tol.definiteness = f.number("tolerances", "definiteness", 1e-8);
  if (c.tol.grad <= 0.0 || c.tol.solvability <= 0.0 ||
      c.tol.definiteness <= 0.0) {
    throw ConfigError("all tolerances must be positive");
  }
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  return from_file(ConfigFile::load(path));
}

}  // namespace bandgap
