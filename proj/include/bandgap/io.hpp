#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "bandgap/effective_mass.hpp"
#include "bandgap/homogenized.hpp"
#include "bandgap/multiscale.hpp"
#include "bandgap/validator.hpp"

namespace bandgap {

using Json = nlohmann::ordered_json;

// CSV with one header line; every value printed with full double precision.
void write_csv(const std::string& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

std::string format_full(double v);

Json to_json(const BandEdge& edge);
Json to_json(const GapInterval& gap);
Json to_json(const EffectiveMassTensor& t);
Json to_json(const HypothesisReport& r);
Json to_json(const HomogenizedEigenpair& p);
Json to_json(const MultiscaleExpansion& e);
Json to_json(const ConvergenceReport& r);

void write_json(const std::string& path, const Json& j);

}  // namespace bandgap
