#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "pilot/core_model.hpp"

namespace pilot {

/// Design CSV: header `x1,...,xd[,count]`, one support point per row.
Design read_design_csv(std::istream& in);
Design read_design_csv_file(const std::string& path);
void write_design_csv(std::ostream& out, const Design& design);
void write_design_csv_file(const std::string& path, const Design& design);

/// ModelSpec JSON: {"link": ..., "basis": [[e11,...,e1d],...], "beta": [...]}.
ModelSpec model_from_json(const nlohmann::json& j);
nlohmann::json model_to_json(const ModelSpec& spec);
ModelSpec read_model_json_file(const std::string& path);

nlohmann::json matrix_to_json(const Matrix& m);

}  // namespace pilot
