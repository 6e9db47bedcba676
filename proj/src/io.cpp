#include "pilot/io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string_view>
#include <vector>

namespace pilot {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& s, int line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InvalidInput("design CSV line " + std::to_string(line_no) + ": cannot parse '" + s + "' as a number");
  }
}

}  // namespace

Design read_design_csv(std::istream& in) {
  std::string line;
  int line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_csv(line);
      break;
    }
  }
  if (header.empty()) throw InvalidInput("design CSV is empty");

  const bool has_count = header.back() == "count";
  const int d = static_cast<int>(header.size()) - (has_count ? 1 : 0);
  if (d < 1) throw InvalidInput("design CSV header names no coordinate columns");

  std::vector<double> coords;
  std::vector<int> counts;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw InvalidInput("design CSV line " + std::to_string(line_no) + ": expected " +
                         std::to_string(header.size()) + " fields");
    }
    for (int j = 0; j < d; ++j) coords.push_back(parse_double(cells[j], line_no));
    if (has_count) {
      const double c = parse_double(cells.back(), line_no);
      if (c != static_cast<int>(c)) throw InvalidInput("design CSV counts must be integers");
      counts.push_back(static_cast<int>(c));
    } else {
      counts.push_back(1);
    }
  }
  if (counts.empty()) throw InvalidInput("design CSV contains no points");

  PointMatrix pts(static_cast<Eigen::Index>(counts.size()), d);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    for (int j = 0; j < d; ++j) pts(i, j) = coords[static_cast<std::size_t>(i * d + j)];
  }
  return Design(std::move(pts), std::move(counts));
}

Design read_design_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open design file '" + path + "'");
  return read_design_csv(in);
}

void write_design_csv(std::ostream& out, const Design& design) {
  for (int j = 0; j < design.dim(); ++j) out << 'x' << (j + 1) << ',';
  out << "count\n";
  out << std::setprecision(17);
  for (int i = 0; i < design.support_size(); ++i) {
    for (int j = 0; j < design.dim(); ++j) out << design.points()(i, j) << ',';
    out << design.counts()[i] << '\n';
  }
}

void write_design_csv_file(const std::string& path, const Design& design) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write design file '" + path + "'");
  write_design_csv(out, design);
}

ModelSpec model_from_json(const nlohmann::json& j) {
  try {
    const Link link = parse_link(j.at("link").get<std::string>());
    std::vector<Monomial> basis;
    for (const auto& term : j.at("basis")) basis.push_back({term.get<std::vector<int>>()});
    const auto b = j.at("beta").get<std::vector<double>>();
    return ModelSpec(link, std::move(basis), Eigen::Map<const Vector>(b.data(), static_cast<Eigen::Index>(b.size())));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed model JSON: ") + e.what());
  }
}

nlohmann::json model_to_json(const ModelSpec& spec) {
  nlohmann::json basis = nlohmann::json::array();
  for (const auto& m : spec.basis()) basis.push_back(m.exponents);
  return {{"link", std::string(to_string(spec.link()))},
          {"basis", basis},
          {"beta", std::vector<double>(spec.beta().data(), spec.beta().data() + spec.beta().size())}};
}

ModelSpec read_model_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("model file '" + path + "' is not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace pilot
