#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "pilot/study.hpp"

namespace pilot {

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void close_output(std::ofstream& out, const std::filesystem::path& path) {
  out.close();
  if (!out) throw std::runtime_error("error while writing " + path.string());
}

std::filesystem::path prepare_dir(const std::string& dir) {
  const std::filesystem::path root(dir);
  std::error_code ec;
  std::filesystem::create_directories(root, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir + ": " + ec.message());
  return root;
}

void write_rest(const StudyResult& result, const std::filesystem::path& root) {
  const auto summary_csv = root / "summary.csv";
  auto out = open_output(summary_csv);
  write_summary(out, result, ReportFormat::Csv);
  close_output(out, summary_csv);

  const auto summary_json = root / "summary.json";
  out = open_output(summary_json);
  write_summary(out, result, ReportFormat::Json);
  close_output(out, summary_json);

  const auto bounds = root / "bounds.json";
  out = open_output(bounds);
  out << bounds_to_json(result).dump(2) << '\n';
  close_output(out, bounds);

  const auto manifest = root / "manifest.json";
  out = open_output(manifest);
  out << manifest_json(result).dump(2) << '\n';
  close_output(out, manifest);
}

}  // namespace

void emit_report(const StudyResult& result, const std::string& dir) {
  const auto root = prepare_dir(dir);
  const auto rows = root / "rows.csv";
  auto out = open_output(rows);
  write_rows(out, result.rows, ReportFormat::Csv);
  close_output(out, rows);
  write_rest(result, root);
}

StudyResult run_and_emit(const StudyConfig& config, const std::string& dir) {
  const auto root = prepare_dir(dir);
  const auto rows = root / "rows.csv";
  auto out = open_output(rows);
  write_row_header(out);
  StudyResult result = run_study(config, [&](const std::vector<StudyRow>& block) {
    for (const auto& r : block) write_row(out, r);
  });
  close_output(out, rows);
  write_rest(result, root);
  return result;
}

}  // namespace pilot
