#include <fstream>
#include <sstream>

#include "smad/error.hpp"
#include "smad/features/extract.hpp"
#include "smad/util.hpp"

namespace smad::features {

void write_vectors_csv(const std::filesystem::path& path, const std::vector<FeatureRow>& rows) {
  std::ostringstream out;
  std::size_t dim = rows.empty() ? 0 : rows.front().vector.dim();
  out << "id,method";
  for (std::size_t i = 0; i < dim; ++i) out << ",v" << i;
  out << "\n";
  for (const auto& row : rows) {
    if (row.vector.dim() != dim) throw UsageError("feature rows have inconsistent dimensions");
    out << row.id << ',' << row.vector.method;
    for (double v : row.vector.values) out << ',' << format_double(v);
    out << "\n";
  }
  write_text_file(path, out.str());
}

std::vector<FeatureRow> read_vectors_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open feature file " + path.string());
  std::vector<FeatureRow> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(trim(line), ',');
    if (line_no == 1) {
      if (fields.size() < 2 || fields[0] != "id" || fields[1] != "method") {
        throw DataError(path.string() + ": missing 'id,method,...' header");
      }
      dim = fields.size() - 2;
      continue;
    }
    if (fields.size() != dim + 2) {
      throw DataError(path.string() + " line " + std::to_string(line_no) + ": expected " +
                      std::to_string(dim + 2) + " fields");
    }
    FeatureRow row;
    row.id = fields[0];
    row.vector.method = fields[1];
    row.vector.values.reserve(dim);
    try {
      for (std::size_t i = 2; i < fields.size(); ++i) row.vector.values.push_back(parse_double(fields[i]));
    } catch (const DataError& e) {
      throw DataError(path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace smad::features
