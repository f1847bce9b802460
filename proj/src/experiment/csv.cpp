#include "mkv/experiment/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "mkv/errors.hpp"

namespace mkv::exp {

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  if (ec != std::errc()) throw SchemaViolation("cannot format real");
  return std::string(buf, ptr);
}

void emit_csv(const std::vector<CsvRow>& rows, const CsvSchema& schema,
              const std::filesystem::path& path) {
  if (schema.empty()) throw SchemaViolation("schema has no columns");
  std::string out;
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (schema[c].name.find_first_of(",\n\r\"") != std::string::npos) {
      throw SchemaViolation("column name " + schema[c].name + " contains a separator");
    }
    out += (c ? "," : "") + schema[c].name;
  }
  out += '\n';
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != schema.size()) {
      throw SchemaViolation("row " + std::to_string(r) + " has " + std::to_string(row.size()) +
                            " fields, schema has " + std::to_string(schema.size()));
    }
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      const auto& v = row[c];
      switch (schema[c].type) {
        case ColumnType::real:
          if (const auto* d = std::get_if<double>(&v)) {
            out += format_real(*d);
            continue;
          }
          break;
        case ColumnType::integer:
          if (const auto* i = std::get_if<std::int64_t>(&v)) {
            out += std::to_string(*i);
            continue;
          }
          break;
        case ColumnType::text:
          if (const auto* s = std::get_if<std::string>(&v)) {
            if (s->find_first_of(",\n\r\"") != std::string::npos) {
              throw SchemaViolation("text field contains a separator: " + *s);
            }
            out += *s;
            continue;
          }
          break;
      }
      throw SchemaViolation("row " + std::to_string(r) + " column " + schema[c].name + " has the wrong type");
    }
    out += '\n';
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  f.close();
  if (!f) throw IoError("write to " + path.string() + " failed");
}

CsvTable parse_csv(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
  };
  if (!std::getline(f, line)) throw SchemaViolation("missing header in " + path.string());
  t.header = split(line);
  while (std::getline(f, line)) {
    auto row = split(line);
    if (row.size() != t.header.size()) throw SchemaViolation("ragged row in " + path.string());
    t.rows.push_back(std::move(row));
  }
  return t;
}

double parse_real(const std::string& field) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw SchemaViolation("not a real: " + field);
  }
  return v;
}

}  // namespace mkv::exp
