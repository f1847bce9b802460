#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace mkv::exp {

enum class ColumnType { real, integer, text };

struct Column {
  std::string name;
  ColumnType type = ColumnType::real;
};

using CsvSchema = std::vector<Column>;
using CsvValue = std::variant<double, std::int64_t, std::string>;
using CsvRow = std::vector<CsvValue>;

/// Locale-independent, 17 significant digits (round-trips bit-exactly).
std::string format_real(double v);

/// Header plus rows, LF line endings. SchemaViolation on arity or type
/// mismatch (and text containing separators); IoError on write failure.
void emit_csv(const std::vector<CsvRow>& rows, const CsvSchema& schema,
              const std::filesystem::path& path);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable parse_csv(const std::filesystem::path& path);
double parse_real(const std::string& field);  // SchemaViolation on malformed input

}  // namespace mkv::exp
