#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace nmscale {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest round-trip decimal form, '.' separator, no locale; "inf", "-inf", "nan".
std::string format_double(double x);

/// Finite doubles as numbers, non-finite ones as the strings above.
nlohmann::json json_number(double x);

/// One RFC-4180 style record ending in "\n"; fields quoted when needed.
std::string csv_row(const std::vector<std::string>& fields);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<std::string> row);
  std::string str() const;
  std::size_t rows() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Parses the CSV subset written by CsvTable (quoted fields allowed).
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

/// Pretty JSON with a trailing newline; key order is sorted, so output is stable.
std::string dump_json(const nlohmann::json& j);

}  // namespace nmscale
