#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace papnf::cli {

/// RFC 4180: fields with commas, quotes or line breaks are quoted, embedded
/// quotes doubled, records terminated by CRLF.
std::string csv_field(std::string_view text);
std::string csv_record(const std::vector<std::string>& fields);
/// Shortest round-trip decimal form.
std::string format_number(double value);

class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path);
  void row(const std::vector<std::string>& fields);

 private:
  std::ofstream out_;
};

}  // namespace papnf::cli
