#pragma once
// Plain-text artifact formats: CSV (UTF-8, LF, header row, 17 significant
// digits) and a coordinate-format matrix dump.

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace nlv {

std::string format_double(double v);

class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path);

  CsvWriter& header(std::initializer_list<std::string_view> names);
  CsvWriter& header(const std::vector<std::string>& names);
  CsvWriter& field(double v);
  CsvWriter& field(int v);
  CsvWriter& field(long v);
  CsvWriter& field(long long v);
  CsvWriter& field(std::size_t v);
  CsvWriter& field(std::string_view v);
  CsvWriter& field(const char* v) { return field(std::string_view(v)); }
  CsvWriter& field(bool v) { return field(v ? std::string_view("true") : std::string_view("false")); }
  void end_row();

 private:
  void sep();
  std::ofstream out_;
  bool row_started_ = false;
};

/// Minimal reader for the files written above (no quoting).
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

}  // namespace nlv
