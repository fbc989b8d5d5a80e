#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mvproto/dataset.hpp"

namespace mvproto {

/// Parsed header of a UEA-style `.ts` file.
struct TsHeader {
  std::string problem_name;
  int dimensions = 0;           // 0 = not declared, inferred from data
  Eigen::Index series_length = -1;  // -1 = not declared, inferred from data
  bool equal_length = true;
  bool univariate = false;
  bool timestamps = false;
  std::vector<std::string> class_labels;
  bool has_class_labels = false;
};

/// Parses the `.ts` text format: `@`-prefixed header directives, then
/// `@data` lines with `:`-separated dimensions of comma-separated values and
/// a trailing class label. Labels map to dense integers in declaration
/// order. Errors carry 1-based line numbers (and columns for bad numbers).
Dataset parse_ts(std::istream& input, TsHeader* header_out = nullptr);

/// Writes a file parse_ts accepts; numbers in shortest round-trip form.
void write_ts(const Dataset& data, std::ostream& output,
              const std::string& problem_name = "mvproto");

Dataset read_ts_file(const std::filesystem::path& path, TsHeader* header_out = nullptr);
void write_ts_file(const Dataset& data, const std::filesystem::path& path,
                   const std::string& problem_name = "mvproto");

}  // namespace mvproto
