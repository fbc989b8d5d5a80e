#include "mvproto/ts_format.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "mvproto/errors.hpp"

namespace mvproto {

namespace {

std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

bool parse_bool(const std::string& value, std::size_t line, const std::string& key) {
  const std::string v = to_lower(trim(value));
  if (v == "true") return true;
  if (v == "false") return false;
  throw ParseError(line, key + " expects true or false, got '" + value + "'");
}

/// Splits on a delimiter, recording the 1-based column of each token start.
std::vector<std::pair<std::string, std::size_t>> split_with_columns(const std::string& s,
                                                                    char delim) {
  std::vector<std::pair<std::string, std::size_t>> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(delim, start);
    out.emplace_back(s.substr(start, pos - start), start + 1);
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_value(const std::string& token, std::size_t line, std::size_t column) {
  const std::string t = trim(token);
  if (t.empty()) throw ParseError(line, column, "empty value");
  double value = 0.0;
  const auto result = std::from_chars(t.data(), t.data() + t.size(), value);
  if (result.ec != std::errc() || result.ptr != t.data() + t.size())
    throw ParseError(line, column, "non-numeric value '" + t + "'");
  return value;
}

void write_double(std::ostream& os, double v) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), v);
  os.write(buffer, result.ptr - buffer);
}

}  // namespace

Dataset parse_ts(std::istream& input, TsHeader* header_out) {
  TsHeader header;
  bool in_data = false;
  std::size_t line_no = 0;
  std::string raw;

  std::vector<Sample> samples;
  int dims = 0;              // 0 until known
  Eigen::Index length = -1;  // -1 until known

  while (std::getline(input, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;

    if (!in_data) {
      if (line.front() != '@')
        throw ParseError(line_no, "data encountered before @data");
      const std::size_t space = line.find_first_of(" \t");
      const std::string key = to_lower(line.substr(0, space));
      const std::string rest = space == std::string::npos ? "" : trim(line.substr(space + 1));
      if (key == "@data") {
        if (!rest.empty()) throw ParseError(line_no, "@data takes no argument");
        if (!header.has_class_labels || header.class_labels.empty())
          throw ParseError(line_no, "@classLabel with label names is required before @data");
        if (header.timestamps)
          throw ParseError(line_no, "timestamped series are not supported");
        in_data = true;
        if (header.univariate && header.dimensions == 0) header.dimensions = 1;
        if (header.univariate && header.dimensions > 1)
          throw ParseError(line_no, "@univariate true conflicts with @dimensions " +
                                        std::to_string(header.dimensions));
        dims = header.dimensions;
        length = header.series_length;
        continue;
      }
      if (key == "@problemname") {
        header.problem_name = rest;
      } else if (key == "@dimension" || key == "@dimensions") {
        try {
          header.dimensions = std::stoi(rest);
        } catch (const std::exception&) {
          throw ParseError(line_no, "@dimensions expects an integer, got '" + rest + "'");
        }
        if (header.dimensions < 1) throw ParseError(line_no, "@dimensions must be at least 1");
      } else if (key == "@serieslength") {
        try {
          header.series_length = std::stol(rest);
        } catch (const std::exception&) {
          throw ParseError(line_no, "@seriesLength expects an integer, got '" + rest + "'");
        }
        if (header.series_length < 0) throw ParseError(line_no, "@seriesLength must be nonnegative");
      } else if (key == "@equallength") {
        header.equal_length = parse_bool(rest, line_no, "@equalLength");
      } else if (key == "@univariate") {
        header.univariate = parse_bool(rest, line_no, "@univariate");
      } else if (key == "@timestamps") {
        header.timestamps = parse_bool(rest, line_no, "@timeStamps");
      } else if (key == "@classlabel") {
        std::istringstream fields(rest);
        std::string flag;
        fields >> flag;
        header.has_class_labels = parse_bool(flag, line_no, "@classLabel");
        std::string name;
        while (fields >> name) header.class_labels.push_back(name);
        if (header.has_class_labels && header.class_labels.empty())
          throw ParseError(line_no, "@classLabel true requires at least one label name");
      } else {
        // Unrecognized directives (e.g. @missing) are tolerated; archives vary.
      }
      continue;
    }

    // Data line: dim1:dim2:...:label
    const auto fields = split_with_columns(line, ':');
    if (fields.size() < 2)
      throw ParseError(line_no, "expected ':'-separated dimensions and a class label");
    const int line_dims = static_cast<int>(fields.size()) - 1;
    if (dims == 0) dims = line_dims;
    if (line_dims != dims)
      throw ParseError(line_no, "expected " + std::to_string(dims) + " dimensions, got " +
                                    std::to_string(line_dims));

    Sample sample;
    sample.variables.resize(static_cast<std::size_t>(dims));
    for (int k = 0; k < dims; ++k) {
      const auto& [field, field_col] = fields[static_cast<std::size_t>(k)];
      const auto tokens = split_with_columns(field, ',');
      const auto values = static_cast<Eigen::Index>(tokens.size());
      if (length < 0) length = values;
      if (values != length)
        throw ParseError(line_no, "dimension " + std::to_string(k + 1) + " has " +
                                      std::to_string(values) + " values, expected " +
                                      std::to_string(length));
      Eigen::VectorXd series(values);
      for (Eigen::Index t = 0; t < values; ++t) {
        const auto& [token, token_col] = tokens[static_cast<std::size_t>(t)];
        series[t] = parse_value(token, line_no, field_col + token_col - 1);
      }
      sample.variables[static_cast<std::size_t>(k)] = std::move(series);
    }

    const std::string label_name = trim(fields.back().first);
    const auto it =
        std::find(header.class_labels.begin(), header.class_labels.end(), label_name);
    if (it == header.class_labels.end())
      throw ParseError(line_no, "unknown class label '" + label_name + "'");
    sample.label = static_cast<int>(it - header.class_labels.begin());
    samples.push_back(std::move(sample));
  }

  if (!in_data) throw ParseError(line_no == 0 ? 1 : line_no, "missing @data section");
  if (dims == 0) dims = std::max(1, header.dimensions);
  if (length < 0) length = std::max<Eigen::Index>(header.series_length, 0);

  Dataset data(dims, length, header.class_labels);
  for (auto& s : samples) data.add(std::move(s));
  if (header_out) {
    header.dimensions = dims;
    header.series_length = length;
    *header_out = header;
  }
  return data;
}

void write_ts(const Dataset& data, std::ostream& output, const std::string& problem_name) {
  output << "@problemName " << problem_name << '\n';
  output << "@timeStamps false\n";
  output << "@univariate " << (data.dimensions() == 1 ? "true" : "false") << '\n';
  output << "@dimensions " << data.dimensions() << '\n';
  output << "@equalLength true\n";
  output << "@seriesLength " << data.length() << '\n';
  output << "@classLabel true";
  for (const auto& name : data.class_names()) output << ' ' << name;
  output << '\n';
  output << "@data\n";
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const Sample& s = data.sample(i);
    for (int k = 0; k < data.dimensions(); ++k) {
      const auto& v = s.variables[static_cast<std::size_t>(k)];
      for (Eigen::Index t = 0; t < v.size(); ++t) {
        if (t) output << ',';
        write_double(output, v[t]);
      }
      output << ':';
    }
    output << data.class_names()[static_cast<std::size_t>(s.label)] << '\n';
  }
  if (!output) throw IoError("write_ts: stream failure");
}

Dataset read_ts_file(const std::filesystem::path& path, TsHeader* header_out) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return parse_ts(in, header_out);
}

void write_ts_file(const Dataset& data, const std::filesystem::path& path,
                   const std::string& problem_name) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  write_ts(data, out, problem_name);
}

}  // namespace mvproto
