#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "mvproto/errors.hpp"
#include "mvproto/ts_format.hpp"

using namespace mvproto;

namespace {

std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(MVPROTO_FIXTURE_DIR) / name;
}

Dataset random_dataset(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d_dist(1, 4), n_dist(1, 12), c_dist(2, 4), s_dist(0, 9);
  std::uniform_real_distribution<double> v_dist(-1e3, 1e3);
  std::uniform_int_distribution<int> kind(0, 3);
  const int d = d_dist(rng);
  const Eigen::Index n = n_dist(rng);
  const int classes = c_dist(rng);
  std::vector<std::string> names;
  for (int c = 0; c < classes; ++c) names.push_back("L" + std::to_string(c));
  Dataset data(d, n, names);
  const int samples = s_dist(rng);
  std::uniform_int_distribution<int> label(0, classes - 1);
  for (int i = 0; i < samples; ++i) {
    Sample s;
    s.label = label(rng);
    for (int k = 0; k < d; ++k) {
      Eigen::VectorXd v(n);
      for (Eigen::Index t = 0; t < n; ++t) {
        switch (kind(rng)) {
          case 0: v[t] = v_dist(rng); break;
          case 1: v[t] = v_dist(rng) * 1e-8; break;           // tiny magnitudes
          case 2: v[t] = std::round(v_dist(rng)); break;       // integers
          default: v[t] = v_dist(rng) * 1e12; break;           // exponent form
        }
      }
      s.variables.push_back(v);
    }
    data.add(std::move(s));
  }
  return data;
}

}  // namespace

TEST_CASE("two-line fixture parses to the expected dataset") {
  TsHeader header;
  Dataset data = read_ts_file(fixture("tiny.ts"), &header);
  CHECK(data.dimensions() == 2);
  CHECK(data.length() == 3);
  CHECK(data.size() == 2);
  CHECK(data.class_names() == std::vector<std::string>{"a", "b"});
  CHECK(header.problem_name == "tiny");
  CHECK(data.sample(0).label == 0);
  CHECK(data.sample(1).label == 1);
  CHECK(data.sample(0).variables[1][2] == 6.0);
  CHECK(data.sample(1).variables[0][2] == doctest::Approx(3e-2));
}

TEST_CASE("epilepsy-shaped header yields d=3 and the four activity classes") {
  TsHeader header;
  Dataset data = read_ts_file(fixture("epilepsy_header.ts"), &header);
  CHECK(data.dimensions() == 3);
  CHECK(data.classes() == 4);
  CHECK(data.class_names() ==
        std::vector<std::string>{"EPILEPSY", "WALKING", "RUNNING", "SAWING"});
  CHECK(header.series_length == 206);
  CHECK(data.size() == 8);
}

TEST_CASE("malformed inputs produce line-numbered parse errors") {
  auto expect_parse_error = [](const std::string& name, std::size_t line) {
    try {
      read_ts_file(fixture(name));
      FAIL("expected ParseError for ", name);
    } catch (const ParseError& e) {
      CHECK(e.line() == line);
      CHECK(std::string(e.what()).find("line " + std::to_string(line)) != std::string::npos);
    }
  };
  expect_parse_error("data_before_data.ts", 3);
  expect_parse_error("ragged.ts", 6);
  expect_parse_error("unknown_label.ts", 5);
  expect_parse_error("non_numeric.ts", 5);

  try {
    read_ts_file(fixture("non_numeric.ts"));
  } catch (const ParseError& e) {
    CHECK(e.column() == 3);  // "1,x7..." -> offending token starts at column 3
  }
}

TEST_CASE("windows line endings and comments are tolerated; length can be inferred") {
  Dataset crlf = read_ts_file(fixture("crlf.ts"));
  CHECK(crlf.size() == 1);
  CHECK(crlf.length() == 2);

  TsHeader header;
  Dataset inferred = read_ts_file(fixture("infer_length.ts"), &header);
  CHECK(inferred.length() == 4);
  CHECK(header.series_length == 4);
  CHECK(inferred.size() == 2);
}

TEST_CASE("label mapping follows declaration order") {
  std::istringstream in(
      "@dimensions 1\n@classLabel true z y x\n@data\n1:x\n2:z\n3:y\n");
  Dataset data = parse_ts(in);
  CHECK(data.sample(0).label == 2);
  CHECK(data.sample(1).label == 0);
  CHECK(data.sample(2).label == 1);
}

TEST_CASE("write then parse round-trips 100 generated datasets to 1e-12") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    Dataset data = random_dataset(rng);
    std::stringstream buffer;
    write_ts(data, buffer, "roundtrip");
    Dataset back = parse_ts(buffer);
    REQUIRE(back.size() == data.size());
    REQUIRE(back.dimensions() == data.dimensions());
    CHECK(back.class_names() == data.class_names());
    for (Eigen::Index i = 0; i < data.size(); ++i) {
      CHECK(back.sample(i).label == data.sample(i).label);
      for (int k = 0; k < data.dimensions(); ++k) {
        const auto& a = data.sample(i).variables[static_cast<std::size_t>(k)];
        const auto& b = back.sample(i).variables[static_cast<std::size_t>(k)];
        REQUIRE(a.size() == b.size());
        for (Eigen::Index t = 0; t < a.size(); ++t) {
          const double scale = std::max(1.0, std::abs(a[t]));
          CHECK(std::abs(a[t] - b[t]) <= 1e-12 * scale);
        }
      }
    }
  }
}

TEST_CASE("empty dataset writes a header-only file that parses back") {
  Dataset empty(2, 5, {"a", "b"});
  std::stringstream buffer;
  write_ts(empty, buffer);
  std::string text = buffer.str();
  CHECK(text.find("@data\n") != std::string::npos);
  CHECK(text.back() == '\n');
  Dataset back = parse_ts(buffer);
  CHECK(back.size() == 0);
  CHECK(back.dimensions() == 2);
  CHECK(back.length() == 5);
}

TEST_CASE("single sample, single dimension produces a two-field data line") {
  Dataset data(1, 3, {"only"});
  data.add({{(Eigen::VectorXd(3) << 1, 2, 3).finished()}, 0});
  std::stringstream buffer;
  write_ts(data, buffer);
  std::string line;
  std::string last;
  while (std::getline(buffer, line))
    if (!line.empty()) last = line;
  CHECK(last == "1,2,3:only");
  CHECK(std::count(last.begin(), last.end(), ':') == 1);
}

TEST_CASE("timestamped files and missing class labels are rejected") {
  std::istringstream ts("@dimensions 1\n@timeStamps true\n@classLabel true a\n@data\n");
  CHECK_THROWS_AS(parse_ts(ts), ParseError);
  std::istringstream nolabels("@dimensions 1\n@classLabel false\n@data\n1,2:a\n");
  CHECK_THROWS_AS(parse_ts(nolabels), ParseError);
  std::istringstream nodata("@dimensions 1\n@classLabel true a\n");
  CHECK_THROWS_AS(parse_ts(nodata), ParseError);
}
