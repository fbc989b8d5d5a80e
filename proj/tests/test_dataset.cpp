#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "mvproto/dataset.hpp"
#include "mvproto/errors.hpp"

using namespace mvproto;

namespace {

Dataset toy_dataset(int classes, int per_class, int d = 2, Eigen::Index n = 4,
                    std::uint64_t seed = 3) {
  std::vector<std::string> names;
  for (int c = 0; c < classes; ++c) names.push_back("c" + std::to_string(c));
  Dataset data(d, n, names);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      Sample s;
      s.label = c;
      for (int k = 0; k < d; ++k) {
        Eigen::VectorXd v(n);
        for (Eigen::Index t = 0; t < n; ++t) v[t] = dist(rng) + c;
        s.variables.push_back(v);
      }
      data.add(std::move(s));
    }
  }
  return data;
}

double variable_mean(const Dataset& data, int k) {
  double sum = 0.0;
  for (const auto& s : data.samples()) sum += s.variables[static_cast<std::size_t>(k)].sum();
  return sum / (static_cast<double>(data.size()) * static_cast<double>(data.length()));
}

double variable_std(const Dataset& data, int k) {
  const double mean = variable_mean(data, k);
  double sq = 0.0;
  for (const auto& s : data.samples())
    sq += (s.variables[static_cast<std::size_t>(k)].array() - mean).square().sum();
  return std::sqrt(sq / (static_cast<double>(data.size()) * static_cast<double>(data.length())));
}

}  // namespace

TEST_CASE("normalization zeroes the mean and unit-scales each variable") {
  Dataset data(1, 3, {"a", "b"});
  Sample s0{{(Eigen::VectorXd(3) << 1, 2, 3).finished()}, 0};
  Sample s1{{(Eigen::VectorXd(3) << 2, 2, 2).finished()}, 1};
  data.add(s0);
  data.add(s1);
  normalize(data, {});
  CHECK(std::abs(variable_mean(data, 0)) < 1e-9);
  CHECK(std::abs(variable_std(data, 0) - 1.0) < 1e-6);
  REQUIRE(data.normalization().has_value());
  CHECK(data.normalization()->mean[0] == doctest::Approx(2.0));
}

TEST_CASE("constant variables normalize to zeros") {
  Dataset data(1, 3, {"a", "b"});
  data.add({{Eigen::VectorXd::Constant(3, 5.0)}, 0});
  data.add({{Eigen::VectorXd::Constant(3, 5.0)}, 1});
  normalize(data, {});
  for (const auto& s : data.samples()) CHECK(s.variables[0].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("other splits use training statistics, not their own") {
  Dataset train(1, 2, {"a", "b"});
  train.add({{(Eigen::VectorXd(2) << 0, 0).finished()}, 0});
  train.add({{(Eigen::VectorXd(2) << 2, 2).finished()}, 1});
  Dataset test(1, 2, {"a", "b"});
  test.add({{(Eigen::VectorXd(2) << 10, 10).finished()}, 0});
  normalize(train, {&test});
  // train stats: mean 1, std 1 -> test values (10-1)/1 = 9
  CHECK(test.sample(0).variables[0][0] == doctest::Approx(9.0));
  REQUIRE(test.normalization().has_value());
  CHECK(test.normalization()->mean[0] == doctest::Approx(1.0));
}

TEST_CASE("normalization is idempotent within 1e-9") {
  Dataset data = toy_dataset(3, 10);
  normalize(data, {});
  Dataset again = data;
  normalize(again, {});
  for (Eigen::Index i = 0; i < data.size(); ++i)
    for (int k = 0; k < data.dimensions(); ++k)
      CHECK((data.sample(i).variables[static_cast<std::size_t>(k)] -
             again.sample(i).variables[static_cast<std::size_t>(k)])
                .cwiseAbs()
                .maxCoeff() < 1e-9);
}

TEST_CASE("normalize rejects an empty training split") {
  Dataset empty(1, 3, {"a"});
  CHECK_THROWS_AS(normalize(empty, {}), DataError);
}

TEST_CASE("stratified split: exact per-class proportions on the benchmark shape") {
  Dataset data = toy_dataset(64, 100, 1, 4);
  auto [train, test] = stratified_split(data, 0.2, 5);
  CHECK(train.size() == 64 * 80);
  CHECK(test.size() == 64 * 20);
  std::vector<int> per_class(64, 0);
  for (const auto& s : test.samples()) per_class[static_cast<std::size_t>(s.label)]++;
  for (int c : per_class) CHECK(c == 20);
}

TEST_CASE("stratified split determinism, disjointness and exhaustiveness") {
  Dataset data = toy_dataset(5, 9);
  for (std::uint64_t seed : {1ULL, 2ULL, 99ULL}) {
    for (double fraction : {0.2, 0.33, 0.5}) {
      auto [tr1, te1] = stratified_split(data, fraction, seed);
      auto [tr2, te2] = stratified_split(data, fraction, seed);
      REQUIRE(tr1.size() == tr2.size());
      bool identical = true;
      for (Eigen::Index i = 0; i < tr1.size(); ++i)
        identical = identical && tr1.sample(i).variables[0] == tr2.sample(i).variables[0] &&
                    tr1.sample(i).label == tr2.sample(i).label;
      CHECK(identical);
      CHECK(tr1.size() + te1.size() == data.size());

      // union equals input: match up multisets of first-variable fingerprints
      std::multiset<double> original, recombined;
      for (const auto& s : data.samples()) original.insert(s.variables[0].sum());
      for (const auto& s : tr1.samples()) recombined.insert(s.variables[0].sum());
      for (const auto& s : te1.samples()) recombined.insert(s.variables[0].sum());
      CHECK(original == recombined);

      // proportions within one sample per class
      std::vector<int> test_count(5, 0), total(5, 0);
      for (const auto& s : te1.samples()) test_count[static_cast<std::size_t>(s.label)]++;
      for (const auto& s : data.samples()) total[static_cast<std::size_t>(s.label)]++;
      for (int c = 0; c < 5; ++c)
        CHECK(std::abs(test_count[static_cast<std::size_t>(c)] -
                       fraction * total[static_cast<std::size_t>(c)]) <= 1.0);
    }
  }
}

TEST_CASE("stratified split rejects single-sample classes and bad fractions") {
  Dataset data(1, 2, {"a", "b"});
  data.add({{Eigen::VectorXd::Zero(2)}, 0});
  data.add({{Eigen::VectorXd::Zero(2)}, 0});
  data.add({{Eigen::VectorXd::Zero(2)}, 1});
  CHECK_THROWS_AS(stratified_split(data, 0.5, 1), DataError);
  Dataset ok = toy_dataset(2, 4);
  CHECK_THROWS_AS(stratified_split(ok, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(stratified_split(ok, 1.0, 1), ConfigError);
}

TEST_CASE("pair sampling balance, flags and determinism") {
  Dataset data = toy_dataset(4, 6);
  for (Eigen::Index count : {2, 3, 10, 11, 51}) {
    auto pairs = sample_pairs(data, count, 17);
    CHECK(static_cast<Eigen::Index>(pairs.size()) == count);
    Eigen::Index same = 0;
    for (const auto& p : pairs) {
      CHECK(p.index_a != p.index_b);
      const bool same_class = data.sample(p.index_a).label == data.sample(p.index_b).label;
      CHECK(p.dissimilar == (same_class ? 0 : 1));
      same += p.dissimilar == 0 ? 1 : 0;
    }
    CHECK(same == (count + 1) / 2);
  }
  auto a = sample_pairs(data, 20, 3);
  auto b = sample_pairs(data, 20, 3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].index_a == b[i].index_a);
    CHECK(a[i].index_b == b[i].index_b);
  }
}

TEST_CASE("pair sampling rejects single-class data") {
  Dataset data = toy_dataset(1, 5);
  CHECK_THROWS_AS(sample_pairs(data, 4, 1), DataError);
}

TEST_CASE("two-class two-sample dataset: same-class pairs are exactly the within-class pairs") {
  // Brute-force enumeration oracle: with classes {0,0,1,1} the only valid
  // same-class pairs are (0,1) and (2,3) in either order.
  Dataset data = toy_dataset(2, 2);
  std::set<std::pair<Eigen::Index, Eigen::Index>> allowed;
  for (Eigen::Index i = 0; i < data.size(); ++i)
    for (Eigen::Index j = 0; j < data.size(); ++j)
      if (i != j && data.sample(i).label == data.sample(j).label) allowed.insert({i, j});
  CHECK(allowed.size() == 4);  // two unordered pairs, both orders
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (const auto& p : sample_pairs(data, 9, seed))
      if (p.dissimilar == 0) CHECK(allowed.count({p.index_a, p.index_b}) == 1);
  }
}
