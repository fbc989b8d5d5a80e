#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mvproto/errors.hpp"
#include "mvproto/synthetic.hpp"

using namespace mvproto;

namespace {

// ---- independent pattern-recovery oracle (matched filters) ----

// The four local waveforms, built here independently of the generator.
std::array<Eigen::VectorXd, 4> local_waveforms() {
  std::array<Eigen::VectorXd, 4> t;
  for (auto& v : t) v = Eigen::VectorXd::Zero(16);
  for (Eigen::Index i = 0; i < 8; ++i) {
    t[0][i] = double(i + 1) / 8.0;  // triangle up
    t[0][15 - i] = t[0][i];
  }
  t[1] = -t[0];       // triangle down
  t[2].setOnes();     // square pulse
  t[3][3] = t[3][4] = t[3][11] = t[3][12] = 1.0;  // double spike
  return t;
}

// variable 1: energy-corrected matched filter over all placements.
int classify_shift_invariant(const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  const auto templates = local_waveforms();
  int best_pattern = 0;
  double best = std::numeric_limits<double>::infinity();
  for (int p = 0; p < 4; ++p) {
    for (Eigen::Index off = 0; off + 16 <= n; ++off) {
      const double d =
          (x.segment(off, 16) - templates[static_cast<std::size_t>(p)]).squaredNorm() -
          x.segment(off, 16).squaredNorm();
      if (d < best) {
        best = d;
        best_pattern = p;
      }
    }
  }
  return best_pattern;
}

int classify_shift_variant(const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  const auto centers = shift_variant_centers(n);
  int best_pattern = 0;
  double best = std::numeric_limits<double>::infinity();
  for (int p = 0; p < 4; ++p) {
    Eigen::VectorXd bump = Eigen::VectorXd::Zero(n);
    const Eigen::Index c = centers[static_cast<std::size_t>(p)];
    for (Eigen::Index t = std::max<Eigen::Index>(0, c - 8); t <= std::min(n - 1, c + 8); ++t)
      bump[t] = std::exp(-std::pow(static_cast<double>(t - c), 2) / 18.0);
    const double d = (x - bump).squaredNorm();
    if (d < best) {
      best = d;
      best_pattern = p;
    }
  }
  return best_pattern;
}

// variable 3: phase-invariant power at each candidate cycle count.
int classify_frequency(const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  int best_pattern = 0;
  double best = -1.0;
  const auto cycles = frequency_cycle_counts();
  for (int p = 0; p < 4; ++p) {
    double cos_part = 0.0, sin_part = 0.0;
    for (Eigen::Index t = 0; t < n; ++t) {
      const double angle =
          2.0 * std::numbers::pi * cycles[static_cast<std::size_t>(p)] * t / double(n);
      cos_part += x[t] * std::cos(angle);
      sin_part += x[t] * std::sin(angle);
    }
    const double power = cos_part * cos_part + sin_part * sin_part;
    if (power > best) {
      best = power;
      best_pattern = p;
    }
  }
  return best_pattern;
}

double oracle_accuracy(const Dataset& data, int variable) {
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const auto truth = pattern_composition(data.sample(i).label);
    const auto& x = data.sample(i).variables[static_cast<std::size_t>(variable)];
    int guess = 0;
    switch (variable) {
      case 0: guess = classify_shift_invariant(x); break;
      case 1: guess = classify_shift_variant(x); break;
      case 2: guess = classify_frequency(x); break;
      default: return 0.0;
    }
    hits += guess == truth[static_cast<std::size_t>(variable)] ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace

TEST_CASE("default configuration shape: 6400 samples, 4 variables, 64 balanced labels") {
  SyntheticConfig config;
  config.samples_per_class = 100;
  Dataset data = generate(config);
  CHECK(data.size() == 6400);
  CHECK(data.dimensions() == 4);
  CHECK(data.classes() == 64);
  CHECK(data.distinct_labels() == 64);
  std::vector<int> counts(64, 0);
  for (const auto& s : data.samples()) counts[static_cast<std::size_t>(s.label)]++;
  for (int c : counts) CHECK(c == 100);
}

TEST_CASE("label decomposition identity") {
  CHECK(pattern_composition(0) == std::array<int, 3>{0, 0, 0});
  CHECK(pattern_composition(63) == std::array<int, 3>{3, 3, 3});
  CHECK(pattern_composition(1) == std::array<int, 3>{1, 0, 0});
  CHECK(pattern_composition(4) == std::array<int, 3>{0, 1, 0});
  CHECK(pattern_composition(16) == std::array<int, 3>{0, 0, 1});
  for (int label = 0; label < 64; ++label) {
    const auto c = pattern_composition(label);
    CHECK(c[0] + 4 * c[1] + 16 * c[2] == label);
  }
}

TEST_CASE("same seed gives a bitwise identical dataset") {
  SyntheticConfig config;
  config.samples_per_class = 3;
  Dataset a = generate(config);
  Dataset b = generate(config);
  REQUIRE(a.size() == b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    CHECK(a.sample(i).label == b.sample(i).label);
    for (int k = 0; k < 4; ++k)
      CHECK(a.sample(i).variables[static_cast<std::size_t>(k)] ==
            b.sample(i).variables[static_cast<std::size_t>(k)]);
  }
  SyntheticConfig other = config;
  other.seed = config.seed + 1;
  Dataset c = generate(other);
  CHECK(a.sample(0).variables[0] != c.sample(0).variables[0]);
}

TEST_CASE("series length below 64 is rejected, 64 accepted") {
  SyntheticConfig config;
  config.series_length = 63;
  config.samples_per_class = 1;
  CHECK_THROWS_AS(generate(config), ConfigError);
  config.series_length = 64;
  CHECK(generate(config).length() == 64);
}

TEST_CASE("shift-variant bumps peak at the fixed centers") {
  Rng rng = make_rng(1, {});
  const auto centers = shift_variant_centers(128);
  CHECK(centers == std::array<Eigen::Index, 4>{8, 40, 72, 104});
  for (int p = 0; p < 4; ++p) {
    Eigen::VectorXd v = render_pattern({1, p, PatternFamily::kShiftVariantLocal}, 128, rng);
    Eigen::Index argmax = 0;
    v.maxCoeff(&argmax);
    CHECK(std::abs(argmax - centers[static_cast<std::size_t>(p)]) <= 1);
    CHECK(v.maxCoeff() == doctest::Approx(1.0));
  }
}

TEST_CASE("frequency patterns have dominant power at their cycle count") {
  Rng rng = make_rng(2, {});
  for (int p = 0; p < 4; ++p) {
    Eigen::VectorXd v = render_pattern({2, p, PatternFamily::kFrequency}, 128, rng);
    CHECK(classify_frequency(v) == p);
  }
}

TEST_CASE("shift-invariant templates keep their sorted values under the random offset") {
  Rng rng_a = make_rng(3, {});
  Rng rng_b = make_rng(4, {});
  for (int p = 0; p < 4; ++p) {
    Eigen::VectorXd a = render_pattern({0, p, PatternFamily::kShiftInvariantLocal}, 96, rng_a);
    Eigen::VectorXd b = render_pattern({0, p, PatternFamily::kShiftInvariantLocal}, 96, rng_b);
    std::vector<double> sa(a.data(), a.data() + a.size());
    std::vector<double> sb(b.data(), b.data() + b.size());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    CHECK(sa == sb);
  }
}

TEST_CASE("separability oracle: exact recovery without noise, >=0.99 at the default noise") {
  SyntheticConfig noiseless;
  noiseless.samples_per_class = 4;
  noiseless.noise_std = 0.0;
  Dataset clean = generate(noiseless);
  for (int variable : {0, 1, 2}) CHECK(oracle_accuracy(clean, variable) == 1.0);

  SyntheticConfig noisy;
  noisy.samples_per_class = 10;
  Dataset data = generate(noisy);
  for (int variable : {0, 1, 2}) CHECK(oracle_accuracy(data, variable) >= 0.99);
}

TEST_CASE("variable 4 pattern index is independent of the label (chi-square)") {
  SyntheticConfig config;  // default: 6400 samples
  GenerationTrace trace;
  Dataset data = generate(config, &trace);
  REQUIRE(trace.irrelevant_pattern.size() == static_cast<std::size_t>(data.size()));

  // 64x4 contingency table
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(64, 4);
  for (Eigen::Index i = 0; i < data.size(); ++i)
    table(data.sample(i).label, trace.irrelevant_pattern[static_cast<std::size_t>(i)]) += 1.0;
  const double total = table.sum();
  Eigen::VectorXd row_sum = table.rowwise().sum();
  Eigen::VectorXd col_sum = table.colwise().sum();
  double statistic = 0.0;
  for (int r = 0; r < 64; ++r) {
    for (int c = 0; c < 4; ++c) {
      const double expected = row_sum[r] * col_sum[c] / total;
      statistic += std::pow(table(r, c) - expected, 2) / expected;
    }
  }
  // p > 0.01 <=> statistic below the 0.99 quantile of chi-square with
  // df = 63*3 = 189, computed by the Wilson-Hilferty approximation.
  const double df = 189.0;
  const double z99 = 2.3263478740408408;
  const double quantile =
      df * std::pow(1.0 - 2.0 / (9.0 * df) + z99 * std::sqrt(2.0 / (9.0 * df)), 3);
  CHECK(statistic < quantile);
}
