#include "mvproto/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "mvproto/errors.hpp"

namespace mvproto {

namespace {

constexpr Eigen::Index kTemplateLength = 16;
constexpr double kBumpSigma = 3.0;

Eigen::VectorXd local_template(int pattern) {
  Eigen::VectorXd t = Eigen::VectorXd::Zero(kTemplateLength);
  switch (pattern) {
    case 0:  // triangle up
      for (Eigen::Index i = 0; i < 8; ++i) {
        t[i] = static_cast<double>(i + 1) / 8.0;
        t[15 - i] = t[i];
      }
      break;
    case 1:  // triangle down (valley)
      for (Eigen::Index i = 0; i < 8; ++i) {
        t[i] = -static_cast<double>(i + 1) / 8.0;
        t[15 - i] = t[i];
      }
      break;
    case 2:  // square pulse
      t.setOnes();
      break;
    case 3:  // double spike
      t[3] = t[4] = t[11] = t[12] = 1.0;
      break;
    default:
      throw ConfigError("local_template: pattern index " + std::to_string(pattern));
  }
  return t;
}

}  // namespace

PatternFamily family_of_variable(int variable) {
  switch (variable) {
    case 0: return PatternFamily::kShiftInvariantLocal;
    case 1: return PatternFamily::kShiftVariantLocal;
    case 2: return PatternFamily::kFrequency;
    case 3: return PatternFamily::kIrrelevant;
    default: throw ConfigError("family_of_variable: variable index " + std::to_string(variable));
  }
}

std::array<int, 3> pattern_composition(int label) {
  return {label % 4, (label / 4) % 4, label / 16};
}

std::array<Eigen::Index, 4> shift_variant_centers(Eigen::Index n) {
  std::array<Eigen::Index, 4> centers;
  for (int j = 0; j < 4; ++j)
    centers[static_cast<std::size_t>(j)] =
        static_cast<Eigen::Index>(std::lround(static_cast<double>(n) * (1 + 4 * j) / 16.0));
  return centers;
}

std::array<int, 4> frequency_cycle_counts() { return {2, 4, 8, 16}; }

Eigen::VectorXd render_pattern(const PatternSpec& spec, Eigen::Index n, Rng& rng) {
  if (n < 64) throw ConfigError("render_pattern: series length must be at least 64, got " +
                                std::to_string(n));
  if (spec.pattern < 0 || spec.pattern >= 4)
    throw ConfigError("render_pattern: pattern index " + std::to_string(spec.pattern));
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  switch (spec.family) {
    case PatternFamily::kShiftInvariantLocal: {
      std::uniform_int_distribution<Eigen::Index> offset_dist(0, n - kTemplateLength);
      const Eigen::Index offset = offset_dist(rng);
      out.segment(offset, kTemplateLength) = local_template(spec.pattern);
      break;
    }
    case PatternFamily::kShiftVariantLocal: {
      const Eigen::Index center = shift_variant_centers(n)[static_cast<std::size_t>(spec.pattern)];
      const Eigen::Index lo = std::max<Eigen::Index>(0, center - kTemplateLength / 2);
      const Eigen::Index hi = std::min<Eigen::Index>(n - 1, center + kTemplateLength / 2);
      for (Eigen::Index t = lo; t <= hi; ++t) {
        const double dt = static_cast<double>(t - center);
        out[t] = std::exp(-dt * dt / (2.0 * kBumpSigma * kBumpSigma));
      }
      break;
    }
    case PatternFamily::kFrequency: {
      std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
      const double phase = phase_dist(rng);
      const int cycles = frequency_cycle_counts()[static_cast<std::size_t>(spec.pattern)];
      for (Eigen::Index t = 0; t < n; ++t)
        out[t] = std::sin(2.0 * std::numbers::pi * cycles * static_cast<double>(t) /
                              static_cast<double>(n) +
                          phase);
      break;
    }
    case PatternFamily::kIrrelevant: {
      std::uniform_real_distribution<double> cycles_dist(3.0, 12.0);
      std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
      const double cycles = cycles_dist(rng);
      const double phase = phase_dist(rng);
      for (Eigen::Index t = 0; t < n; ++t)
        out[t] = std::sin(2.0 * std::numbers::pi * cycles * static_cast<double>(t) /
                              static_cast<double>(n) +
                          phase);
      break;
    }
  }
  return out;
}

Dataset generate(const SyntheticConfig& config, GenerationTrace* trace) {
  if (config.series_length < 64)
    throw ConfigError("generate: series length must be at least 64, got " +
                      std::to_string(config.series_length) +
                      " (patterns no longer fit at all four offsets)");
  if (config.patterns_per_variable != 4)
    throw ConfigError("generate: the class-composition scheme is fixed at 4 patterns per variable");
  if (config.samples_per_class < 1) throw ConfigError("generate: samples_per_class must be positive");
  if (config.noise_std < 0.0) throw ConfigError("generate: noise_std must be nonnegative");

  const Eigen::Index n = config.series_length;
  Rng rng = make_rng(config.seed, {0x53594e5448ULL});

  // The four label-independent templates are fixed per dataset.
  std::array<Eigen::VectorXd, 4> irrelevant;
  std::array<std::pair<double, double>, 4> irrelevant_params{};
  for (int j = 0; j < 4; ++j) {
    std::uniform_real_distribution<double> cycles_dist(3.0, 12.0);
    std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
    const double cycles = cycles_dist(rng);
    const double phase = phase_dist(rng);
    Eigen::VectorXd wave(n);
    for (Eigen::Index t = 0; t < n; ++t)
      wave[t] = std::sin(2.0 * std::numbers::pi * cycles * static_cast<double>(t) /
                             static_cast<double>(n) +
                         phase);
    irrelevant[static_cast<std::size_t>(j)] = std::move(wave);
    irrelevant_params[static_cast<std::size_t>(j)] = {cycles, phase};
  }

  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(config.classes()));
  for (int c = 0; c < config.classes(); ++c) names.push_back(std::to_string(c));
  Dataset data(4, n, std::move(names));

  if (trace) {
    trace->irrelevant_pattern.clear();
    trace->irrelevant_pattern.reserve(static_cast<std::size_t>(config.total_samples()));
    trace->irrelevant_params = irrelevant_params;
  }

  std::uniform_int_distribution<int> irrelevant_pick(0, 3);
  std::normal_distribution<double> noise(0.0, 1.0);
  auto add_noise = [&](Eigen::VectorXd& v) {
    if (config.noise_std == 0.0) return;
    for (Eigen::Index t = 0; t < n; ++t) v[t] += config.noise_std * noise(rng);
  };

  for (int label = 0; label < config.classes(); ++label) {
    const auto composition = pattern_composition(label);
    for (int s = 0; s < config.samples_per_class; ++s) {
      Sample sample;
      sample.label = label;
      sample.variables.resize(4);
      for (int k = 0; k < 3; ++k) {
        PatternSpec spec{k, composition[static_cast<std::size_t>(k)], family_of_variable(k)};
        sample.variables[static_cast<std::size_t>(k)] = render_pattern(spec, n, rng);
      }
      const int pick = irrelevant_pick(rng);
      sample.variables[3] = irrelevant[static_cast<std::size_t>(pick)];
      if (trace) trace->irrelevant_pattern.push_back(pick);
      for (auto& v : sample.variables) add_noise(v);
      data.add(std::move(sample));
    }
  }
  return data;
}

}  // namespace mvproto
