#pragma once

#include <array>
#include <cstdint>

#include "mvproto/dataset.hpp"
#include "mvproto/random.hpp"

namespace mvproto {

/// Four-variable benchmark: three informative variables carrying distinct
/// pattern families plus one label-independent noise variable. A class is a
/// composition of one pattern per informative variable, 4^3 = 64 classes.
struct SyntheticConfig {
  Eigen::Index series_length = 128;
  int patterns_per_variable = 4;  // fixed by the class-composition scheme
  int samples_per_class = 100;
  double noise_std = 0.1;
  std::uint64_t seed = 7;

  int classes() const {
    return patterns_per_variable * patterns_per_variable * patterns_per_variable;
  }
  Eigen::Index total_samples() const {
    return static_cast<Eigen::Index>(classes()) * samples_per_class;
  }
};

enum class PatternFamily {
  kShiftInvariantLocal,  // variable 1: local template at a random offset
  kShiftVariantLocal,    // variable 2: fixed bump at one of four offsets
  kFrequency,            // variable 3: sinusoid, pattern = cycle count
  kIrrelevant,           // variable 4: sinusoid drawn independently of label
};

struct PatternSpec {
  int variable = 0;  // 0..3
  int pattern = 0;   // 0..3
  PatternFamily family = PatternFamily::kShiftInvariantLocal;
};

PatternFamily family_of_variable(int variable);

/// (pattern of variable 1, variable 2, variable 3) for a class label.
std::array<int, 3> pattern_composition(int label);

/// Sampling details the generator used per sample; lets tests and oracles
/// check properties (like label independence of variable 4) that the
/// dataset alone does not expose.
struct GenerationTrace {
  std::vector<int> irrelevant_pattern;                 // per sample
  std::array<std::pair<double, double>, 4> irrelevant_params;  // (cycles, phase) per template
};

/// Noiseless unit-peak template for one (variable, pattern); randomness
/// (offsets, phases, irrelevant-template parameters) is drawn from rng.
Eigen::VectorXd render_pattern(const PatternSpec& spec, Eigen::Index n, Rng& rng);

/// Fixed shift-variant bump centers for a series of length n ({8,40,72,104}
/// at n=128).
std::array<Eigen::Index, 4> shift_variant_centers(Eigen::Index n);

/// Cycle counts of the frequency patterns.
std::array<int, 4> frequency_cycle_counts();

Dataset generate(const SyntheticConfig& config, GenerationTrace* trace = nullptr);

}  // namespace mvproto
