#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mvproto/tensor.hpp"

namespace mvproto {

/// One labeled multivariable series: d variables, each of length n.
struct Sample {
  std::vector<Eigen::VectorXd> variables;
  int label = 0;
};

/// Per-variable pooled z-score statistics, computed on a training split.
struct NormalizationStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;  // floored, see kStdFloor
};

inline constexpr double kStdFloor = 1e-8;

/// Labeled collection of equal-length multivariable series.
class Dataset {
 public:
  Dataset(int dimensions, Eigen::Index length, std::vector<std::string> class_names);

  void add(Sample sample);

  Eigen::Index size() const { return static_cast<Eigen::Index>(samples_.size()); }
  bool empty() const { return samples_.empty(); }
  int dimensions() const { return dimensions_; }
  Eigen::Index length() const { return length_; }
  int classes() const { return static_cast<int>(class_names_.size()); }
  const std::vector<std::string>& class_names() const { return class_names_; }
  const Sample& sample(Eigen::Index i) const { return samples_.at(static_cast<std::size_t>(i)); }
  const std::vector<Sample>& samples() const { return samples_; }

  const std::optional<NormalizationStats>& normalization() const { return normalization_; }
  void set_normalization(NormalizationStats stats) { normalization_ = std::move(stats); }

  std::vector<int> labels() const;
  /// Number of distinct labels actually present.
  int distinct_labels() const;

  /// Rows = selected samples, columns = timesteps of variable k.
  RowMatrixXd variable_rows(int variable, std::span<const Eigen::Index> indices) const;

  /// In-place value transform used by normalization.
  std::vector<Sample>& mutable_samples() { return samples_; }

 private:
  int dimensions_;
  Eigen::Index length_;
  std::vector<std::string> class_names_;
  std::vector<Sample> samples_;
  std::optional<NormalizationStats> normalization_;
};

/// Pooled-over-time z-score per variable with train statistics, applied to
/// the training split and every other split alike.
void normalize(Dataset& train, const std::vector<Dataset*>& others);

/// Applies previously computed statistics (e.g. the ones stored in a model)
/// to a raw dataset.
void apply_normalization(Dataset& data, const NormalizationStats& stats);

/// Seeded stratified split preserving per-class proportions within one
/// sample; returns (train, test).
std::pair<Dataset, Dataset> stratified_split(const Dataset& data, double test_fraction,
                                             std::uint64_t seed);

/// Contrastive training pair; dissimilar is the y of the contrastive loss
/// (0 = same class, 1 = different class).
struct Pair {
  Eigen::Index index_a = 0;
  Eigen::Index index_b = 0;
  int dissimilar = 0;
};

/// Seeded balanced pair sample: ceil(count/2) same-class then floor(count/2)
/// different-class pairs, interleaved; never pairs a sample with itself.
std::vector<Pair> sample_pairs(const Dataset& data, Eigen::Index count, std::uint64_t seed);

}  // namespace mvproto
