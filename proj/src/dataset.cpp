#include "mvproto/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "mvproto/errors.hpp"
#include "mvproto/random.hpp"

namespace mvproto {

Dataset::Dataset(int dimensions, Eigen::Index length, std::vector<std::string> class_names)
    : dimensions_(dimensions), length_(length), class_names_(std::move(class_names)) {
  if (dimensions_ < 1) throw DataError("dataset needs at least one variable");
  if (length_ < 0) throw DataError("series length must be nonnegative");
}

void Dataset::add(Sample sample) {
  if (static_cast<int>(sample.variables.size()) != dimensions_)
    throw DataError("sample has " + std::to_string(sample.variables.size()) +
                    " variables, dataset expects " + std::to_string(dimensions_));
  for (const auto& v : sample.variables) {
    if (v.size() != length_)
      throw DataError("variable length " + std::to_string(v.size()) + " does not match dataset length " +
                      std::to_string(length_));
  }
  if (sample.label < 0 || sample.label >= classes())
    throw DataError("label " + std::to_string(sample.label) + " outside [0, " +
                    std::to_string(classes()) + ")");
  samples_.push_back(std::move(sample));
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) out.push_back(s.label);
  return out;
}

int Dataset::distinct_labels() const {
  std::set<int> seen;
  for (const auto& s : samples_) seen.insert(s.label);
  return static_cast<int>(seen.size());
}

RowMatrixXd Dataset::variable_rows(int variable, std::span<const Eigen::Index> indices) const {
  RowMatrixXd out(static_cast<Eigen::Index>(indices.size()), length_);
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    out.row(r) = sample(indices[static_cast<std::size_t>(r)]).variables[static_cast<std::size_t>(variable)];
  return out;
}

void normalize(Dataset& train, const std::vector<Dataset*>& others) {
  if (train.empty()) throw DataError("normalize: training split is empty");
  const int d = train.dimensions();
  const Eigen::Index n = train.length();
  const double count = static_cast<double>(train.size()) * static_cast<double>(n);

  NormalizationStats stats;
  stats.mean.resize(d);
  stats.stddev.resize(d);
  for (int k = 0; k < d; ++k) {
    double sum = 0.0;
    for (const auto& s : train.samples()) sum += s.variables[static_cast<std::size_t>(k)].sum();
    const double mean = sum / count;
    double sq = 0.0;
    for (const auto& s : train.samples())
      sq += (s.variables[static_cast<std::size_t>(k)].array() - mean).square().sum();
    stats.mean[k] = mean;
    stats.stddev[k] = std::max(std::sqrt(sq / count), kStdFloor);
  }

  apply_normalization(train, stats);
  for (Dataset* other : others) apply_normalization(*other, stats);
}

void apply_normalization(Dataset& data, const NormalizationStats& stats) {
  if (data.dimensions() != stats.mean.size())
    throw DataError("normalize: statistics cover " + std::to_string(stats.mean.size()) +
                    " variables, dataset has " + std::to_string(data.dimensions()));
  for (auto& s : data.mutable_samples())
    for (int k = 0; k < data.dimensions(); ++k)
      s.variables[static_cast<std::size_t>(k)] =
          ((s.variables[static_cast<std::size_t>(k)].array() - stats.mean[k]) / stats.stddev[k])
              .matrix();
  data.set_normalization(stats);
}

std::pair<Dataset, Dataset> stratified_split(const Dataset& data, double test_fraction,
                                             std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ConfigError("stratified_split: test fraction must lie in (0, 1)");
  std::vector<std::vector<Eigen::Index>> by_class(static_cast<std::size_t>(data.classes()));
  for (Eigen::Index i = 0; i < data.size(); ++i)
    by_class[static_cast<std::size_t>(data.sample(i).label)].push_back(i);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    if (!by_class[c].empty() && by_class[c].size() < 2)
      throw DataError("stratified_split: class " + data.class_names()[c] +
                      " has a single sample and cannot be split");
  }

  Rng rng = make_rng(seed, {0x5354524154ULL});
  std::vector<bool> in_test(static_cast<std::size_t>(data.size()), false);
  for (auto& members : by_class) {
    if (members.empty()) continue;
    std::shuffle(members.begin(), members.end(), rng);
    auto take = static_cast<Eigen::Index>(
        std::lround(test_fraction * static_cast<double>(members.size())));
    take = std::clamp<Eigen::Index>(take, 0, static_cast<Eigen::Index>(members.size()) - 1);
    for (Eigen::Index i = 0; i < take; ++i)
      in_test[static_cast<std::size_t>(members[static_cast<std::size_t>(i)])] = true;
  }

  Dataset train(data.dimensions(), data.length(), data.class_names());
  Dataset test(data.dimensions(), data.length(), data.class_names());
  if (data.normalization()) {
    train.set_normalization(*data.normalization());
    test.set_normalization(*data.normalization());
  }
  for (Eigen::Index i = 0; i < data.size(); ++i)
    (in_test[static_cast<std::size_t>(i)] ? test : train).add(data.sample(i));
  return {std::move(train), std::move(test)};
}

std::vector<Pair> sample_pairs(const Dataset& data, Eigen::Index count, std::uint64_t seed) {
  if (count < 0) throw ConfigError("sample_pairs: count must be nonnegative");
  if (data.distinct_labels() < 2)
    throw DataError("sample_pairs: need at least two classes to draw dissimilar pairs");

  std::vector<std::vector<Eigen::Index>> by_class(static_cast<std::size_t>(data.classes()));
  for (Eigen::Index i = 0; i < data.size(); ++i)
    by_class[static_cast<std::size_t>(data.sample(i).label)].push_back(i);
  std::vector<Eigen::Index> pairable;  // samples whose class has a partner
  for (const auto& members : by_class)
    if (members.size() >= 2) pairable.insert(pairable.end(), members.begin(), members.end());
  if (pairable.empty())
    throw DataError("sample_pairs: no class has two samples, similar pairs do not exist");

  Rng rng = make_rng(seed, {0x5041495253ULL});
  std::uniform_int_distribution<Eigen::Index> any(0, data.size() - 1);
  std::uniform_int_distribution<std::size_t> any_pairable(0, pairable.size() - 1);

  std::vector<Pair> pairs;
  pairs.reserve(static_cast<std::size_t>(count));
  for (Eigen::Index i = 0; i < count; ++i) {
    if (i % 2 == 0) {  // same-class pair
      const Eigen::Index a = pairable[any_pairable(rng)];
      const auto& members = by_class[static_cast<std::size_t>(data.sample(a).label)];
      std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
      Eigen::Index b = a;
      while (b == a) b = members[pick(rng)];
      pairs.push_back({a, b, 0});
    } else {  // different-class pair
      const Eigen::Index a = any(rng);
      Eigen::Index b = a;
      while (data.sample(b).label == data.sample(a).label) b = any(rng);
      pairs.push_back({a, b, 1});
    }
  }
  return pairs;
}

}  // namespace mvproto
