#include "mvproto/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

#include "mvproto/errors.hpp"
#include "mvproto/optimizer.hpp"
#include "mvproto/random.hpp"

namespace mvproto {

namespace {

// Seed stream tags.
constexpr std::uint64_t kTagStage1Pairs = 0x31504149ULL;
constexpr std::uint64_t kTagStage1Holdout = 0x31484f4cULL;
constexpr std::uint64_t kTagStage2Init = 0x32494e49ULL;
constexpr std::uint64_t kTagStage2Head = 0x32484541ULL;
constexpr std::uint64_t kTagStage2Shuffle = 0x32534855ULL;
constexpr std::uint64_t kTagStage3Init = 0x33494e49ULL;
constexpr std::uint64_t kTagStage3Head = 0x33484541ULL;
constexpr std::uint64_t kTagStage3Shuffle = 0x33534855ULL;

void check_profile(const Model& model, const Dataset& data, const char* where) {
  if (data.dimensions() != model.data.dimensions || data.length() != model.data.length)
    throw DataError(std::string(where) + ": dataset shape (" + std::to_string(data.dimensions()) +
                    " x " + std::to_string(data.length()) + ") does not match the model (" +
                    std::to_string(model.data.dimensions) + " x " +
                    std::to_string(model.data.length) + ")");
  if (data.classes() != model.data.classes())
    throw DataError(std::string(where) + ": class count differs from the model");
}

void check_finite(const Model& model, const char* where) {
  for (const auto& [name, tensor] : model.named_parameters()) {
    if (!tensor->values().isFinite().all())
      throw ContractError(std::string(where) + ": parameter '" + name + "' became non-finite");
  }
}

TensorPtr uniform_tensor(std::vector<Eigen::Index> shape, double bound, Rng& rng) {
  Eigen::Index n = 1;
  for (auto e : shape) n *= e;
  std::uniform_real_distribution<double> dist(-bound, bound);
  Eigen::ArrayXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = dist(rng);
  return Tensor::from_array(std::move(shape), std::move(v), true);
}

std::vector<Eigen::Index> shuffled_indices(Eigen::Index n, Rng& rng) {
  std::vector<Eigen::Index> indices(static_cast<std::size_t>(n));
  std::iota(indices.begin(), indices.end(), 0);
  std::shuffle(indices.begin(), indices.end(), rng);
  return indices;
}

/// Contrastive training of one encoder; runs on its own thread in stage 1.
void pretrain_one_encoder(const Dataset& train, const TrainConfig& cfg, EncoderParams& encoder,
                          int variable, TrainLog& log) {
  std::vector<Eigen::Index> all(static_cast<std::size_t>(train.size()));
  std::iota(all.begin(), all.end(), 0);
  const RowMatrixXd series = train.variable_rows(variable, all);
  const double margin = cfg.regularizers.contrastive_margin;

  const auto holdout_pairs = sample_pairs(
      train, std::min<Eigen::Index>(512, cfg.pairs_per_epoch),
      derive_seed(cfg.seed, {kTagStage1Holdout, static_cast<std::uint64_t>(variable)}));
  auto gather = [&](const std::vector<Pair>& pairs, Eigen::Index lo, Eigen::Index hi) {
    RowMatrixXd a(hi - lo, train.length()), b(hi - lo, train.length());
    std::vector<int> flags(static_cast<std::size_t>(hi - lo));
    for (Eigen::Index i = lo; i < hi; ++i) {
      const Pair& p = pairs[static_cast<std::size_t>(i)];
      a.row(i - lo) = series.row(p.index_a);
      b.row(i - lo) = series.row(p.index_b);
      flags[static_cast<std::size_t>(i - lo)] = p.dissimilar;
    }
    return std::tuple{std::move(a), std::move(b), std::move(flags)};
  };
  auto holdout_loss = [&] {
    NoGradGuard no_grad;
    auto [a, b, flags] =
        gather(holdout_pairs, 0, static_cast<Eigen::Index>(holdout_pairs.size()));
    return contrastive_loss_batch(encode_batch(encoder, a), encode_batch(encoder, b), flags,
                                  margin)
        ->value();
  };

  log.push_back({1, variable, 0, "holdout", holdout_loss()});

  AdamOptimizer optimizer(encoder.parameters(), {.learning_rate = cfg.learning_rate});
  for (int epoch = 1; epoch <= cfg.stage1_epochs; ++epoch) {
    const auto pairs = sample_pairs(
        train, cfg.pairs_per_epoch,
        derive_seed(cfg.seed, {kTagStage1Pairs, static_cast<std::uint64_t>(variable),
                               static_cast<std::uint64_t>(epoch)}));
    double loss_sum = 0.0;
    int batches = 0;
    const auto total = static_cast<Eigen::Index>(pairs.size());
    for (Eigen::Index lo = 0; lo < total; lo += cfg.batch_size) {
      const Eigen::Index hi = std::min<Eigen::Index>(lo + cfg.batch_size, total);
      auto [a, b, flags] = gather(pairs, lo, hi);
      auto loss = contrastive_loss_batch(encode_batch(encoder, a), encode_batch(encoder, b),
                                         flags, margin);
      backward(loss);
      optimizer.step();
      Tape::active().clear();
      loss_sum += loss->value();
      ++batches;
    }
    log.push_back({1, variable, epoch, "train", loss_sum / std::max(batches, 1)});
    for (const auto& p : encoder.parameters())
      if (!p->values().isFinite().all())
        throw ContractError("stage 1: encoder " + std::to_string(variable) +
                            " became non-finite");
  }
  log.push_back({1, variable, cfg.stage1_epochs, "holdout", holdout_loss()});
}

struct BatchStats {
  double loss = 0, ce = 0, diversity = 0, similarity = 0, coverage = 0;
  Eigen::Index hits = 0, count = 0;
  int batches = 0;

  EpochRecord record(int stage, int epoch) const {
    const double b = std::max(batches, 1);
    return {stage,           -1, epoch, "train", loss / b, ce / b, diversity / b,
            similarity / b,  coverage / b,
            count > 0 ? static_cast<double>(hits) / static_cast<double>(count)
                      : std::numeric_limits<double>::quiet_NaN()};
  }
};

Eigen::Index count_argmax_hits(const TensorPtr& logits, std::span<const int> labels) {
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < logits->rows(); ++i) {
    Eigen::Index best = 0;
    logits->matrix().row(i).maxCoeff(&best);
    if (best == labels[static_cast<std::size_t>(i)]) ++hits;
  }
  return hits;
}

}  // namespace

std::string train_log_csv(const TrainLog& log) {
  std::ostringstream out;
  out << "stage,variable,epoch,phase,loss,cross_entropy,diversity,similarity,coverage,accuracy\n";
  out.precision(17);
  for (const auto& r : log) {
    out << r.stage << ',' << r.variable << ',' << r.epoch << ',' << r.phase << ',' << r.loss
        << ',' << r.cross_entropy << ',' << r.diversity << ',' << r.similarity << ','
        << r.coverage << ',';
    if (std::isnan(r.accuracy))
      out << "";
    else
      out << r.accuracy;
    out << '\n';
  }
  return out.str();
}

void pretrain_encoders(Model& model, const Dataset& train, TrainLog* log) {
  if (model.stage_done[0]) throw StateError("stage 1 has already been completed");
  check_profile(model, train, "stage 1");
  const int d = model.data.dimensions;
  const TrainConfig& cfg = model.config;

  unsigned workers = cfg.stage1_threads > 0
                         ? static_cast<unsigned>(cfg.stage1_threads)
                         : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(d));

  std::vector<TrainLog> logs(static_cast<std::size_t>(d));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(d));
  auto run = [&](int variable) {
    try {
      pretrain_one_encoder(train, cfg, model.encoders[static_cast<std::size_t>(variable)],
                           variable, logs[static_cast<std::size_t>(variable)]);
    } catch (...) {
      errors[static_cast<std::size_t>(variable)] = std::current_exception();
    }
  };

  if (workers <= 1) {
    for (int k = 0; k < d; ++k) run(k);
  } else {
    // Independent objectives with per-variable seeds; each worker owns its
    // encoder and its thread-local tape.
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        while (true) {
          const int k = next.fetch_add(1);
          if (k >= d) return;
          run(k);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  for (const auto& error : errors)
    if (error) std::rethrow_exception(error);
  if (log)
    for (const auto& l : logs) log->insert(log->end(), l.begin(), l.end());
  model.stage_done[0] = true;
  check_finite(model, "stage 1");
}

void train_single_variable_stage(Model& model, const Dataset& train, TrainLog* log) {
  if (!model.stage_done[0]) throw StateError("stage 2 requires completed encoder pretraining");
  if (model.stage_done[1]) throw StateError("stage 2 has already been completed");
  check_profile(model, train, "stage 2");
  const TrainConfig& cfg = model.config;
  const int d = model.data.dimensions;
  const auto classes = static_cast<Eigen::Index>(model.data.classes());
  const Eigen::Index n_samples = train.size();

  // Encoders are frozen for the whole stage, so every encoding is fixed.
  std::vector<RowMatrixXd> encodings;
  encodings.reserve(static_cast<std::size_t>(d));
  for (int k = 0; k < d; ++k)
    encodings.push_back(encode_all(model.encoders[static_cast<std::size_t>(k)], train, k));

  model.single_layers.clear();
  for (int k = 0; k < d; ++k)
    model.single_layers.push_back(init_prototypes(
        PrototypeLevel::kSingleVariable, cfg.single_prototype_count,
        encodings[static_cast<std::size_t>(k)], derive_seed(cfg.seed, {kTagStage2Init}), k));

  const Eigen::Index width = model.representation_width();
  Rng head_rng = make_rng(cfg.seed, {kTagStage2Head});
  const double bound = 1.0 / std::sqrt(static_cast<double>(width));
  model.stage2_head_weights = uniform_tensor({width, classes}, bound, head_rng);
  model.stage2_head_bias = uniform_tensor({classes}, bound, head_rng);

  std::vector<TensorPtr> trainable;
  for (auto& layer : model.single_layers) trainable.push_back(layer.prototypes);
  trainable.push_back(model.stage2_head_weights);
  trainable.push_back(model.stage2_head_bias);
  AdamOptimizer optimizer(trainable, {.learning_rate = cfg.learning_rate});

  std::vector<const PrototypeLayer*> layers;
  for (const auto& layer : model.single_layers) layers.push_back(&layer);

  const std::vector<int> labels = train.labels();
  for (int epoch = 1; epoch <= cfg.stage2_epochs; ++epoch) {
    Rng rng = make_rng(cfg.seed, {kTagStage2Shuffle, static_cast<std::uint64_t>(epoch)});
    const auto order = shuffled_indices(n_samples, rng);
    BatchStats stats;
    for (Eigen::Index lo = 0; lo < n_samples; lo += cfg.batch_size) {
      const Eigen::Index hi = std::min<Eigen::Index>(lo + cfg.batch_size, n_samples);
      const Eigen::Index b = hi - lo;
      std::vector<int> batch_labels(static_cast<std::size_t>(b));
      std::vector<TensorPtr> batch_encodings;
      std::vector<TensorPtr> sims;
      for (int k = 0; k < d; ++k) {
        RowMatrixXd rows(b, model.config.hidden_size);
        for (Eigen::Index i = 0; i < b; ++i)
          rows.row(i) = encodings[static_cast<std::size_t>(k)].row(
              order[static_cast<std::size_t>(lo + i)]);
        batch_encodings.push_back(Tensor::from_matrix(rows));
        sims.push_back(match_batch(model.single_layers[static_cast<std::size_t>(k)],
                                   batch_encodings.back()));
      }
      for (Eigen::Index i = 0; i < b; ++i)
        batch_labels[static_cast<std::size_t>(i)] =
            labels[static_cast<std::size_t>(order[static_cast<std::size_t>(lo + i)])];

      auto representation = build_multivariable_batch(sims);
      auto logits =
          add_bias(matmul(representation.values, model.stage2_head_weights), model.stage2_head_bias);
      auto ce = softmax_cross_entropy(logits, batch_labels);
      auto total = total_stage_loss(ce, cfg.regularizers, layers, batch_encodings);
      backward(total);
      optimizer.step();
      Tape::active().clear();

      stats.loss += total->value();
      stats.ce += ce->value();
      stats.hits += count_argmax_hits(logits, batch_labels);
      stats.count += b;
      ++stats.batches;
      {
        NoGradGuard no_grad;
        for (int k = 0; k < d; ++k) {
          const auto& prototypes = model.single_layers[static_cast<std::size_t>(k)].prototypes;
          if (cfg.regularizers.diversity > 0 && cfg.single_prototype_count >= 2)
            stats.diversity += diversity_loss(prototypes)->value();
          if (cfg.regularizers.similarity > 0)
            stats.similarity +=
                similarity_loss(prototypes, batch_encodings[static_cast<std::size_t>(k)])->value();
          if (cfg.regularizers.coverage > 0)
            stats.coverage +=
                coverage_loss(prototypes, batch_encodings[static_cast<std::size_t>(k)])->value();
        }
      }
    }
    if (log) log->push_back(stats.record(2, epoch));
  }
  model.stage_done[1] = true;
  check_finite(model, "stage 2");
}

void train_multivariable_stage(Model& model, const Dataset& train, TrainLog* log) {
  if (!model.stage_done[1]) throw StateError("stage 3 requires completed single-variable training");
  if (model.stage_done[2]) throw StateError("stage 3 has already been completed");
  check_profile(model, train, "stage 3");
  const TrainConfig& cfg = model.config;
  const auto classes = static_cast<Eigen::Index>(model.data.classes());
  const Eigen::Index n_samples = train.size();

  // Everything below the multivariable layer is frozen, so representations
  // are fixed for the stage.
  const RowMatrixXd representations = multivariable_matrix(model, train);

  model.multi_layer =
      init_prototypes(PrototypeLevel::kMultivariable, cfg.multi_prototype_count, representations,
                      derive_seed(cfg.seed, {kTagStage3Init}), -1);

  Rng head_rng = make_rng(cfg.seed, {kTagStage3Head});
  const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.multi_prototype_count));
  model.head_weights = uniform_tensor({cfg.multi_prototype_count, classes}, bound, head_rng);
  model.head_bias = uniform_tensor({classes}, bound, head_rng);

  AdamOptimizer optimizer({model.multi_layer.prototypes, model.head_weights, model.head_bias},
                          {.learning_rate = cfg.learning_rate});
  const PrototypeLayer* layers[] = {&model.multi_layer};
  const std::vector<int> labels = train.labels();

  for (int epoch = 1; epoch <= cfg.stage3_epochs; ++epoch) {
    Rng rng = make_rng(cfg.seed, {kTagStage3Shuffle, static_cast<std::uint64_t>(epoch)});
    const auto order = shuffled_indices(n_samples, rng);
    BatchStats stats;
    for (Eigen::Index lo = 0; lo < n_samples; lo += cfg.batch_size) {
      const Eigen::Index hi = std::min<Eigen::Index>(lo + cfg.batch_size, n_samples);
      const Eigen::Index b = hi - lo;
      RowMatrixXd rows(b, representations.cols());
      std::vector<int> batch_labels(static_cast<std::size_t>(b));
      for (Eigen::Index i = 0; i < b; ++i) {
        rows.row(i) = representations.row(order[static_cast<std::size_t>(lo + i)]);
        batch_labels[static_cast<std::size_t>(i)] =
            labels[static_cast<std::size_t>(order[static_cast<std::size_t>(lo + i)])];
      }
      auto batch = Tensor::from_matrix(rows);
      auto sims = match_batch(model.multi_layer, batch);
      auto logits = add_bias(matmul(sims, model.head_weights), model.head_bias);
      auto ce = softmax_cross_entropy(logits, batch_labels);
      TensorPtr encodings[] = {batch};
      auto total = total_stage_loss(ce, cfg.regularizers, layers, encodings);
      backward(total);
      optimizer.step();
      Tape::active().clear();

      stats.loss += total->value();
      stats.ce += ce->value();
      stats.hits += count_argmax_hits(logits, batch_labels);
      stats.count += b;
      ++stats.batches;
      {
        NoGradGuard no_grad;
        const auto& prototypes = model.multi_layer.prototypes;
        if (cfg.regularizers.diversity > 0 && cfg.multi_prototype_count >= 2)
          stats.diversity += diversity_loss(prototypes)->value();
        if (cfg.regularizers.similarity > 0)
          stats.similarity += similarity_loss(prototypes, batch)->value();
        if (cfg.regularizers.coverage > 0)
          stats.coverage += coverage_loss(prototypes, batch)->value();
      }
    }
    if (log) log->push_back(stats.record(3, epoch));
  }
  model.stage_done[2] = true;
  check_finite(model, "stage 3");
}

void train_remaining_stages(Model& model, const Dataset& train, TrainLog* log) {
  if (!model.stage_done[0]) pretrain_encoders(model, train, log);
  if (!model.stage_done[1]) train_single_variable_stage(model, train, log);
  if (!model.stage_done[2]) train_multivariable_stage(model, train, log);
}

TensorPtr multivariable_vector(const Model& model, const Sample& sample) {
  if (!model.stage_done[1])
    throw StateError("multivariable representation requires completed stages 1-2");
  if (static_cast<int>(sample.variables.size()) != model.data.dimensions)
    throw DimensionError("sample has " + std::to_string(sample.variables.size()) +
                         " variables, model expects " + std::to_string(model.data.dimensions));
  std::vector<TensorPtr> sims;
  for (int k = 0; k < model.data.dimensions; ++k) {
    auto encoding = encode(model.encoders[static_cast<std::size_t>(k)],
                           sample.variables[static_cast<std::size_t>(k)]);
    sims.push_back(match(model.single_layers[static_cast<std::size_t>(k)], encoding));
  }
  return build_multivariable(sims).values;
}

RowMatrixXd multivariable_matrix(const Model& model, const Dataset& data) {
  NoGradGuard no_grad;
  RowMatrixXd out(data.size(), model.representation_width());
  for (Eigen::Index i = 0; i < data.size(); ++i)
    out.row(i) = multivariable_vector(model, data.sample(i))->vector().transpose();
  return out;
}

Prediction predict(const Model& model, const Sample& sample) {
  if (!model.complete()) throw StateError("predict requires a fully trained model");
  if (static_cast<int>(sample.variables.size()) != model.data.dimensions)
    throw DimensionError("sample has " + std::to_string(sample.variables.size()) +
                         " variables, model expects " + std::to_string(model.data.dimensions));
  for (const auto& v : sample.variables)
    if (v.size() != model.data.length)
      throw DimensionError("sample length " + std::to_string(v.size()) +
                           " does not match model length " + std::to_string(model.data.length));
  NoGradGuard no_grad;
  auto representation = multivariable_vector(model, sample);
  auto sims = match(model.multi_layer, representation);
  auto logits = add_bias(matmul(as_row(sims), model.head_weights), model.head_bias);

  Eigen::VectorXd row = logits->matrix().row(0).transpose();
  const double peak = row.maxCoeff();
  Eigen::VectorXd probabilities = (row.array() - peak).exp();
  probabilities /= probabilities.sum();

  Prediction prediction;
  Eigen::Index best = 0;
  probabilities.maxCoeff(&best);
  prediction.label = static_cast<int>(best);
  prediction.probabilities = std::move(probabilities);
  prediction.multivariable_similarities = sims->vector();
  return prediction;
}

Evaluation evaluate(const Model& model, const Dataset& data) {
  const auto classes = static_cast<Eigen::Index>(model.data.classes());
  Evaluation result;
  result.confusion = Eigen::MatrixXd::Zero(classes, classes);
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const Sample& sample = data.sample(i);
    const Prediction p = predict(model, sample);
    result.confusion(sample.label, p.label) += 1.0;
    if (p.label == sample.label) ++hits;
  }
  result.accuracy = data.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(data.size());
  result.per_class_accuracy = Eigen::VectorXd::Zero(classes);
  for (Eigen::Index c = 0; c < classes; ++c) {
    const double total = result.confusion.row(c).sum();
    result.per_class_accuracy[c] = total > 0 ? result.confusion(c, c) / total : 0.0;
  }
  return result;
}

}  // namespace mvproto
