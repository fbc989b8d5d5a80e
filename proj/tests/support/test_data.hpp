#pragma once

// Small synthetic fixtures shared by the training-level test suites. Sized
// for seconds-scale runs; the acceptance suite exercises the full defaults.

#include "mvproto/dataset.hpp"
#include "mvproto/model.hpp"
#include "mvproto/random.hpp"
#include "mvproto/synthetic.hpp"

namespace testsupport {

struct TinySetup {
  mvproto::Dataset train;
  mvproto::Dataset test;
  mvproto::TrainConfig config;
};

inline TinySetup make_tiny_setup(std::uint64_t seed = 1) {
  mvproto::SyntheticConfig synth;
  synth.series_length = 64;
  synth.samples_per_class = 6;
  synth.seed = 7;
  mvproto::Dataset all = mvproto::generate(synth);
  auto [train, test] = mvproto::stratified_split(all, 0.2, 11);
  mvproto::normalize(train, {&test});

  mvproto::TrainConfig config;
  config.stage1_epochs = 8;
  config.stage2_epochs = 30;
  config.stage3_epochs = 30;
  config.batch_size = 16;
  config.pairs_per_epoch = 384;
  config.hidden_size = 12;
  config.single_prototype_count = 4;
  config.multi_prototype_count = 16;
  config.seed = seed;
  return {std::move(train), std::move(test), config};
}

}  // namespace testsupport
