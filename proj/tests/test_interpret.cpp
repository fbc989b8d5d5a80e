#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mvproto/errors.hpp"
#include "mvproto/interpret.hpp"
#include "support/test_data.hpp"

using namespace mvproto;
using testsupport::make_tiny_setup;

namespace {

struct SharedRun {
  testsupport::TinySetup setup = make_tiny_setup(21);
  Model model;
  SharedRun() {
    model = make_model(setup.train, setup.config);
    train_remaining_stages(model, setup.train);
  }
};

SharedRun& shared_run() {
  static SharedRun run;
  return run;
}

}  // namespace

TEST_CASE("projection is the brute-force argmin with the lowest-index tie rule") {
  const auto& run = shared_run();
  const InterpretationReport report = project_prototypes(run.model, run.setup.train);
  REQUIRE(report.single.size() ==
          static_cast<std::size_t>(4 * run.setup.config.single_prototype_count));

  for (const auto& projection : report.single) {
    const RowMatrixXd enc = encode_all(run.model.encoders[static_cast<std::size_t>(projection.variable)],
                                       run.setup.train, projection.variable);
    const auto prototype =
        run.model.single_layers[static_cast<std::size_t>(projection.variable)]
            .prototypes->matrix()
            .row(projection.prototype);
    // independent scan
    Eigen::Index best = 0;
    double best_distance = (enc.row(0) - prototype).norm();
    for (Eigen::Index i = 1; i < enc.rows(); ++i) {
      const double d = (enc.row(i) - prototype).norm();
      if (d < best_distance) {
        best_distance = d;
        best = i;
      }
    }
    CHECK(projection.sample_index == best);
    CHECK(projection.distance == doctest::Approx(best_distance).epsilon(1e-12));
    // the reported raw series is that sample's series for that variable
    CHECK((projection.series -
           run.setup.train.sample(best).variables[static_cast<std::size_t>(projection.variable)])
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
}

TEST_CASE("projection: exact-hit prototypes and equidistant ties") {
  const auto& run = shared_run();
  Model model = run.model;  // shares tensors; layers replaced below

  // A training set with a duplicated sample encodes to two bitwise equal
  // rows, so a prototype sitting on them is a true exact tie.
  Dataset duplicated(run.setup.train.dimensions(), run.setup.train.length(),
                     run.setup.train.class_names());
  duplicated.add(run.setup.train.sample(0));
  duplicated.add(run.setup.train.sample(1));
  duplicated.add(run.setup.train.sample(0));

  const RowMatrixXd enc = encode_all(model.encoders[0], duplicated, 0);
  REQUIRE((enc.row(0) - enc.row(2)).cwiseAbs().maxCoeff() == 0.0);
  RowMatrixXd protos(2, enc.cols());
  protos.row(0) = enc.row(1);  // exact hit on sample 1
  protos.row(1) = enc.row(2);  // tie between rows 0 and 2
  model.config.single_prototype_count = 2;
  for (int k = 0; k < 4; ++k) {
    const RowMatrixXd rows =
        k == 0 ? protos
               : RowMatrixXd(model.single_layers[static_cast<std::size_t>(k)]
                                 .prototypes->matrix()
                                 .topRows(2));
    model.single_layers[static_cast<std::size_t>(k)].prototypes = Tensor::from_matrix(rows, true);
  }

  const InterpretationReport report = project_prototypes(model, duplicated);
  CHECK(report.single[0].sample_index == 1);
  CHECK(report.single[0].distance == 0.0);
  CHECK(report.single[1].sample_index == 0);  // equidistant -> lower index wins
  CHECK(report.single[1].distance == 0.0);
}

TEST_CASE("multivariable report shape, block argmaxes and dominant classes") {
  const auto& run = shared_run();
  const InterpretationReport report = multivariable_report(run.model, run.setup.train);
  REQUIRE(static_cast<Eigen::Index>(report.multi.size()) ==
          run.setup.config.multi_prototype_count);
  CHECK(report.block_starts ==
        std::vector<Eigen::Index>{0, 4, 8, 12});

  const auto prototypes = run.model.multi_layer.prototypes->matrix();
  for (const auto& entry : report.multi) {
    CHECK(entry.vector.size() == run.model.representation_width());
    CHECK((entry.vector.transpose() - prototypes.row(entry.prototype)).cwiseAbs().maxCoeff() ==
          0.0);
    REQUIRE(entry.blocks.size() == 4);
    for (const auto& block : entry.blocks) {
      const Eigen::Index start = report.block_starts[static_cast<std::size_t>(block.variable)];
      const Eigen::Index width = 4;
      // argmax lies within the block and is the block maximum
      CHECK(block.argmax_prototype >= 0);
      CHECK(block.argmax_prototype < width);
      const double block_max = entry.vector.segment(start, width).maxCoeff();
      CHECK(block.value == block_max);
    }
    CHECK(entry.dominant_class >= 0);
    CHECK(entry.dominant_class < 64);
    CHECK(entry.dominant_class == dominant_class(run.model, entry.prototype));
  }
}

TEST_CASE("reports are pure functions of model and dataset") {
  const auto& run = shared_run();
  const std::string a = report_to_json(multivariable_report(run.model, run.setup.train), run.model);
  const std::string b = report_to_json(multivariable_report(run.model, run.setup.train), run.model);
  CHECK(a == b);
  CHECK(a.find("\"format\": \"mvproto-report\"") != std::string::npos);
}

TEST_CASE("interpretation requires the matching stages") {
  auto setup = make_tiny_setup(44);
  Model model = make_model(setup.train, setup.config);
  CHECK_THROWS_AS(project_prototypes(model, setup.train), StateError);
  CHECK_THROWS_AS(multivariable_report(model, setup.train), StateError);
  CHECK_THROWS_AS(export_encodings(model, setup.train, "/tmp/mvproto-test-never"), StateError);
}

TEST_CASE("encoding export matches encode() exactly") {
  const auto& run = shared_run();
  const std::filesystem::path dir =
      std::filesystem::temp_directory_path() / "mvproto_export_test";
  std::filesystem::remove_all(dir);
  export_encodings(run.model, run.setup.test, dir);

  Eigen::Index rows_seen = 0;
  for (int k = 0; k < 4; ++k) {
    std::ifstream in(dir / ("encodings_var" + std::to_string(k) + ".csv"));
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    CHECK(header.rfind("sample_index,label,e0,", 0) == 0);
    std::string line;
    Eigen::Index row = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream fields(line);
      std::string token;
      std::getline(fields, token, ',');
      CHECK(std::stol(token) == row);
      std::getline(fields, token, ',');
      CHECK(std::stoi(token) == run.setup.test.sample(row).label);
      NoGradGuard no_grad;
      auto expected = encode(run.model.encoders[static_cast<std::size_t>(k)],
                             run.setup.test.sample(row).variables[static_cast<std::size_t>(k)]);
      for (Eigen::Index f = 0; f < expected->size(); ++f) {
        std::getline(fields, token, ',');
        CHECK(std::stod(token) == expected->values()[f]);  // shortest round-trip form
      }
      ++row;
      ++rows_seen;
    }
    CHECK(row == run.setup.test.size());
  }
  CHECK(rows_seen == 4 * run.setup.test.size());
  std::filesystem::remove_all(dir);
}
