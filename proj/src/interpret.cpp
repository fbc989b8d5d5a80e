#include "mvproto/interpret.hpp"

#include <charconv>
#include <fstream>
#include <json.hpp>

#include "mvproto/errors.hpp"

namespace mvproto {

namespace {

struct ProjectionHit {
  Eigen::Index sample = 0;
  double distance = 0.0;
};

/// Argmin distance over encoding rows; ties resolve to the lowest index.
ProjectionHit project_row(const Eigen::RowVectorXd& prototype,
                          const Eigen::Ref<const RowMatrixXd>& encodings) {
  ProjectionHit hit{0, (encodings.row(0) - prototype).norm()};
  for (Eigen::Index i = 1; i < encodings.rows(); ++i) {
    const double d = (encodings.row(i) - prototype).norm();
    if (d < hit.distance) hit = {i, d};
  }
  return hit;
}

std::string format_double(double v) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), v);
  return std::string(buffer, result.ptr);
}

}  // namespace

InterpretationReport project_prototypes(const Model& model, const Dataset& train) {
  if (!model.stage_done[1])
    throw StateError("prototype projection requires completed stages 1-2");
  if (train.empty()) throw ContractError("prototype projection needs a nonempty training set");

  InterpretationReport report;
  Eigen::Index offset = 0;
  for (int k = 0; k < model.data.dimensions; ++k) {
    report.block_starts.push_back(offset);
    offset += model.single_layers[static_cast<std::size_t>(k)].count();
  }
  for (int k = 0; k < model.data.dimensions; ++k) {
    const RowMatrixXd encodings =
        encode_all(model.encoders[static_cast<std::size_t>(k)], train, k);
    const auto& layer = model.single_layers[static_cast<std::size_t>(k)];
    for (Eigen::Index j = 0; j < layer.count(); ++j) {
      const ProjectionHit hit = project_row(layer.prototypes->matrix().row(j), encodings);
      report.single.push_back(
          {k, j, hit.sample, hit.distance,
           train.sample(hit.sample).variables[static_cast<std::size_t>(k)]});
    }
  }
  return report;
}

int dominant_class(const Model& model, Eigen::Index prototype) {
  if (!model.stage_done[2]) throw StateError("dominant class requires a completed stage 3");
  if (prototype < 0 || prototype >= model.multi_layer.count())
    throw IndexError("dominant_class: prototype index out of range");
  Eigen::VectorXd sims = Eigen::VectorXd::Zero(model.multi_layer.count());
  sims[prototype] = 1.0 / kSimilarityEpsilon;
  Eigen::VectorXd logits =
      model.head_weights->matrix().transpose() * sims + model.head_bias->vector();
  Eigen::Index best = 0;
  logits.maxCoeff(&best);
  return static_cast<int>(best);
}

InterpretationReport multivariable_report(const Model& model, const Dataset& train) {
  if (!model.stage_done[2])
    throw StateError("the multivariable report requires a completed stage 3");
  InterpretationReport report = project_prototypes(model, train);

  const auto prototypes = model.multi_layer.prototypes->matrix();
  for (Eigen::Index r = 0; r < prototypes.rows(); ++r) {
    MultiPrototypeReport entry;
    entry.prototype = r;
    entry.vector = prototypes.row(r).transpose();
    for (int k = 0; k < model.data.dimensions; ++k) {
      const Eigen::Index start = report.block_starts[static_cast<std::size_t>(k)];
      const Eigen::Index width = model.single_layers[static_cast<std::size_t>(k)].count();
      Eigen::Index argmax = 0;
      const double value = prototypes.row(r).segment(start, width).maxCoeff(&argmax);
      const auto& projection =
          report.single[static_cast<std::size_t>(start + argmax)];
      entry.blocks.push_back(
          {k, argmax, value, projection.sample_index, projection.distance});
    }
    entry.dominant_class = dominant_class(model, r);
    report.multi.push_back(std::move(entry));
  }
  return report;
}

void export_encodings(const Model& model, const Dataset& data,
                      const std::filesystem::path& directory) {
  if (!model.stage_done[0]) throw StateError("encoding export requires a completed stage 1");
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  for (int k = 0; k < model.data.dimensions; ++k) {
    const std::filesystem::path path =
        directory / ("encodings_var" + std::to_string(k) + ".csv");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << "sample_index,label";
    for (Eigen::Index f = 0; f < model.config.hidden_size; ++f) out << ",e" << f;
    out << '\n';
    const RowMatrixXd encodings =
        encode_all(model.encoders[static_cast<std::size_t>(k)], data, k);
    for (Eigen::Index i = 0; i < data.size(); ++i) {
      out << i << ',' << data.sample(i).label;
      for (Eigen::Index f = 0; f < encodings.cols(); ++f)
        out << ',' << format_double(encodings(i, f));
      out << '\n';
    }
    if (!out) throw IoError("failure while writing '" + path.string() + "'");
  }
}

std::string report_to_json(const InterpretationReport& report, const Model& model) {
  using nlohmann::json;
  json j;
  j["format"] = "mvproto-report";
  j["version"] = 1;
  j["class_names"] = model.data.class_names;
  j["block_starts"] = report.block_starts;

  json single = json::array();
  for (const auto& p : report.single) {
    json entry;
    entry["variable"] = p.variable;
    entry["prototype"] = p.prototype;
    entry["sample_index"] = p.sample_index;
    entry["distance"] = p.distance;
    entry["series"] = std::vector<double>(p.series.data(), p.series.data() + p.series.size());
    single.push_back(std::move(entry));
  }
  j["single_variable"] = single;

  json multi = json::array();
  for (const auto& m : report.multi) {
    json entry;
    entry["prototype"] = m.prototype;
    entry["vector"] = std::vector<double>(m.vector.data(), m.vector.data() + m.vector.size());
    json blocks = json::array();
    for (const auto& b : m.blocks) {
      blocks.push_back({{"variable", b.variable},
                        {"argmax_prototype", b.argmax_prototype},
                        {"value", b.value},
                        {"projected_sample", b.projected_sample},
                        {"projection_distance", b.projection_distance}});
    }
    entry["blocks"] = blocks;
    entry["dominant_class"] = m.dominant_class;
    entry["dominant_class_name"] =
        model.data.class_names[static_cast<std::size_t>(m.dominant_class)];
    multi.push_back(std::move(entry));
  }
  j["multivariable"] = multi;
  return j.dump(1, '\t') + "\n";
}

}  // namespace mvproto
