#include "mvproto/model.hpp"

#include <fstream>
#include <json.hpp>

#include "mvproto/errors.hpp"
#include "mvproto/random.hpp"

namespace mvproto {

namespace {

constexpr const char* kFormatName = "mvproto-model";
constexpr int kFormatVersion = 1;

using nlohmann::json;

json tensor_to_json(const TensorPtr& t) {
  json j;
  j["shape"] = t->shape();
  j["values"] = std::vector<double>(t->values().data(), t->values().data() + t->size());
  return j;
}

TensorPtr tensor_from_json(const json& j, const std::string& name,
                           const std::vector<Eigen::Index>& expected_shape) {
  if (!j.contains("shape") || !j.contains("values"))
    throw LoadError("array '" + name + "' is missing shape or values");
  std::vector<Eigen::Index> shape = j["shape"].get<std::vector<Eigen::Index>>();
  if (shape != expected_shape) {
    auto str = [](const std::vector<Eigen::Index>& s) {
      std::string out = "[";
      for (std::size_t i = 0; i < s.size(); ++i)
        out += (i ? "x" : "") + std::to_string(s[i]);
      return out + "]";
    };
    throw LoadError("array '" + name + "' has shape " + str(shape) + ", expected " +
                    str(expected_shape));
  }
  std::vector<double> values = j["values"].get<std::vector<double>>();
  Eigen::Index total = 1;
  for (auto e : shape) total *= e;
  if (static_cast<Eigen::Index>(values.size()) != total)
    throw LoadError("array '" + name + "' value count does not match its shape");
  Eigen::ArrayXd flat = Eigen::Map<const Eigen::ArrayXd>(values.data(), total);
  return Tensor::from_array(shape, std::move(flat), true);
}

}  // namespace

void TrainConfig::validate() const {
  auto positive = [](auto v, const char* what) {
    if (v <= 0) throw ConfigError(std::string("config: ") + what + " must be positive");
  };
  positive(stage1_epochs, "stage1_epochs");
  positive(stage2_epochs, "stage2_epochs");
  positive(stage3_epochs, "stage3_epochs");
  positive(batch_size, "batch_size");
  positive(pairs_per_epoch, "pairs_per_epoch");
  positive(learning_rate, "learning_rate");
  positive(hidden_size, "hidden_size");
  positive(single_prototype_count, "single_prototype_count");
  positive(multi_prototype_count, "multi_prototype_count");
  positive(regularizers.contrastive_margin, "contrastive_margin");
  if (regularizers.diversity < 0 || regularizers.similarity < 0 || regularizers.coverage < 0)
    throw ConfigError("config: regularizer weights must be nonnegative");
  if (stage1_threads < 0) throw ConfigError("config: stage1_threads must be nonnegative");
}

std::vector<std::pair<std::string, TensorPtr>> Model::named_parameters() const {
  std::vector<std::pair<std::string, TensorPtr>> out;
  for (std::size_t k = 0; k < encoders.size(); ++k) {
    const std::string prefix = "encoder." + std::to_string(k) + ".";
    out.emplace_back(prefix + "input_weights", encoders[k].input_weights);
    out.emplace_back(prefix + "hidden_weights", encoders[k].hidden_weights);
    out.emplace_back(prefix + "bias", encoders[k].bias);
  }
  if (stage_done[1]) {
    for (std::size_t k = 0; k < single_layers.size(); ++k)
      out.emplace_back("single." + std::to_string(k) + ".prototypes",
                       single_layers[k].prototypes);
    out.emplace_back("stage2_head.weights", stage2_head_weights);
    out.emplace_back("stage2_head.bias", stage2_head_bias);
  }
  if (stage_done[2]) {
    out.emplace_back("multi.prototypes", multi_layer.prototypes);
    out.emplace_back("head.weights", head_weights);
    out.emplace_back("head.bias", head_bias);
  }
  return out;
}

Model make_model(const Dataset& train, TrainConfig config) {
  config.validate();
  if (train.empty()) throw DataError("make_model: training split is empty");
  if (train.classes() < 2) throw DataError("make_model: need at least two classes");
  Model model;
  model.config = config;
  model.data.dimensions = train.dimensions();
  model.data.length = train.length();
  model.data.class_names = train.class_names();
  model.data.normalization = train.normalization();
  for (int k = 0; k < train.dimensions(); ++k)
    model.encoders.push_back(
        init_encoder(k, config.hidden_size, derive_seed(config.seed, {0x454e49ULL})));
  return model;
}

void save_model(const Model& model, std::ostream& out) {
  json j;
  j["format"] = kFormatName;
  j["version"] = kFormatVersion;

  json config;
  config["stage1_epochs"] = model.config.stage1_epochs;
  config["stage2_epochs"] = model.config.stage2_epochs;
  config["stage3_epochs"] = model.config.stage3_epochs;
  config["batch_size"] = model.config.batch_size;
  config["pairs_per_epoch"] = model.config.pairs_per_epoch;
  config["learning_rate"] = model.config.learning_rate;
  config["hidden_size"] = model.config.hidden_size;
  config["single_prototype_count"] = model.config.single_prototype_count;
  config["multi_prototype_count"] = model.config.multi_prototype_count;
  config["lambda_diversity"] = model.config.regularizers.diversity;
  config["lambda_similarity"] = model.config.regularizers.similarity;
  config["lambda_coverage"] = model.config.regularizers.coverage;
  config["contrastive_margin"] = model.config.regularizers.contrastive_margin;
  config["seed"] = model.config.seed;
  config["stage1_threads"] = model.config.stage1_threads;
  j["config"] = config;

  json data;
  data["dimensions"] = model.data.dimensions;
  data["length"] = model.data.length;
  data["class_names"] = model.data.class_names;
  if (model.data.normalization) {
    const auto& norm = *model.data.normalization;
    data["normalization"] = {
        {"mean", std::vector<double>(norm.mean.data(), norm.mean.data() + norm.mean.size())},
        {"stddev",
         std::vector<double>(norm.stddev.data(), norm.stddev.data() + norm.stddev.size())}};
  } else {
    data["normalization"] = nullptr;
  }
  j["data"] = data;

  j["stages"] = model.stage_done;

  json arrays;
  for (const auto& [name, tensor] : model.named_parameters())
    arrays[name] = tensor_to_json(tensor);
  j["arrays"] = arrays;

  out << j.dump(1, '\t') << '\n';
  if (!out) throw IoError("save_model: stream failure");
}

Model load_model(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw LoadError(std::string("model file is not valid JSON (truncated?): ") + e.what());
  }
  if (!j.contains("format") || j["format"] != kFormatName)
    throw LoadError("not a model file (missing format marker)");
  if (!j.contains("version") || !j["version"].is_number_integer())
    throw LoadError("model file has no version");
  if (j["version"] != kFormatVersion)
    throw LoadError("unsupported model version " + j["version"].dump() + ", expected " +
                    std::to_string(kFormatVersion));

  Model model;
  try {
    const json& config = j.at("config");
    model.config.stage1_epochs = config.at("stage1_epochs").get<int>();
    model.config.stage2_epochs = config.at("stage2_epochs").get<int>();
    model.config.stage3_epochs = config.at("stage3_epochs").get<int>();
    model.config.batch_size = config.at("batch_size").get<int>();
    model.config.pairs_per_epoch = config.at("pairs_per_epoch").get<int>();
    model.config.learning_rate = config.at("learning_rate").get<double>();
    model.config.hidden_size = config.at("hidden_size").get<Eigen::Index>();
    model.config.single_prototype_count = config.at("single_prototype_count").get<Eigen::Index>();
    model.config.multi_prototype_count = config.at("multi_prototype_count").get<Eigen::Index>();
    model.config.regularizers.diversity = config.at("lambda_diversity").get<double>();
    model.config.regularizers.similarity = config.at("lambda_similarity").get<double>();
    model.config.regularizers.coverage = config.at("lambda_coverage").get<double>();
    model.config.regularizers.contrastive_margin = config.at("contrastive_margin").get<double>();
    model.config.seed = config.at("seed").get<std::uint64_t>();
    model.config.stage1_threads = config.at("stage1_threads").get<int>();

    const json& data = j.at("data");
    model.data.dimensions = data.at("dimensions").get<int>();
    model.data.length = data.at("length").get<Eigen::Index>();
    model.data.class_names = data.at("class_names").get<std::vector<std::string>>();
    if (!data.at("normalization").is_null()) {
      NormalizationStats norm;
      auto mean = data["normalization"].at("mean").get<std::vector<double>>();
      auto stddev = data["normalization"].at("stddev").get<std::vector<double>>();
      norm.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
      norm.stddev =
          Eigen::Map<const Eigen::VectorXd>(stddev.data(), static_cast<Eigen::Index>(stddev.size()));
      model.data.normalization = norm;
    }

    auto stages = j.at("stages").get<std::vector<bool>>();
    if (stages.size() != 3) throw LoadError("field 'stages' must have three entries");
    model.stage_done = {stages[0], stages[1], stages[2]};
  } catch (const json::exception& e) {
    throw LoadError(std::string("malformed model file: ") + e.what());
  }
  if ((model.stage_done[1] && !model.stage_done[0]) ||
      (model.stage_done[2] && !model.stage_done[1]))
    throw LoadError("field 'stages' is not monotone");
  model.config.validate();
  if (model.data.dimensions < 1 || model.data.classes() < 2)
    throw LoadError("field 'data' describes an unusable dataset");

  const json& arrays = j.at("arrays");
  auto fetch = [&arrays](const std::string& name, std::vector<Eigen::Index> shape) {
    if (!arrays.contains(name)) throw LoadError("array '" + name + "' is missing");
    return tensor_from_json(arrays.at(name), name, shape);
  };

  const Eigen::Index hidden = model.config.hidden_size;
  const int d = model.data.dimensions;
  const auto classes = static_cast<Eigen::Index>(model.data.classes());
  for (int k = 0; k < d; ++k) {
    const std::string prefix = "encoder." + std::to_string(k) + ".";
    EncoderParams enc;
    enc.variable = k;
    enc.hidden = hidden;
    enc.input_weights = fetch(prefix + "input_weights", {1, 3 * hidden});
    enc.hidden_weights = fetch(prefix + "hidden_weights", {hidden, 3 * hidden});
    enc.bias = fetch(prefix + "bias", {3 * hidden});
    model.encoders.push_back(std::move(enc));
  }
  if (model.stage_done[1]) {
    for (int k = 0; k < d; ++k) {
      PrototypeLayer layer;
      layer.level = PrototypeLevel::kSingleVariable;
      layer.variable = k;
      layer.prototypes = fetch("single." + std::to_string(k) + ".prototypes",
                               {model.config.single_prototype_count, hidden});
      model.single_layers.push_back(std::move(layer));
    }
    model.stage2_head_weights =
        fetch("stage2_head.weights", {model.representation_width(), classes});
    model.stage2_head_bias = fetch("stage2_head.bias", {classes});
  }
  if (model.stage_done[2]) {
    model.multi_layer.level = PrototypeLevel::kMultivariable;
    model.multi_layer.variable = -1;
    model.multi_layer.prototypes =
        fetch("multi.prototypes",
              {model.config.multi_prototype_count, model.representation_width()});
    model.head_weights = fetch("head.weights", {model.config.multi_prototype_count, classes});
    model.head_bias = fetch("head.bias", {classes});
  }
  return model;
}

void save_model_file(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  save_model(model, out);
}

Model load_model_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return load_model(in);
}

}  // namespace mvproto
