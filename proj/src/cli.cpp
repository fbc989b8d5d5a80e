#include "mvproto/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "mvproto/errors.hpp"
#include "mvproto/interpret.hpp"
#include "mvproto/random.hpp"
#include "mvproto/synthetic.hpp"
#include "mvproto/training.hpp"
#include "mvproto/ts_format.hpp"

namespace mvproto {

namespace {

namespace fs = std::filesystem;

constexpr int kExitUsage = 2;
constexpr int kExitModelState = 3;

/// Flat key=value config file with '#' comments; unknown keys rejected.
void apply_config_file(const fs::path& path, TrainConfig& config) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto begin = line.find_first_not_of(" \t\r");
    if (begin == std::string::npos) continue;
    const auto end = line.find_last_not_of(" \t\r");
    line = line.substr(begin, end - begin + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config file line " + std::to_string(line_no) + ": expected key=value");
    auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t");
      return s.substr(b, e - b + 1);
    };
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    try {
      if (key == "stage1_epochs") config.stage1_epochs = std::stoi(value);
      else if (key == "stage2_epochs") config.stage2_epochs = std::stoi(value);
      else if (key == "stage3_epochs") config.stage3_epochs = std::stoi(value);
      else if (key == "batch_size") config.batch_size = std::stoi(value);
      else if (key == "pairs_per_epoch") config.pairs_per_epoch = std::stoi(value);
      else if (key == "learning_rate") config.learning_rate = std::stod(value);
      else if (key == "hidden_size") config.hidden_size = std::stol(value);
      else if (key == "single_prototypes") config.single_prototype_count = std::stol(value);
      else if (key == "multi_prototypes") config.multi_prototype_count = std::stol(value);
      else if (key == "lambda_diversity") config.regularizers.diversity = std::stod(value);
      else if (key == "lambda_similarity") config.regularizers.similarity = std::stod(value);
      else if (key == "lambda_coverage") config.regularizers.coverage = std::stod(value);
      else if (key == "contrastive_margin") config.regularizers.contrastive_margin = std::stod(value);
      else if (key == "seed") config.seed = std::stoull(value);
      else if (key == "threads") config.stage1_threads = std::stoi(value);
      else throw ConfigError("config file line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError("config file line " + std::to_string(line_no) + ": bad value '" + value +
                        "' for key '" + key + "'");
    }
  }
}

fs::path find_data_file(const fs::path& location, const std::string& exact,
                        const std::string& suffix) {
  if (fs::is_regular_file(location)) return location;
  if (!fs::is_directory(location))
    throw DataError("data path '" + location.string() + "' does not exist");
  if (fs::is_regular_file(location / exact)) return location / exact;
  std::vector<fs::path> candidates;
  for (const auto& entry : fs::directory_iterator(location)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
      candidates.push_back(entry.path());
  }
  std::sort(candidates.begin(), candidates.end());
  if (candidates.empty())
    throw DataError("no '" + exact + "' or '*" + suffix + "' file under '" + location.string() +
                    "'");
  return candidates.front();
}

struct SynthArgs {
  std::string out;
  std::uint64_t seed = SyntheticConfig{}.seed;
  int samples_per_class = 100;
  double noise_std = 0.1;
  Eigen::Index series_length = 128;
  double test_fraction = 0.2;
};

int cmd_synth(const SynthArgs& args) {
  SyntheticConfig config;
  config.seed = args.seed;
  config.samples_per_class = args.samples_per_class;
  config.noise_std = args.noise_std;
  config.series_length = args.series_length;

  const fs::path out_dir(args.out);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir))
    throw IoError("cannot create output directory '" + out_dir.string() + "'");

  Dataset data = generate(config);
  auto [train, test] =
      stratified_split(data, args.test_fraction, derive_seed(config.seed, {0x53504c4954ULL}));
  write_ts_file(train, out_dir / "train.ts", "synthetic");
  write_ts_file(test, out_dir / "test.ts", "synthetic");

  nlohmann::json manifest;
  manifest["command"] = "synth";
  manifest["seed"] = config.seed;
  manifest["samples_per_class"] = config.samples_per_class;
  manifest["noise_std"] = config.noise_std;
  manifest["series_length"] = config.series_length;
  manifest["test_fraction"] = args.test_fraction;
  manifest["classes"] = config.classes();
  manifest["train_samples"] = train.size();
  manifest["test_samples"] = test.size();
  manifest["files"] = {"train.ts", "test.ts"};
  std::ofstream mf(out_dir / "manifest.json");
  if (!mf) throw IoError("cannot write manifest under '" + out_dir.string() + "'");
  mf << manifest.dump(1, '\t') << '\n';

  std::cout << "wrote " << train.size() << " train and " << test.size() << " test samples to "
            << out_dir.string() << '\n';
  return 0;
}

struct TrainArgs {
  std::string data_dir;
  std::string out;
  std::string config_file;
  std::string resume;
  TrainConfig config;
  std::vector<std::string> overridden;  // names of flags the user passed
};

int cmd_train(const TrainArgs& args) {
  const fs::path train_path = find_data_file(args.data_dir, "train.ts", "_TRAIN.ts");
  const fs::path test_path = find_data_file(args.data_dir, "test.ts", "_TEST.ts");
  Dataset train = read_ts_file(train_path);
  Dataset test = read_ts_file(test_path);
  normalize(train, {&test});

  Model model;
  if (!args.resume.empty()) {
    model = load_model_file(args.resume);
    if (model.data.dimensions != train.dimensions() || model.data.length != train.length() ||
        model.data.classes() != train.classes())
      throw DataError("checkpoint was trained on differently shaped data");
    if (!args.overridden.empty() || !args.config_file.empty())
      std::cout << "note: resuming; the checkpoint's config snapshot takes precedence\n";
  } else {
    model = make_model(train, args.config);
  }

  TrainLog log;
  const std::array<void (*)(Model&, const Dataset&, TrainLog*), 3> stages = {
      pretrain_encoders, train_single_variable_stage, train_multivariable_stage};
  for (int stage = 0; stage < 3; ++stage) {
    if (model.stage_done[static_cast<std::size_t>(stage)]) {
      std::cout << "stage " << stage + 1 << ": already complete, skipping\n";
      continue;
    }
    std::cout << "stage " << stage + 1 << ": training...\n";
    stages[static_cast<std::size_t>(stage)](model, train, &log);
    save_model_file(model, args.out);  // checkpoint at the stage boundary
  }
  save_model_file(model, args.out);  // covers resuming an already complete model

  const fs::path log_path = fs::path(args.out).concat(".log.csv");
  std::ofstream log_file(log_path);
  if (!log_file) throw IoError("cannot write training log '" + log_path.string() + "'");
  log_file << train_log_csv(log);

  const Evaluation result = evaluate(model, test);
  std::cout << "holdout accuracy: " << result.accuracy << '\n';
  return 0;
}

struct EvalArgs {
  std::string model;
  std::string data;
  std::string out;
};

int cmd_eval(const EvalArgs& args) {
  Model model = load_model_file(args.model);
  Dataset data = read_ts_file(find_data_file(args.data, "test.ts", "_TEST.ts"));
  if (model.data.normalization) apply_normalization(data, *model.data.normalization);

  const Evaluation result = evaluate(model, data);
  std::cout << "accuracy: " << result.accuracy << '\n';
  for (int c = 0; c < model.data.classes(); ++c)
    std::cout << "class " << model.data.class_names[static_cast<std::size_t>(c)]
              << " accuracy: " << result.per_class_accuracy[c] << '\n';

  std::ostringstream csv;
  csv << "true\\predicted";
  for (const auto& name : model.data.class_names) csv << ',' << name;
  csv << '\n';
  for (Eigen::Index r = 0; r < result.confusion.rows(); ++r) {
    csv << model.data.class_names[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < result.confusion.cols(); ++c)
      csv << ',' << static_cast<long>(result.confusion(r, c));
    csv << '\n';
  }
  if (args.out.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream out(args.out);
    if (!out) throw IoError("cannot write '" + args.out + "'");
    out << csv.str();
  }
  return 0;
}

struct InterpretArgs {
  std::string model;
  std::string data;
  std::string out;
};

int cmd_interpret(const InterpretArgs& args) {
  Model model = load_model_file(args.model);
  Dataset data = read_ts_file(find_data_file(args.data, "train.ts", "_TRAIN.ts"));
  if (model.data.normalization) apply_normalization(data, *model.data.normalization);

  const fs::path out_dir(args.out);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir))
    throw IoError("cannot create output directory '" + out_dir.string() + "'");

  const InterpretationReport report = multivariable_report(model, data);
  const fs::path report_path = out_dir / "report.json";
  std::ofstream out(report_path);
  if (!out) throw IoError("cannot write '" + report_path.string() + "'");
  out << report_to_json(report, model);
  export_encodings(model, data, out_dir);
  std::cout << "wrote report and encoding tables to " << out_dir.string() << '\n';
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"two-level prototype learning for multivariable time series classification"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate the synthetic benchmark as .ts files");
  synth_cmd->add_option("--out", synth.out, "output directory")->required();
  synth_cmd->add_option("--seed", synth.seed, "generator seed");
  synth_cmd->add_option("--samples-per-class", synth.samples_per_class, "samples per class");
  synth_cmd->add_option("--noise-std", synth.noise_std, "per-variable noise level");
  synth_cmd->add_option("--series-length", synth.series_length, "timesteps per variable");
  synth_cmd->add_option("--test-fraction", synth.test_fraction, "held-out fraction");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "run the three-stage training procedure");
  train_cmd->add_option("--data", train.data_dir, "directory with train/test .ts files")->required();
  train_cmd->add_option("--out", train.out, "model file to write")->required();
  train_cmd->add_option("--config", train.config_file, "key=value config file");
  train_cmd->add_option("--resume", train.resume, "checkpoint to continue from");
  auto* seed_opt = train_cmd->add_option("--seed", train.config.seed, "training seed");
  auto* s1 = train_cmd->add_option("--stage1-epochs", train.config.stage1_epochs);
  auto* s2 = train_cmd->add_option("--stage2-epochs", train.config.stage2_epochs);
  auto* s3 = train_cmd->add_option("--stage3-epochs", train.config.stage3_epochs);
  auto* bs = train_cmd->add_option("--batch-size", train.config.batch_size);
  auto* pairs = train_cmd->add_option("--pairs-per-epoch", train.config.pairs_per_epoch);
  auto* lr = train_cmd->add_option("--learning-rate", train.config.learning_rate);
  auto* hidden = train_cmd->add_option("--hidden-size", train.config.hidden_size);
  auto* sp = train_cmd->add_option("--single-prototypes", train.config.single_prototype_count);
  auto* mp = train_cmd->add_option("--multi-prototypes", train.config.multi_prototype_count);
  auto* ld = train_cmd->add_option("--lambda-diversity", train.config.regularizers.diversity);
  auto* ls = train_cmd->add_option("--lambda-similarity", train.config.regularizers.similarity);
  auto* lc = train_cmd->add_option("--lambda-coverage", train.config.regularizers.coverage);
  auto* margin =
      train_cmd->add_option("--contrastive-margin", train.config.regularizers.contrastive_margin);
  auto* threads = train_cmd->add_option("--threads", train.config.stage1_threads,
                                        "stage-1 worker threads (0 = auto)");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a trained model");
  eval_cmd->add_option("--model", eval_args.model, "model file")->required();
  eval_cmd->add_option("--data", eval_args.data, ".ts file or directory")->required();
  eval_cmd->add_option("--out", eval_args.out, "confusion matrix CSV (default: stdout)");

  InterpretArgs interpret_args;
  auto* interpret_cmd = app.add_subcommand("interpret", "write the interpretation report");
  interpret_cmd->add_option("--model", interpret_args.model, "model file")->required();
  interpret_cmd->add_option("--data", interpret_args.data, "training .ts file or directory")
      ->required();
  interpret_cmd->add_option("--out", interpret_args.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n' << app.help();
    return kExitUsage;
  }

  try {
    if (*synth_cmd) return cmd_synth(synth);
    if (*train_cmd) {
      // precedence: defaults < config file < explicit flags
      TrainConfig flag_values = train.config;
      train.config = TrainConfig{};
      if (seed_opt->count()) train.overridden.push_back("seed");
      if (!train.config_file.empty()) apply_config_file(train.config_file, train.config);
      auto apply_if = [&](CLI::Option* opt, auto member, const char* name) {
        if (opt->count()) {
          train.config.*member = flag_values.*member;
          train.overridden.push_back(name);
        }
      };
      if (seed_opt->count()) train.config.seed = flag_values.seed;
      apply_if(s1, &TrainConfig::stage1_epochs, "stage1-epochs");
      apply_if(s2, &TrainConfig::stage2_epochs, "stage2-epochs");
      apply_if(s3, &TrainConfig::stage3_epochs, "stage3-epochs");
      apply_if(bs, &TrainConfig::batch_size, "batch-size");
      apply_if(pairs, &TrainConfig::pairs_per_epoch, "pairs-per-epoch");
      apply_if(lr, &TrainConfig::learning_rate, "learning-rate");
      apply_if(hidden, &TrainConfig::hidden_size, "hidden-size");
      apply_if(sp, &TrainConfig::single_prototype_count, "single-prototypes");
      apply_if(mp, &TrainConfig::multi_prototype_count, "multi-prototypes");
      apply_if(threads, &TrainConfig::stage1_threads, "threads");
      if (ld->count()) train.config.regularizers.diversity = flag_values.regularizers.diversity;
      if (ls->count()) train.config.regularizers.similarity = flag_values.regularizers.similarity;
      if (lc->count()) train.config.regularizers.coverage = flag_values.regularizers.coverage;
      if (margin->count())
        train.config.regularizers.contrastive_margin = flag_values.regularizers.contrastive_margin;
      train.config.validate();
      return cmd_train(train);
    }
    if (*eval_cmd) return cmd_eval(eval_args);
    if (*interpret_cmd) return cmd_interpret(interpret_args);
  } catch (const StateError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitModelState;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const LoadError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    // contract/dimension/index failures indicate a model-state problem
    std::cerr << "error: " << e.what() << '\n';
    return kExitModelState;
  }
  return kExitUsage;
}

}  // namespace mvproto
