#include "qclass/commands.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <unordered_set>

#include "qcnn/dataset.hpp"
#include "qcnn/embeddings.hpp"
#include "qcnn/errors.hpp"
#include "qcnn/hierarchy.hpp"
#include "qclass/config.hpp"
#include "qclass/model_io.hpp"
#include "qclass/report.hpp"

namespace qclass {

namespace fs = std::filesystem;
using qcnn::ConfigError;
using qcnn::FormatError;

namespace {

struct TrainingFlags {
  std::optional<std::string> config_file;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> filters;
  std::optional<std::size_t> hidden;
  std::optional<std::size_t> max_len;
  std::optional<std::size_t> threads;

  void add_to(CLI::App& app) {
    app.add_option("--config", config_file, "Flat key=value config file");
    app.add_option("--seed", seed, "Random seed");
    app.add_option("--epochs", epochs, "Training epochs");
    app.add_option("--lr", lr, "Learning rate");
    app.add_option("--batch-size", batch_size, "Minibatch size");
    app.add_option("--filters", filters, "Filters per kernel height");
    app.add_option("--hidden", hidden, "Units N of the first dense layer (second has N/2)");
    app.add_option("--max-len", max_len, "Maximum tokens per question");
    app.add_option("--threads", threads, "Worker threads per minibatch");
  }

  // Defaults, then the config file, then explicit flags.
  qcnn::TrainConfig resolve() const {
    qcnn::TrainConfig config;
    if (config_file) apply_config_file(config, *config_file);
    if (seed) config.seed = *seed;
    if (epochs) config.epochs = *epochs;
    if (lr) config.learning_rate = *lr;
    if (batch_size) config.batch_size = *batch_size;
    if (filters) config.filters = *filters;
    if (hidden) config.hidden = *hidden;
    if (max_len) config.max_len = *max_len;
    if (threads) config.threads = *threads;
    config.validate();
    return config;
  }
};

struct EmbeddingFlags {
  std::string tier1;
  std::optional<std::string> tier2;

  void add_to(CLI::App& app) {
    app.add_option("--embeddings", tier1, "Pretrained vectors (text format) for tier 1")
        ->required();
    app.add_option("--embeddings-tier2", tier2,
                   "Pretrained vectors for the tier-2 models (default: --embeddings)");
  }
};

// Loaded tables; tier2 aliases tier1 when both come from the same file.
struct LoadedEmbeddings {
  std::shared_ptr<const qcnn::EmbeddingTable> tier1;
  std::shared_ptr<const qcnn::EmbeddingTable> tier2;

  qcnn::TierEmbeddings view() const { return {*tier1, *tier2}; }
};

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) throw FormatError(std::string(what) + " not found: " + path);
}

std::unordered_set<std::string> vocabulary_of(const std::vector<std::string>& texts) {
  std::unordered_set<std::string> vocab;
  for (const auto& text : texts) {
    for (auto& token : qcnn::tokenize(text)) vocab.insert(std::move(token));
  }
  return vocab;
}

LoadedEmbeddings load_tables(const EmbeddingFlags& flags,
                             const std::unordered_set<std::string>& vocab, std::ostream& err) {
  require_file(flags.tier1, "embedding file");
  qcnn::EmbeddingLoadOptions options;
  options.keep = &vocab;
  LoadedEmbeddings out;
  out.tier1 = std::make_shared<const qcnn::EmbeddingTable>(qcnn::load_embeddings(flags.tier1, options));
  err << "loaded " << out.tier1->vocab_size() << " vectors of dimension " << out.tier1->dim()
      << " from " << flags.tier1 << "\n";
  if (flags.tier2 && *flags.tier2 != flags.tier1) {
    require_file(*flags.tier2, "tier-2 embedding file");
    out.tier2 =
        std::make_shared<const qcnn::EmbeddingTable>(qcnn::load_embeddings(*flags.tier2, options));
    err << "loaded " << out.tier2->vocab_size() << " vectors of dimension " << out.tier2->dim()
        << " from " << *flags.tier2 << "\n";
  } else {
    out.tier2 = out.tier1;
  }
  return out;
}

std::vector<std::string> texts_of(const std::vector<qcnn::QuestionRecord>& records) {
  std::vector<std::string> texts;
  texts.reserve(records.size());
  for (const auto& r : records) texts.push_back(r.text);
  return texts;
}

void check_dim(const qcnn::QcnnModel& model, const qcnn::EmbeddingTable& table,
               const std::string& name) {
  if (model.shape.dim != table.dim()) {
    throw FormatError(name + " expects " + std::to_string(model.shape.dim) +
                      "-dimensional embeddings, table has " + std::to_string(table.dim()));
  }
}

// Loads tier 1 and, when all of them exist, every tier-2 model.
struct LoadedModels {
  ModelContainer tier1;
  std::vector<ModelContainer> tier2;
  bool complete = false;
};

LoadedModels load_models(const fs::path& dir) {
  const auto& taxonomy = qcnn::LabelTaxonomy::standard();
  LoadedModels out;
  const auto tier1_path = model_file(dir, taxonomy, std::nullopt);
  if (!fs::is_regular_file(tier1_path)) {
    throw FormatError("tier-1 model not found: " + tier1_path.string());
  }
  out.tier1 = load_model(tier1_path);
  if (out.tier1.coarse) throw FormatError(tier1_path.string() + " is not a tier-1 model");
  if (!same_labels(out.tier1.taxonomy, taxonomy)) {
    throw FormatError("taxonomy mismatch: " + tier1_path.string() +
                      " was trained with a different label taxonomy");
  }
  out.complete = true;
  for (std::size_t c = 0; c < taxonomy.coarse_count(); ++c) {
    const auto path = model_file(dir, taxonomy, c);
    if (!fs::is_regular_file(path)) {
      out.complete = false;
      continue;
    }
    auto container = load_model(path);
    if (container.coarse != c || !same_labels(container.taxonomy, taxonomy)) {
      throw FormatError("taxonomy mismatch: " + path.string() + " does not hold the " +
                        taxonomy.coarse_name(c) + " tier-2 model");
    }
    out.tier2.push_back(std::move(container));
  }
  if (!out.complete) out.tier2.clear();
  return out;
}

qcnn::TwoTierClassifier assemble(const LoadedModels& models) {
  qcnn::TwoTierClassifier classifier;
  classifier.taxonomy = qcnn::LabelTaxonomy::standard();
  classifier.max_len = models.tier1.config.max_len;
  classifier.tier1 = models.tier1.model;
  for (const auto& c : models.tier2) classifier.tier2.push_back(c.model);
  classifier.validate();
  return classifier;
}

std::string format_epoch(std::string_view model, std::size_t epoch, const qcnn::EpochStats& s) {
  std::ostringstream line;
  line << model << "\tepoch " << epoch << "\tloss " << std::fixed << std::setprecision(6)
       << s.mean_loss << "\ttrain_acc " << std::setprecision(4) << s.train_accuracy;
  if (s.validation_accuracy) line << "\tval_acc " << *s.validation_accuracy;
  return line.str();
}

int cmd_train(const std::string& train_file, const EmbeddingFlags& emb, const std::string& model_dir,
              const TrainingFlags& flags, bool tier1_only,
              const std::optional<std::string>& tier2_only, std::ostream& out,
              std::ostream& err) {
  const auto& taxonomy = qcnn::LabelTaxonomy::standard();
  const qcnn::TrainConfig config = flags.resolve();
  std::optional<std::size_t> only_coarse;
  if (tier2_only) {
    only_coarse = taxonomy.find_coarse(*tier2_only);
    if (!only_coarse) throw ConfigError("--tier2-only: unknown coarse category '" + *tier2_only + "'");
  }
  if (tier1_only && only_coarse) throw ConfigError("--tier1-only and --tier2-only are exclusive");

  require_file(train_file, "training file");
  const auto records = qcnn::load_dataset(train_file, taxonomy);
  if (records.empty()) throw FormatError("training file has no records: " + train_file);
  const auto tables = load_tables(emb, vocabulary_of(texts_of(records)), err);

  fs::create_directories(model_dir);
  std::ofstream history(fs::path(model_dir) / "history.log", std::ios::trunc);
  const qcnn::TrainProgress progress = [&](std::string_view name, std::size_t epoch,
                                           const qcnn::EpochStats& stats) {
    const auto line = format_epoch(name, epoch, stats);
    out << line << "\n";
    history << line << "\n";
  };
  auto save = [&](std::optional<std::size_t> coarse, qcnn::QcnnModel model) {
    ModelContainer container{taxonomy, coarse, config, std::move(model)};
    const auto path = model_file(model_dir, taxonomy, coarse);
    save_model(path, container);
    out << "wrote " << path.string() << "\n";
  };

  if (only_coarse) {
    save(only_coarse,
         qcnn::train_tier2(records, *only_coarse, *tables.tier2, config, progress, taxonomy));
  } else if (tier1_only) {
    save(std::nullopt, qcnn::train_tier1(records, *tables.tier1, config, progress, taxonomy));
  } else {
    auto classifier = qcnn::train_two_tier(records, tables.view(), config, progress, taxonomy);
    save(std::nullopt, std::move(classifier.tier1));
    for (std::size_t c = 0; c < classifier.tier2.size(); ++c) save(c, std::move(classifier.tier2[c]));
  }
  return kExitOk;
}

int cmd_eval(const std::string& test_file, const EmbeddingFlags& emb, const std::string& model_dir,
             const std::optional<std::string>& report_path, std::ostream& out, std::ostream& err) {
  const auto& taxonomy = qcnn::LabelTaxonomy::standard();
  const auto models = load_models(model_dir);
  require_file(test_file, "test file");
  const auto records = qcnn::load_dataset(test_file, taxonomy);
  if (records.empty()) throw FormatError("test file has no records: " + test_file);
  const auto tables = load_tables(emb, vocabulary_of(texts_of(records)), err);
  check_dim(models.tier1.model, *tables.tier1, "tier-1 model");

  RunReport report;
  if (models.complete) {
    for (std::size_t c = 0; c < models.tier2.size(); ++c) {
      check_dim(models.tier2[c].model, *tables.tier2, qcnn::model_name(taxonomy, c) + " model");
    }
    const auto classifier = assemble(models);
    report = make_report(taxonomy, qcnn::evaluate_hierarchical(classifier, records, tables.view()));
  } else {
    err << "tier-2 models incomplete in " << model_dir << "; reporting tier 1 only\n";
    const auto examples = qcnn::make_examples(records, *tables.tier1, models.tier1.config.max_len,
                                              qcnn::LabelLevel::coarse);
    report = make_report(taxonomy, qcnn::evaluate(models.tier1.model, examples));
  }

  out << render_report(report);
  const fs::path json_path = report_path ? fs::path(*report_path) : fs::path(model_dir) / "report.json";
  std::ofstream json_out(json_path, std::ios::trunc);
  if (!json_out) throw FormatError("cannot write report " + json_path.string());
  json_out << report_to_json(report).dump(2) << "\n";
  out << "report written to " << json_path.string() << "\n";
  return kExitOk;
}

int cmd_predict(const std::vector<std::string>& texts_flag, const EmbeddingFlags& emb,
                const std::string& model_dir, std::istream& in, std::ostream& out,
                std::ostream& err) {
  const auto& taxonomy = qcnn::LabelTaxonomy::standard();
  std::vector<std::string> questions = texts_flag;
  if (questions.empty()) {
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") != std::string::npos) questions.push_back(line);
    }
  }
  if (questions.empty()) throw FormatError("no questions given on --text or standard input");

  const auto models = load_models(model_dir);
  if (!models.complete) throw FormatError("prediction needs all tier-2 models in " + model_dir);
  const auto tables = load_tables(emb, vocabulary_of(questions), err);
  check_dim(models.tier1.model, *tables.tier1, "tier-1 model");
  for (std::size_t c = 0; c < models.tier2.size(); ++c) {
    check_dim(models.tier2[c].model, *tables.tier2, qcnn::model_name(taxonomy, c) + " model");
  }
  const auto classifier = assemble(models);
  for (const auto& q : questions) {
    const auto result = qcnn::classify(classifier, q, tables.view());
    out << taxonomy.coarse_name(result.coarse) << '\t'
        << taxonomy.fine_name(result.coarse, result.fine) << '\n';
  }
  return kExitOk;
}

int cmd_gradcheck(std::size_t trials, std::uint64_t seed, const std::string& activation,
                  const RunHooks& hooks, std::ostream& out) {
  qcnn::GradCheckOptions options;
  options.trials = trials;
  options.seed = seed;
  const auto act = qcnn::parse_activation(activation);
  if (!act) throw ConfigError("--activation: expected tanh, relu or none");
  options.conv_activation = *act;
  options.mutator = hooks.gradient_mutator;
  if (trials == 0) throw ConfigError("--trials must be at least 1");
  const auto result = qcnn::gradient_check_harness(options);
  const double threshold = 1e-4;
  out << "worst relative error: " << std::scientific << std::setprecision(6)
      << result.max_relative_error << " over " << result.parameters_checked << " parameters in "
      << trials << " trials (threshold " << threshold << ")\n";
  return result.max_relative_error < threshold ? kExitOk : kExitCheckFailed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err, const RunHooks& hooks) {
  CLI::App app{"Two-tier CNN question classifier"};
  app.name("qclass");
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "Train tier-1 and tier-2 models");
  std::string train_file;
  std::string model_dir;
  EmbeddingFlags train_emb;
  TrainingFlags train_flags;
  bool tier1_only = false;
  std::optional<std::string> tier2_only;
  train->add_option("--train-file", train_file, "UIUC-format training file")->required();
  train->add_option("--model-dir", model_dir, "Output directory for model files")->required();
  train_emb.add_to(*train);
  train_flags.add_to(*train);
  train->add_flag("--tier1-only", tier1_only, "Train only the coarse model");
  train->add_option("--tier2-only", tier2_only, "Train only the fine model of one category");

  auto* eval = app.add_subcommand("eval", "Evaluate saved models on a labelled file");
  std::string test_file;
  std::string eval_dir;
  EmbeddingFlags eval_emb;
  std::optional<std::string> report_path;
  eval->add_option("--test-file", test_file, "UIUC-format test file")->required();
  eval->add_option("--model-dir", eval_dir, "Directory holding the model files")->required();
  eval_emb.add_to(*eval);
  eval->add_option("--report", report_path, "JSON report path (default: <model-dir>/report.json)");

  auto* predict = app.add_subcommand("predict", "Classify questions from --text or stdin");
  std::string predict_dir;
  EmbeddingFlags predict_emb;
  std::vector<std::string> texts;
  predict->add_option("--model-dir", predict_dir, "Directory holding the model files")->required();
  predict_emb.add_to(*predict);
  predict->add_option("--text", texts, "Question text (repeatable)");

  auto* gradcheck = app.add_subcommand("gradcheck", "Compare backprop with finite differences");
  std::size_t trials = 20;
  std::uint64_t gc_seed = 1;
  std::string activation = "tanh";
  gradcheck->add_option("--trials", trials, "Random model/input/target triples");
  gradcheck->add_option("--seed", gc_seed, "Random seed");
  gradcheck->add_option("--activation", activation, "Convolution activation: tanh, relu, none");

  std::vector<std::string> argv_storage{"qclass"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train) {
      return cmd_train(train_file, train_emb, model_dir, train_flags, tier1_only, tier2_only, out,
                       err);
    }
    if (*eval) return cmd_eval(test_file, eval_emb, eval_dir, report_path, out, err);
    if (*predict) return cmd_predict(texts, predict_emb, predict_dir, in, out, err);
    if (*gradcheck) return cmd_gradcheck(trials, gc_seed, activation, hooks, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace qclass
