#include "qcnn/hierarchy.hpp"

#include "qcnn/errors.hpp"

namespace qcnn {

void TwoTierClassifier::validate() const {
  if (tier1.shape.classes != taxonomy.coarse_count()) {
    throw ConfigError("tier-1 model has " + std::to_string(tier1.shape.classes) +
                      " classes, taxonomy has " + std::to_string(taxonomy.coarse_count()));
  }
  if (tier2.size() != taxonomy.coarse_count()) {
    throw ConfigError("expected " + std::to_string(taxonomy.coarse_count()) +
                      " tier-2 models, found " + std::to_string(tier2.size()));
  }
  for (std::size_t c = 0; c < tier2.size(); ++c) {
    if (tier2[c].shape.classes != taxonomy.fine_count(c)) {
      throw ConfigError("tier-2 model for " + taxonomy.coarse_name(c) + " has " +
                        std::to_string(tier2[c].shape.classes) + " classes, expected " +
                        std::to_string(taxonomy.fine_count(c)));
    }
  }
}

std::string model_name(const LabelTaxonomy& taxonomy, std::optional<std::size_t> coarse) {
  return coarse ? "tier2/" + taxonomy.coarse_name(*coarse) : std::string("tier1");
}

std::uint64_t init_seed(std::uint64_t seed, std::size_t model_index) noexcept {
  return mix_seed(seed, 2 * model_index + 1);
}

std::uint64_t train_seed(std::uint64_t seed, std::size_t model_index) noexcept {
  return mix_seed(seed, 2 * model_index + 2);
}

namespace {

QcnnModel fit(std::span<const QuestionRecord> records, const EmbeddingTable& table,
              const TrainConfig& config, std::size_t classes, LabelLevel level,
              std::size_t model_index, const std::string& name, const TrainProgress& progress) {
  std::vector<QuestionRecord> train_records(records.begin(), records.end());
  std::vector<QuestionRecord> validation_records;
  if (config.train_fraction < 1.0 && records.size() >= 2) {
    auto split = holdout_split(records, config.train_fraction, train_seed(config.seed, model_index));
    train_records = std::move(split.first);
    validation_records = std::move(split.second);
  }
  if (train_records.empty()) throw ConfigError(name + ": no training records after the holdout split");

  Rng init_rng(init_seed(config.seed, model_index));
  QcnnModel model = init_model(config.model_shape(table.dim(), classes), init_rng);
  const auto train_examples = make_examples(train_records, table, config.max_len, level);
  const auto validation_examples = make_examples(validation_records, table, config.max_len, level);

  TrainConfig model_config = config;
  model_config.seed = train_seed(config.seed, model_index);
  EpochCallback on_epoch;
  if (progress) {
    on_epoch = [&](std::size_t epoch, const EpochStats& stats) { progress(name, epoch, stats); };
  }
  train(model, train_examples, model_config, validation_examples, on_epoch);
  return model;
}

}  // namespace

QcnnModel train_tier1(std::span<const QuestionRecord> records, const EmbeddingTable& table,
                      const TrainConfig& config, const TrainProgress& progress,
                      const LabelTaxonomy& taxonomy) {
  if (records.empty()) throw ConfigError("tier1: no training records");
  return fit(records, table, config, taxonomy.coarse_count(), LabelLevel::coarse, 0,
             model_name(taxonomy, std::nullopt), progress);
}

QcnnModel train_tier2(std::span<const QuestionRecord> records, std::size_t coarse,
                      const EmbeddingTable& table, const TrainConfig& config,
                      const TrainProgress& progress, const LabelTaxonomy& taxonomy) {
  if (coarse >= taxonomy.coarse_count()) throw ConfigError("tier2: coarse index out of range");
  const auto subset = subset_by_coarse(records, coarse);
  if (subset.empty()) {
    throw ConfigError("no training records for coarse category " + taxonomy.coarse_name(coarse));
  }
  return fit(subset, table, config, taxonomy.fine_count(coarse), LabelLevel::fine, 1 + coarse,
             model_name(taxonomy, coarse), progress);
}

TwoTierClassifier train_two_tier(std::span<const QuestionRecord> records,
                                 const TierEmbeddings& embeddings, const TrainConfig& config,
                                 const TrainProgress& progress, const LabelTaxonomy& taxonomy) {
  config.validate();
  std::vector<std::size_t> counts(taxonomy.coarse_count(), 0);
  for (const auto& r : records) {
    if (r.coarse < counts.size()) ++counts[r.coarse];
  }
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) {
      throw ConfigError("no training records for coarse category " + taxonomy.coarse_name(c));
    }
  }

  TwoTierClassifier classifier;
  classifier.taxonomy = taxonomy;
  classifier.max_len = config.max_len;
  classifier.tier1 = train_tier1(records, embeddings.tier1, config, progress, taxonomy);
  for (std::size_t c = 0; c < taxonomy.coarse_count(); ++c) {
    classifier.tier2.push_back(
        train_tier2(records, c, embeddings.tier2, config, progress, taxonomy));
  }
  return classifier;
}

Classification classify_tokens(const TwoTierClassifier& classifier,
                               const std::vector<std::string>& tokens,
                               const TierEmbeddings& embeddings) {
  Classification out;
  out.coarse = predict(classifier.tier1, embed_sentence(tokens, embeddings.tier1, classifier.max_len));
  out.fine = predict(classifier.tier2.at(out.coarse),
                     embed_sentence(tokens, embeddings.tier2, classifier.max_len));
  return out;
}

Classification classify(const TwoTierClassifier& classifier, std::string_view question,
                        const TierEmbeddings& embeddings) {
  return classify_tokens(classifier, tokenize(question), embeddings);
}

double HierMetrics::main_accuracy() const noexcept {
  return total == 0 ? 0.0 : static_cast<double>(main_correct) / static_cast<double>(total);
}

double HierMetrics::sub_accuracy_end_to_end() const noexcept {
  return total == 0 ? 0.0 : static_cast<double>(both_correct) / static_cast<double>(total);
}

double HierMetrics::sub_accuracy_conditional() const noexcept {
  return main_correct == 0 ? 0.0
                           : static_cast<double>(both_correct) / static_cast<double>(main_correct);
}

HierMetrics evaluate_hierarchical(const TwoTierClassifier& classifier,
                                  std::span<const QuestionRecord> records,
                                  const TierEmbeddings& embeddings) {
  if (records.empty()) throw ConfigError("evaluate_hierarchical: no records");
  classifier.validate();
  const auto& taxonomy = classifier.taxonomy;
  const std::size_t n_coarse = taxonomy.coarse_count();

  HierMetrics metrics;
  metrics.total = records.size();
  metrics.per_coarse.assign(n_coarse, CoarseStats{});
  metrics.coarse_confusion.assign(n_coarse, std::vector<std::size_t>(n_coarse, 0));

  for (const auto& r : records) {
    if (r.coarse >= n_coarse || r.fine >= taxonomy.fine_count(r.coarse)) {
      throw ConfigError("evaluate_hierarchical: record label outside the taxonomy");
    }
    const auto tokens = tokenize(r.text);
    const auto s1 = embed_sentence(tokens, embeddings.tier1, classifier.max_len);
    const auto s2 = embed_sentence(tokens, embeddings.tier2, classifier.max_len);
    const std::size_t coarse = predict(classifier.tier1, s1);
    ++metrics.coarse_confusion[r.coarse][coarse];

    // Gold routing for the per-category table.
    const std::size_t gold_routed_fine = predict(classifier.tier2[r.coarse], s2);
    auto& stats = metrics.per_coarse[r.coarse];
    ++stats.entries;
    if (gold_routed_fine == r.fine) ++stats.correct;

    if (coarse == r.coarse) {
      ++metrics.main_correct;
      // Predicted routing coincides with gold routing here.
      if (gold_routed_fine == r.fine) ++metrics.both_correct;
    }
  }
  return metrics;
}

}  // namespace qcnn
