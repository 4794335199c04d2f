#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qcnn/dataset.hpp"
#include "qcnn/embeddings.hpp"
#include "qcnn/network.hpp"
#include "qcnn/training.hpp"

namespace qcnn {

/// A coarse model routing each question to one fine model per coarse category.
struct TwoTierClassifier {
  LabelTaxonomy taxonomy = LabelTaxonomy::standard();
  QcnnModel tier1;
  std::vector<QcnnModel> tier2;  // indexed by coarse category
  std::size_t max_len = kDefaultMaxLen;

  /// Throws ConfigError unless tier1 has one class per coarse category and
  /// each tier2 model matches its category's fine count.
  void validate() const;
};

/// The embedding tables used by each tier. They may be the same table.
struct TierEmbeddings {
  const EmbeddingTable& tier1;
  const EmbeddingTable& tier2;
};

/// Identifies a model: "tier1" or "tier2/<Coarse>".
std::string model_name(const LabelTaxonomy& taxonomy, std::optional<std::size_t> coarse);

using TrainProgress =
    std::function<void(std::string_view model, std::size_t epoch, const EpochStats&)>;

/// Seeds derived from config.seed: model index 0 is tier 1, 1 + c is the
/// tier-2 model of coarse category c.
std::uint64_t init_seed(std::uint64_t seed, std::size_t model_index) noexcept;
std::uint64_t train_seed(std::uint64_t seed, std::size_t model_index) noexcept;

/// Trains on the train_fraction share of `records` (the rest is validation).
QcnnModel train_tier1(std::span<const QuestionRecord> records, const EmbeddingTable& table,
                      const TrainConfig& config, const TrainProgress& progress = {},
                      const LabelTaxonomy& taxonomy = LabelTaxonomy::standard());
/// Trains on gold records of `coarse` only, labelled by local fine index.
/// Throws ConfigError if the category has no training records.
QcnnModel train_tier2(std::span<const QuestionRecord> records, std::size_t coarse,
                      const EmbeddingTable& table, const TrainConfig& config,
                      const TrainProgress& progress = {},
                      const LabelTaxonomy& taxonomy = LabelTaxonomy::standard());

/// One coarse model plus one fine model per category (1 + 6 models).
TwoTierClassifier train_two_tier(std::span<const QuestionRecord> records,
                                 const TierEmbeddings& embeddings, const TrainConfig& config,
                                 const TrainProgress& progress = {},
                                 const LabelTaxonomy& taxonomy = LabelTaxonomy::standard());

struct Classification {
  std::size_t coarse = 0;
  std::size_t fine = 0;  // local to `coarse`
};

/// Hard argmax routing: tier 1 picks the coarse category, its tier-2 model
/// picks the fine label.
Classification classify(const TwoTierClassifier& classifier, std::string_view question,
                        const TierEmbeddings& embeddings);
Classification classify_tokens(const TwoTierClassifier& classifier,
                               const std::vector<std::string>& tokens,
                               const TierEmbeddings& embeddings);

struct CoarseStats {
  std::size_t entries = 0;  // gold records of this category
  std::size_t correct = 0;  // tier-2 correct under gold routing
  double accuracy() const noexcept {
    return entries == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(entries);
  }
};

struct HierMetrics {
  std::size_t total = 0;
  std::size_t main_correct = 0;  // coarse correct
  std::size_t both_correct = 0;  // coarse and routed fine correct
  std::vector<CoarseStats> per_coarse;
  std::vector<std::vector<std::size_t>> coarse_confusion;  // [gold][predicted]

  double main_accuracy() const noexcept;
  double sub_accuracy_end_to_end() const noexcept;
  /// both_correct / main_correct; 0 when nothing was routed correctly.
  double sub_accuracy_conditional() const noexcept;
};

/// Throws ConfigError on empty input.
HierMetrics evaluate_hierarchical(const TwoTierClassifier& classifier,
                                  std::span<const QuestionRecord> records,
                                  const TierEmbeddings& embeddings);

}  // namespace qcnn
