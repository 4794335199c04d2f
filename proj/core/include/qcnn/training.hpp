#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "qcnn/dataset.hpp"
#include "qcnn/embeddings.hpp"
#include "qcnn/network.hpp"

namespace qcnn {

enum class OptimizerKind { sgd, adam };

std::string_view to_string(OptimizerKind kind) noexcept;
std::optional<OptimizerKind> parse_optimizer(std::string_view name) noexcept;

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 50;
  std::size_t epochs = 20;
  OptimizerKind optimizer = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 1;

  std::size_t filters = 100;
  std::size_t hidden = 128;
  std::size_t k = 2;
  double dropout = 0.5;
  std::size_t max_len = kDefaultMaxLen;
  Activation conv_activation = Activation::tanh;

  // Fraction of the training file kept for training; the rest is a
  // validation set reported per epoch. 1.0 disables the split.
  double train_fraction = 0.9;
  // Worker threads per minibatch. Results are deterministic for a fixed
  // thread count; 1 reproduces the serial summation order.
  std::size_t threads = 1;

  /// Throws ConfigError.
  void validate() const;
  ModelShape model_shape(std::size_t dim, std::size_t classes) const;
};

struct EpochStats {
  double mean_loss = 0.0;
  double train_accuracy = 0.0;  // from the training-mode forward passes
  std::optional<double> validation_accuracy;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
};

inline constexpr double kProbabilityFloor = 1e-12;

/// -log(max(p[target], 1e-12)). Throws DimensionError if target is out of range.
double cross_entropy(std::span<const double> probabilities, std::size_t target);

struct OptimizerState {
  std::size_t step = 0;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
};

/// SGD: p -= lr g. Adam: bias-corrected moments. Throws DimensionError on
/// mismatched lengths.
void optimizer_step(std::span<double> params, std::span<const double> grads,
                    OptimizerState& state, const TrainConfig& config);
void optimizer_step(QcnnModel& params, const Gradients& grads, OptimizerState& state,
                    const TrainConfig& config);

struct Example {
  SentenceMatrix sentence;
  std::size_t label = 0;
};

enum class LabelLevel { coarse, fine };

std::vector<Example> make_examples(std::span<const QuestionRecord> records,
                                   const EmbeddingTable& table, std::size_t max_len,
                                   LabelLevel level);

/// Mean gradient over `batch`, with masks[i] applied to example i. Returns the
/// summed loss and correct count through the optional out-parameters.
Gradients batch_gradient(const QcnnModel& model, std::span<const Example> batch,
                         std::span<const DropoutMasks> masks, std::size_t threads = 1,
                         double* loss_sum = nullptr, std::size_t* correct = nullptr);

using EpochCallback = std::function<void(std::size_t epoch, const EpochStats&)>;

/// Seeded full-epoch shuffles, minibatch gradient averaging and one optimizer
/// step per batch. Throws ConfigError on empty input and NumericalError when
/// a batch loss is not finite.
TrainHistory train(QcnnModel& model, std::span<const Example> examples, const TrainConfig& config,
                   std::span<const Example> validation = {}, const EpochCallback& on_epoch = {});

struct Evaluation {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy = 0.0;
  /// confusion[gold][predicted]
  std::vector<std::vector<std::size_t>> confusion;
};

/// Throws ConfigError on empty input.
Evaluation evaluate(const QcnnModel& model, std::span<const Example> examples);

using GradientMutator = std::function<void(Gradients&)>;

struct GradCheckOptions {
  std::size_t trials = 20;
  std::uint64_t seed = 1;
  double eps = 1e-5;
  Activation conv_activation = Activation::tanh;
  // Applied to every analytic gradient before comparison (mutation testing).
  GradientMutator mutator;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t parameters_checked = 0;
};

inline constexpr double kRelativeErrorFloor = 1e-6;

/// |a - n| / max(|a|, |n|, 1e-6)
double relative_error(double analytic, double numeric) noexcept;

/// Random small models in training mode (fixed dropout masks) against
/// central differences of the loss. Trial t uses mix_seed(seed, t).
GradCheckResult gradient_check_harness(const GradCheckOptions& options);

}  // namespace qcnn
