#include "qcnn/training.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

#include "qcnn/errors.hpp"

namespace qcnn {

std::string_view to_string(OptimizerKind kind) noexcept {
  return kind == OptimizerKind::sgd ? "sgd" : "adam";
}

std::optional<OptimizerKind> parse_optimizer(std::string_view name) noexcept {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  return std::nullopt;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
  if (max_len == 0) throw ConfigError("max_len must be positive");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    throw ConfigError("train fraction must lie in (0, 1]");
  }
  if (threads == 0) throw ConfigError("thread count must be positive");
  model_shape(1, 1).validate();
}

ModelShape TrainConfig::model_shape(std::size_t dim, std::size_t classes) const {
  ModelShape shape;
  shape.dim = dim;
  shape.filters = filters;
  shape.hidden = hidden;
  shape.k = k;
  shape.classes = classes;
  shape.dropout = dropout;
  shape.conv_activation = conv_activation;
  return shape;
}

double cross_entropy(std::span<const double> probabilities, std::size_t target) {
  if (target >= probabilities.size()) {
    throw DimensionError("cross_entropy: target " + std::to_string(target) + " out of range for " +
                         std::to_string(probabilities.size()) + " classes");
  }
  return -std::log(std::max(probabilities[target], kProbabilityFloor));
}

namespace {

// One update over a contiguous parameter range. `first`/`second` point at the
// matching Adam moments; `step` is the 1-based step count.
void update_range(std::span<double> params, std::span<const double> grads, double* first,
                  double* second, std::size_t step, const TrainConfig& config) {
  if (config.optimizer == OptimizerKind::sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= config.learning_rate * grads[i];
    return;
  }
  const double b1 = config.beta1;
  const double b2 = config.beta2;
  const auto t = static_cast<double>(step);
  const double correction1 = 1.0 - std::pow(b1, t);
  const double correction2 = 1.0 - std::pow(b2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    first[i] = b1 * first[i] + (1.0 - b1) * g;
    second[i] = b2 * second[i] + (1.0 - b2) * g * g;
    const double m_hat = first[i] / correction1;
    const double v_hat = second[i] / correction2;
    params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.adam_epsilon);
  }
}

void ensure_moments(OptimizerState& state, std::size_t n, const TrainConfig& config) {
  if (config.optimizer != OptimizerKind::adam) return;
  if (state.first_moment.empty() && state.second_moment.empty()) {
    state.first_moment.assign(n, 0.0);
    state.second_moment.assign(n, 0.0);
  }
  if (state.first_moment.size() != n || state.second_moment.size() != n) {
    throw DimensionError("optimizer_step: Adam state holds " +
                         std::to_string(state.first_moment.size()) + " moments for " +
                         std::to_string(n) + " parameters");
  }
}

}  // namespace

void optimizer_step(std::span<double> params, std::span<const double> grads,
                    OptimizerState& state, const TrainConfig& config) {
  if (params.size() != grads.size()) {
    throw DimensionError("optimizer_step: " + std::to_string(params.size()) + " parameters but " +
                         std::to_string(grads.size()) + " gradients");
  }
  ensure_moments(state, params.size(), config);
  ++state.step;
  update_range(params, grads, state.first_moment.data(), state.second_moment.data(), state.step,
               config);
}

void optimizer_step(QcnnModel& params, const Gradients& grads, OptimizerState& state,
                    const TrainConfig& config) {
  if (!(params.shape == grads.shape)) {
    throw DimensionError("optimizer_step: gradient layout does not match the model");
  }
  ensure_moments(state, parameter_count(params), config);
  ++state.step;
  const auto p_tensors = tensors(params);
  const auto g_tensors = tensors(grads);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < p_tensors.size(); ++i) {
    double* first = state.first_moment.empty() ? nullptr : state.first_moment.data() + offset;
    double* second = state.second_moment.empty() ? nullptr : state.second_moment.data() + offset;
    update_range(p_tensors[i].values, g_tensors[i].values, first, second, state.step, config);
    offset += p_tensors[i].values.size();
  }
}

std::vector<Example> make_examples(std::span<const QuestionRecord> records,
                                   const EmbeddingTable& table, std::size_t max_len,
                                   LabelLevel level) {
  std::vector<Example> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    out.push_back(Example{embed_sentence(tokenize(r.text), table, max_len),
                          level == LabelLevel::coarse ? r.coarse : r.fine});
  }
  return out;
}

namespace {

void zero(Gradients& grads) {
  for (auto& t : tensors(grads)) std::fill(t.values.begin(), t.values.end(), 0.0);
}

void add_into(Gradients& dst, const Gradients& src) {
  auto d = tensors(dst);
  const auto s = tensors(src);
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t j = 0; j < d[i].values.size(); ++j) d[i].values[j] += s[i].values[j];
  }
}

struct ChunkResult {
  double loss = 0.0;
  std::size_t correct = 0;
};

ChunkResult accumulate_range(const QcnnModel& model, std::span<const Example> batch,
                             std::span<const DropoutMasks> masks, std::size_t begin,
                             std::size_t end, double scale, Gradients& grads) {
  static const DropoutMasks kNoDropout;
  ChunkResult result;
  for (std::size_t i = begin; i < end; ++i) {
    const auto& ex = batch[i];
    const auto cache = forward(model, ex.sentence.values, masks.empty() ? kNoDropout : masks[i]);
    result.loss += cross_entropy(cache.probabilities, ex.label);
    if (argmax(cache.probabilities) == ex.label) ++result.correct;
    backward_accumulate(model, cache, ex.label, grads, scale);
  }
  return result;
}

void batch_gradient_into(const QcnnModel& model, std::span<const Example> batch,
                         std::span<const DropoutMasks> masks, std::size_t threads,
                         Gradients& grads, std::vector<Gradients>& scratch, double& loss_sum,
                         std::size_t& correct) {
  if (batch.empty()) throw ConfigError("batch_gradient: empty batch");
  if (!masks.empty() && masks.size() != batch.size()) {
    throw DimensionError("batch_gradient: one dropout mask set per example is required");
  }
  zero(grads);
  const double scale = 1.0 / static_cast<double>(batch.size());
  const std::size_t workers = std::min(threads, batch.size());
  if (workers <= 1) {
    const auto r = accumulate_range(model, batch, masks, 0, batch.size(), scale, grads);
    loss_sum = r.loss;
    correct = r.correct;
    return;
  }
  // Contiguous chunks summed in chunk order: deterministic for a fixed worker count.
  while (scratch.size() < workers) scratch.push_back(zeros_like(model));
  std::vector<ChunkResult> results(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = batch.size() * w / workers;
      const std::size_t end = batch.size() * (w + 1) / workers;
      pool.emplace_back([&, w, begin, end] {
        zero(scratch[w]);
        results[w] = accumulate_range(model, batch, masks, begin, end, scale, scratch[w]);
      });
    }
  }
  loss_sum = 0.0;
  correct = 0;
  for (std::size_t w = 0; w < workers; ++w) {
    add_into(grads, scratch[w]);
    loss_sum += results[w].loss;
    correct += results[w].correct;
  }
}

}  // namespace

Gradients batch_gradient(const QcnnModel& model, std::span<const Example> batch,
                         std::span<const DropoutMasks> masks, std::size_t threads,
                         double* loss_sum, std::size_t* correct) {
  Gradients grads = zeros_like(model);
  std::vector<Gradients> scratch;
  double loss = 0.0;
  std::size_t hits = 0;
  batch_gradient_into(model, batch, masks, threads, grads, scratch, loss, hits);
  if (loss_sum != nullptr) *loss_sum = loss;
  if (correct != nullptr) *correct = hits;
  return grads;
}

TrainHistory train(QcnnModel& model, std::span<const Example> examples, const TrainConfig& config,
                   std::span<const Example> validation, const EpochCallback& on_epoch) {
  config.validate();
  if (examples.empty()) throw ConfigError("train: no training examples");
  for (const auto& ex : examples) {
    if (ex.label >= model.shape.classes) {
      throw ConfigError("train: label " + std::to_string(ex.label) + " out of range for " +
                        std::to_string(model.shape.classes) + " classes");
    }
  }

  TrainHistory history;
  Rng shuffle_rng(mix_seed(config.seed, 0x5348));
  Rng dropout_rng(mix_seed(config.seed, 0x4450));
  OptimizerState state;
  Gradients grads = zeros_like(model);
  std::vector<Gradients> scratch;
  std::vector<Example> batch;
  std::vector<DropoutMasks> masks;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = shuffled_indices(shuffle_rng, examples.size());
    double epoch_loss = 0.0;
    std::size_t epoch_correct = 0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      masks.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(examples[order[i]]);
        masks.push_back(draw_dropout_masks(model.shape, dropout_rng));
      }
      double loss = 0.0;
      std::size_t correct = 0;
      batch_gradient_into(model, batch, masks, config.threads, grads, scratch, loss, correct);
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "non-finite loss " << loss << " at epoch " << epoch + 1 << ", batch "
            << batch_index + 1;
        throw NumericalError(msg.str());
      }
      epoch_loss += loss;
      epoch_correct += correct;
      optimizer_step(model, grads, state, config);
    }
    EpochStats stats;
    stats.mean_loss = epoch_loss / static_cast<double>(examples.size());
    stats.train_accuracy =
        static_cast<double>(epoch_correct) / static_cast<double>(examples.size());
    if (!validation.empty()) stats.validation_accuracy = evaluate(model, validation).accuracy;
    history.epochs.push_back(stats);
    if (on_epoch) on_epoch(epoch + 1, stats);
  }
  return history;
}

Evaluation evaluate(const QcnnModel& model, std::span<const Example> examples) {
  if (examples.empty()) throw ConfigError("evaluate: no examples");
  const std::size_t classes = model.shape.classes;
  Evaluation eval;
  eval.total = examples.size();
  eval.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  for (const auto& ex : examples) {
    if (ex.label >= classes) {
      throw ConfigError("evaluate: label " + std::to_string(ex.label) + " out of range");
    }
    const std::size_t predicted = predict(model, ex.sentence);
    ++eval.confusion[ex.label][predicted];
    if (predicted == ex.label) ++eval.correct;
  }
  eval.accuracy = static_cast<double>(eval.correct) / static_cast<double>(eval.total);
  return eval;
}

double relative_error(double analytic, double numeric) noexcept {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kRelativeErrorFloor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult gradient_check_harness(const GradCheckOptions& options) {
  GradCheckResult result;
  for (std::size_t trial = 0; trial < options.trials; ++trial) {
    Rng rng(mix_seed(options.seed, trial));
    auto pick = [&](std::size_t lo, std::size_t hi) {
      return lo + static_cast<std::size_t>(rng.uniform_index(hi - lo + 1));
    };
    ModelShape shape;
    shape.dim = pick(2, 6);
    shape.filters = pick(1, 3);
    shape.hidden = 2 * pick(1, 4);
    shape.classes = pick(2, 5);
    shape.dropout = trial % 2 == 0 ? 0.5 : 0.0;
    shape.conv_activation = options.conv_activation;
    const std::size_t length = pick(1, 7);

    QcnnModel model = init_model(shape, rng);
    // Non-zero biases so their gradients are exercised too.
    for (auto& t : tensors(model)) {
      if (t.cols == 1) {
        for (auto& v : t.values) v = 0.1 * rng.normal();
      }
    }
    Matrix sentence(length, shape.dim);
    for (auto& v : sentence.data()) v = rng.normal();
    const std::size_t target = static_cast<std::size_t>(rng.uniform_index(shape.classes));
    const DropoutMasks masks = draw_dropout_masks(shape, rng);

    const auto cache = forward(model, sentence, masks);
    Gradients analytic = backward(model, cache, target);
    if (options.mutator) options.mutator(analytic);
    const auto analytic_flat = flatten(analytic);

    QcnnModel probe = model;
    const auto loss_at = [&](std::span<const double> params) {
      unflatten(params, probe);
      return cross_entropy(forward(probe, sentence, masks).probabilities, target);
    };
    const auto numeric = finite_difference_grad(loss_at, flatten(model), options.eps);
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      result.max_relative_error =
          std::max(result.max_relative_error, relative_error(analytic_flat[i], numeric[i]));
    }
    result.parameters_checked += numeric.size();
  }
  return result;
}

}  // namespace qcnn
