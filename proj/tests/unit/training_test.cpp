#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "qcnn/training.hpp"
#include "support/synthetic.hpp"

namespace qcnn {
namespace {

TEST(CrossEntropy, KnownValues) {
  const std::vector<double> uniform(6, 1.0 / 6.0);
  EXPECT_NEAR(cross_entropy(uniform, 3), 1.791759, 1e-6);
  EXPECT_EQ(cross_entropy(std::vector<double>{0.0, 1.0}, 1), 0.0);
  EXPECT_NEAR(cross_entropy(std::vector<double>{1.0, 1e-12}, 1), 27.631021, 1e-6);
  EXPECT_NEAR(cross_entropy(std::vector<double>{1.0, 0.0}, 1), 27.631021, 1e-6);
  EXPECT_THROW(cross_entropy(uniform, 6), DimensionError);
}

TEST(OptimizerStep, Sgd) {
  TrainConfig config;
  config.optimizer = OptimizerKind::sgd;
  config.learning_rate = 0.1;
  std::vector<double> p{1.0};
  OptimizerState state;
  optimizer_step(p, std::vector<double>{2.0}, state, config);
  EXPECT_DOUBLE_EQ(p[0], 0.8);
}

TEST(OptimizerStep, AdamFirstStepMovesByLearningRate) {
  TrainConfig config;
  config.learning_rate = 1e-3;
  for (double g : {2.0, -0.5, 1e-3}) {
    std::vector<double> p{1.0};
    OptimizerState state;
    optimizer_step(p, std::vector<double>{g}, state, config);
    EXPECT_NEAR(std::abs(p[0] - 1.0), 1e-3, 1e-3 * 1e-5 / std::abs(g) + 1e-15);
    EXPECT_EQ(p[0] < 1.0, g > 0.0);
  }
}

TEST(OptimizerStep, ZeroGradientsLeaveParametersUnchanged) {
  for (auto kind : {OptimizerKind::sgd, OptimizerKind::adam}) {
    TrainConfig config;
    config.optimizer = kind;
    std::vector<double> p{1.0, -2.0};
    OptimizerState state;
    for (int i = 0; i < 10; ++i) optimizer_step(p, std::vector<double>{0.0, 0.0}, state, config);
    EXPECT_EQ(p, (std::vector<double>{1.0, -2.0}));
  }
}

TEST(OptimizerStep, ShapeMismatchThrows) {
  TrainConfig config;
  std::vector<double> p{1.0, 2.0};
  OptimizerState state;
  EXPECT_THROW(optimizer_step(p, std::vector<double>{1.0}, state, config), DimensionError);
  ModelShape a;
  a.dim = 2;
  a.filters = 1;
  a.hidden = 2;
  ModelShape b = a;
  b.classes = 3;
  auto model = make_model(a);
  EXPECT_THROW(optimizer_step(model, make_model(b), state, config), DimensionError);
}

TEST(OptimizerStep, ModelOverloadMatchesFlatUpdate) {
  ModelShape shape;
  shape.dim = 3;
  shape.filters = 2;
  shape.hidden = 4;
  Rng rng(1);
  auto model = init_model(shape, rng);
  auto grads = init_model(shape, rng);
  TrainConfig config;
  auto flat = flatten(model);
  OptimizerState flat_state, model_state;
  for (int i = 0; i < 3; ++i) {
    optimizer_step(flat, flatten(grads), flat_state, config);
    optimizer_step(model, grads, model_state, config);
  }
  EXPECT_EQ(flatten(model), flat);
}

struct Fixture {
  std::vector<std::string> words = testing::synthetic_vocabulary();
  EmbeddingTable table = testing::random_table(words, 12, 3);
  std::vector<QuestionRecord> records = testing::synthetic_records(2, 4, 2);

  TrainConfig config() const {
    TrainConfig c;
    c.filters = 6;
    c.hidden = 16;
    c.epochs = 3;
    c.batch_size = 8;
    return c;
  }
  std::vector<Example> examples() const {
    return make_examples(records, table, kDefaultMaxLen, LabelLevel::coarse);
  }
  QcnnModel model(const TrainConfig& c, std::uint64_t seed = 5) const {
    Rng rng(seed);
    return init_model(c.model_shape(table.dim(), 6), rng);
  }
};

TEST(BatchGradient, EqualsAverageOfPerExampleGradients) {
  Fixture fx;
  const auto config = fx.config();
  const auto model = fx.model(config);
  const auto examples = fx.examples();
  std::vector<Example> batch(examples.begin(), examples.begin() + 4);
  Rng rng(6);
  std::vector<DropoutMasks> masks;
  for (int i = 0; i < 4; ++i) masks.push_back(draw_dropout_masks(model.shape, rng));

  const auto batch_grad = flatten(batch_gradient(model, batch, masks));
  std::vector<double> mean(batch_grad.size(), 0.0);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto g = flatten(backward(model, forward(model, batch[i].sentence.values, masks[i]),
                                    batch[i].label));
    for (std::size_t j = 0; j < g.size(); ++j) mean[j] += g[j] / 4.0;
  }
  for (std::size_t j = 0; j < mean.size(); ++j) EXPECT_NEAR(batch_grad[j], mean[j], 1e-12);
}

TEST(BatchGradient, ThreadedSumMatchesSerialClosely) {
  Fixture fx;
  const auto config = fx.config();
  const auto model = fx.model(config);
  const auto examples = fx.examples();
  const auto serial = flatten(batch_gradient(model, examples, {}, 1));
  const auto threaded = flatten(batch_gradient(model, examples, {}, 3));
  const auto threaded_again = flatten(batch_gradient(model, examples, {}, 3));
  EXPECT_EQ(threaded, threaded_again);
  for (std::size_t j = 0; j < serial.size(); ++j) EXPECT_NEAR(serial[j], threaded[j], 1e-12);
}

TEST(Train, ZeroEpochsLeavesModelUnchanged) {
  Fixture fx;
  auto config = fx.config();
  config.epochs = 0;
  auto model = fx.model(config);
  const auto before = flatten(model);
  const auto history = train(model, fx.examples(), config);
  EXPECT_TRUE(history.epochs.empty());
  EXPECT_EQ(flatten(model), before);
}

TEST(Train, FixedSeedIsBitIdentical) {
  Fixture fx;
  const auto config = fx.config();
  auto a = fx.model(config);
  auto b = fx.model(config);
  const auto ha = train(a, fx.examples(), config);
  const auto hb = train(b, fx.examples(), config);
  EXPECT_EQ(flatten(a), flatten(b));
  ASSERT_EQ(ha.epochs.size(), 3u);
  for (std::size_t e = 0; e < 3; ++e) EXPECT_EQ(ha.epochs[e].mean_loss, hb.epochs[e].mean_loss);
}

TEST(Train, HistoryHasOneEntryPerEpochWithValidation) {
  Fixture fx;
  const auto config = fx.config();
  auto model = fx.model(config);
  const auto examples = fx.examples();
  std::size_t callbacks = 0;
  const auto history = train(model, examples, config, std::span(examples).first(5),
                             [&](std::size_t, const EpochStats&) { ++callbacks; });
  EXPECT_EQ(history.epochs.size(), config.epochs);
  EXPECT_EQ(callbacks, config.epochs);
  for (const auto& e : history.epochs) EXPECT_TRUE(e.validation_accuracy.has_value());
}

TEST(Train, EmptyInputAndBadLabelsThrow) {
  Fixture fx;
  const auto config = fx.config();
  auto model = fx.model(config);
  EXPECT_THROW(train(model, std::vector<Example>{}, config), ConfigError);
  auto examples = fx.examples();
  examples[0].label = 6;
  EXPECT_THROW(train(model, examples, config), ConfigError);
}

TEST(Train, NonFiniteLossAbortsWithDiagnostic) {
  Fixture fx;
  const auto config = fx.config();
  auto model = fx.model(config);
  auto examples = fx.examples();
  examples[0].sentence.values(0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    train(model, examples, config);
    FAIL();
  } catch (const NumericalError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("epoch 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("batch"), std::string::npos) << msg;
  }
}

TEST(Train, OverfitsThirtyTwoExamples) {
  Fixture fx;
  TrainConfig config;  // defaults: Adam, lr 1e-3, F=100, N=128, dropout 0.5
  config.epochs = 200;
  std::vector<QuestionRecord> records;
  Rng rng(8);
  // Labels independent of content: pure memorisation.
  for (const auto& r : testing::synthetic_records(1, 9, 0)) {
    if (records.size() == 32) break;
    records.push_back({rng.uniform_index(6), 0, r.text});
  }
  auto examples = make_examples(records, fx.table, kDefaultMaxLen, LabelLevel::coarse);
  auto model = fx.model(config, 10);
  const auto history = train(model, examples, config);
  EXPECT_LT(history.epochs[4].mean_loss, history.epochs[0].mean_loss);
  EXPECT_EQ(evaluate(model, examples).accuracy, 1.0);
}

TEST(Evaluate, AllCorrectGivesDiagonalConfusion) {
  Fixture fx;
  const auto model = make_model(fx.config().model_shape(fx.table.dim(), 6));  // predicts 0
  auto examples = fx.examples();
  for (auto& e : examples) e.label = 0;
  const auto eval = evaluate(model, examples);
  EXPECT_EQ(eval.accuracy, 1.0);
  EXPECT_EQ(eval.confusion[0][0], examples.size());
}

TEST(Evaluate, SingleWrongPredictionGivesZero) {
  Fixture fx;
  const auto model = make_model(fx.config().model_shape(fx.table.dim(), 6));
  auto examples = fx.examples();
  examples.resize(1);
  examples[0].label = 4;
  const auto eval = evaluate(model, examples);
  EXPECT_EQ(eval.accuracy, 0.0);
  EXPECT_EQ(eval.confusion[4][0], 1u);
  EXPECT_THROW(evaluate(model, std::vector<Example>{}), ConfigError);
}

TEST(Evaluate, AccuracyIsTraceOverTotal) {
  Fixture fx;
  const auto config = fx.config();
  auto model = fx.model(config);
  const auto examples = fx.examples();
  train(model, examples, config);
  const auto eval = evaluate(model, examples);
  std::size_t trace = 0;
  std::size_t sum = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    trace += eval.confusion[i][i];
    for (std::size_t j = 0; j < 6; ++j) sum += eval.confusion[i][j];
  }
  EXPECT_EQ(sum, examples.size());
  EXPECT_EQ(trace, eval.correct);
  EXPECT_EQ(eval.accuracy, static_cast<double>(trace) / static_cast<double>(examples.size()));
}

TEST(GradientCheckHarness, DefaultTwentyTrialsPass) {
  EXPECT_LT(gradient_check_harness({}).max_relative_error, 1e-4);
}

TEST(GradientCheckHarness, SingleTrialIsReproducible) {
  GradCheckOptions options;
  options.trials = 1;
  options.seed = 1;
  const auto a = gradient_check_harness(options);
  const auto b = gradient_check_harness(options);
  EXPECT_EQ(a.max_relative_error, b.max_relative_error);
  EXPECT_GT(a.parameters_checked, 0u);
}

TEST(GradientCheckHarness, CorruptedGradientIsCaught) {
  GradCheckOptions options;
  options.mutator = [](Gradients& g) { g.fc2.weights(0, 0) = -g.fc2.weights(0, 0) + 1e-3; };
  EXPECT_GT(gradient_check_harness(options).max_relative_error, 1e-2);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.learning_rate = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.k = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

}  // namespace
}  // namespace qcnn
