#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qcnn/embeddings.hpp"
#include "qcnn/numerics.hpp"

namespace qcnn {

enum class Activation { tanh, relu, identity };

std::string_view to_string(Activation a) noexcept;
/// Accepts "tanh", "relu", and "none"/"identity".
std::optional<Activation> parse_activation(std::string_view name) noexcept;

double activate(Activation a, double x) noexcept;
/// Derivative expressed through the pre-activation value.
double activation_derivative(Activation a, double pre, double post) noexcept;

/// Hyperparameters that fix the parameter layout of one CNN.
struct ModelShape {
  std::size_t dim = 300;                      // embedding width d
  std::vector<std::size_t> heights{2, 3, 4, 5};  // kernel heights, ascending
  std::size_t filters = 100;                  // F per height
  std::size_t hidden = 128;                   // N; the second dense layer has N/2
  std::size_t k = 2;                          // k-max pooling
  std::size_t classes = 6;
  double dropout = 0.5;
  Activation conv_activation = Activation::tanh;

  /// Throws ConfigError on an unusable combination.
  void validate() const;
  std::size_t pooled_size() const noexcept { return k * filters * heights.size(); }

  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

/// F kernels of one height. Row f of `kernels` is kernel f stored row-major as
/// height x dim.
struct ConvFilterBank {
  std::size_t height = 0;
  Matrix kernels;
  std::vector<double> biases;

  std::size_t filter_count() const noexcept { return kernels.rows(); }
  std::span<const double> kernel(std::size_t f) const noexcept { return kernels.row(f); }
};

struct DenseLayer {
  Matrix weights;  // out x in
  std::vector<double> biases;
  Activation activation = Activation::identity;

  std::size_t inputs() const noexcept { return weights.cols(); }
  std::size_t outputs() const noexcept { return weights.rows(); }
};

/// One CNN: conv banks -> k-max pooling -> merge -> fc1 (tanh) -> fc2 (tanh)
/// -> out -> softmax. Dropout follows fc1 and fc2 at training time.
struct QcnnModel {
  ModelShape shape;
  std::vector<ConvFilterBank> banks;
  DenseLayer fc1;
  DenseLayer fc2;
  DenseLayer out;
};

/// Gradients share the model's parameter layout.
using Gradients = QcnnModel;

/// All parameters zero.
QcnnModel make_model(const ModelShape& shape);
/// Zero biases; weights ~ Normal(0, sqrt(2 / (fan_in + fan_out))). Draw order:
/// conv banks by ascending height, then fc1, fc2, out, each row-major. For a
/// conv bank fan_in = height * dim and fan_out = height * filters.
QcnnModel init_model(const ModelShape& shape, Rng& rng);
QcnnModel zeros_like(const QcnnModel& model);

/// Named view of one parameter tensor.
template <typename T>
struct BasicTensorRef {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::span<T> values;
};
using TensorRef = BasicTensorRef<double>;
using ConstTensorRef = BasicTensorRef<const double>;

/// Tensors in a fixed order: conv<n>.kernels, conv<n>.biases for each height,
/// then fc1, fc2 and out weights and biases.
std::vector<TensorRef> tensors(QcnnModel& model);
std::vector<ConstTensorRef> tensors(const QcnnModel& model);
std::size_t parameter_count(const QcnnModel& model);

/// Flattened parameters in tensor order.
std::vector<double> flatten(const QcnnModel& model);
void unflatten(std::span<const double> values, QcnnModel& model);

/// Zero-pads n-1 rows on both ends of the sentence; output length m + n - 1.
/// `kernel` holds n rows of width sentence.cols(), row-major.
std::vector<double> wide_convolve(const Matrix& sentence, std::span<const double> kernel,
                                  std::size_t height, double bias);
std::vector<double> wide_convolve(const Matrix& sentence, const Matrix& kernel, double bias);

/// Indices of the k largest values in ascending index order; ties prefer the
/// earlier index. Throws DimensionError when v.size() < k.
std::vector<std::size_t> k_max_indices(std::span<const double> v, std::size_t k);
std::vector<double> k_max_pool(std::span<const double> v, std::size_t k);

std::vector<double> softmax(std::span<const double> logits);
/// Lowest index among the maxima.
std::size_t argmax(std::span<const double> values) noexcept;

/// Entries are 0 or 1/(1-p). Empty vectors mean no dropout.
struct DropoutMasks {
  std::vector<double> fc1;
  std::vector<double> fc2;
};

/// Everything backward() needs from a forward pass.
struct ForwardCache {
  ModelShape shape;
  Matrix input;
  std::vector<Matrix> conv_pre;                     // per bank: filters x (m+n-1)
  std::vector<std::vector<std::size_t>> selected;   // per bank: filters*k positions
  std::vector<double> pooled;
  std::vector<double> h1, h1_out;  // tanh(fc1), after dropout
  std::vector<double> h2, h2_out;
  std::vector<double> logits;
  std::vector<double> probabilities;
  DropoutMasks masks;
};

DropoutMasks draw_dropout_masks(const ModelShape& shape, Rng& rng);

/// In training mode fresh dropout masks are drawn from `rng` (fc1 then fc2);
/// in evaluation mode dropout is the identity and `rng` is untouched.
ForwardCache forward(const QcnnModel& model, const SentenceMatrix& sentence, bool train_mode,
                     Rng& rng);
ForwardCache forward(const QcnnModel& model, const Matrix& sentence, const DropoutMasks& masks);
/// Evaluation-mode probabilities.
std::vector<double> predict_proba(const QcnnModel& model, const SentenceMatrix& sentence);

/// Gradient of -log p[target] with the dropout masks stored in `cache`.
/// Throws DimensionError if the cache does not belong to this model shape.
Gradients backward(const QcnnModel& model, const ForwardCache& cache, std::size_t target);
/// Adds `scale` times the gradient into `grads`.
void backward_accumulate(const QcnnModel& model, const ForwardCache& cache, std::size_t target,
                           Gradients& grads, double scale = 1.0);

std::size_t predict(const QcnnModel& model, const SentenceMatrix& sentence);

}  // namespace qcnn
