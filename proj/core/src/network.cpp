#include "qcnn/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qcnn/errors.hpp"

namespace qcnn {

std::string_view to_string(Activation a) noexcept {
  switch (a) {
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::identity: return "none";
  }
  return "none";
}

std::optional<Activation> parse_activation(std::string_view name) noexcept {
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  if (name == "none" || name == "identity") return Activation::identity;
  return std::nullopt;
}

double activate(Activation a, double x) noexcept {
  switch (a) {
    case Activation::tanh: return std::tanh(x);
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::identity: return x;
  }
  return x;
}

double activation_derivative(Activation a, double pre, double post) noexcept {
  switch (a) {
    case Activation::tanh: return 1.0 - post * post;
    case Activation::relu: return pre > 0.0 ? 1.0 : 0.0;
    case Activation::identity: return 1.0;
  }
  return 1.0;
}

void ModelShape::validate() const {
  if (dim == 0) throw ConfigError("embedding dimension must be positive");
  if (heights.empty()) throw ConfigError("at least one kernel height is required");
  for (std::size_t i = 0; i < heights.size(); ++i) {
    if (heights[i] == 0) throw ConfigError("kernel heights must be positive");
    if (i > 0 && heights[i] <= heights[i - 1]) {
      throw ConfigError("kernel heights must be strictly ascending");
    }
  }
  if (filters == 0) throw ConfigError("filter count must be positive");
  if (hidden < 2 || hidden % 2 != 0) throw ConfigError("hidden size N must be even and >= 2");
  if (k == 0) throw ConfigError("k must be at least 1");
  if (k > heights.front()) {
    // A one-token sentence yields only `height` conv outputs.
    throw ConfigError("k must not exceed the smallest kernel height");
  }
  if (classes == 0) throw ConfigError("class count must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
}

namespace {

DenseLayer make_dense(std::size_t in, std::size_t out, Activation activation) {
  return DenseLayer{Matrix(out, in), std::vector<double>(out, 0.0), activation};
}

void fill_normal(std::span<double> values, double stdev, Rng& rng) {
  for (auto& v : values) v = stdev * rng.normal();
}

void dense_forward(const DenseLayer& layer, std::span<const double> x, std::vector<double>& out) {
  out.assign(layer.biases.begin(), layer.biases.end());
  for (std::size_t o = 0; o < layer.outputs(); ++o) {
    const auto w = layer.weights.row(o);
    out[o] += std::inner_product(w.begin(), w.end(), x.begin(), 0.0);
  }
}

// dx = W^T dz; dW += scale * dz x^T; db += scale * dz.
void dense_backward(const DenseLayer& layer, std::span<const double> x, std::span<const double> dz,
                    DenseLayer& grad, double scale, std::vector<double>* dx) {
  if (dx != nullptr) dx->assign(layer.inputs(), 0.0);
  for (std::size_t o = 0; o < layer.outputs(); ++o) {
    const double g = dz[o];
    if (g == 0.0) continue;
    grad.biases[o] += scale * g;
    auto gw = grad.weights.row(o);
    const double sg = scale * g;
    for (std::size_t i = 0; i < x.size(); ++i) gw[i] += sg * x[i];
    if (dx != nullptr) {
      const auto w = layer.weights.row(o);
      for (std::size_t i = 0; i < w.size(); ++i) (*dx)[i] += g * w[i];
    }
  }
}

void check_cache(const QcnnModel& model, const ForwardCache& cache) {
  if (!(cache.shape == model.shape) || cache.input.cols() != model.shape.dim ||
      cache.conv_pre.size() != model.banks.size() ||
      cache.probabilities.size() != model.shape.classes ||
      cache.pooled.size() != model.shape.pooled_size()) {
    throw DimensionError("backward: forward cache does not match the model");
  }
}

}  // namespace

QcnnModel make_model(const ModelShape& shape) {
  shape.validate();
  QcnnModel model;
  model.shape = shape;
  for (std::size_t h : shape.heights) {
    model.banks.push_back(ConvFilterBank{h, Matrix(shape.filters, h * shape.dim),
                                         std::vector<double>(shape.filters, 0.0)});
  }
  model.fc1 = make_dense(shape.pooled_size(), shape.hidden, Activation::tanh);
  model.fc2 = make_dense(shape.hidden, shape.hidden / 2, Activation::tanh);
  model.out = make_dense(shape.hidden / 2, shape.classes, Activation::identity);
  return model;
}

QcnnModel init_model(const ModelShape& shape, Rng& rng) {
  QcnnModel model = make_model(shape);
  for (auto& bank : model.banks) {
    const double fan_in = static_cast<double>(bank.height * shape.dim);
    const double fan_out = static_cast<double>(bank.height * shape.filters);
    fill_normal(bank.kernels.data(), std::sqrt(2.0 / (fan_in + fan_out)), rng);
  }
  for (DenseLayer* layer : {&model.fc1, &model.fc2, &model.out}) {
    const double fans = static_cast<double>(layer->inputs() + layer->outputs());
    fill_normal(layer->weights.data(), std::sqrt(2.0 / fans), rng);
  }
  return model;
}

QcnnModel zeros_like(const QcnnModel& model) { return make_model(model.shape); }

namespace {

template <typename Model, typename Ref>
std::vector<Ref> collect_tensors(Model& model) {
  std::vector<Ref> out;
  for (auto& bank : model.banks) {
    const std::string prefix = "conv" + std::to_string(bank.height);
    out.push_back(Ref{prefix + ".kernels", bank.kernels.rows(), bank.kernels.cols(),
                      bank.kernels.data()});
    out.push_back(Ref{prefix + ".biases", bank.biases.size(), 1, std::span(bank.biases)});
  }
  auto add_dense = [&](auto& layer, const char* name) {
    out.push_back(Ref{std::string(name) + ".weights", layer.weights.rows(), layer.weights.cols(),
                      layer.weights.data()});
    out.push_back(Ref{std::string(name) + ".biases", layer.biases.size(), 1,
                      std::span(layer.biases)});
  };
  add_dense(model.fc1, "fc1");
  add_dense(model.fc2, "fc2");
  add_dense(model.out, "out");
  return out;
}

}  // namespace

std::vector<TensorRef> tensors(QcnnModel& model) {
  return collect_tensors<QcnnModel, TensorRef>(model);
}

std::vector<ConstTensorRef> tensors(const QcnnModel& model) {
  return collect_tensors<const QcnnModel, ConstTensorRef>(model);
}

std::size_t parameter_count(const QcnnModel& model) {
  std::size_t n = 0;
  for (const auto& t : tensors(model)) n += t.values.size();
  return n;
}

std::vector<double> flatten(const QcnnModel& model) {
  std::vector<double> out;
  out.reserve(parameter_count(model));
  for (const auto& t : tensors(model)) out.insert(out.end(), t.values.begin(), t.values.end());
  return out;
}

void unflatten(std::span<const double> values, QcnnModel& model) {
  if (values.size() != parameter_count(model)) {
    throw DimensionError("unflatten: expected " + std::to_string(parameter_count(model)) +
                         " values, got " + std::to_string(values.size()));
  }
  std::size_t offset = 0;
  for (auto& t : tensors(model)) {
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), t.values.size(),
                t.values.begin());
    offset += t.values.size();
  }
}

namespace {

// Four independent partial sums let the compiler keep several adds in flight.
double dot(const double* a, const double* b, std::size_t n) noexcept {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace

std::vector<double> wide_convolve(const Matrix& sentence, std::span<const double> kernel,
                                  std::size_t height, double bias) {
  const std::size_t m = sentence.rows();
  const std::size_t d = sentence.cols();
  if (height == 0 || m == 0) throw DimensionError("wide_convolve: empty sentence or kernel");
  if (kernel.size() != height * d) {
    throw DimensionError("wide_convolve: kernel of " + std::to_string(kernel.size()) +
                         " values does not fit height " + std::to_string(height) +
                         " and sentence " + sentence.shape_string());
  }
  std::vector<double> out(m + height - 1, bias);
  // Output i sees padded rows i..i+n-1, i.e. sentence rows i-(n-1)..i.
  for (std::size_t t = 0; t < m; ++t) {
    const auto row = sentence.row(t);
    for (std::size_t r = 0; r < height; ++r) {
      const double* k = kernel.data() + r * d;
      out[t + height - 1 - r] += dot(row.data(), k, d);
    }
  }
  return out;
}

std::vector<double> wide_convolve(const Matrix& sentence, const Matrix& kernel, double bias) {
  if (kernel.cols() != sentence.cols()) {
    throw DimensionError("wide_convolve: kernel " + kernel.shape_string() +
                         " does not match sentence " + sentence.shape_string());
  }
  return wide_convolve(sentence, kernel.data(), kernel.rows(), bias);
}

std::vector<std::size_t> k_max_indices(std::span<const double> v, std::size_t k) {
  if (v.size() < k) {
    throw DimensionError("k_max_pool: vector of length " + std::to_string(v.size()) +
                         " is shorter than k=" + std::to_string(k));
  }
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      return v[a] > v[b] || (v[a] == v[b] && a < b);
                    });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<double> k_max_pool(std::span<const double> v, std::size_t k) {
  std::vector<double> out;
  for (std::size_t i : k_max_indices(v, k)) out.push_back(v[i]);
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double max = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (auto& x : p) {
    x = std::exp(x - max);
    sum += x;
  }
  for (auto& x : p) x /= sum;
  return p;
}

std::size_t argmax(std::span<const double> values) noexcept {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

DropoutMasks draw_dropout_masks(const ModelShape& shape, Rng& rng) {
  DropoutMasks masks;
  if (shape.dropout <= 0.0) return masks;
  const double keep_scale = 1.0 / (1.0 - shape.dropout);
  auto draw = [&](std::size_t n) {
    std::vector<double> mask(n);
    for (auto& m : mask) m = rng.uniform() >= shape.dropout ? keep_scale : 0.0;
    return mask;
  };
  masks.fc1 = draw(shape.hidden);
  masks.fc2 = draw(shape.hidden / 2);
  return masks;
}

ForwardCache forward(const QcnnModel& model, const SentenceMatrix& sentence, bool train_mode,
                     Rng& rng) {
  if (!train_mode) return forward(model, sentence.values, DropoutMasks{});
  return forward(model, sentence.values, draw_dropout_masks(model.shape, rng));
}

ForwardCache forward(const QcnnModel& model, const Matrix& sentence, const DropoutMasks& masks) {
  const ModelShape& shape = model.shape;
  if (sentence.cols() != shape.dim) {
    throw DimensionError("forward: sentence " + sentence.shape_string() +
                         " does not match embedding dimension " + std::to_string(shape.dim));
  }
  if (sentence.rows() == 0) throw DimensionError("forward: sentence has no rows");
  if ((!masks.fc1.empty() && masks.fc1.size() != shape.hidden) ||
      (!masks.fc2.empty() && masks.fc2.size() != shape.hidden / 2)) {
    throw DimensionError("forward: dropout masks do not match hidden sizes");
  }

  ForwardCache cache;
  cache.shape = shape;
  cache.input = sentence;
  cache.masks = masks;
  cache.pooled.reserve(shape.pooled_size());

  const std::size_t m = sentence.rows();
  for (const auto& bank : model.banks) {
    const std::size_t width = m + bank.height - 1;
    Matrix pre(bank.filter_count(), width);
    std::vector<std::size_t> selected;
    selected.reserve(bank.filter_count() * shape.k);
    std::vector<double> act(width);
    for (std::size_t f = 0; f < bank.filter_count(); ++f) {
      const auto conv = wide_convolve(sentence, bank.kernel(f), bank.height, bank.biases[f]);
      std::copy(conv.begin(), conv.end(), pre.row(f).begin());
      for (std::size_t i = 0; i < width; ++i) act[i] = activate(shape.conv_activation, conv[i]);
      for (std::size_t i : k_max_indices(act, shape.k)) {
        selected.push_back(i);
        cache.pooled.push_back(act[i]);
      }
    }
    cache.conv_pre.push_back(std::move(pre));
    cache.selected.push_back(std::move(selected));
  }

  auto apply = [](Activation a, std::vector<double>& v) {
    for (auto& x : v) x = activate(a, x);
  };
  auto drop = [](const std::vector<double>& v, const std::vector<double>& mask) {
    std::vector<double> out = v;
    if (!mask.empty()) {
      for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
    }
    return out;
  };

  dense_forward(model.fc1, cache.pooled, cache.h1);
  apply(model.fc1.activation, cache.h1);
  cache.h1_out = drop(cache.h1, masks.fc1);
  dense_forward(model.fc2, cache.h1_out, cache.h2);
  apply(model.fc2.activation, cache.h2);
  cache.h2_out = drop(cache.h2, masks.fc2);
  dense_forward(model.out, cache.h2_out, cache.logits);
  cache.probabilities = softmax(cache.logits);
  return cache;
}

std::vector<double> predict_proba(const QcnnModel& model, const SentenceMatrix& sentence) {
  return forward(model, sentence.values, DropoutMasks{}).probabilities;
}

Gradients backward(const QcnnModel& model, const ForwardCache& cache, std::size_t target) {
  Gradients grads = zeros_like(model);
  backward_accumulate(model, cache, target, grads, 1.0);
  return grads;
}

void backward_accumulate(const QcnnModel& model, const ForwardCache& cache, std::size_t target,
                         Gradients& grads, double scale) {
  check_cache(model, cache);
  if (!(grads.shape == model.shape)) {
    throw DimensionError("backward: gradient buffer does not match the model");
  }
  if (target >= model.shape.classes) {
    throw DimensionError("backward: target " + std::to_string(target) + " out of range for " +
                         std::to_string(model.shape.classes) + " classes");
  }

  // Softmax + cross-entropy.
  std::vector<double> dz = cache.probabilities;
  dz[target] -= 1.0;

  std::vector<double> dh;
  dense_backward(model.out, cache.h2_out, dz, grads.out, scale, &dh);

  auto through = [](std::vector<double>& d, const std::vector<double>& mask,
                    const std::vector<double>& post, Activation a) {
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (!mask.empty()) d[i] *= mask[i];
      d[i] *= activation_derivative(a, 0.0, post[i]);
    }
  };
  through(dh, cache.masks.fc2, cache.h2, model.fc2.activation);
  std::vector<double> dh1;
  dense_backward(model.fc2, cache.h1_out, dh, grads.fc2, scale, &dh1);
  through(dh1, cache.masks.fc1, cache.h1, model.fc1.activation);
  std::vector<double> dpooled;
  dense_backward(model.fc1, cache.pooled, dh1, grads.fc1, scale, &dpooled);

  // Each pooled value flows back only to the conv position it was taken from.
  const std::size_t k = model.shape.k;
  const std::size_t d = model.shape.dim;
  const Matrix& input = cache.input;
  const std::size_t m = input.rows();
  std::size_t pooled_offset = 0;
  for (std::size_t b = 0; b < model.banks.size(); ++b) {
    const auto& bank = model.banks[b];
    auto& gbank = grads.banks[b];
    const std::size_t n = bank.height;
    const Matrix& pre = cache.conv_pre[b];
    const auto& selected = cache.selected[b];
    for (std::size_t f = 0; f < bank.filter_count(); ++f) {
      auto gkernel = gbank.kernels.row(f);
      for (std::size_t j = 0; j < k; ++j) {
        const std::size_t pos = selected[f * k + j];
        const double z = pre(f, pos);
        const double post = activate(model.shape.conv_activation, z);
        const double g =
            scale * dpooled[pooled_offset + f * k + j] *
            activation_derivative(model.shape.conv_activation, z, post);
        if (g == 0.0) continue;
        gbank.biases[f] += g;
        // Output pos used kernel row r against sentence row pos + r - (n - 1).
        for (std::size_t r = 0; r < n; ++r) {
          if (pos + r < n - 1) continue;
          const std::size_t t = pos + r - (n - 1);
          if (t >= m) continue;
          const auto row = input.row(t);
          double* gk = gkernel.data() + r * d;
          for (std::size_t c = 0; c < d; ++c) gk[c] += g * row[c];
        }
      }
    }
    pooled_offset += bank.filter_count() * k;
  }
}

std::size_t predict(const QcnnModel& model, const SentenceMatrix& sentence) {
  return argmax(predict_proba(model, sentence));
}

}  // namespace qcnn
