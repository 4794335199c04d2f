#include "qclass/config.hpp"

#include <charconv>
#include <fstream>

#include "qcnn/errors.hpp"

namespace qclass {

using qcnn::ConfigError;
using qcnn::TrainConfig;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("config key '" + std::string(key) + "': cannot parse '" +
                      std::string(value) + "'");
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "adam_epsilon", "batch_size",      "beta1",          "beta2",   "conv_activation",
      "dropout",      "epochs",          "filters",        "hidden",  "k",
      "learning_rate", "max_len",        "optimizer",      "seed",    "threads",
      "train_fraction"};
  return keys;
}

void apply_config_value(TrainConfig& config, std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "learning_rate" || key == "lr") {
    config.learning_rate = parse_number<double>(key, value);
  } else if (key == "batch_size") {
    config.batch_size = parse_number<std::size_t>(key, value);
  } else if (key == "epochs") {
    config.epochs = parse_number<std::size_t>(key, value);
  } else if (key == "optimizer") {
    const auto kind = qcnn::parse_optimizer(value);
    if (!kind) throw ConfigError("config key 'optimizer': expected sgd or adam");
    config.optimizer = *kind;
  } else if (key == "beta1") {
    config.beta1 = parse_number<double>(key, value);
  } else if (key == "beta2") {
    config.beta2 = parse_number<double>(key, value);
  } else if (key == "adam_epsilon") {
    config.adam_epsilon = parse_number<double>(key, value);
  } else if (key == "seed") {
    config.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "filters") {
    config.filters = parse_number<std::size_t>(key, value);
  } else if (key == "hidden") {
    config.hidden = parse_number<std::size_t>(key, value);
  } else if (key == "k") {
    config.k = parse_number<std::size_t>(key, value);
  } else if (key == "dropout") {
    config.dropout = parse_number<double>(key, value);
  } else if (key == "max_len") {
    config.max_len = parse_number<std::size_t>(key, value);
  } else if (key == "conv_activation") {
    const auto act = qcnn::parse_activation(value);
    if (!act) throw ConfigError("config key 'conv_activation': expected tanh, relu or none");
    config.conv_activation = *act;
  } else if (key == "train_fraction") {
    config.train_fraction = parse_number<double>(key, value);
  } else if (key == "threads") {
    config.threads = parse_number<std::size_t>(key, value);
  } else {
    std::string valid;
    for (const auto& k : config_keys()) valid += (valid.empty() ? "" : ", ") + k;
    throw ConfigError("unknown config key '" + std::string(key) + "'; valid keys: " + valid);
  }
}

void apply_config_file(TrainConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    }
    try {
      apply_config_value(config, trim(view.substr(0, eq)), view.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::map<std::string, std::string> config_to_map(const TrainConfig& config) {
  return {
      {"adam_epsilon", format_double(config.adam_epsilon)},
      {"batch_size", std::to_string(config.batch_size)},
      {"beta1", format_double(config.beta1)},
      {"beta2", format_double(config.beta2)},
      {"conv_activation", std::string(qcnn::to_string(config.conv_activation))},
      {"dropout", format_double(config.dropout)},
      {"epochs", std::to_string(config.epochs)},
      {"filters", std::to_string(config.filters)},
      {"hidden", std::to_string(config.hidden)},
      {"k", std::to_string(config.k)},
      {"learning_rate", format_double(config.learning_rate)},
      {"max_len", std::to_string(config.max_len)},
      {"optimizer", std::string(qcnn::to_string(config.optimizer))},
      {"seed", std::to_string(config.seed)},
      {"threads", std::to_string(config.threads)},
      {"train_fraction", format_double(config.train_fraction)},
  };
}

}  // namespace qclass
