#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "qcnn/training.hpp"

namespace qclass {

/// Valid keys of the flat `key=value` configuration format.
const std::vector<std::string>& config_keys();

/// Throws qcnn::ConfigError for unknown keys (listing the valid ones) and for
/// unparseable values.
void apply_config_value(qcnn::TrainConfig& config, std::string_view key, std::string_view value);

/// One `key=value` per line; `#` starts a comment.
void apply_config_file(qcnn::TrainConfig& config, const std::filesystem::path& path);

/// Every key with its value in shortest round-trip form.
std::map<std::string, std::string> config_to_map(const qcnn::TrainConfig& config);

}  // namespace qclass
