#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "qcnn/dataset.hpp"
#include "qcnn/network.hpp"
#include "qcnn/training.hpp"

namespace qclass {

inline constexpr char kMagic[4] = {'Q', 'C', 'N', 'N'};
inline constexpr std::uint8_t kFormatVersion = 1;

/// One serialized CNN plus the metadata needed to interpret its outputs.
///
/// Layout: "QCNN", a version byte, a little-endian u32 header length, a JSON
/// header (taxonomy, role, hyperparameters, tensor manifest) and finally the
/// parameters as little-endian IEEE-754 doubles in manifest order.
struct ModelContainer {
  qcnn::LabelTaxonomy taxonomy = qcnn::LabelTaxonomy::standard();
  std::optional<std::size_t> coarse;  // set for tier-2 models
  qcnn::TrainConfig config;
  qcnn::QcnnModel model;

  std::vector<std::string> class_labels() const;
};

/// Category and fine-label names agree, in order.
bool same_labels(const qcnn::LabelTaxonomy& a, const qcnn::LabelTaxonomy& b);

std::string encode_model(const ModelContainer& container);
/// Throws qcnn::FormatError naming the failed check: "bad magic",
/// "unsupported version", truncated header, or payload length mismatch.
ModelContainer decode_model(std::string_view bytes);

void save_model(const std::filesystem::path& path, const ModelContainer& container);
ModelContainer load_model(const std::filesystem::path& path);

/// tier1.qcnn or tier2-<category>.qcnn inside a model directory.
std::filesystem::path model_file(const std::filesystem::path& dir,
                                 const qcnn::LabelTaxonomy& taxonomy,
                                 std::optional<std::size_t> coarse);

}  // namespace qclass
