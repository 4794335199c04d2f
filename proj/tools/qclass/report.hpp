#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qcnn/dataset.hpp"
#include "qcnn/hierarchy.hpp"
#include "qcnn/training.hpp"

namespace qclass {

/// Evaluation results in the layout of the per-category and summary tables.
/// Sub-category fields are absent when only a tier-1 model was evaluated.
struct RunReport {
  std::vector<std::string> coarse_names;
  std::size_t total = 0;
  std::size_t main_correct = 0;
  std::optional<std::size_t> both_correct;
  std::vector<qcnn::CoarseStats> per_coarse;
  std::vector<std::vector<std::size_t>> coarse_confusion;
};

RunReport make_report(const qcnn::LabelTaxonomy& taxonomy, const qcnn::HierMetrics& metrics);
RunReport make_report(const qcnn::LabelTaxonomy& taxonomy, const qcnn::Evaluation& tier1);

/// Accuracy as a percentage rounded to two decimals. Both renderings use it,
/// so the text table and the JSON carry identical numbers.
double rounded_percent(std::size_t correct, std::size_t total) noexcept;

nlohmann::json report_to_json(const RunReport& report);
std::string render_report(const RunReport& report);

}  // namespace qclass
