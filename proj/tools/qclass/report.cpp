#include "qclass/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace qclass {

using nlohmann::json;

RunReport make_report(const qcnn::LabelTaxonomy& taxonomy, const qcnn::HierMetrics& metrics) {
  RunReport r;
  r.coarse_names = taxonomy.coarse_names();
  r.total = metrics.total;
  r.main_correct = metrics.main_correct;
  r.both_correct = metrics.both_correct;
  r.per_coarse = metrics.per_coarse;
  r.coarse_confusion = metrics.coarse_confusion;
  return r;
}

RunReport make_report(const qcnn::LabelTaxonomy& taxonomy, const qcnn::Evaluation& tier1) {
  RunReport r;
  r.coarse_names = taxonomy.coarse_names();
  r.total = tier1.total;
  r.main_correct = tier1.correct;
  r.coarse_confusion = tier1.confusion;
  return r;
}

double rounded_percent(std::size_t correct, std::size_t total) noexcept {
  if (total == 0) return 0.0;
  return std::round(10000.0 * static_cast<double>(correct) / static_cast<double>(total)) / 100.0;
}

namespace {

json ratio(std::size_t correct, std::size_t total) {
  return {{"correct", correct}, {"total", total}, {"percent", rounded_percent(correct, total)}};
}

std::string percent_text(std::size_t correct, std::size_t total) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", rounded_percent(correct, total));
  return buf;
}

}  // namespace

json report_to_json(const RunReport& report) {
  json j;
  j["total"] = report.total;
  j["main"] = ratio(report.main_correct, report.total);
  if (report.both_correct) {
    j["sub_end_to_end"] = ratio(*report.both_correct, report.total);
    j["sub_conditional"] = ratio(*report.both_correct, report.main_correct);
  }
  json rows = json::array();
  for (std::size_t c = 0; c < report.per_coarse.size(); ++c) {
    const auto& s = report.per_coarse[c];
    rows.push_back({{"class", report.coarse_names[c]},
                    {"entries", s.entries},
                    {"correct", s.correct},
                    {"percent", rounded_percent(s.correct, s.entries)}});
  }
  j["per_coarse"] = rows;
  j["coarse_labels"] = report.coarse_names;
  j["coarse_confusion"] = report.coarse_confusion;
  return j;
}

std::string render_report(const RunReport& report) {
  std::ostringstream out;
  char line[160];
  if (!report.per_coarse.empty()) {
    out << "Sub-category results (gold coarse routing)\n";
    std::snprintf(line, sizeof line, "%-14s %8s %8s %10s\n", "Class", "Entries", "Correct",
                  "Accuracy");
    out << line;
    for (std::size_t c = 0; c < report.per_coarse.size(); ++c) {
      const auto& s = report.per_coarse[c];
      std::snprintf(line, sizeof line, "%-14s %8zu %8zu %10s\n", report.coarse_names[c].c_str(),
                    s.entries, s.correct, percent_text(s.correct, s.entries).c_str());
      out << line;
    }
    out << "\n";
  }
  out << "Summary\n";
  std::snprintf(line, sizeof line, "%-28s %10s %8s %8s\n", "Metric", "Accuracy", "Correct",
                "Total");
  out << line;
  auto row = [&](const char* name, std::size_t correct, std::size_t total) {
    std::snprintf(line, sizeof line, "%-28s %10s %8zu %8zu\n", name,
                  percent_text(correct, total).c_str(), correct, total);
    out << line;
  };
  row("Main category", report.main_correct, report.total);
  if (report.both_correct) {
    row("Sub category (end-to-end)", *report.both_correct, report.total);
    row("Sub category (given main)", *report.both_correct, report.main_correct);
  }
  return out.str();
}

}  // namespace qclass
