#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qcnn {

/// The two-level question taxonomy: 6 coarse categories, 50 fine categories
/// namespaced by their coarse parent. Fine indices are local to the parent.
class LabelTaxonomy {
 public:
  struct Category {
    std::string name;
    std::string code;  // UIUC abbreviation, e.g. "NUM"
    std::vector<std::string> fine;
    std::vector<std::string> fine_codes;

    friend bool operator==(const Category&, const Category&) = default;
  };

  explicit LabelTaxonomy(std::vector<Category> categories);

  /// Abbreviation, Entity, Description, Human, Location, Numeric.
  static const LabelTaxonomy& standard();

  std::size_t coarse_count() const noexcept { return categories_.size(); }
  std::size_t fine_count(std::size_t coarse) const { return categories_.at(coarse).fine.size(); }
  std::size_t total_fine_count() const noexcept;

  const std::string& coarse_name(std::size_t coarse) const { return categories_.at(coarse).name; }
  const std::string& fine_name(std::size_t coarse, std::size_t fine) const {
    return categories_.at(coarse).fine.at(fine);
  }
  std::vector<std::string> coarse_names() const;
  const std::vector<std::string>& fine_names(std::size_t coarse) const {
    return categories_.at(coarse).fine;
  }

  /// Case-insensitive match against the canonical name or the UIUC code.
  std::optional<std::size_t> find_coarse(std::string_view label) const;
  std::optional<std::size_t> find_fine(std::size_t coarse, std::string_view label) const;

  friend bool operator==(const LabelTaxonomy&, const LabelTaxonomy&) = default;

 private:
  std::vector<Category> categories_;
};

struct QuestionRecord {
  std::size_t coarse = 0;
  std::size_t fine = 0;  // local to `coarse`
  std::string text;

  friend bool operator==(const QuestionRecord&, const QuestionRecord&) = default;
};

/// Parses `COARSE:fine question text`. Throws FormatError carrying the line.
QuestionRecord parse_trec_line(std::string_view line,
                               const LabelTaxonomy& taxonomy = LabelTaxonomy::standard());

/// One record per non-empty line, in file order. Lines that are not valid
/// UTF-8 are transcoded from Latin-1 and reported on std::clog.
std::vector<QuestionRecord> load_dataset(const std::filesystem::path& path,
                                         const LabelTaxonomy& taxonomy = LabelTaxonomy::standard());

std::vector<QuestionRecord> subset_by_coarse(std::span<const QuestionRecord> records,
                                             std::size_t coarse);

/// Seeded shuffle, then the first round(fraction * n) records go to training.
/// Throws ConfigError unless 0 < fraction < 1.
std::pair<std::vector<QuestionRecord>, std::vector<QuestionRecord>> holdout_split(
    std::span<const QuestionRecord> records, double fraction, std::uint64_t seed);

bool is_valid_utf8(std::string_view bytes) noexcept;
std::string latin1_to_utf8(std::string_view bytes);

}  // namespace qcnn
