#include "qcnn/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iostream>

#include "qcnn/errors.hpp"
#include "qcnn/numerics.hpp"

namespace qcnn {
namespace {

bool iequals(std::string_view a, std::string_view b) noexcept {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

std::string_view trim(std::string_view s) noexcept {
  auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_ws(s.back())) s.remove_suffix(1);
  return s;
}

LabelTaxonomy::Category category(std::string name, std::string code,
                                 std::vector<std::pair<std::string, std::string>> fine) {
  LabelTaxonomy::Category c{std::move(name), std::move(code), {}, {}};
  for (auto& [canonical, uiuc] : fine) {
    c.fine.push_back(std::move(canonical));
    c.fine_codes.push_back(std::move(uiuc));
  }
  return c;
}

}  // namespace

LabelTaxonomy::LabelTaxonomy(std::vector<Category> categories)
    : categories_(std::move(categories)) {}

const LabelTaxonomy& LabelTaxonomy::standard() {
  // Canonical names with the UIUC file codes beside them.
  static const LabelTaxonomy taxonomy({
      category("Abbreviation", "ABBR", {{"abbreviation", "abb"}, {"expression", "exp"}}),
      category("Entity", "ENTY",
               {{"animal", "animal"},       {"body", "body"},
                {"colour", "color"},        {"creative", "cremat"},
                {"currency", "currency"},   {"disease", "dismed"},
                {"event", "event"},         {"food", "food"},
                {"instrument", "instru"},   {"language", "lang"},
                {"letter", "letter"},       {"other", "other"},
                {"plant", "plant"},         {"product", "product"},
                {"religion", "religion"},   {"sport", "sport"},
                {"substance", "substance"}, {"symbol", "symbol"},
                {"technique", "techmeth"},  {"term", "termeq"},
                {"vehicle", "veh"},         {"word", "word"}}),
      category("Description", "DESC",
               {{"definition", "def"},
                {"description", "desc"},
                {"manner", "manner"},
                {"reason", "reason"}}),
      category("Human", "HUM",
               {{"group", "gr"}, {"individual", "ind"}, {"title", "title"}, {"description", "desc"}}),
      category("Location", "LOC",
               {{"city", "city"},
                {"country", "country"},
                {"mountain", "mount"},
                {"state", "state"},
                {"other", "other"}}),
      category("Numeric", "NUM",
               {{"code", "code"},
                {"count", "count"},
                {"date", "date"},
                {"distance", "dist"},
                {"money", "money"},
                {"order", "ord"},
                {"period", "period"},
                {"percent", "perc"},
                {"speed", "speed"},
                {"temperature", "temp"},
                {"size", "volsize"},
                {"weight", "weight"},
                {"other", "other"}}),
  });
  return taxonomy;
}

std::size_t LabelTaxonomy::total_fine_count() const noexcept {
  std::size_t n = 0;
  for (const auto& c : categories_) n += c.fine.size();
  return n;
}

std::vector<std::string> LabelTaxonomy::coarse_names() const {
  std::vector<std::string> names;
  for (const auto& c : categories_) names.push_back(c.name);
  return names;
}

std::optional<std::size_t> LabelTaxonomy::find_coarse(std::string_view label) const {
  for (std::size_t i = 0; i < categories_.size(); ++i) {
    if (iequals(label, categories_[i].name) || iequals(label, categories_[i].code)) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> LabelTaxonomy::find_fine(std::size_t coarse,
                                                    std::string_view label) const {
  const auto& c = categories_.at(coarse);
  for (std::size_t i = 0; i < c.fine.size(); ++i) {
    if (iequals(label, c.fine[i]) || iequals(label, c.fine_codes[i])) return i;
  }
  return std::nullopt;
}

QuestionRecord parse_trec_line(std::string_view line, const LabelTaxonomy& taxonomy) {
  const std::string_view trimmed = trim(line);
  auto error = [&](const std::string& what) {
    return FormatError(what + " in line '" + std::string(trimmed) + "'");
  };
  if (trimmed.empty()) throw error("empty question line");

  const std::size_t space = trimmed.find_first_of(" \t");
  const std::string_view label = trimmed.substr(0, space);
  const std::string_view text =
      space == std::string_view::npos ? std::string_view{} : trim(trimmed.substr(space + 1));

  const std::size_t colon = label.find(':');
  if (colon == std::string_view::npos) throw error("missing ':' in label");
  const std::string_view coarse_label = label.substr(0, colon);
  const std::string_view fine_label = label.substr(colon + 1);

  const auto coarse = taxonomy.find_coarse(coarse_label);
  if (!coarse) throw error("unknown coarse label '" + std::string(coarse_label) + "'");
  const auto fine = taxonomy.find_fine(*coarse, fine_label);
  if (!fine) {
    throw error("unknown fine label '" + std::string(fine_label) + "' for " +
                taxonomy.coarse_name(*coarse));
  }
  return QuestionRecord{*coarse, *fine, std::string(text)};
}

std::vector<QuestionRecord> load_dataset(const std::filesystem::path& path,
                                         const LabelTaxonomy& taxonomy) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open dataset file " + path.string());
  std::vector<QuestionRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (!is_valid_utf8(line)) {
      std::clog << "warning: " << path.string() << ":" << line_no
                << ": not valid UTF-8, decoded as Latin-1\n";
      line = latin1_to_utf8(line);
    }
    try {
      records.push_back(parse_trec_line(line, taxonomy));
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

std::vector<QuestionRecord> subset_by_coarse(std::span<const QuestionRecord> records,
                                             std::size_t coarse) {
  std::vector<QuestionRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out),
               [coarse](const QuestionRecord& r) { return r.coarse == coarse; });
  return out;
}

std::pair<std::vector<QuestionRecord>, std::vector<QuestionRecord>> holdout_split(
    std::span<const QuestionRecord> records, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ConfigError("holdout fraction must lie in (0, 1), got " + std::to_string(fraction));
  }
  if (records.empty()) throw ConfigError("holdout_split: no records to split");
  Rng rng(seed);
  const auto order = shuffled_indices(rng, records.size());
  const auto n_train =
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(records.size())));
  std::pair<std::vector<QuestionRecord>, std::vector<QuestionRecord>> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? out.first : out.second).push_back(records[order[i]]);
  }
  return out;
}

bool is_valid_utf8(std::string_view bytes) noexcept {
  std::size_t i = 0;
  while (i < bytes.size()) {
    const auto c = static_cast<unsigned char>(bytes[i]);
    std::size_t extra = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= bytes.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(bytes[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Overlong encodings, surrogates and out-of-range code points.
    if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) || (extra == 3 && cp < 0x10000) ||
        (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF) {
      return false;
    }
    i += extra + 1;
  }
  return true;
}

std::string latin1_to_utf8(std::string_view bytes) {
  std::string out;
  out.reserve(bytes.size() * 2);
  for (char ch : bytes) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80) {
      out.push_back(ch);
    } else {
      out.push_back(static_cast<char>(0xC0 | (c >> 6)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    }
  }
  return out;
}

}  // namespace qcnn
