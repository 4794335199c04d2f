#include "qcnn/embeddings.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <stdexcept>

namespace qcnn {
namespace {

bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    const std::size_t start = i;
    while (i < line.size() && !is_space(line[i])) ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

bool is_unsigned_integer(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::optional<double> parse_real(std::string_view s) {
  double value = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return value;
}

[[noreturn]] void fail(const std::filesystem::path& path, std::size_t line_no,
                       const std::string& what) {
  throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + what);
}

}  // namespace

EmbeddingTable::EmbeddingTable(std::vector<std::string> tokens, Matrix vectors)
    : vectors_(std::move(vectors)) {
  if (tokens.size() != vectors_.rows()) {
    throw DimensionError("EmbeddingTable: " + std::to_string(tokens.size()) + " tokens for " +
                         vectors_.shape_string() + " vectors");
  }
  vocab_.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) vocab_.emplace(std::move(tokens[i]), i);
}

std::optional<std::size_t> EmbeddingTable::find(std::string_view token) const {
  auto it = vocab_.find(token);
  if (it == vocab_.end()) return std::nullopt;
  return it->second;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path,
                               const EmbeddingLoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open embedding file " + path.string());

  std::optional<std::size_t> dim = options.expected_dim;
  std::vector<std::string> tokens;
  std::unordered_set<std::string> seen;
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  bool any_content = false;

  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (!any_content) {
      any_content = true;
      if (fields.size() == 2 && is_unsigned_integer(fields[0]) && is_unsigned_integer(fields[1])) {
        std::size_t header_dim = 0;
        std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), header_dim);
        if (dim && *dim != header_dim) {
          fail(path, line_no, "header declares dimension " + std::to_string(header_dim) +
                                  ", expected " + std::to_string(*dim));
        }
        dim = header_dim;
        continue;
      }
    }
    if (fields.size() < 2) fail(path, line_no, "line has a token but no vector");
    const std::size_t line_dim = fields.size() - 1;
    if (!dim) dim = line_dim;
    if (line_dim != *dim) {
      fail(path, line_no, "vector has " + std::to_string(line_dim) + " components, expected " +
                              std::to_string(*dim));
    }
    std::string token(fields[0]);
    if (options.keep != nullptr && !options.keep->contains(token)) continue;
    if (seen.contains(token)) continue;
    for (std::size_t j = 1; j < fields.size(); ++j) {
      auto v = parse_real(fields[j]);
      if (!v) fail(path, line_no, "cannot parse real number '" + std::string(fields[j]) + "'");
      values.push_back(*v);
    }
    seen.insert(token);
    tokens.push_back(std::move(token));
  }
  if (!any_content) throw FormatError("embedding file " + path.string() + " is empty");
  if (*dim == 0) throw FormatError("embedding file " + path.string() + " declares dimension 0");

  const std::size_t rows = tokens.size();
  return EmbeddingTable(std::move(tokens), Matrix(rows, *dim, std::move(values)));
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (is_space(c)) {
      flush();
    } else if (u < 0x80 && std::ispunct(u)) {
      flush();
      tokens.emplace_back(1, c);
    } else if (u < 0x80) {
      current.push_back(static_cast<char>(std::tolower(u)));
    } else {
      current.push_back(c);
    }
  }
  flush();
  return tokens;
}

SentenceMatrix embed_sentence(const std::vector<std::string>& tokens, const EmbeddingTable& table,
                              std::size_t max_len) {
  if (max_len == 0) throw std::invalid_argument("embed_sentence: max_len must be at least 1");
  const std::size_t kept = std::min(tokens.size(), max_len);
  SentenceMatrix out;
  out.values = Matrix(std::max<std::size_t>(kept, 1), table.dim());
  out.tokens.assign(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(kept));
  for (std::size_t i = 0; i < kept; ++i) {
    if (auto idx = table.find(tokens[i])) {
      const auto src = table.vector(*idx);
      std::copy(src.begin(), src.end(), out.values.row(i).begin());
    }
  }
  return out;
}

}  // namespace qcnn
