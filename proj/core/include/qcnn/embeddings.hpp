#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "qcnn/numerics.hpp"

namespace qcnn {

/// Pretrained word vectors: a vocabulary plus a |vocab| x dim matrix.
/// Immutable after loading.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  /// `tokens[i]` owns row i of `vectors`. Duplicate tokens keep their first row.
  EmbeddingTable(std::vector<std::string> tokens, Matrix vectors);

  std::size_t dim() const noexcept { return vectors_.cols(); }
  std::size_t vocab_size() const noexcept { return vectors_.rows(); }

  /// Row index of `token`, or nullopt when out of vocabulary.
  std::optional<std::size_t> find(std::string_view token) const;
  std::span<const double> vector(std::size_t index) const { return vectors_.row(index); }
  const Matrix& vectors() const noexcept { return vectors_; }

 private:
  struct StringHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept {
      return std::hash<std::string_view>{}(s);
    }
  };
  std::unordered_map<std::string, std::size_t, StringHash, std::equal_to<>> vocab_;
  Matrix vectors_;
};

struct EmbeddingLoadOptions {
  /// Rejects the file if its dimension differs.
  std::optional<std::size_t> expected_dim;
  /// When set, only these tokens are kept. Every line is still checked for
  /// its field count, but skipped lines are not parsed as numbers.
  const std::unordered_set<std::string>* keep = nullptr;
};

/// Reads the text format `token v1 ... vd`, one entry per line. A first line
/// consisting of exactly two integers is treated as a `count dim` header.
/// Throws FormatError with the 1-based line number on malformed lines.
EmbeddingTable load_embeddings(const std::filesystem::path& path,
                               const EmbeddingLoadOptions& options = {});

/// Lowercases ASCII letters, isolates each ASCII punctuation character as its
/// own token and splits on whitespace.
std::vector<std::string> tokenize(std::string_view text);

/// An m x d sentence encoding: one embedding row per kept token.
struct SentenceMatrix {
  Matrix values;
  std::vector<std::string> tokens;

  std::size_t length() const noexcept { return values.rows(); }
  std::size_t dim() const noexcept { return values.cols(); }
};

inline constexpr std::size_t kDefaultMaxLen = 40;

/// Keeps the first `max_len` tokens. Out-of-vocabulary tokens become zero rows
/// and an empty sequence becomes a single zero row, so length() >= 1 always.
SentenceMatrix embed_sentence(const std::vector<std::string>& tokens, const EmbeddingTable& table,
                              std::size_t max_len = kDefaultMaxLen);

}  // namespace qcnn
