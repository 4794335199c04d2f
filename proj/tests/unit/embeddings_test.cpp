#include <gtest/gtest.h>

#include <fstream>

#include "qcnn/embeddings.hpp"
#include "support/synthetic.hpp"

namespace qcnn {
namespace {

using testing::TempDir;

void write(const std::filesystem::path& path, const std::string& content) {
  std::ofstream(path, std::ios::binary) << content;
}

TEST(LoadEmbeddings, TwoWordFile) {
  TempDir dir;
  write(dir / "v.txt", "cat 1.0 0.0\ndog 0.0 1.0\n");
  const auto table = load_embeddings(dir / "v.txt");
  EXPECT_EQ(table.dim(), 2u);
  EXPECT_EQ(table.vocab_size(), 2u);
  const auto cat = table.vector(*table.find("cat"));
  EXPECT_EQ(cat[0], 1.0);
  EXPECT_EQ(cat[1], 0.0);
  EXPECT_FALSE(table.find("bird"));
}

TEST(LoadEmbeddings, CountDimHeaderIsSkipped) {
  TempDir dir;
  std::string content = "400000 300\n";
  for (const char* word : {"the", "what", "?"}) {
    content += word;
    for (int i = 0; i < 300; ++i) content += " " + std::to_string(0.001 * i);
    content += "\n";
  }
  write(dir / "w2v.txt", content);
  const auto table = load_embeddings(dir / "w2v.txt");
  EXPECT_EQ(table.dim(), 300u);
  EXPECT_EQ(table.vocab_size(), 3u);
  EXPECT_FALSE(table.find("400000"));
}

TEST(LoadEmbeddings, HeaderDimensionMustMatchVectors) {
  TempDir dir;
  write(dir / "v.txt", "2 3\ncat 1 2\n");
  EXPECT_THROW(load_embeddings(dir / "v.txt"), FormatError);
}

TEST(LoadEmbeddings, ShortLineNamesLineNumber) {
  TempDir dir;
  write(dir / "v.txt", "dog 0.0 1.0\ncat 1.0\n");
  try {
    load_embeddings(dir / "v.txt");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
}

TEST(LoadEmbeddings, UnparseableRealNamesLineNumber) {
  TempDir dir;
  write(dir / "v.txt", "dog 0.0 1.0\n\ncat 1.0 x\n");
  try {
    load_embeddings(dir / "v.txt");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
}

TEST(LoadEmbeddings, EmptyFileIsAnError) {
  TempDir dir;
  write(dir / "v.txt", "");
  EXPECT_THROW(load_embeddings(dir / "v.txt"), FormatError);
  EXPECT_THROW(load_embeddings(dir / "missing.txt"), FormatError);
}

TEST(LoadEmbeddings, ExpectedDimensionIsEnforced) {
  TempDir dir;
  write(dir / "v.txt", "cat 1 2\n");
  EXPECT_THROW(load_embeddings(dir / "v.txt", {.expected_dim = 3}), FormatError);
  EXPECT_EQ(load_embeddings(dir / "v.txt", {.expected_dim = 2}).dim(), 2u);
}

TEST(LoadEmbeddings, FirstOccurrenceWins) {
  TempDir dir;
  write(dir / "v.txt", "cat 1 2\ncat 3 4\n");
  const auto table = load_embeddings(dir / "v.txt");
  EXPECT_EQ(table.vocab_size(), 1u);
  EXPECT_EQ(table.vector(*table.find("cat"))[0], 1.0);
}

TEST(LoadEmbeddings, KeepFilterRestrictsVocabulary) {
  TempDir dir;
  write(dir / "v.txt", "cat 1 2\ndog 3 4\nemu 5 6\n");
  const std::unordered_set<std::string> keep{"emu", "cat"};
  const auto table = load_embeddings(dir / "v.txt", {.keep = &keep});
  EXPECT_EQ(table.vocab_size(), 2u);
  EXPECT_TRUE(table.find("emu"));
  EXPECT_FALSE(table.find("dog"));
}

TEST(LoadEmbeddings, LoadingTwiceGivesIdenticalTables) {
  TempDir dir;
  const auto words = testing::synthetic_vocabulary();
  const auto table = testing::random_table(words, 8, 5);
  testing::write_embedding_file(dir / "v.txt", table, words);
  const auto a = load_embeddings(dir / "v.txt");
  const auto b = load_embeddings(dir / "v.txt");
  EXPECT_EQ(a.vectors(), b.vectors());
  for (const auto& w : words) EXPECT_EQ(a.find(w), b.find(w));
  // Text round trip at 17 significant digits is exact.
  EXPECT_EQ(a.vectors(), table.vectors());
}

TEST(Tokenize, SplitsPunctuationAndLowercases) {
  EXPECT_EQ(tokenize("What is a prism?"),
            (std::vector<std::string>{"what", "is", "a", "prism", "?"}));
  EXPECT_EQ(tokenize("What do you call a newborn kangaroo?"),
            (std::vector<std::string>{"what", "do", "you", "call", "a", "newborn", "kangaroo",
                                      "?"}));
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_TRUE(tokenize("  \t ").empty());
  EXPECT_EQ(tokenize("U.S. state"), (std::vector<std::string>{"u", ".", "s", ".", "state"}));
}

TEST(Tokenize, KeepsNonAsciiBytesInsideWords) {
  EXPECT_EQ(tokenize("caf\xC3\xA9 ole"), (std::vector<std::string>{"caf\xC3\xA9", "ole"}));
}

EmbeddingTable cat_table() {
  return EmbeddingTable({"cat", "dog"}, Matrix::from_rows({{1, 0}, {0, 1}}));
}

TEST(EmbedSentence, KnownToken) {
  const auto s = embed_sentence({"cat"}, cat_table());
  EXPECT_EQ(s.values, Matrix::from_rows({{1, 0}}));
}

TEST(EmbedSentence, OutOfVocabularyIsZero) {
  const auto s = embed_sentence({"xyzzy"}, cat_table());
  EXPECT_EQ(s.values, Matrix(1, 2));
}

TEST(EmbedSentence, EmptyInputGivesOneZeroRow) {
  const auto s = embed_sentence({}, cat_table());
  EXPECT_EQ(s.length(), 1u);
  EXPECT_EQ(s.values, Matrix(1, 2));
}

TEST(EmbedSentence, TruncatesToMaxLenKeepingTheFront) {
  std::vector<std::string> tokens;
  for (int i = 0; i < 40; ++i) tokens.push_back(i % 2 == 0 ? "cat" : "dog");
  tokens[29] = "dog";
  tokens[30] = "cat";
  const auto s = embed_sentence(tokens, cat_table(), 30);
  EXPECT_EQ(s.length(), 30u);
  EXPECT_EQ(s.tokens.size(), 30u);
  EXPECT_EQ(s.tokens.back(), tokens[29]);
  EXPECT_EQ(s.values(29, 1), 1.0);
}

TEST(EmbedSentence, NoPaddingBelowMaxLen) {
  EXPECT_EQ(embed_sentence({"cat", "dog"}, cat_table(), 40).length(), 2u);
}

TEST(EmbedSentence, EveryStringGivesAtLeastOneRow) {
  const auto table = cat_table();
  for (const char* text : {"", " ", "?", "cat dog", "!!!", "\t\n"}) {
    EXPECT_GE(embed_sentence(tokenize(text), table).length(), 1u) << text;
  }
}

}  // namespace
}  // namespace qcnn
