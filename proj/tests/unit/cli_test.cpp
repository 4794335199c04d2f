#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "qclass/commands.hpp"
#include "qclass/config.hpp"
#include "qclass/model_io.hpp"
#include "qclass/report.hpp"
#include "qcnn/errors.hpp"
#include "support/synthetic.hpp"

namespace {

using namespace qcnn;
using qcnn::testing::TempDir;

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

qclass::ModelContainer sample_container(std::uint64_t seed = 4) {
  qclass::ModelContainer c;
  c.config.filters = 3;
  c.config.hidden = 6;
  c.config.seed = seed;
  Rng rng(seed);
  c.model = init_model(c.config.model_shape(5, 6), rng);
  for (auto& t : tensors(c.model)) {
    for (auto& v : t.values) v += 0.1 * rng.normal();
  }
  return c;
}

TEST(ModelIo, RoundTripGivesIdenticalPredictions) {
  const auto original = sample_container();
  const auto words = qcnn::testing::synthetic_vocabulary();
  const auto table = qcnn::testing::random_table(words, 5, 8);
  TempDir dir;
  qclass::save_model(dir / "m.qcnn", original);
  const auto loaded = qclass::load_model(dir / "m.qcnn");
  EXPECT_EQ(flatten(loaded.model), flatten(original.model));
  EXPECT_EQ(loaded.taxonomy, original.taxonomy);
  EXPECT_EQ(loaded.config.filters, 3u);

  const auto records = qcnn::testing::synthetic_records(2, 5, 1);
  ASSERT_GE(records.size(), 12u);
  Rng pick(3);
  for (int i = 0; i < 100; ++i) {
    const auto& r = records[pick.uniform_index(records.size())];
    const auto s = embed_sentence(tokenize(r.text + " " + std::to_string(i)), table);
    const auto a = predict_proba(original.model, s);
    const auto b = predict_proba(loaded.model, s);
    ASSERT_EQ(a, b);
    EXPECT_EQ(predict(original.model, s), predict(loaded.model, s));
  }
}

TEST(ModelIo, TierTwoRoleSurvives) {
  auto c = sample_container();
  c.coarse = 4;
  c.model = make_model(c.config.model_shape(5, 5));
  const auto back = qclass::decode_model(qclass::encode_model(c));
  ASSERT_TRUE(back.coarse.has_value());
  EXPECT_EQ(*back.coarse, 4u);
  EXPECT_EQ(back.class_labels().size(), 5u);
}

void expect_format_error(std::string_view bytes, std::string_view fragment) {
  try {
    qclass::decode_model(bytes);
    FAIL() << "decoded corrupt bytes";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

TEST(ModelIo, RejectsCorruptFiles) {
  const auto bytes = qclass::encode_model(sample_container());
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  expect_format_error(bad_magic, "bad magic");
  auto bad_version = bytes;
  bad_version[4] = 2;
  expect_format_error(bad_version, "unsupported version");
  expect_format_error(std::string_view(bytes).substr(0, bytes.size() - 8),
                      "payload length mismatch");
  expect_format_error(std::string_view(bytes).substr(0, 12), "header");
  expect_format_error("", "bad magic");
}

TEST(ModelIo, ModelFileNames) {
  const auto& t = LabelTaxonomy::standard();
  EXPECT_EQ(qclass::model_file("d", t, std::nullopt).filename(), "tier1.qcnn");
  EXPECT_EQ(qclass::model_file("d", t, 5).filename(), "tier2-numeric.qcnn");
}

TEST(Config, UnknownKeyListsValidOnes) {
  TrainConfig c;
  try {
    qclass::apply_config_value(c, "learnin_rate", "0.1");
    FAIL();
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("learnin_rate"), std::string::npos);
    EXPECT_NE(what.find("learning_rate"), std::string::npos);
  }
}

TEST(Config, FileValuesApply) {
  TempDir dir;
  std::ofstream(dir / "c.cfg") << "# comment\nepochs = 3\nlr=0.01\noptimizer=sgd\n\n";
  TrainConfig c;
  qclass::apply_config_file(c, dir / "c.cfg");
  EXPECT_EQ(c.epochs, 3u);
  EXPECT_DOUBLE_EQ(c.learning_rate, 0.01);
  EXPECT_EQ(c.optimizer, OptimizerKind::sgd);
  EXPECT_THROW(qclass::apply_config_value(c, "epochs", "three"), ConfigError);
}

TEST(Config, MapRoundTrips) {
  TrainConfig c;
  c.learning_rate = 0.1 + 0.2;
  c.dropout = 0.25;
  TrainConfig back;
  for (const auto& [k, v] : qclass::config_to_map(c)) qclass::apply_config_value(back, k, v);
  EXPECT_EQ(back.learning_rate, c.learning_rate);
  EXPECT_EQ(back.dropout, 0.25);
  EXPECT_EQ(qclass::config_to_map(back), qclass::config_to_map(c));
}

TEST(Report, JsonAndTextAgree) {
  HierMetrics m;
  m.total = 115;
  m.main_correct = 104;
  m.both_correct = 88;
  m.per_coarse = {{3, 3}, {20, 14}, {30, 27}, {25, 20}, {17, 12}, {20, 17}};
  m.coarse_confusion.assign(6, std::vector<std::size_t>(6, 0));
  const auto report = qclass::make_report(LabelTaxonomy::standard(), m);
  const auto json = qclass::report_to_json(report);
  const auto text = qclass::render_report(report);
  EXPECT_DOUBLE_EQ(json["main"]["percent"].get<double>(), 90.43);
  EXPECT_DOUBLE_EQ(json["sub_end_to_end"]["percent"].get<double>(), 76.52);
  EXPECT_DOUBLE_EQ(json["sub_conditional"]["percent"].get<double>(), 84.62);
  EXPECT_NE(text.find("90.43"), std::string::npos);
  EXPECT_NE(text.find("76.52"), std::string::npos);
  EXPECT_NE(text.find("84.62"), std::string::npos);
  ASSERT_EQ(json["per_coarse"].size(), 6u);
  for (const auto& row : json["per_coarse"]) {
    std::ostringstream pct;
    pct.setf(std::ios::fixed);
    pct.precision(2);
    pct << row["percent"].get<double>();
    EXPECT_NE(text.find(row["class"].get<std::string>()), std::string::npos);
    EXPECT_NE(text.find(pct.str()), std::string::npos) << pct.str();
  }
}

// End-to-end runs of the command layer on a small synthetic corpus.
class Commands : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto words = qcnn::testing::synthetic_vocabulary();
    const auto table = qcnn::testing::random_table(words, 8, 2);
    qcnn::testing::write_embedding_file(dir / "vec.txt", table, words);
    qcnn::testing::write_trec_file(dir / "train.txt", qcnn::testing::synthetic_records(2, 6, 2));
    qcnn::testing::write_trec_file(dir / "test.txt", qcnn::testing::synthetic_records(1, 7, 2));
  }

  int run(std::vector<std::string> args, const std::string& input = {},
          const qclass::RunHooks& hooks = {}) {
    std::istringstream in(input);
    out.str("");
    err.str("");
    return qclass::run(args, in, out, err, hooks);
  }

  std::vector<std::string> train_args(const std::string& model_dir) {
    return {"train",    "--train-file", (dir / "train.txt").string(),
            "--embeddings", (dir / "vec.txt").string(), "--model-dir", (dir / model_dir).string(),
            "--seed",   "7",  "--epochs", "3", "--filters", "4", "--hidden", "8",
            "--batch-size", "10"};
  }

  TempDir dir;
  std::ostringstream out;
  std::ostringstream err;
};

TEST_F(Commands, TrainIsDeterministicPerSeed) {
  ASSERT_EQ(run(train_args("a")), 0) << err.str();
  ASSERT_EQ(run(train_args("b")), 0) << err.str();
  std::size_t files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir / "a")) {
    const auto name = entry.path().filename();
    if (name.extension() != ".qcnn") continue;
    ++files;
    EXPECT_EQ(read_file(entry.path()), read_file(dir / "b" / name)) << name;
  }
  EXPECT_EQ(files, 7u);
}

TEST_F(Commands, EvalAndPredict) {
  ASSERT_EQ(run(train_args("m")), 0) << err.str();
  ASSERT_EQ(run({"eval", "--test-file", (dir / "test.txt").string(), "--embeddings",
                 (dir / "vec.txt").string(), "--model-dir", (dir / "m").string()}),
            0)
      << err.str();
  const auto text = out.str();
  for (const auto& name : LabelTaxonomy::standard().coarse_names()) {
    EXPECT_NE(text.find(name), std::string::npos) << name;
  }
  const auto json = nlohmann::json::parse(read_file(dir / "m" / "report.json"));
  EXPECT_EQ(json["per_coarse"].size(), 6u);
  EXPECT_TRUE(json.contains("sub_conditional"));

  ASSERT_EQ(run({"predict", "--embeddings", (dir / "vec.txt").string(), "--model-dir",
                 (dir / "m").string()},
                "cue1 fine1x0 w3 ?\ncue4 w2 ?\n\ncue5 fine5x1 ?\n"),
            0)
      << err.str();
  std::istringstream lines(out.str());
  std::string line;
  std::size_t count = 0;
  while (std::getline(lines, line)) {
    ++count;
    EXPECT_NE(line.find('\t'), std::string::npos) << line;
  }
  EXPECT_EQ(count, 3u);
}

TEST_F(Commands, TierOneOnlyEvalReportsMainAccuracy) {
  auto args = train_args("t1");
  args.push_back("--tier1-only");
  ASSERT_EQ(run(args), 0) << err.str();
  EXPECT_TRUE(std::filesystem::exists(dir / "t1" / "tier1.qcnn"));
  EXPECT_FALSE(std::filesystem::exists(dir / "t1" / "tier2-human.qcnn"));
  ASSERT_EQ(run({"eval", "--test-file", (dir / "test.txt").string(), "--embeddings",
                 (dir / "vec.txt").string(), "--model-dir", (dir / "t1").string()}),
            0)
      << err.str();
  const auto json = nlohmann::json::parse(read_file(dir / "t1" / "report.json"));
  EXPECT_FALSE(json.contains("sub_conditional"));
}

TEST_F(Commands, ErrorsMapToExitCodes) {
  EXPECT_EQ(run({}), 1);
  EXPECT_EQ(run({"train", "--model-dir", "x"}), 1);
  auto missing = train_args("z");
  missing[4] = (dir / "absent.txt").string();
  EXPECT_EQ(run(missing), 2);
  EXPECT_NE(err.str().find("absent.txt"), std::string::npos) << err.str();

  std::ofstream(dir / "bad.txt") << "NOPE:thing what ?\n";
  auto bad = train_args("y");
  bad[2] = (dir / "bad.txt").string();
  EXPECT_EQ(run(bad), 2);
  EXPECT_NE(err.str().find("bad.txt:1"), std::string::npos) << err.str();

  auto bad_lr = train_args("w");
  bad_lr.insert(bad_lr.end(), {"--lr", "-1"});
  EXPECT_EQ(run(bad_lr), 1);
}

TEST_F(Commands, PredictRejectsEmptyInput) {
  ASSERT_EQ(run(train_args("m")), 0) << err.str();
  EXPECT_EQ(run({"predict", "--embeddings", (dir / "vec.txt").string(), "--model-dir",
                 (dir / "m").string()},
                "\n\n"),
            2);
}

TEST_F(Commands, GradcheckPassesAndCatchesCorruption) {
  EXPECT_EQ(run({"gradcheck", "--trials", "5"}), 0) << err.str() << out.str();
  qclass::RunHooks hooks;
  hooks.gradient_mutator = [](Gradients& g) { g.fc1.weights(0, 0) += 1e-2; };
  EXPECT_EQ(run({"gradcheck", "--trials", "5"}, {}, hooks), 3);
}

}  // namespace
