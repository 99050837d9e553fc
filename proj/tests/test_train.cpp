#include <gtest/gtest.h>

#include "ela/train.hpp"
#include "test_support.hpp"

namespace ela {
namespace {

using testing::TempDir;

class SmallCorpus : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir;
    SyntheticCorpusOptions opt;
    opt.count_per_class = 6;
    opt.width = opt.height = 48;
    opt.seed = 5;
    write_synthetic_corpus(dir_->path(), opt);
    const auto scan = scan_corpus(dir_->path());
    manifest_ = new DatasetManifest(
        split_manifest(scan.records, {0.5, 0.5, 0.0}, 42, PreprocessSettings{QualityLevel{95}, 32, 32, true}));
  }
  static void TearDownTestSuite() {
    delete manifest_;
    delete dir_;
  }
  static TrainConfig small_config(int epochs) {
    TrainConfig c;
    c.epochs = epochs;
    c.batch_size = 4;
    c.conv_channels = {4, 8};
    c.adam.learning_rate = 1e-3;
    return c;
  }

  static TempDir* dir_;
  static DatasetManifest* manifest_;
};

TempDir* SmallCorpus::dir_ = nullptr;
DatasetManifest* SmallCorpus::manifest_ = nullptr;

TEST_F(SmallCorpus, SameSeedGivesIdenticalHistoryBytes) {
  const auto a = train(*manifest_, small_config(3));
  const auto b = train(*manifest_, small_config(3));
  ASSERT_EQ(a.history.epochs.size(), 3u);
  EXPECT_EQ(format_history(a.history), format_history(b.history));
  EXPECT_EQ(save_checkpoint(a.params), save_checkpoint(b.params));
  auto other = small_config(3);
  other.seed = 7;
  EXPECT_NE(save_checkpoint(train(*manifest_, other).params), save_checkpoint(a.params));
}

TEST_F(SmallCorpus, ThreadedPreprocessingKeepsHistory) {
  auto threaded = small_config(2);
  threaded.threads = 3;
  EXPECT_EQ(format_history(train(*manifest_, small_config(2)).history), format_history(train(*manifest_, threaded).history));
}

TEST_F(SmallCorpus, ZeroEpochsReturnsInitialisation) {
  auto config = small_config(0);
  const auto r = train(*manifest_, config);
  EXPECT_TRUE(r.history.epochs.empty());
  const auto init = cnn::init_params<float>(net_config_for(manifest_->settings, config), config.seed);
  EXPECT_EQ(save_checkpoint(r.params), save_checkpoint(init));
}

TEST_F(SmallCorpus, HistoryRecordsAreInRange) {
  std::vector<int> seen;
  const auto r = train(*manifest_, small_config(2), [&](const EpochRecord& e) { seen.push_back(e.epoch); });
  EXPECT_EQ(seen, (std::vector<int>{1, 2}));
  for (const auto& e : r.history.epochs) {
    EXPECT_GE(e.train_loss, 0.0);
    EXPECT_GE(e.val_loss, 0.0);
    EXPECT_GE(e.train_accuracy, 0.0);
    EXPECT_LE(e.train_accuracy, 1.0);
    EXPECT_GE(e.val_accuracy, 0.0);
    EXPECT_LE(e.val_accuracy, 1.0);
  }
}

TEST_F(SmallCorpus, PredictIsDeterministicAndNormalised) {
  const auto params = train(*manifest_, small_config(1)).params;
  const auto a = predict(params, *manifest_, Split::Val);
  const auto b = predict(params, *manifest_, Split::Val, 2);
  ASSERT_EQ(a.rows.size(), manifest_->in_split(Split::Val).size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].path, b.rows[i].path);
    EXPECT_EQ(a.rows[i].p_tampered, b.rows[i].p_tampered);
    EXPECT_NEAR(a.rows[i].p_authentic + a.rows[i].p_tampered, 1.0, 1e-6);
  }
  EXPECT_EQ(format_predictions(a), format_predictions(b));
  EXPECT_TRUE(parse_predictions(format_predictions(a)).warnings.empty());
}

// Predictions must be the forward pass of the preprocessed image, row by row.
TEST_F(SmallCorpus, PredictMatchesDirectForward) {
  const auto params = cnn::init_params<float>({32, 32, 3, {4, 8}}, 3);
  const auto preds = predict(params, *manifest_, Split::Train);
  const auto records = manifest_->in_split(Split::Train);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto ex = preprocess(records[i], manifest_->settings);
    cnn::Tensor4<float> one(1, 32, 32, 3);
    std::copy(ex.data.begin(), ex.data.end(), one.data.begin());
    const auto p = cnn::forward(params, one).probs[0];
    EXPECT_NEAR(preds.rows[i].p_tampered, p[1], 1e-6);
    EXPECT_EQ(preds.rows[i].label, label_index(records[i].label));
  }
}

TEST_F(SmallCorpus, HugeLearningRateDiverges) {
  auto config = small_config(3);
  config.adam.learning_rate = 1e30;
  try {
    (void)train(*manifest_, config);
    ADD_FAILURE() << "expected DivergedLoss";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DivergedLoss) << e.what();
  }
}

TEST(TrainArgs, Rejected) {
  const DatasetManifest empty;
  TrainConfig c;
  c.epochs = 1;
  try {
    (void)train(empty, c);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
  }
}

TEST(HistoryCsv, FormatAndParse) {
  TrainHistory h;
  h.epochs.push_back({1, 0.6931471805599453, 0.5, 0.69, 0.525});
  h.epochs.push_back({2, 0.5, 0.75, 0.4, 0.9});
  const auto text = format_history(h, "# seed=42\n");
  EXPECT_EQ(text,
            "# seed=42\n"
            "epoch,train_loss,train_acc,val_loss,val_acc\n"
            "1,0.693147,0.500000,0.690000,0.525000\n"
            "2,0.500000,0.750000,0.400000,0.900000\n");
  const auto back = parse_history(text);
  ASSERT_EQ(back.epochs.size(), 2u);
  EXPECT_EQ(back.epochs[1].epoch, 2);
  EXPECT_DOUBLE_EQ(back.epochs[1].val_accuracy, 0.9);
  EXPECT_THROW((void)parse_history("epoch,loss\n"), Error);
}

}  // namespace
}  // namespace ela
