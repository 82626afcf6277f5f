#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

#include "lnln/config.hpp"

namespace lnln {
namespace {

TEST(Config, DefaultsMatchTheReferenceArchitecture) {
  const RunConfig c;
  EXPECT_EQ(c.model.token_len, 8u);
  EXPECT_EQ(c.model.width, 128u);
  EXPECT_EQ(c.model.heads, 8u);
  EXPECT_EQ(c.train.batch_size, 64u);
  EXPECT_DOUBLE_EQ(c.train.learning_rate, 1e-4);
  EXPECT_EQ(c.train.epochs, 200u);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{1111, 1112, 1113}));
  ASSERT_EQ(c.sweep_rates.size(), 10u);
  EXPECT_DOUBLE_EQ(c.sweep_rates.back(), 0.9);
}

TEST(Config, JsonRoundTrip) {
  RunConfig c;
  c.dataset = "data.bin";
  c.model.width = 32;
  c.model.heads = 4;
  c.train.learning_rate = 3e-4;
  c.loss_profile = "sims";
  c.train.weights = loss_weight_preset("sims");
  c.precision = Precision::F32;
  c.synthetic.scheme = LabelScheme::Sims;
  c.sweep_rates = {0.0, 0.5};
  const auto back = run_config_from_json(json::parse(to_json(c).dump()));
  EXPECT_TRUE(back == c);
}

TEST(Config, ProfileResolvesWeights) {
  const auto c = run_config_from_json({{"loss_profile", "sims-beta0.3"}});
  EXPECT_DOUBLE_EQ(c.train.weights.beta, 0.3);
  EXPECT_DOUBLE_EQ(c.train.weights.alpha, 0.9);
  EXPECT_THROW(run_config_from_json({{"loss_profile", "nope"}}), ConfigError);
  const auto custom = run_config_from_json(
      {{"loss_profile", "custom"}, {"train", {{"weights", {{"gamma", 0.7}}}}}});
  EXPECT_DOUBLE_EQ(custom.train.weights.gamma, 0.7);
}

TEST(Config, PresetTable) {
  const auto mosi = loss_weight_preset("mosi");
  EXPECT_DOUBLE_EQ(mosi.alpha, 0.9);
  EXPECT_DOUBLE_EQ(mosi.beta, 0.8);
  EXPECT_DOUBLE_EQ(mosi.gamma, 0.1);
  EXPECT_DOUBLE_EQ(mosi.delta, 1.0);
  const auto sims = loss_weight_preset("sims");
  EXPECT_DOUBLE_EQ(sims.beta, 0.6);
  EXPECT_TRUE(loss_weight_preset("mosei") == mosi);
  EXPECT_THROW(loss_weight_preset("unknown"), std::invalid_argument);
}

TEST(Config, UnknownKeysRejectedWithPath) {
  try {
    run_config_from_json({{"model", {{"widht", 64}}}});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("widht"), std::string::npos) << e.what();
  }
  EXPECT_THROW(run_config_from_json({{"bogus", 1}}), ConfigError);
  EXPECT_THROW(run_config_from_json({{"train", {{"adamw", {{"beta3", 1}}}}}}), ConfigError);
}

TEST(Config, InvalidValuesRejected) {
  EXPECT_THROW(run_config_from_json({{"model", {{"width", 30}, {"heads", 4}}}}), ConfigError);
  EXPECT_THROW(run_config_from_json({{"train", {{"batch_size", 0}}}}), ConfigError);
  EXPECT_THROW(run_config_from_json({{"sweep_rates", {0.1, 1.5}}}), ConfigError);
  EXPECT_THROW(run_config_from_json({{"precision", "f16"}}), ConfigError);
  EXPECT_THROW(run_config_from_json({{"seeds", json::array()}}), ConfigError);
}

TEST(Config, Overrides) {
  json j = json::object();
  apply_override(j, "model.width=64");
  apply_override(j, "train.cosine=false");
  apply_override(j, "dataset=some/path.bin");
  apply_override(j, "seeds=[1,2]");
  EXPECT_EQ(j.at("model").at("width"), 64);
  EXPECT_EQ(j.at("train").at("cosine"), false);
  EXPECT_EQ(j.at("dataset"), "some/path.bin");
  const auto c = run_config_from_json(j);
  EXPECT_EQ(c.model.width, 64u);
  EXPECT_FALSE(c.train.cosine);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{1, 2}));
  EXPECT_THROW(apply_override(j, "noequals"), ConfigError);
  EXPECT_THROW(apply_override(j, "a..b=1"), ConfigError);
  EXPECT_THROW(apply_override(j, "dataset.x=1"), ConfigError);
}

TEST(Config, ManifestFeedsBackIntoResolution) {
  const auto dir = std::filesystem::temp_directory_path() / "lnln_config_test";
  std::filesystem::create_directories(dir);
  RunConfig c;
  c.model.width = 16;
  c.model.heads = 2;
  const auto path = (dir / "m.json").string();
  write_json_file(path, make_manifest("train", to_json(c), json::object()));
  const auto back = resolve_run_config(path, {"train.epochs=3"});
  EXPECT_EQ(back.model.width, 16u);
  EXPECT_EQ(back.train.epochs, 3u);
  EXPECT_THROW(resolve_run_config((dir / "absent.json").string(), {}), ConfigError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace lnln
