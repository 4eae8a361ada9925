#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"

namespace drivegaze {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "drivegaze");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("drivegaze_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<std::string> small_synth(const fs::path& root) {
  return {"synth", "--dataset", root.string(), "--seed", "3", "--sequences", "3", "--frames", "48",
          "--height", "24", "--width", "32"};
}

TEST(Cli, UsageErrorsExitWithTwo) {
  EXPECT_EQ(invoke({}).code, 2);
  EXPECT_EQ(invoke({"fly", "--seed", "1"}).code, 2);
  EXPECT_EQ(invoke({"synth"}).code, 2);  // --seed missing
  EXPECT_EQ(invoke({"synth", "--seed", "1", "--bogus", "2"}).code, 2);
  EXPECT_EQ(invoke({"synth", "--seed", "x"}).code, 2);
  EXPECT_EQ(invoke({"eval", "--seed", "1", "--dataset", "/nonexistent"}).code, 2);  // no predictor
  EXPECT_EQ(invoke({"--help"}).code, 0);
}

TEST(Cli, RuntimeErrorsExitWithOne) {
  const Result r = invoke({"train", "--seed", "1", "--dataset", "/nonexistent/dg", "--tiny"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("does not exist"), std::string::npos);
}

TEST(Cli, SynthIsByteIdentical) {
  const fs::path a = scratch("synth_a"), b = scratch("synth_b");
  ASSERT_EQ(invoke(small_synth(a)).code, 0);
  ASSERT_EQ(invoke(small_synth(b)).code, 0);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), a);
    ASSERT_TRUE(fs::exists(b / rel)) << rel;
    EXPECT_EQ(slurp(e.path()), slurp(b / rel)) << rel;
    ++files;
  }
  EXPECT_GT(files, 3u * 48u * 3u);
  EXPECT_FALSE(fs::exists(a / ".drivegaze.lock"));
}

TEST(Cli, ConfigFileAndFlagOverride) {
  const fs::path dir = scratch("config");
  std::ofstream(dir / "run.ini") << "seed=3\nsequences=2\nframes=40\nheight=16\nwidth=24\n";
  const std::string root = (dir / "data").string();
  ASSERT_EQ(invoke({"synth", "--config", (dir / "run.ini").string(), "--dataset", root, "--frames", "36"}).code, 0);
  const std::string manifest = slurp(fs::path(root) / "manifest.csv");
  EXPECT_NE(manifest.find("seq01"), std::string::npos);
  EXPECT_EQ(manifest.find("seq02"), std::string::npos);
  EXPECT_NE(manifest.find(",36,16,24"), std::string::npos);

  std::ofstream(dir / "bad.ini") << "seed=3\nnot_a_key=1\n";
  EXPECT_EQ(invoke({"synth", "--config", (dir / "bad.ini").string(), "--dataset", root}).code, 2);
}

TEST(Cli, TrainWritesLogAndCheckpointAndHonoursLock) {
  const fs::path dir = scratch("train");
  const fs::path data = dir / "data";
  ASSERT_EQ(invoke(small_synth(data)).code, 0);
  const fs::path out = dir / "out";
  const std::vector<std::string> train{"train", "--seed", "5", "--dataset", data.string(), "--output",
                                       out.string(), "--tiny", "--arch", "coarse", "--steps", "3",
                                       "--batch_size", "1", "--log_interval", "1", "--validation_stride", "0"};
  const Result r = invoke(train);
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string log = slurp(out / "loss_log.csv");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 4);
  EXPECT_EQ(log.substr(0, log.find('\n')), "step,loss1,loss2,validation_cc");
  EXPECT_TRUE(fs::exists(out / "model.ckpt"));

  std::vector<std::string> resume = train;
  resume.insert(resume.end(), {"--resume", (out / "model.ckpt").string(), "--checkpoint",
                               (out / "model2.ckpt").string()});
  const Result rr = invoke(resume);
  ASSERT_EQ(rr.code, 0) << rr.err;
  EXPECT_NE(rr.out.find("at step 3"), std::string::npos);
  const std::string log2 = slurp(out / "loss_log.csv");
  EXPECT_EQ(log2.substr(log2.rfind('\n', log2.size() - 2) + 1, 2), "6,");

  // Wrong architecture for the checkpoint.
  std::vector<std::string> wrong = resume;
  wrong[std::find(wrong.begin(), wrong.end(), "coarse") - wrong.begin()] = "coarse_fine";
  EXPECT_EQ(invoke(wrong).code, 1);

  std::ofstream(out / ".drivegaze.lock") << "";
  const Result locked = invoke(train);
  EXPECT_EQ(locked.code, 1);
  EXPECT_NE(locked.err.find("locked"), std::string::npos);
  fs::remove(out / ".drivegaze.lock");
}

TEST(Cli, EvalBaselinesAndAnalyze) {
  const fs::path dir = scratch("eval");
  const fs::path data = dir / "data";
  ASSERT_EQ(invoke(small_synth(data)).code, 0);
  const fs::path out = dir / "out";
  const Result g = invoke({"eval", "--seed", "1", "--dataset", data.string(), "--output", out.string(),
                           "--predictor", "gaussian", "--validation_frames", "16"});
  ASSERT_EQ(g.code, 0) << g.err;
  const std::string csv = slurp(out / "metrics_gaussian_test.csv");
  EXPECT_NE(csv.find("sequence_id,clip_end_frame,cc,kl,hard"), std::string::npos);
  EXPECT_NE(csv.find("ALL,full:mean"), std::string::npos);
  EXPECT_EQ(invoke({"eval", "--seed", "1", "--dataset", data.string(), "--output", out.string(), "--predictor",
                    "mean_gt", "--validation_frames", "16"})
                .code,
            0);
  EXPECT_EQ(invoke({"eval", "--seed", "1", "--dataset", data.string(), "--output", out.string(), "--predictor",
                    "model"})
                .code,
            2);

  const Result a = invoke({"analyze", "--seed", "1", "--dataset", data.string(), "--output", out.string()});
  ASSERT_EQ(a.code, 0) << a.err;
  for (const char* f : {"speed_buckets.csv", "sequence_modes.csv", "hard_windows.csv", "threshold_sweep.csv",
                        "category_trends.csv"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
}

}  // namespace
}  // namespace drivegaze
