#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace drivegaze::cli {

/// Every field is settable from a flat key=value config file (--config) and
/// from a same-named flag; flags win.
struct RunConfig {
  std::filesystem::path dataset;
  std::filesystem::path checkpoint;
  std::filesystem::path output = "out";
  std::filesystem::path resume;

  std::string arch = "coarse_fine";
  bool tiny = false;
  std::string crop_policy;            // empty: mild for coarse, aggressive for coarse_fine
  std::size_t refine_resolution = 0;  // 0: architecture default
  std::optional<std::uint64_t> seed;

  std::size_t steps = 500;
  std::size_t batch_size = 4;
  double learning_rate = 1e-3;
  std::size_t log_interval = 50;
  std::size_t validation_stride = 8;
  std::size_t validation_frames = 500;
  std::vector<std::string> test_sequences;  // empty: last third of the manifest

  std::size_t sequences = 6;
  std::size_t frames = 800;
  std::size_t height = 48;
  std::size_t width = 64;
  double event_fraction = 0.10;

  std::string predictor;  // model | gaussian | mean_gt
  std::string split = "test";
  std::size_t eval_stride = 1;
  double sigma_fraction = 0.25;

  std::size_t n_thresholds = 10;
  std::size_t window = 16;
};

/// Thrown for invalid invocations; maps to exit status 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void cmd_synth(const RunConfig& config, std::ostream& out, std::ostream& err);
void cmd_train(const RunConfig& config, std::ostream& out, std::ostream& err);
void cmd_eval(const RunConfig& config, std::ostream& out, std::ostream& err);
void cmd_analyze(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Parses `drivegaze <synth|train|eval|analyze> [options]` and dispatches.
/// Returns 0 on success, 1 on runtime errors and 2 on usage errors.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace drivegaze::cli
