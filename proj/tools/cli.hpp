#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace asdkit::cli {

enum ExitCode { kOk = 0, kConfigExit = 1, kDataExit = 2, kNumericExit = 3 };

struct SynthOptions {
  std::filesystem::path spec;
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
};

struct TrainOptions {
  std::filesystem::path config;
  std::filesystem::path data;
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
};

struct ScoreOptions {
  std::filesystem::path models;
  std::filesystem::path data;
  std::filesystem::path out;
  std::optional<std::filesystem::path> config;
  std::optional<std::string> method;
};

struct EvaluateOptions {
  std::filesystem::path scores;
  std::filesystem::path truth;  // dataset root or label CSV
  std::filesystem::path out;
  double p = 0.1;
};

struct RankOptions {
  std::vector<std::filesystem::path> results;
  std::filesystem::path out;
  double auc_weight = 0.5;
};

// Each command throws asdkit::Error on failure; run() maps it to an exit code.
void cmd_synth(const SynthOptions& o);
void cmd_train(const TrainOptions& o);
void cmd_score(const ScoreOptions& o);
void cmd_evaluate(const EvaluateOptions& o);
void cmd_rank(const RankOptions& o);

/// Parses argv, runs the command and returns the process exit status.
int run(int argc, char** argv);

}  // namespace asdkit::cli
