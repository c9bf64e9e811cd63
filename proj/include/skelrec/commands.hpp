#pragma once

#include <functional>
#include <vector>

#include "skelrec/io.hpp"

namespace skelrec {

// Exit codes shared by every subcommand:
//   0 success, 2 usage or config error, 3 training divergence, 4 I/O failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitDivergence = 3;
inline constexpr int kExitIo = 4;

int cmd_synth(const ExperimentConfig& cfg);
int cmd_preprocess(const ExperimentConfig& cfg);
int cmd_train(const ExperimentConfig& cfg);
int cmd_eval(const ExperimentConfig& cfg);
int cmd_hpsearch(const ExperimentConfig& cfg, const std::vector<int>& hidden_candidates);
int cmd_export_features(const ExperimentConfig& cfg);

// Runs fn and maps thrown errors onto the exit-code contract.
int run_guarded(const std::function<int()>& fn);

}  // namespace skelrec
