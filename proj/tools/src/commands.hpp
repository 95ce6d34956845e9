#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "run_config.hpp"

namespace e4g::cli {

// Exit codes shared by main and the command bodies.
inline constexpr int kExitOk = 0;
inline constexpr int kExitOther = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitVerification = 4;

int cmd_synth(const RunConfig& config, const std::string& out_dir, bool force);
int cmd_train(const RunConfig& config, const std::string& data_dir,
              const std::string& out_dir);
int cmd_eval(const RunConfig& config, const std::string& checkpoint_path,
             const std::string& data_path, const std::string& out_dir,
             const std::vector<uint64_t>& eval_seeds, bool samples_given);
int cmd_predict(const RunConfig& config, const std::string& checkpoint_path,
                const std::string& data_path, size_t index, const std::string& out_dir);
int cmd_gradcheck(const RunConfig& config);
int cmd_bench(const RunConfig& config, const std::vector<std::string>& checkpoint_paths,
              const std::string& data_path, size_t n_runs);

}  // namespace e4g::cli
