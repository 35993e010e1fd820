#ifndef CARNOT_EXPERIMENTS_HPP
#define CARNOT_EXPERIMENTS_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "carnot/io.hpp"

// Config-driven experiment runners behind the command-line front end. A run
// consumes one JSON config {experiment, group, seed, params}, writes
// summary.json plus CSV/JSON artifacts into the output directory, and maps
// outcomes to exit codes: 0 clean, 2 invalid config or inputs, 3 computed
// but an accuracy gate failed. Summaries carry no timestamps or thread
// counts, so identical config and seed give byte-identical outputs.

namespace carnot::experiments {

struct ExperimentInfo {
  std::string name;
  std::string description;
  bool randomized = false;  // 'seed' is mandatory in the config
};

const std::vector<ExperimentInfo>& registry();

struct RunOutcome {
  int exit_code = 0;
  io::json summary;  // the document written to <out>/summary.json
};

// Config and input errors never propagate as exceptions: they land in the
// summary's errors array with status "validation-error" (exit 2); failed
// accuracy gates give "accuracy-failure" (exit 3). threads <= 0 falls back
// to CARNOT_POTENTIAL_THREADS, then the hardware count. Relative paths
// inside the config resolve against config_dir.
RunOutcome run_experiment(const io::json& config, const std::filesystem::path& out_dir,
                          int threads = 0, std::optional<std::uint64_t> seed_override = {},
                          const std::filesystem::path& config_dir = ".");

}  // namespace carnot::experiments

#endif
