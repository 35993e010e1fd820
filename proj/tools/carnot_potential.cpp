#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "carnot/experiments.hpp"

// carnot-potential run --config <path> [--out <dir>] [--threads <n>]
//                      [--seed-override <s>]
// carnot-potential list
//
// Exit codes: 0 clean, 2 invalid config or inputs, 3 accuracy gate failed.
// Whatever happens, <out>/summary.json carries the status and every error.

int main(int argc, char** argv) {
  CLI::App app{"numerical potential theory on homogeneous groups"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  int threads = 0;
  std::uint64_t seed_value = 0;

  CLI::App* run = app.add_subcommand("run", "run one experiment from a JSON config");
  run->add_option("--config", config_path, "experiment config (JSON)")->required();
  run->add_option("--out", out_dir, "output directory for summary.json and artifacts");
  run->add_option("--threads", threads,
                  "worker threads (0 = CARNOT_POTENTIAL_THREADS, then hardware)");
  CLI::Option* seed_opt =
      run->add_option("--seed-override", seed_value, "replace the config's rng seed");

  CLI::App* list = app.add_subcommand("list", "list the available experiments");

  CLI11_PARSE(app, argc, argv);

  if (list->parsed()) {
    for (const auto& e : carnot::experiments::registry())
      std::printf("%-16s %s\n", e.name.c_str(), e.description.c_str());
    return 0;
  }

  namespace fs = std::filesystem;
  carnot::io::json config;
  try {
    config = carnot::io::read_json(config_path);
  } catch (const std::exception& e) {
    carnot::io::json summary;
    summary["schema"] = "carnot-potential-summary/1";
    summary["experiment"] = "";
    summary["status"] = "validation-error";
    summary["errors"] = carnot::io::json::array({e.what()});
    summary["results"] = carnot::io::json::object();
    summary["artifacts"] = carnot::io::json::array();
    std::fprintf(stderr, "error: %s\n", e.what());
    try {
      fs::create_directories(out_dir);
      carnot::io::write_json(fs::path(out_dir) / "summary.json", summary);
    } catch (const std::exception& w) {
      std::fprintf(stderr, "error: %s\n", w.what());
    }
    return 2;
  }

  std::optional<std::uint64_t> seed_override;
  if (seed_opt->count() > 0) seed_override = seed_value;

  const carnot::experiments::RunOutcome outcome = carnot::experiments::run_experiment(
      config, out_dir, threads, seed_override, fs::path(config_path).parent_path());

  for (const auto& err : outcome.summary.at("errors"))
    std::fprintf(stderr, "error: %s\n", err.get<std::string>().c_str());
  std::printf("%s: %s (summary in %s)\n",
              outcome.summary.at("experiment").get<std::string>().c_str(),
              outcome.summary.at("status").get<std::string>().c_str(),
              (fs::path(out_dir) / "summary.json").string().c_str());
  return outcome.exit_code;
}
