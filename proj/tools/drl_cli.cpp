// drl: run trainings from a config file and average score files.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <future>
#include <iostream>
#include <string>
#include <vector>

#include "drl/config.hpp"
#include "drl/error.hpp"
#include "drl/trainer.hpp"

namespace {

constexpr int kUsageError = 2;

int cmd_train(const std::string& config_path, int runs, std::optional<std::uint64_t> seed_flag,
              const std::string& out_flag, bool parallel) {
  if (!std::filesystem::exists(config_path)) {
    std::cerr << "drl train: config file not found: " << config_path << "\n";
    return kUsageError;
  }
  drl::RunConfig cfg = drl::load_config(config_path);
  if (!out_flag.empty()) {
    drl::Json run = cfg.run.json();
    run["output_dir"] = out_flag;
    cfg.run = drl::ParamTree(run);
  }
  if (runs <= 0) runs = cfg.run.get<int>("n_runs");
  const std::uint64_t base = seed_flag.value_or(cfg.run.get<std::uint64_t>("seed"));

  std::vector<std::filesystem::path> paths;
  for (int i = 0; i < runs; ++i) paths.push_back(drl::score_path(cfg, base + i));
  auto run_one = [&](int i) {
    drl::TrainOptions options;
    options.seed = base + i;
    options.score_path = paths[i];
    drl::train(cfg, options);
  };
  if (parallel) {
    std::vector<std::future<void>> jobs;
    for (int i = 0; i < runs; ++i) jobs.push_back(std::async(std::launch::async, run_one, i));
    for (auto& j : jobs) j.get();
  } else {
    for (int i = 0; i < runs; ++i) run_one(i);
  }
  if (runs > 1) {
    const auto avg = std::filesystem::path(cfg.run.get<std::string>("output_dir")) / (cfg.name + "_avg.dat");
    drl::write_averaged(drl::average_files(paths), avg);
  }
  return 0;
}

int cmd_average(const std::vector<std::string>& files, const std::string& out) {
  std::vector<std::filesystem::path> paths(files.begin(), files.end());
  drl::write_averaged(drl::average_files(paths), out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Config-driven deep reinforcement learning"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "Run one or more trainings");
  std::string config_path, out_dir;
  int runs = 0;
  std::uint64_t seed = 0;
  bool parallel = false;
  train->add_option("--config", config_path, "Run file (JSON)")->required();
  train->add_option("--runs", runs, "Number of runs (seeds seed, seed+1, ...)")->check(CLI::PositiveNumber);
  auto* seed_opt = train->add_option("--seed", seed, "Base seed (overrides run.seed)");
  train->add_option("--out", out_dir, "Output directory (overrides run.output_dir)");
  train->add_flag("--parallel-runs", parallel, "Execute runs concurrently");

  auto* average = app.add_subcommand("average", "Average score files");
  std::vector<std::string> files;
  std::string avg_out;
  average->add_option("files", files, "Score files")->required();
  average->add_option("--out", avg_out, "Averaged output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*train) {
      std::optional<std::uint64_t> seed_flag;
      if (seed_opt->count() > 0) seed_flag = seed;
      return cmd_train(config_path, runs, seed_flag, out_dir, parallel);
    }
    return cmd_average(files, avg_out);
  } catch (const std::exception& e) {
    std::cerr << "drl: " << e.what() << "\n";
    return 1;
  }
}
