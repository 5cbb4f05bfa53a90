#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "accsurf/commands.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::vector<std::uint64_t> seeds;
  int jobs = -1;
  std::uint64_t seed_offset = 0;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool config_required) {
  cmd->add_option("--config", flags.config_path, "experiment config JSON")
      ->required(config_required);
  cmd->add_option("--out", flags.out_dir, "output directory (overrides config)");
  cmd->add_option("--seeds", flags.seeds, "seed list (overrides config)")
      ->delimiter(',');
  cmd->add_option("--jobs", flags.jobs, "worker count (default: logical cores)");
  cmd->add_option("--seed-offset", flags.seed_offset, "added to every seed");
}

accsurf::ExperimentConfig resolve(const CommonFlags& flags,
                                  bool default_appendix_c,
                                  std::size_t default_seed_count) {
  accsurf::ExperimentConfig cfg;
  if (!flags.config_path.empty()) {
    cfg = accsurf::load_config(flags.config_path);
  } else {
    cfg.appendix_c = default_appendix_c;
    cfg.seeds.clear();
  }
  if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  if (!flags.seeds.empty()) cfg.seeds = flags.seeds;
  if (cfg.seeds.empty()) {
    for (std::size_t i = 0; i < default_seed_count; ++i) cfg.seeds.push_back(i);
  }
  if (flags.jobs >= 0) cfg.jobs = flags.jobs;
  if (flags.seed_offset != 0) {
    for (auto& s : cfg.seeds) s += flags.seed_offset;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Accuracy-surface estimation over attribute combinations"};
  app.require_subcommand(1);

  CommonFlags rep_flags, est_flags, exp_flags, cal_flags;
  std::string report_dir;
  bool resume = false;

  CLI::App* rep = app.add_subcommand(
      "replicate-appendix-c", "10-arm diagnostic replication (scales, "
                              "bias-variance, kernel lengths)");
  add_common(rep, rep_flags, /*config_required=*/false);

  CLI::App* est = app.add_subcommand(
      "estimate", "fixed labeled budget estimation grid, no exploration");
  add_common(est, est_flags, /*config_required=*/true);

  CLI::App* exp = app.add_subcommand(
      "explore", "budgeted active exploration, JSONL log per cell");
  add_common(exp, exp_flags, /*config_required=*/true);
  exp->add_flag("--resume", resume,
                "verify existing logs against the replay and continue");

  CLI::App* cal = app.add_subcommand(
      "calibrate", "compare calibration modes on held-out arm NLL");
  add_common(cal, cal_flags, /*config_required=*/true);

  CLI::App* repo = app.add_subcommand("report", "aggregate metrics CSVs");
  repo->add_option("--in", report_dir, "directory holding metrics.csv files")
      ->required();

  CLI11_PARSE(app, argc, argv);

  std::string out_dir_for_diag = "out";
  try {
    if (rep->parsed()) {
      auto cfg = resolve(rep_flags, true, 20);
      out_dir_for_diag = cfg.out_dir;
      return accsurf::cmd_replicate_appendix_c(cfg);
    }
    if (est->parsed()) {
      auto cfg = resolve(est_flags, false, 3);
      out_dir_for_diag = cfg.out_dir;
      return accsurf::cmd_estimate(cfg);
    }
    if (exp->parsed()) {
      auto cfg = resolve(exp_flags, false, 3);
      out_dir_for_diag = cfg.out_dir;
      return accsurf::cmd_explore(cfg, resume);
    }
    if (cal->parsed()) {
      auto cfg = resolve(cal_flags, false, 5);
      out_dir_for_diag = cfg.out_dir;
      return accsurf::cmd_calibrate(cfg);
    }
    if (repo->parsed()) {
      return accsurf::cmd_report(report_dir);
    }
  } catch (const accsurf::ad::NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    try {
      accsurf::write_text(std::filesystem::path(out_dir_for_diag) /
                              "diagnostics.txt",
                          std::string(e.what()) + "\n");
    } catch (...) {
    }
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
