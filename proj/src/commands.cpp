#include "accsurf/commands.hpp"

#include <algorithm>
#include <atomic>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

namespace accsurf {

namespace {

constexpr std::uint64_t kSeedDataTag = 0x5eedda7aULL;
constexpr std::uint64_t kLabeledTag = 0x1abe1edULL;
constexpr std::uint64_t kCalibTag = 0xca11bULL;
constexpr std::uint64_t kEvalTag = 0xeva1ULL;
constexpr std::uint64_t kSummaryTag = 0x50332aULL;

void run_parallel(std::size_t n_tasks, int jobs,
                  const std::function<void(std::size_t)>& task) {
  unsigned n_workers = jobs > 0 ? static_cast<unsigned>(jobs)
                                : std::max(1u, std::thread::hardware_concurrency());
  n_workers = std::min<unsigned>(n_workers, n_tasks == 0 ? 1 : n_tasks);
  if (n_workers <= 1) {
    for (std::size_t i = 0; i < n_tasks; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(n_workers);
  for (unsigned w = 0; w < n_workers; ++w) {
    workers.emplace_back([&, w] {
      try {
        for (std::size_t i = next.fetch_add(1); i < n_tasks;
             i = next.fetch_add(1)) {
          task(i);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

GoldSurface exact_gold(const SyntheticWorld& world,
                       const std::vector<int>& support) {
  GoldSurface gs;
  gs.gamma = world.gamma;
  gs.support = support;
  gs.active.assign(world.space.num_arms(), true);
  return gs;
}

}  // namespace

SyntheticWorld build_world(const ExperimentConfig& cfg) {
  if (cfg.appendix_c) return make_appendix_c_world();
  Rng rng(Rng::splitmix(cfg.world_seed));
  SyntheticWorld w = sample_world(cfg.world, rng);
  w.seed = cfg.world_seed;
  return w;
}

std::string world_name(const ExperimentConfig& cfg) {
  if (cfg.appendix_c) return "appendix_c";
  std::size_t arms = 1;
  for (int c : cfg.world.cardinalities) arms *= static_cast<std::size_t>(c);
  return "synthetic" + std::to_string(arms);
}

std::vector<AppendixCMethodResult> run_appendix_c(
    const std::vector<std::uint64_t>& seeds, const EstimatorConfig& cfg,
    int jobs) {
  const SyntheticWorld world = make_appendix_c_world();
  const std::vector<EstimatorKind> kinds = {
      EstimatorKind::BetaGP, EstimatorKind::BetaGP_SL,
      EstimatorKind::BetaGP_SLP};

  struct Cell {
    Eigen::VectorXd psi;
    Eigen::VectorXd mean;
    double l1 = 0.0, l2 = 0.0;
  };
  std::vector<Cell> cells(kinds.size() * seeds.size());

  run_parallel(cells.size(), jobs, [&](std::size_t idx) {
    const std::size_t ki = idx / seeds.size();
    const std::size_t si = idx % seeds.size();
    const std::uint64_t seed = seeds[si];
    Rng rng(Rng::splitmix(seed * 0x9e3779b9ULL + 17));
    ArmCounts obs = appendix_c_counts(world, rng);
    const double kappa = obs.c1.sum() / obs.total_mass();
    ArmCounts counts(world.space.num_arms());
    warm_start(counts, kappa, 0.1);
    counts.c1 += obs.c1;
    counts.c0 += obs.c0;
    Estimator est =
        Estimator::fit(kinds[ki], counts, world.space, cfg, seed);
    Rng rng_summary(Rng::splitmix(seed ^ kSummaryTag));
    PosteriorSummary summary = est.summarize(cfg.mc_summary, rng_summary);
    cells[idx] = Cell{summary.psi, summary.mean, est.kernel_length(1),
                      est.kernel_length(2)};
  });

  const GoldSurface gold = exact_gold(world, appendix_c_observation_plan());
  std::vector<AppendixCMethodResult> out;
  for (std::size_t ki = 0; ki < kinds.size(); ++ki) {
    AppendixCMethodResult r;
    r.method = to_string(kinds[ki]);
    r.psi_mean = Eigen::VectorXd::Zero(world.space.num_arms());
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      const Cell& c = cells[ki * seeds.size() + si];
      r.psi_mean += c.psi;
      r.estimates.push_back(c.mean);
      r.l1_mean += c.l1;
      r.l2_mean += c.l2;
    }
    r.psi_mean /= static_cast<double>(seeds.size());
    r.l1_mean /= static_cast<double>(seeds.size());
    r.l2_mean /= static_cast<double>(seeds.size());
    r.bv = bias_variance(r.estimates, gold);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<EstimateCellResult> run_estimate_grid(const ExperimentConfig& cfg) {
  const SyntheticWorld world = build_world(cfg);
  Rng pool_rng(Rng::splitmix(cfg.world_seed ^ 0x9001ULL));
  const std::vector<Instance> pool = sample_pool(world, cfg.pool_size, pool_rng);
  const GoldSurface gold =
      gold_surface(pool, world.space, cfg.exploration.min_support);
  const CalibrationMode mode =
      cfg.calibrations.empty() ? CalibrationMode::Full : cfg.calibrations[0];

  std::vector<EstimateCellResult> results(cfg.seeds.size() *
                                          cfg.estimators.size());
  run_parallel(cfg.seeds.size(), cfg.jobs, [&](std::size_t si) {
    const std::uint64_t seed = cfg.seeds[si];
    Rng rng(Rng::splitmix(seed ^ 0xe57ULL));
    Rng rng_seed_data = rng.fork(kSeedDataTag);
    Rng rng_labeled = rng.fork(kLabeledTag);

    std::vector<Instance> seed_data =
        sample_pool(world, cfg.seed_size, rng_seed_data);
    double kappa = 0.0;
    for (auto& inst : seed_data) kappa += oracle_label(world, inst);
    kappa /= static_cast<double>(seed_data.size());

    CalibrationModel calib =
        mode == CalibrationMode::Raw
            ? CalibrationModel::identity(world.space)
            : CalibrationModel::fit(seed_data, pool, world.space, mode,
                                    CalibrationConfig{}, seed ^ kCalibTag);

    std::vector<Instance> labeled =
        sample_pool(world, cfg.labeled_budget, rng_labeled);
    ArmCounts counts(world.space.num_arms());
    warm_start(counts, kappa, cfg.exploration.lambda);
    for (auto& inst : labeled) {
      int c = oracle_label(world, inst);
      accumulate(counts, calib.arm_distribution(inst), c);
    }

    for (std::size_t ei = 0; ei < cfg.estimators.size(); ++ei) {
      Estimator est = Estimator::fit(cfg.estimators[ei], counts, world.space,
                                     cfg.exploration.estimator_cfg, seed);
      Rng rng_summary(Rng::splitmix(seed ^ kSummaryTag ^ (ei + 1)));
      PosteriorSummary summary =
          est.summarize(cfg.exploration.estimator_cfg.mc_summary, rng_summary);
      EstimateCellResult cell;
      cell.method = to_string(cfg.estimators[ei]);
      cell.seed = seed;
      cell.metrics = evaluate(summary.mean, gold);
      cell.summary = std::move(summary);
      results[si * cfg.estimators.size() + ei] = std::move(cell);
    }
  });
  return results;
}

std::vector<ExploreCellResult> run_explore_grid(const ExperimentConfig& cfg) {
  const SyntheticWorld world = build_world(cfg);
  Rng pool_rng(Rng::splitmix(cfg.world_seed ^ 0x9001ULL));
  const std::vector<Instance> pool = sample_pool(world, cfg.pool_size, pool_rng);
  const CalibrationMode mode =
      cfg.calibrations.empty() ? CalibrationMode::Full : cfg.calibrations[0];

  struct CellSpec {
    EstimatorKind kind;
    ExplorationStrategy strategy;
    std::uint64_t seed;
  };
  std::vector<CellSpec> specs;
  for (std::uint64_t seed : cfg.seeds) {
    for (EstimatorKind kind : cfg.estimators) {
      specs.push_back({kind, ExplorationStrategy::Variance, seed});
    }
    if (cfg.random_baseline) {
      specs.push_back({EstimatorKind::BetaI, ExplorationStrategy::Random, seed});
    }
  }

  std::vector<ExploreCellResult> results(specs.size());
  run_parallel(specs.size(), cfg.jobs, [&](std::size_t idx) {
    const CellSpec& spec = specs[idx];
    Rng rng(Rng::splitmix(spec.seed ^ 0xe57ULL));
    Rng rng_seed_data = rng.fork(kSeedDataTag);
    std::vector<Instance> seed_data =
        sample_pool(world, cfg.seed_size, rng_seed_data);

    CalibrationModel calib =
        mode == CalibrationMode::Raw
            ? CalibrationModel::identity(world.space)
            : CalibrationModel::fit(seed_data, pool, world.space, mode,
                                    CalibrationConfig{}, spec.seed ^ kCalibTag);

    ExplorationConfig ex = cfg.exploration;
    ex.estimator = spec.kind;
    ex.calibration = mode;
    ex.strategy = spec.strategy;
    ex.seed = spec.seed;

    ExploreCellResult cell;
    cell.method = to_string(spec.kind);
    cell.strategy = to_string(spec.strategy);
    cell.seed = spec.seed;
    cell.result = run_exploration(world, seed_data, pool, calib, ex);
    results[idx] = std::move(cell);
  });
  return results;
}

std::vector<CalibrateCellResult> run_calibrate_grid(
    const ExperimentConfig& cfg) {
  const SyntheticWorld world = build_world(cfg);
  Rng pool_rng(Rng::splitmix(cfg.world_seed ^ 0x9001ULL));
  const std::vector<Instance> pool = sample_pool(world, cfg.pool_size, pool_rng);

  std::vector<CalibrateCellResult> results(cfg.seeds.size() *
                                           cfg.calibrations.size());
  run_parallel(cfg.seeds.size(), cfg.jobs, [&](std::size_t si) {
    const std::uint64_t seed = cfg.seeds[si];
    Rng rng(Rng::splitmix(seed ^ 0xe57ULL));
    Rng rng_seed_data = rng.fork(kSeedDataTag);
    Rng rng_eval = rng.fork(kEvalTag);
    std::vector<Instance> seed_data =
        sample_pool(world, cfg.seed_size, rng_seed_data);
    std::vector<Instance> eval = sample_pool(world, cfg.eval_size, rng_eval);

    for (std::size_t mi = 0; mi < cfg.calibrations.size(); ++mi) {
      CalibrationMode mode = cfg.calibrations[mi];
      CalibrationModel model =
          mode == CalibrationMode::Raw
              ? CalibrationModel::identity(world.space)
              : CalibrationModel::fit(seed_data, pool, world.space, mode,
                                      CalibrationConfig{}, seed ^ kCalibTag);
      CalibrateCellResult cell;
      cell.seed = seed;
      cell.mode = mode;
      cell.nll = model.mean_nll(eval);
      cell.temperatures = model.temperatures();
      results[si * cfg.calibrations.size() + mi] = std::move(cell);
    }
  });
  return results;
}

int cmd_replicate_appendix_c(const ExperimentConfig& cfg) {
  const SyntheticWorld world = make_appendix_c_world();
  auto methods = run_appendix_c(cfg.seeds, cfg.exploration.estimator_cfg,
                                cfg.jobs);
  const auto& plan = appendix_c_observation_plan();
  std::filesystem::path out(cfg.out_dir);

  std::ostringstream scales;
  scales << "method,arm_index,gamma,n,psi\n";
  for (const auto& m : methods) {
    for (Eigen::Index a = 0; a < m.psi_mean.size(); ++a) {
      scales << m.method << ',' << a << ',' << format_double(world.gamma[a])
             << ',' << plan[a] << ',' << format_double(m.psi_mean[a]) << '\n';
    }
  }
  write_text(out / "scales.csv", scales.str());

  std::ostringstream bv;
  bv << "method,bias2_x100,variance_x100,mse_x100\n";
  for (const auto& m : methods) {
    bv << m.method << ',' << format_double(m.bv.bias2) << ','
       << format_double(m.bv.variance) << ',' << format_double(m.bv.mse)
       << '\n';
  }
  write_text(out / "biasvar.csv", bv.str());

  std::ostringstream kl;
  kl << "method,kernel_length_mean,kernel_length_scale\n";
  for (const auto& m : methods) {
    kl << m.method << ',' << format_double(m.l1_mean) << ','
       << format_double(m.l2_mean) << '\n';
  }
  write_text(out / "kernel_lengths.csv", kl.str());
  return 0;
}

int cmd_estimate(const ExperimentConfig& cfg) {
  auto cells = run_estimate_grid(cfg);
  std::filesystem::path out(cfg.out_dir);
  std::vector<MetricsRow> rows;
  for (const auto& cell : cells) {
    rows.push_back({world_name(cfg), cell.method, cfg.labeled_budget,
                    cell.seed, cell.metrics});
    write_text(out / ("posterior_" + cell.method + "_seed" +
                      std::to_string(cell.seed) + ".csv"),
               posterior_csv(cell.summary));
  }
  write_text(out / "metrics.csv", metrics_csv(rows));

  const SyntheticWorld world = build_world(cfg);
  Rng pool_rng(Rng::splitmix(cfg.world_seed ^ 0x9001ULL));
  auto pool = sample_pool(world, cfg.pool_size, pool_rng);
  write_text(out / "gold.csv",
             gold_surface_csv(world.space,
                              gold_surface(pool, world.space,
                                           cfg.exploration.min_support)));
  write_text(out / "world.json", world_to_json(world).dump(2) + "\n");
  return 0;
}

namespace {

std::string explore_cell_filename(const std::string& method,
                                  const std::string& strategy,
                                  std::uint64_t seed) {
  return "explore_" + method + "_" + strategy + "_seed" +
         std::to_string(seed) + ".jsonl";
}

}  // namespace

int cmd_explore(const ExperimentConfig& cfg, bool resume) {
  auto cells = run_explore_grid(cfg);
  std::filesystem::path out(cfg.out_dir);
  std::vector<MetricsRow> rows;
  for (const auto& cell : cells) {
    std::string name =
        explore_cell_filename(cell.method, cell.strategy, cell.seed);
    std::string body = log_to_jsonl(cell.result.log);
    std::filesystem::path path = out / name;
    if (resume && std::filesystem::exists(path)) {
      // Replay check: previously logged rounds must match the recomputation.
      std::istringstream have(read_text(path));
      std::istringstream want(body);
      std::string have_line, want_line;
      int lineno = 0;
      while (std::getline(have, have_line)) {
        ++lineno;
        if (!std::getline(want, want_line) || have_line != want_line) {
          throw std::runtime_error("resume: " + name + " diverges at line " +
                                   std::to_string(lineno));
        }
      }
    }
    write_text(path, body);
    write_text(out / ("posterior_" + cell.method + "_" + cell.strategy +
                      "_seed" + std::to_string(cell.seed) + ".csv"),
               posterior_csv(cell.result.final_summary));
    rows.push_back({world_name(cfg), cell.method + "+" + cell.strategy,
                    cfg.exploration.budget, cell.seed,
                    cell.result.log.rounds.back().metrics});
  }
  write_text(out / "metrics.csv", metrics_csv(rows));
  if (!cells.empty()) {
    write_text(out / "gold.csv",
               gold_surface_csv(build_world(cfg).space, cells.front().result.gold));
  }
  return 0;
}

int cmd_calibrate(const ExperimentConfig& cfg) {
  auto cells = run_calibrate_grid(cfg);
  std::filesystem::path out(cfg.out_dir);
  std::ostringstream os;
  os << "world,seed,mode,nll";
  std::size_t max_temps = 0;
  for (const auto& cell : cells) {
    max_temps = std::max(max_temps, cell.temperatures.size());
  }
  for (std::size_t k = 0; k < max_temps; ++k) os << ",t_" << (k + 1);
  os << '\n';
  for (const auto& cell : cells) {
    os << world_name(cfg) << ',' << cell.seed << ',' << to_string(cell.mode)
       << ',' << format_double(cell.nll);
    for (double t : cell.temperatures) os << ',' << format_double(t);
    os << '\n';
  }
  write_text(out / "calibration.csv", os.str());

  // Per-seed ordering flags: does Full < Temp < Raw hold on held-out NLL?
  std::map<std::uint64_t, std::map<CalibrationMode, double>> by_seed;
  for (const auto& cell : cells) by_seed[cell.seed][cell.mode] = cell.nll;
  int n_seeds = 0, full_lt_temp = 0, temp_lt_raw = 0, full_lt_raw = 0;
  for (const auto& [seed, nlls] : by_seed) {
    if (nlls.size() < 3) continue;
    ++n_seeds;
    double raw = nlls.at(CalibrationMode::Raw);
    double temp = nlls.at(CalibrationMode::Temp);
    double full = nlls.at(CalibrationMode::Full);
    full_lt_temp += full < temp;
    temp_lt_raw += temp < raw;
    full_lt_raw += full < raw;
  }
  std::ostringstream ord;
  ord << "comparison,holds,seeds\n";
  ord << "full_lt_temp," << full_lt_temp << ',' << n_seeds << '\n';
  ord << "temp_lt_raw," << temp_lt_raw << ',' << n_seeds << '\n';
  ord << "full_lt_raw," << full_lt_raw << ',' << n_seeds << '\n';
  write_text(out / "ordering.csv", ord.str());
  return 0;
}

int cmd_report(const std::string& dir) {
  namespace fs = std::filesystem;
  struct Key {
    std::string world, method;
    int budget;
    bool operator<(const Key& o) const {
      return std::tie(world, method, budget) <
             std::tie(o.world, o.method, o.budget);
    }
  };
  std::map<Key, std::vector<std::array<double, 4>>> groups;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.path().filename() != "metrics.csv") continue;
    std::istringstream in(read_text(entry.path()));
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      std::istringstream row(line);
      std::string world, method, budget, seed, macro, micro, worst, infreq;
      std::getline(row, world, ',');
      std::getline(row, method, ',');
      std::getline(row, budget, ',');
      std::getline(row, seed, ',');
      std::getline(row, macro, ',');
      std::getline(row, micro, ',');
      std::getline(row, worst, ',');
      std::getline(row, infreq, ',');
      groups[{world, method, std::stoi(budget)}].push_back(
          {std::stod(macro), std::stod(micro), std::stod(worst),
           std::stod(infreq)});
    }
  }
  std::ostringstream os;
  os << "world,method,budget,seeds,macro_mse_x100,macro_sd,worst_mse_x100,"
        "worst_sd\n";
  for (const auto& [key, vals] : groups) {
    const double n = static_cast<double>(vals.size());
    double macro = 0.0, worst = 0.0;
    for (const auto& v : vals) {
      macro += v[0];
      worst += v[2];
    }
    macro /= n;
    worst /= n;
    double vmacro = 0.0, vworst = 0.0;
    for (const auto& v : vals) {
      vmacro += (v[0] - macro) * (v[0] - macro);
      vworst += (v[2] - worst) * (v[2] - worst);
    }
    os << key.world << ',' << key.method << ',' << key.budget << ','
       << vals.size() << ',' << format_double(macro) << ','
       << format_double(std::sqrt(vmacro / n)) << ',' << format_double(worst)
       << ',' << format_double(std::sqrt(vworst / n)) << '\n';
  }
  write_text(fs::path(dir) / "summary.csv", os.str());
  return 0;
}

}  // namespace accsurf
