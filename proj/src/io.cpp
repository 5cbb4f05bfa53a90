#include "accsurf/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace accsurf {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string gold_surface_csv(const AttributeSpace& space,
                             const GoldSurface& gold) {
  std::ostringstream os;
  os << "arm_index";
  for (const auto& name : space.attribute_names()) os << ',' << name;
  os << ",gamma,support\n";
  for (std::size_t a = 0; a < space.num_arms(); ++a) {
    os << a;
    for (int v : space.index_to_arm(a)) os << ',' << v;
    os << ',' << (gold.active[a] ? format_double(gold.gamma[a]) : "")
       << ',' << gold.support[a] << '\n';
  }
  return os.str();
}

std::string posterior_csv(const PosteriorSummary& summary) {
  std::ostringstream os;
  os << "arm_index,mean,variance,phi,psi\n";
  for (Eigen::Index a = 0; a < summary.mean.size(); ++a) {
    os << a << ',' << format_double(summary.mean[a]) << ','
       << format_double(summary.variance[a]) << ','
       << format_double(summary.phi[a]) << ','
       << format_double(summary.psi[a]) << '\n';
  }
  return os.str();
}

std::string trace_csv(const std::vector<TraceRow>& trace) {
  std::ostringstream os;
  os << "step,elbo,kl_f,kl_g,loglik\n";
  for (const auto& row : trace) {
    os << row.step << ',' << format_double(row.elbo) << ','
       << format_double(row.kl_f) << ',' << format_double(row.kl_g) << ','
       << format_double(row.loglik) << '\n';
  }
  return os.str();
}

std::string embeddings_csv(const ad::Mat& embeds) {
  std::ostringstream os;
  os << "arm_index";
  for (Eigen::Index j = 0; j < embeds.cols(); ++j) os << ",v_" << (j + 1);
  os << '\n';
  for (Eigen::Index a = 0; a < embeds.rows(); ++a) {
    os << a;
    for (Eigen::Index j = 0; j < embeds.cols(); ++j) {
      os << ',' << format_double(embeds(a, j));
    }
    os << '\n';
  }
  return os.str();
}

json world_to_json(const SyntheticWorld& world) {
  json j;
  j["attribute_names"] = world.space.attribute_names();
  j["cardinalities"] = world.space.cardinalities();
  j["gamma"] = std::vector<double>(world.gamma.data(),
                                   world.gamma.data() + world.gamma.size());
  j["prior"] = std::vector<double>(world.prior.data(),
                                   world.prior.data() + world.prior.size());
  json confusions = json::array();
  for (const auto& c : world.confusion) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < c.rows(); ++r) {
      rows.push_back(std::vector<double>(c.row(r).begin(), c.row(r).end()));
    }
    confusions.push_back(rows);
  }
  j["confusion"] = confusions;
  j["logit_temperature"] = world.logit_temperature;
  j["seed"] = world.seed;
  return j;
}

SyntheticWorld world_from_json(const json& j) {
  AttributeSpace space(j.at("attribute_names").get<std::vector<std::string>>(),
                       j.at("cardinalities").get<std::vector<int>>());
  SyntheticWorld w{std::move(space), {}, {}, {}, 1.0, 0};
  auto gamma = j.at("gamma").get<std::vector<double>>();
  auto prior = j.at("prior").get<std::vector<double>>();
  w.gamma = Eigen::Map<const Eigen::VectorXd>(gamma.data(), gamma.size());
  w.prior = Eigen::Map<const Eigen::VectorXd>(prior.data(), prior.size());
  for (const auto& rows : j.at("confusion")) {
    const std::size_t r = rows.size();
    Eigen::MatrixXd c(r, rows.at(0).size());
    for (std::size_t i = 0; i < r; ++i) {
      auto row = rows.at(i).get<std::vector<double>>();
      c.row(i) = Eigen::Map<const Eigen::VectorXd>(row.data(), row.size());
    }
    w.confusion.push_back(c);
  }
  w.logit_temperature = j.at("logit_temperature").get<double>();
  w.seed = j.at("seed").get<std::uint64_t>();
  return w;
}

namespace {

json metric_suite_to_json(const MetricSuite& m) {
  json j;
  j["macro_mse"] = m.macro_mse;
  j["micro_mse"] = m.micro_mse;
  j["worst_mse"] = m.worst_mse;
  j["infreq_mse"] = m.infreq_mse;
  j["active_arms"] = m.active_arms;
  return j;
}

}  // namespace

json round_record_to_json(const RoundRecord& record) {
  json j;
  j["round"] = record.round;
  j["arms"] = record.arms;
  j["instances"] = record.instances;
  j["labels"] = record.labels;
  j["skips"] = record.skips;
  j["labels_used"] = record.labels_used;
  j["metrics"] = metric_suite_to_json(record.metrics);
  return j;
}

std::string log_to_jsonl(const ExplorationLog& log) {
  std::ostringstream os;
  for (const auto& record : log.rounds) {
    os << round_record_to_json(record).dump() << '\n';
  }
  return os.str();
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream os;
  os << "world,method,budget,seed,macro_mse_x100,micro_mse_x100,"
        "worst_mse_x100,infreq_mse_x100,active_arms\n";
  for (const auto& r : rows) {
    os << r.world << ',' << r.method << ',' << r.budget << ',' << r.seed << ','
       << format_double(100.0 * r.metrics.macro_mse) << ','
       << format_double(100.0 * r.metrics.micro_mse) << ','
       << format_double(100.0 * r.metrics.worst_mse) << ','
       << format_double(100.0 * r.metrics.infreq_mse) << ','
       << r.metrics.active_arms << '\n';
  }
  return os.str();
}

namespace {

WorldSpec world_spec_from_json(const json& j) {
  WorldSpec spec;
  spec.attribute_names = j.at("attribute_names").get<std::vector<std::string>>();
  spec.cardinalities = j.at("cardinalities").get<std::vector<int>>();
  spec.smoothness = j.value("smoothness", 1.0);
  spec.prior_concentration = j.value("prior_concentration", 1.0);
  spec.coupling = j.value("coupling", 0.0);
  spec.error_rates = j.value("error_rates", std::vector<double>{});
  spec.logit_temperature = j.value("logit_temperature", 1.0);
  return spec;
}

json world_spec_to_json(const WorldSpec& spec) {
  json j;
  j["attribute_names"] = spec.attribute_names;
  j["cardinalities"] = spec.cardinalities;
  j["smoothness"] = spec.smoothness;
  j["prior_concentration"] = spec.prior_concentration;
  j["coupling"] = spec.coupling;
  j["error_rates"] = spec.error_rates;
  j["logit_temperature"] = spec.logit_temperature;
  return j;
}

EstimatorConfig estimator_config_from_json(const json& j) {
  EstimatorConfig cfg;
  cfg.embed_dim = j.value("embed_dim", cfg.embed_dim);
  cfg.hidden = j.value("hidden", cfg.hidden);
  cfg.inducing = j.value("inducing", cfg.inducing);
  cfg.warm_steps = j.value("warm_steps", cfg.warm_steps);
  cfg.round_steps = j.value("round_steps", cfg.round_steps);
  cfg.lr = j.value("lr", cfg.lr);
  cfg.mc_train = j.value("mc_train", cfg.mc_train);
  cfg.mc_summary = j.value("mc_summary", cfg.mc_summary);
  cfg.dirichlet_weight = j.value("dirichlet_weight", cfg.dirichlet_weight);
  cfg.pool_threshold = j.value("pool_threshold", cfg.pool_threshold);
  cfg.pool_k = j.value("pool_k", cfg.pool_k);
  return cfg;
}

json estimator_config_to_json(const EstimatorConfig& cfg) {
  json j;
  j["embed_dim"] = cfg.embed_dim;
  j["hidden"] = cfg.hidden;
  j["inducing"] = cfg.inducing;
  j["warm_steps"] = cfg.warm_steps;
  j["round_steps"] = cfg.round_steps;
  j["lr"] = cfg.lr;
  j["mc_train"] = cfg.mc_train;
  j["mc_summary"] = cfg.mc_summary;
  j["dirichlet_weight"] = cfg.dirichlet_weight;
  j["pool_threshold"] = cfg.pool_threshold;
  j["pool_k"] = cfg.pool_k;
  return j;
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  cfg.appendix_c = j.value("appendix_c", false);
  if (j.contains("world")) cfg.world = world_spec_from_json(j.at("world"));
  if (!cfg.appendix_c && !j.contains("world")) {
    throw std::invalid_argument("config: need \"world\" or \"appendix_c\"");
  }
  cfg.world_seed = j.value("world_seed", cfg.world_seed);
  cfg.pool_size = j.value("pool_size", cfg.pool_size);
  cfg.seed_size = j.value("seed_size", cfg.seed_size);
  cfg.eval_size = j.value("eval_size", cfg.eval_size);
  cfg.labeled_budget = j.value("labeled_budget", cfg.labeled_budget);
  for (const auto& name :
       j.value("estimators", std::vector<std::string>{"BetaGP-SLP"})) {
    cfg.estimators.push_back(estimator_kind_from_string(name));
  }
  for (const auto& name :
       j.value("calibrations", std::vector<std::string>{"Full"})) {
    cfg.calibrations.push_back(calibration_mode_from_string(name));
  }
  if (j.contains("exploration")) {
    const json& e = j.at("exploration");
    cfg.exploration.budget = e.value("budget", 0);
    cfg.exploration.arms_per_round = e.value("arms_per_round", 12);
    cfg.exploration.labels_per_arm = e.value("labels_per_arm", 1);
    cfg.exploration.lambda = e.value("lambda", 0.1);
    cfg.exploration.min_support = e.value("min_support", 5);
    if (e.contains("estimator_cfg")) {
      cfg.exploration.estimator_cfg =
          estimator_config_from_json(e.at("estimator_cfg"));
    }
  }
  cfg.random_baseline = j.value("random_baseline", false);
  auto seeds = j.value("seeds", std::vector<std::uint64_t>{0});
  if (seeds.empty()) throw std::invalid_argument("config: need at least one seed");
  cfg.seeds = seeds;
  cfg.out_dir = j.value("out", std::string("out"));
  cfg.jobs = j.value("jobs", 0);
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["appendix_c"] = cfg.appendix_c;
  if (!cfg.appendix_c || !cfg.world.cardinalities.empty()) {
    j["world"] = world_spec_to_json(cfg.world);
  }
  j["world_seed"] = cfg.world_seed;
  j["pool_size"] = cfg.pool_size;
  j["seed_size"] = cfg.seed_size;
  j["eval_size"] = cfg.eval_size;
  j["labeled_budget"] = cfg.labeled_budget;
  std::vector<std::string> est;
  for (auto k : cfg.estimators) est.push_back(to_string(k));
  j["estimators"] = est;
  std::vector<std::string> cal;
  for (auto m : cfg.calibrations) cal.push_back(to_string(m));
  j["calibrations"] = cal;
  json e;
  e["budget"] = cfg.exploration.budget;
  e["arms_per_round"] = cfg.exploration.arms_per_round;
  e["labels_per_arm"] = cfg.exploration.labels_per_arm;
  e["lambda"] = cfg.exploration.lambda;
  e["min_support"] = cfg.exploration.min_support;
  e["estimator_cfg"] = estimator_config_to_json(cfg.exploration.estimator_cfg);
  j["exploration"] = e;
  j["random_baseline"] = cfg.random_baseline;
  j["seeds"] = cfg.seeds;
  j["out"] = cfg.out_dir;
  j["jobs"] = cfg.jobs;
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  json j = json::parse(read_text(path));
  return config_from_json(j);
}

}  // namespace accsurf
