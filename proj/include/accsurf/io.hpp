#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "accsurf/exploration.hpp"
#include "accsurf/metrics.hpp"
#include "accsurf/world.hpp"

namespace accsurf {

using json = nlohmann::json;

// Stable text form for CSV cells; JSON/JSONL doubles go through nlohmann's
// round-trip-exact formatting.
std::string format_double(double v);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

std::string gold_surface_csv(const AttributeSpace& space,
                             const GoldSurface& gold);
std::string posterior_csv(const PosteriorSummary& summary);
std::string trace_csv(const std::vector<TraceRow>& trace);
std::string embeddings_csv(const ad::Mat& embeds);

json world_to_json(const SyntheticWorld& world);
SyntheticWorld world_from_json(const json& j);

json round_record_to_json(const RoundRecord& record);
std::string log_to_jsonl(const ExplorationLog& log);

struct MetricsRow {
  std::string world;
  std::string method;
  int budget = 0;
  std::uint64_t seed = 0;
  MetricSuite metrics;
};
std::string metrics_csv(const std::vector<MetricsRow>& rows);

// Full experiment description; flags override individual fields.
struct ExperimentConfig {
  bool appendix_c = false;
  WorldSpec world;
  std::uint64_t world_seed = 1;
  std::size_t pool_size = 20000;
  std::size_t seed_size = 500;
  std::size_t eval_size = 500;
  int labeled_budget = 2000;
  std::vector<EstimatorKind> estimators;
  std::vector<CalibrationMode> calibrations;
  ExplorationConfig exploration;
  bool random_baseline = false;
  std::vector<std::uint64_t> seeds;
  std::string out_dir = "out";
  int jobs = 0;
};

ExperimentConfig config_from_json(const json& j);
json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace accsurf
