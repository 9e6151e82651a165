#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "madqrl/runtime.hpp"

namespace madqrl::cli {

// Everything a command needs: the run configuration plus the iteration
// budget. `explicit_keys` records which keys came from a file or a flag.
struct AppConfig {
  runtime::RunConfig run;
  int iterations = 15000;
  std::set<std::string> explicit_keys;
};

// Full-scale defaults, or the small preset used for test-scale runs.
AppConfig default_config(bool desk);

// Every accepted key, in the order dump_config writes them.
const std::vector<std::string>& config_keys();

// Throws UsageError naming the key for unknown keys or malformed values.
void apply_setting(AppConfig& config, const std::string& key, const std::string& value);

// Flat `key = value` lines; blank lines and `#` comments are ignored.
void apply_config_text(AppConfig& config, const std::string& text, const std::string& source);
void apply_config_file(AppConfig& config, const std::filesystem::path& path);

// Reproduces the effective configuration; feeding it back through
// apply_config_text yields an identical config.
std::string dump_config(const AppConfig& config);

// Range checks and flag conflicts; throws UsageError.
void validate(const AppConfig& config);

inline constexpr int kManifestFormat = 1;
std::string manifest_text(const AppConfig& config);
AppConfig load_manifest(const std::filesystem::path& run_dir);

struct MetricsTable {
  std::vector<int> iteration;
  std::vector<double> mean_reward;
  std::vector<double> std_reward;
  std::vector<double> mean_episode_len;
};

// Reads the documented metrics columns; throws IoError on schema mismatch.
MetricsTable read_metrics_csv(const std::filesystem::path& path);

// Entry k is the mean of values[max(0, k - window + 1) .. k].
std::vector<double> moving_average(const std::vector<double>& values, int window);

// First iteration index whose `window`-row moving average reaches
// `fraction` of the final moving average, or nullopt for an empty series.
std::optional<int> sampling_saturation(const MetricsTable& table, int window = 50,
                                       double fraction = 0.95);

// Mean reward (window-5 moving average) with a +-1 std band, as SVG.
std::string render_plot_svg(const std::vector<MetricsTable>& runs,
                            const std::vector<std::string>& labels);

struct LayerCount {
  std::string name;
  std::string kind;  // "quantum" or "classical"
  std::size_t count = 0;
};

struct SetSummary {
  std::string name;
  std::string role;  // "actor" or "critic"
  std::vector<int> agents;
  std::size_t classical = 0;
  std::size_t quantum = 0;
  std::vector<LayerCount> layers;
};

struct InspectSummary {
  std::string strategy;
  std::string model;
  std::vector<SetSummary> sets;
  std::size_t quantum_closed_form = 0;  // per actor set
  std::size_t per_circuit = 0;
  std::vector<std::string> notes;
};

InspectSummary inspect(const AppConfig& config);
std::string format_inspect(const InspectSummary& summary);

// Writes one evaluation episode as CSV, replaying the seeds `evaluate`
// uses for episode 0.
void write_trajectory(const runtime::RunConfig& config, const marl::PolicySet& policies,
                      runtime::EvalMode mode, std::ostream& out);

// Command-line entry point. Returns 0 on success, 1 on run errors and 2 on
// usage errors.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace madqrl::cli
