#ifndef QDPJ_EXPERIMENT_HPP_
#define QDPJ_EXPERIMENT_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qdpj/admm.hpp"
#include "qdpj/probgen.hpp"

namespace qdpj {

enum class Algorithm { qdpj, centralized_exact, centralized_quantized };

std::string to_string(Algorithm a);
Algorithm parse_algorithm(const std::string& name);

struct GraphSpec {
    std::size_t n = 10;
    double density = 0.1;
    std::uint64_t seed = 2;

    friend bool operator==(const GraphSpec&, const GraphSpec&) = default;
};

struct ExperimentConfig {
    InstanceSpec instance = desk_instance_spec(1);
    GraphSpec graph;
    AdmmConfig admm;
    bool random_lambda_init = false;
    Algorithm algorithm = Algorithm::qdpj;
    std::vector<QuantizationLevel> delta_sweep{QuantizationLevel(1, 1000)};
    std::string output_dir;  // empty: --out, then $QDPJ_OUTPUT_DIR, then "qdpj_out"
};

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

/// Invalid or inconsistent configuration; `field()` names the offending key.
class ConfigError : public InvalidArgument {
 public:
    ConfigError(std::string field, const std::string& what);
    const std::string& field() const { return field_; }

 private:
    std::string field_;
};

/// Desk-scale defaults (N = 10, n_i = 5, p = 8).
ExperimentConfig desk_experiment();
/// Full-scale defaults: N = 100, n_i = 100, p = 120, rho = 0.01, gamma = 1,
/// delta in {1e-3, 1e-4, 1e-5, 1e-6}, K = 1000.
ExperimentConfig full_experiment();

nlohmann::json to_json(const ExperimentConfig& config);
/// Keys absent from `j` keep the defaults of the named "preset" (desk when absent).
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Throws ConfigError.
void validate_config(const ExperimentConfig& config);

/// Output directory resolution: explicit override, config, $QDPJ_OUTPUT_DIR, "qdpj_out".
std::filesystem::path resolve_output_dir(const ExperimentConfig& config,
                                         const std::optional<std::string>& override_dir);

std::string trace_file_name(Algorithm algorithm, const QuantizationLevel& level);

struct ExperimentOutputs {
    std::vector<std::filesystem::path> traces;
    std::filesystem::path metadata;
};

/// Runs each algorithm (for every delta where quantization applies) and writes
/// one CSV per run plus metadata.json, all under `out_dir`.
ExperimentOutputs run_experiment(const ExperimentConfig& config, const std::vector<Algorithm>& algorithms,
                                 const std::filesystem::path& out_dir);

/// Per-node theta_i vs lambda_min(P_i) table.
void print_parameter_report(std::ostream& out, const ParameterReport& report);
ParameterReport check_experiment_parameters(const ExperimentConfig& config);

struct TraceSummary {
    std::string path;
    std::optional<double> delta;  // parsed from "<algo>_delta_<value>.csv"
    std::string algorithm;
    std::size_t rows = 0;
    double final_l1 = 0.0;
    double floor_l1 = 0.0;            // mean l1 over the last min(100, rows) rows
    std::size_t settle_iteration = 0; // first k with l1 <= 2 * floor
    double mean_consensus_rounds = 0.0;
    std::uint64_t total_pieces = 0;
    std::optional<bool> expected_ordering;  // floor increases with delta within an algorithm
};

/// Throws InvalidArgument for empty files, foreign schemas or traces that
/// lack l1_error or disagree on the iteration axis.
std::vector<TraceSummary> compare_traces(const std::vector<std::filesystem::path>& paths);
void print_trace_summaries(std::ostream& out, const std::vector<TraceSummary>& rows);

std::string version_string();

}  // namespace qdpj

#endif  // QDPJ_EXPERIMENT_HPP_
