// Command-line driver: run, sweep, compare, check-params, gen-instance.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qdpj/experiment.hpp"

namespace {

namespace fs = std::filesystem;
using namespace qdpj;

enum Exit { ok = 0, failure = 1, bad_config = 2, bad_parameters = 3, consensus_failure = 4 };

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string algorithm;
    std::string delta;
    bool check_params_only = false;
};

void add_config_options(CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("--config", a.config_path, "JSON experiment config (defaults: desk preset)");
    cmd->add_option("--seed", a.seed, "base seed: instance = s, graph = s+1, protocol = s+2");
}

std::vector<QuantizationLevel> parse_delta_list(const std::string& text) {
    std::vector<QuantizationLevel> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            out.push_back(QuantizationLevel::parse(item));
        } catch (const InvalidArgument& e) {
            throw ConfigError("--delta", e.what());
        }
    }
    if (out.empty()) throw ConfigError("--delta", "empty list");
    return out;
}

ExperimentConfig build_config(const CommonArgs& a) {
    ExperimentConfig c = a.config_path.empty() ? desk_experiment() : load_config(a.config_path);
    if (a.seed) {
        c.instance.seed = *a.seed;
        c.graph.seed = *a.seed + 1;
        c.admm.master_seed = *a.seed + 2;
    }
    if (!a.algorithm.empty()) c.algorithm = parse_algorithm(a.algorithm);
    if (!a.delta.empty()) c.delta_sweep = parse_delta_list(a.delta);
    validate_config(c);
    return c;
}

int check_params(const ExperimentConfig& c) {
    const ParameterReport report = check_experiment_parameters(c);
    print_parameter_report(std::cout, report);
    return report.all_pass() ? ok : bad_parameters;
}

int run(const CommonArgs& a, bool sweep) {
    const ExperimentConfig c = build_config(a);
    if (a.check_params_only) return check_params(c);
    const std::vector<Algorithm> algorithms =
        sweep ? std::vector<Algorithm>{Algorithm::qdpj, Algorithm::centralized_quantized, Algorithm::centralized_exact}
              : std::vector<Algorithm>{c.algorithm};
    const fs::path dir = resolve_output_dir(c, a.out.empty() ? std::nullopt : std::optional<std::string>(a.out));
    const ExperimentOutputs outputs = run_experiment(c, algorithms, dir);
    for (const auto& p : outputs.traces) std::cout << p.string() << '\n';
    std::cout << outputs.metadata.string() << '\n';
    return ok;
}

int gen_instance(const CommonArgs& a) {
    const ExperimentConfig c = build_config(a);
    const fs::path dir = resolve_output_dir(c, a.out.empty() ? std::nullopt : std::optional<std::string>(a.out));
    fs::create_directories(dir);
    const Instance inst = generate(c.instance, c.admm.rho, c.admm.gamma);
    const Digraph g = random_strongly_connected(c.graph.n, c.graph.density, c.graph.seed);
    std::ofstream inst_out(dir / "instance.txt");
    write_instance(inst_out, inst);
    std::ofstream graph_out(dir / "graph.txt");
    write_edge_list(graph_out, g);
    if (!inst_out || !graph_out) throw Error("cannot write to " + dir.string());
    std::cout << (dir / "instance.txt").string() << '\n' << (dir / "graph.txt").string() << '\n';
    return ok;
}

int compare(const std::vector<std::string>& files) {
    std::vector<fs::path> paths(files.begin(), files.end());
    print_trace_summaries(std::cout, compare_traces(paths));
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quantized distributed proximal Jacobian ADMM experiments"};
    app.set_version_flag("--version", version_string());
    app.require_subcommand(1);

    CommonArgs args;
    auto* run_cmd = app.add_subcommand("run", "run the configured algorithm over the delta sweep");
    add_config_options(run_cmd, args);
    run_cmd->add_option("--out", args.out, "output directory (default: config, then $QDPJ_OUTPUT_DIR, then qdpj_out)");
    run_cmd->add_option("--algorithm", args.algorithm, "qdpj | centralized_exact | centralized_quantized");
    run_cmd->add_option("--delta", args.delta, "comma-separated quantization levels, e.g. 1e-3,1e-4");
    run_cmd->add_flag("--check-params-only", args.check_params_only, "print per-node parameter margins and exit");

    auto* sweep_cmd = app.add_subcommand("sweep", "run every algorithm over the delta sweep");
    add_config_options(sweep_cmd, args);
    sweep_cmd->add_option("--out", args.out, "output directory");
    sweep_cmd->add_option("--delta", args.delta, "comma-separated quantization levels");
    sweep_cmd->add_flag("--check-params-only", args.check_params_only, "print per-node parameter margins and exit");

    std::vector<std::string> files;
    auto* compare_cmd = app.add_subcommand("compare", "summarize trace CSVs");
    compare_cmd->add_option("traces", files, "trace files")->required();

    auto* check_cmd = app.add_subcommand("check-params", "print per-node parameter margins");
    add_config_options(check_cmd, args);

    auto* gen_cmd = app.add_subcommand("gen-instance", "write the instance and digraph as text files");
    add_config_options(gen_cmd, args);
    gen_cmd->add_option("--out", args.out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) return run(args, false);
        if (*sweep_cmd) return run(args, true);
        if (*compare_cmd) return compare(files);
        if (*check_cmd) return check_params(build_config(args));
        if (*gen_cmd) return gen_instance(args);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return bad_config;
    } catch (const ParameterViolation& e) {
        std::cerr << e.what() << '\n';
        return bad_parameters;
    } catch (const OuterIterationFailure& e) {
        std::cerr << e.what() << '\n';
        return consensus_failure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return failure;
    }
    return failure;
}
