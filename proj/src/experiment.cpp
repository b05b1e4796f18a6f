#include "qdpj/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>

#include "qdpj/trace_io.hpp"

#ifndef QDPJ_VERSION
#define QDPJ_VERSION "unknown"
#endif

namespace qdpj {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

template <typename Enum>
struct EnumName {
    Enum value;
    const char* name;
};

constexpr EnumName<Algorithm> kAlgorithms[] = {
    {Algorithm::qdpj, "qdpj"},
    {Algorithm::centralized_exact, "centralized_exact"},
    {Algorithm::centralized_quantized, "centralized_quantized"},
};
constexpr EnumName<PhiReading> kPhiReadings[] = {
    {PhiReading::consistent, "consistent"},
    {PhiReading::literal, "literal"},
};
constexpr EnumName<Averaging> kAveragings[] = {
    {Averaging::quantized, "quantized"},
    {Averaging::exact, "exact"},
};
constexpr EnumName<CouplingKind> kCouplings[] = {
    {CouplingKind::identity, "identity"},
    {CouplingKind::random, "random"},
};

template <typename Enum, std::size_t K>
std::string enum_name(const EnumName<Enum> (&table)[K], Enum v) {
    for (const auto& e : table)
        if (e.value == v) return e.name;
    return "?";
}

template <typename Enum, std::size_t K>
Enum enum_value(const EnumName<Enum> (&table)[K], const std::string& field, const std::string& name) {
    for (const auto& e : table)
        if (name == e.name) return e.value;
    std::string allowed;
    for (const auto& e : table) allowed += std::string(allowed.empty() ? "" : ", ") + e.name;
    throw ConfigError(field, "unknown value '" + name + "' (expected one of " + allowed + ")");
}

// Reads `key` from object `j` into `out` when present.
class Fields {
 public:
    Fields(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
        if (!j_.is_object()) throw ConfigError(prefix_.empty() ? "<root>" : prefix_, "expected an object");
    }

    std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

    const json* find(const std::string& key) {
        seen_.push_back(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    template <typename T>
    void get(const std::string& key, T& out) {
        const json* v = find(key);
        if (!v) return;
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!v->is_boolean()) throw ConfigError(path(key), "expected a boolean");
            } else if constexpr (std::is_unsigned_v<T>) {
                if (!v->is_number_unsigned()) throw ConfigError(path(key), "expected a non-negative integer");
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!v->is_number()) throw ConfigError(path(key), "expected a number");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v->is_string()) throw ConfigError(path(key), "expected a string");
            }
            out = v->get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(path(key), e.what());
        }
    }

    void reject_unknown() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end()) {
                throw ConfigError(path(it.key()), "unknown key");
            }
        }
    }

 private:
    const json& j_;
    std::string prefix_;
    std::vector<std::string> seen_;
};

QuantizationLevel level_from_json(const json& v, const std::string& field) {
    try {
        if (v.is_string()) return QuantizationLevel::parse(v.get<std::string>());
        if (v.is_number()) {
            // Shortest round-trip text of the double, e.g. 0.001.
            return QuantizationLevel::parse(json(v.get<double>()).dump());
        }
    } catch (const InvalidArgument& e) {
        throw ConfigError(field, e.what());
    }
    throw ConfigError(field, "expected a quantization level such as \"1e-3\"");
}

json instance_to_json(const InstanceSpec& s) {
    json b = json::array();
    for (Eigen::Index k = 0; k < s.b.size(); ++k) b.push_back(s.b[k]);
    return json{{"n_nodes", s.n_nodes},
                {"local_dim", s.local_dim},
                {"data_rows", s.data_rows},
                {"coupling", enum_name(kCouplings, s.coupling)},
                {"coupling_rows", s.coupling_rows},
                {"b", b},
                {"seed", s.seed}};
}

void instance_from_json(const json& j, InstanceSpec& s) {
    Fields f(j, "instance");
    f.get("n_nodes", s.n_nodes);
    f.get("local_dim", s.local_dim);
    f.get("data_rows", s.data_rows);
    std::string coupling = enum_name(kCouplings, s.coupling);
    f.get("coupling", coupling);
    s.coupling = enum_value(kCouplings, "instance.coupling", coupling);
    f.get("coupling_rows", s.coupling_rows);
    if (const json* b = f.find("b")) {
        if (!b->is_array()) throw ConfigError("instance.b", "expected an array of numbers");
        s.b.resize(static_cast<Eigen::Index>(b->size()));
        for (std::size_t k = 0; k < b->size(); ++k) {
            if (!(*b)[k].is_number()) throw ConfigError("instance.b", "expected an array of numbers");
            s.b[static_cast<Eigen::Index>(k)] = (*b)[k].get<double>();
        }
    }
    f.get("seed", s.seed);
    f.reject_unknown();
}

json admm_to_json(const AdmmConfig& c) {
    return json{{"rho", c.rho},
                {"gamma", c.gamma},
                {"level", c.level.to_string()},
                {"max_outer_iterations", c.max_outer_iterations},
                {"consensus_round_cap", c.consensus_round_cap},
                {"master_seed", c.master_seed},
                {"phi_reading", enum_name(kPhiReadings, c.phi_reading)},
                {"averaging", enum_name(kAveragings, c.averaging)},
                {"init_dhat_by_consensus", c.init_dhat_by_consensus},
                {"allow_invalid_parameters", c.allow_invalid_parameters},
                {"record_wallclock", c.record_wallclock}};
}

void admm_from_json(const json& j, AdmmConfig& c) {
    Fields f(j, "admm");
    f.get("rho", c.rho);
    f.get("gamma", c.gamma);
    if (const json* v = f.find("level")) c.level = level_from_json(*v, "admm.level");
    f.get("max_outer_iterations", c.max_outer_iterations);
    f.get("consensus_round_cap", c.consensus_round_cap);
    f.get("master_seed", c.master_seed);
    std::string phi = enum_name(kPhiReadings, c.phi_reading);
    f.get("phi_reading", phi);
    c.phi_reading = enum_value(kPhiReadings, "admm.phi_reading", phi);
    std::string avg = enum_name(kAveragings, c.averaging);
    f.get("averaging", avg);
    c.averaging = enum_value(kAveragings, "admm.averaging", avg);
    f.get("init_dhat_by_consensus", c.init_dhat_by_consensus);
    f.get("allow_invalid_parameters", c.allow_invalid_parameters);
    f.get("record_wallclock", c.record_wallclock);
    f.reject_unknown();
}

bool same_admm(const AdmmConfig& a, const AdmmConfig& b) {
    return a.rho == b.rho && a.gamma == b.gamma && a.level == b.level &&
           a.max_outer_iterations == b.max_outer_iterations && a.consensus_round_cap == b.consensus_round_cap &&
           a.master_seed == b.master_seed && a.phi_reading == b.phi_reading && a.averaging == b.averaging &&
           a.init_dhat_by_consensus == b.init_dhat_by_consensus &&
           a.allow_invalid_parameters == b.allow_invalid_parameters && a.record_wallclock == b.record_wallclock;
}

std::vector<QuantizationLevel> effective_sweep(const ExperimentConfig& config) {
    if (config.delta_sweep.empty()) return {config.admm.level};
    return config.delta_sweep;
}

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

void write_trace_file(const fs::path& path, const std::vector<IterationTrace>& trace) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    write_trace_csv(out, trace);
    if (!out) throw Error("write failed for " + path.string());
}

json level_array(const std::vector<QuantizationLevel>& levels) {
    json a = json::array();
    for (const auto& l : levels) a.push_back(l.to_string());
    return a;
}

}  // namespace

ConfigError::ConfigError(std::string field, const std::string& what)
    : InvalidArgument(field + ": " + what), field_(std::move(field)) {}

std::string to_string(Algorithm a) { return enum_name(kAlgorithms, a); }

Algorithm parse_algorithm(const std::string& name) { return enum_value(kAlgorithms, "algorithm", name); }

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
    return a.instance == b.instance && a.graph == b.graph && same_admm(a.admm, b.admm) &&
           a.random_lambda_init == b.random_lambda_init && a.algorithm == b.algorithm &&
           a.delta_sweep == b.delta_sweep && a.output_dir == b.output_dir;
}

ExperimentConfig desk_experiment() {
    ExperimentConfig c;
    c.instance = desk_instance_spec(1);
    c.graph = GraphSpec{c.instance.n_nodes, 0.1, 2};
    return c;
}

ExperimentConfig full_experiment() {
    ExperimentConfig c;
    c.instance = full_instance_spec(1);
    c.graph = GraphSpec{c.instance.n_nodes, 0.1, 2};
    c.admm.rho = 0.01;
    c.admm.gamma = 1.0;
    c.admm.max_outer_iterations = 1000;
    c.delta_sweep = {QuantizationLevel(1, 1000), QuantizationLevel(1, 10000), QuantizationLevel(1, 100000),
                     QuantizationLevel(1, 1000000)};
    c.admm.level = c.delta_sweep.front();
    return c;
}

json to_json(const ExperimentConfig& c) {
    return json{{"instance", instance_to_json(c.instance)},
                {"graph", {{"n", c.graph.n}, {"density", c.graph.density}, {"seed", c.graph.seed}}},
                {"admm", admm_to_json(c.admm)},
                {"random_lambda_init", c.random_lambda_init},
                {"algorithm", to_string(c.algorithm)},
                {"delta_sweep", level_array(c.delta_sweep)},
                {"output_dir", c.output_dir}};
}

ExperimentConfig config_from_json(const json& j) {
    Fields f(j, "");
    std::string preset = "desk";
    f.get("preset", preset);
    ExperimentConfig c;
    if (preset == "desk") {
        c = desk_experiment();
    } else if (preset == "full") {
        c = full_experiment();
    } else {
        throw ConfigError("preset", "unknown preset '" + preset + "' (expected desk or full)");
    }
    if (const json* v = f.find("instance")) instance_from_json(*v, c.instance);
    c.graph.n = c.instance.n_nodes;
    if (const json* v = f.find("graph")) {
        Fields g(*v, "graph");
        g.get("n", c.graph.n);
        g.get("density", c.graph.density);
        g.get("seed", c.graph.seed);
        g.reject_unknown();
    }
    if (const json* v = f.find("admm")) admm_from_json(*v, c.admm);
    f.get("random_lambda_init", c.random_lambda_init);
    std::string algorithm = to_string(c.algorithm);
    f.get("algorithm", algorithm);
    c.algorithm = parse_algorithm(algorithm);
    if (const json* v = f.find("delta_sweep")) {
        if (!v->is_array()) throw ConfigError("delta_sweep", "expected an array");
        c.delta_sweep.clear();
        for (const auto& e : *v) c.delta_sweep.push_back(level_from_json(e, "delta_sweep"));
    }
    f.get("output_dir", c.output_dir);
    f.reject_unknown();
    return c;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("--config", "cannot open " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("--config", std::string("parse error: ") + e.what());
    }
    return config_from_json(j);
}

void validate_config(const ExperimentConfig& c) {
    const auto& s = c.instance;
    if (s.n_nodes == 0) throw ConfigError("instance.n_nodes", "must be positive");
    if (s.local_dim == 0) throw ConfigError("instance.local_dim", "must be positive");
    if (s.data_rows == 0) throw ConfigError("instance.data_rows", "must be positive");
    if (s.coupling == CouplingKind::random && s.coupling_rows == 0) {
        throw ConfigError("instance.coupling_rows", "must be positive for random couplings");
    }
    if (s.b.size() != 0 && static_cast<std::size_t>(s.b.size()) != s.constraint_dim()) {
        throw ConfigError("instance.b", "length must equal the constraint dimension " +
                                            std::to_string(s.constraint_dim()));
    }
    if (c.graph.n != s.n_nodes) throw ConfigError("graph.n", "must equal instance.n_nodes");
    if (!(c.graph.density > 0.0 && c.graph.density <= 1.0)) throw ConfigError("graph.density", "must lie in (0, 1]");
    if (!(c.admm.rho > 0.0) || !std::isfinite(c.admm.rho)) throw ConfigError("admm.rho", "must be positive");
    if (!(c.admm.gamma > 0.0 && c.admm.gamma < 2.0)) throw ConfigError("admm.gamma", "must lie in (0, 2)");
    if (c.admm.max_outer_iterations == 0) throw ConfigError("admm.max_outer_iterations", "must be at least 1");
}

fs::path resolve_output_dir(const ExperimentConfig& config, const std::optional<std::string>& override_dir) {
    if (override_dir && !override_dir->empty()) return *override_dir;
    if (!config.output_dir.empty()) return config.output_dir;
    if (const char* env = std::getenv("QDPJ_OUTPUT_DIR"); env && *env) return env;
    return "qdpj_out";
}

std::string trace_file_name(Algorithm algorithm, const QuantizationLevel& level) {
    if (algorithm == Algorithm::centralized_exact) return "centralized_exact.csv";
    std::string text = level.to_string();
    std::replace(text.begin(), text.end(), '/', '_');
    return to_string(algorithm) + "_delta_" + text + ".csv";
}

ParameterReport check_experiment_parameters(const ExperimentConfig& config) {
    validate_config(config);
    const Instance inst = generate(config.instance, config.admm.rho, config.admm.gamma);
    return validate_parameters(config.admm, inst.problems, inst.problems.size());
}

void print_parameter_report(std::ostream& out, const ParameterReport& report) {
    out << "node  theta              lambda_min(P)      margin             status\n";
    char buf[160];
    for (const auto& n : report.nodes) {
        std::snprintf(buf, sizeof(buf), "%-5zu %-18.10g %-18.10g %-18.6e %s\n", n.node + 1, n.theta,
                      n.prox_min_eigenvalue, n.margin, n.pass ? "ok" : "FAIL");
        out << buf;
    }
    out << (report.all_pass() ? "all nodes satisfy the proximal condition\n"
                              : std::to_string(report.failing_nodes().size()) + " node(s) violate the proximal condition\n");
}

ExperimentOutputs run_experiment(const ExperimentConfig& config, const std::vector<Algorithm>& algorithms,
                                 const fs::path& out_dir) {
    validate_config(config);
    const Instance inst = generate(config.instance, config.admm.rho, config.admm.gamma);
    const auto m = static_cast<Eigen::Index>(config.instance.constraint_dim());
    const Saddle saddle = kkt_oracle<double>(inst.problems, inst.b);

    const bool needs_graph =
        std::find(algorithms.begin(), algorithms.end(), Algorithm::qdpj) != algorithms.end();
    std::optional<Digraph> graph;
    std::size_t d = 0;
    if (needs_graph) {
        graph = random_strongly_connected(config.graph.n, config.graph.density, config.graph.seed);
        d = diameter(*graph);
    }

    InitOptions init_opts;
    init_opts.random_lambda = config.random_lambda_init;
    init_opts.seed = config.admm.master_seed;
    const auto init = make_initial_variables(inst.problems, m, init_opts);

    fs::create_directories(out_dir);
    ExperimentOutputs outputs;
    json runs = json::array();
    RunOptions options;
    options.saddle = &saddle;
    options.diameter = d;

    auto record = [&](Algorithm a, const std::optional<QuantizationLevel>& level, const AdmmRun& run) {
        const fs::path path = out_dir / trace_file_name(a, level.value_or(config.admm.level));
        write_trace_file(path, run.trace);
        outputs.traces.push_back(path);
        const auto& last = run.trace.back();
        json r{{"algorithm", to_string(a)},
               {"file", path.filename().string()},
               {"iterations", run.trace.size() - 1},
               {"final_residual_norm", last.residual_norm}};
        r["delta"] = level ? json(level->to_string()) : json(nullptr);
        r["final_l1_error"] = last.l1_error ? json(*last.l1_error) : json(nullptr);
        runs.push_back(std::move(r));
    };

    for (const Algorithm a : algorithms) {
        if (a == Algorithm::centralized_exact) {
            AdmmRun run = centralized_pj_admm_run(inst.problems, inst.b, config.admm, init, CommMode::exact, options);
            record(a, std::nullopt, run);
            continue;
        }
        for (const auto& level : effective_sweep(config)) {
            AdmmConfig admm = config.admm;
            admm.level = level;
            AdmmRun run = a == Algorithm::qdpj
                              ? qdpj_admm_run(inst.problems, *graph, inst.b, admm, init, options)
                              : centralized_pj_admm_run(inst.problems, inst.b, admm, init, CommMode::quantized, options);
            record(a, level, run);
        }
    }

    json meta;
    meta["version"] = version_string();
    meta["config"] = to_json(config);
    meta["algorithms"] = json::array();
    for (const Algorithm a : algorithms) meta["algorithms"].push_back(to_string(a));
    meta["seeds"] = {{"instance", config.instance.seed},
                     {"graph", config.graph.seed},
                     {"master", config.admm.master_seed}};
    meta["data_law"] = "standard_normal";
    if (graph) {
        meta["graph"] = {{"nodes", graph->node_count()},
                         {"edges", graph->edge_count()},
                         {"density", config.graph.density},
                         {"diameter", d}};
    }
    meta["oracle"] = {{"nu_residual", saddle.nu_residual},
                      {"coupling_residual_norm",
                       [&] {
                           std::vector<VectorXd> xs(saddle.x_star.begin(), saddle.x_star.end());
                           return coupling_residual<double>(xs, inst.problems, inst.b).norm();
                       }()}};
    meta["runs"] = std::move(runs);
    outputs.metadata = out_dir / "metadata.json";
    write_json_file(outputs.metadata, meta);
    return outputs;
}

std::vector<TraceSummary> compare_traces(const std::vector<fs::path>& paths) {
    if (paths.empty()) throw InvalidArgument("compare: no trace files given");
    std::vector<TraceSummary> out;
    std::optional<std::size_t> axis;
    for (const auto& path : paths) {
        std::ifstream in(path);
        if (!in) throw InvalidArgument("compare: cannot open " + path.string());
        std::vector<IterationTrace> rows;
        try {
            rows = read_trace_csv(in);
        } catch (const InvalidArgument& e) {
            throw InvalidArgument(path.string() + ": " + e.what());
        }
        if (rows.empty()) throw InvalidArgument(path.string() + ": trace has no rows");
        if (axis && *axis != rows.size()) {
            throw InvalidArgument(path.string() + ": iteration axis differs from " + paths.front().string());
        }
        axis = rows.size();
        TraceSummary s;
        s.path = path.string();
        s.rows = rows.size();
        const std::string stem = path.stem().string();
        const auto pos = stem.find("_delta_");
        if (pos != std::string::npos) {
            s.algorithm = stem.substr(0, pos);
            std::string text = stem.substr(pos + 7);
            std::replace(text.begin(), text.end(), '_', '/');
            try {
                s.delta = QuantizationLevel::parse(text).value();
            } catch (const InvalidArgument&) {
            }
        } else {
            s.algorithm = stem;
        }
        for (const auto& r : rows) {
            if (!r.l1_error) throw InvalidArgument(path.string() + ": l1_error column is empty");
        }
        s.final_l1 = *rows.back().l1_error;
        const std::size_t tail = std::min<std::size_t>(100, rows.size());
        double sum = 0.0;
        for (std::size_t k = rows.size() - tail; k < rows.size(); ++k) sum += *rows[k].l1_error;
        s.floor_l1 = sum / static_cast<double>(tail);
        s.settle_iteration = rows.back().k;
        for (const auto& r : rows) {
            if (*r.l1_error <= 2.0 * s.floor_l1) {
                s.settle_iteration = r.k;
                break;
            }
        }
        double rounds = 0.0;
        for (std::size_t k = 1; k < rows.size(); ++k) {
            rounds += static_cast<double>(rows[k].consensus_rounds);
            s.total_pieces += rows[k].pieces_sent;
        }
        s.total_pieces += rows.front().pieces_sent;
        s.mean_consensus_rounds = rows.size() > 1 ? rounds / static_cast<double>(rows.size() - 1) : 0.0;
        out.push_back(std::move(s));
    }

    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (out[i].delta) groups[out[i].algorithm].push_back(i);
    for (const auto& [name, idx] : groups) {
        if (idx.size() < 2) continue;
        for (const std::size_t i : idx) {
            bool ok = true;
            for (const std::size_t j : idx) {
                if (*out[j].delta < *out[i].delta && !(out[j].floor_l1 < out[i].floor_l1)) ok = false;
                if (*out[j].delta > *out[i].delta && !(out[j].floor_l1 > out[i].floor_l1)) ok = false;
            }
            out[i].expected_ordering = ok;
        }
    }
    return out;
}

void print_trace_summaries(std::ostream& out, const std::vector<TraceSummary>& rows) {
    out << "trace                                    delta      final_l1       floor_l1       settle_k  "
           "rounds/iter  pieces          ordering\n";
    char buf[320];
    for (const auto& s : rows) {
        const std::string name = fs::path(s.path).filename().string();
        char delta[32] = "-";
        if (s.delta) std::snprintf(delta, sizeof(delta), "%.3g", *s.delta);
        const char* ordering = !s.expected_ordering ? "-" : (*s.expected_ordering ? "expected" : "UNEXPECTED");
        std::snprintf(buf, sizeof(buf), "%-40s %-10s %-14.6e %-14.6e %-9zu %-12.2f %-15llu %s\n", name.c_str(),
                      delta, s.final_l1, s.floor_l1, s.settle_iteration, s.mean_consensus_rounds,
                      static_cast<unsigned long long>(s.total_pieces), ordering);
        out << buf;
    }
}

std::string version_string() { return QDPJ_VERSION; }

}  // namespace qdpj
