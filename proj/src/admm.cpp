#include "qdpj/admm.hpp"

#include <chrono>
#include <random>
#include <sstream>

namespace qdpj {

namespace {

using Clock = std::chrono::steady_clock;

class Stopwatch {
 public:
    explicit Stopwatch(bool enabled) : enabled_(enabled), start_(Clock::now()) {}
    double elapsed_ms() const {
        return enabled_ ? std::chrono::duration<double, std::milli>(Clock::now() - start_).count() : 0.0;
    }

 private:
    bool enabled_;
    Clock::time_point start_;
};

void check_problems(std::span<const Problem> problems, const VectorXd& b) {
    if (problems.empty()) {
        throw InvalidArgument("admm: no nodes");
    }
    for (const auto& p : problems) {
        p.check_dimensions();
        if (p.constraint_dim() != b.size()) {
            throw InvalidArgument("admm: coupling row count differs from b");
        }
    }
}

void check_init(std::span<const Problem> problems, std::span<const Variables> init, Eigen::Index m) {
    if (init.size() != problems.size()) {
        throw InvalidArgument("admm: one initial variable set per node expected");
    }
    for (std::size_t i = 0; i < init.size(); ++i) {
        if (init[i].x.size() != problems[i].dimension() || init[i].lambda_hat.size() != m ||
            init[i].d_hat.size() != m) {
            throw InvalidArgument("admm: initial variables have the wrong dimensions for node " + std::to_string(i));
        }
    }
}

std::optional<Saddle> resolve_saddle(std::span<const Problem> problems, const VectorXd& b,
                                     const RunOptions& options) {
    if (options.saddle != nullptr) {
        return *options.saddle;
    }
    try {
        return kkt_oracle<double>(problems, b);
    } catch (const SingularSystem&) {
        return std::nullopt;  // gap metrics are omitted
    }
}

// Metrics shared by both orchestrators. `lambda_for_metrics` holds the
// multiplier copies entering the Lyapunov term.
IterationTrace measure(std::size_t k, std::span<const Problem> problems, const VectorXd& b,
                       std::span<const VectorXd> x, std::span<const VectorXd> lambda_for_metrics,
                       const std::optional<Saddle>& saddle, const AdmmConfig& config, VectorXd& residual) {
    IterationTrace row;
    row.k = k;
    residual = coupling_residual<double>(x, problems, b);
    row.residual_norm = residual.norm();
    if (saddle) {
        const double l_star = lagrangian<double>(saddle->x_star, saddle->lambda_star, problems, b);
        row.lagrangian_gap = lagrangian<double>(x, saddle->lambda_star, problems, b) - l_star;
        row.l1_error = l1_error<double>(x, *saddle);
        row.merit = merit<double>(x, lambda_for_metrics, *saddle, problems, config.rho, config.gamma);
    }
    return row;
}

std::vector<VectorXd> collect_x(std::span<const Variables> vars) {
    std::vector<VectorXd> x;
    x.reserve(vars.size());
    for (const auto& v : vars) x.push_back(v.x);
    return x;
}

std::vector<VectorXd> collect_lambda(std::span<const Variables> vars) {
    std::vector<VectorXd> l;
    l.reserve(vars.size());
    for (const auto& v : vars) l.push_back(v.lambda_hat);
    return l;
}

std::vector<ProxSolver<double>> make_solvers(std::span<const Problem> problems, double rho) {
    std::vector<ProxSolver<double>> solvers;
    solvers.reserve(problems.size());
    for (const auto& p : problems) {
        solvers.emplace_back(p, rho);
    }
    return solvers;
}

void gate_parameters(const AdmmConfig& config, std::span<const Problem> problems) {
    const ParameterReport report = validate_parameters(config, problems, problems.size());
    if (!config.allow_invalid_parameters) {
        require_valid(report);
    }
}

}  // namespace

void check_config(const AdmmConfig& config) {
    if (!(config.rho > 0.0)) {
        throw InvalidArgument("config: rho must be positive");
    }
    if (!(config.gamma > 0.0 && config.gamma < 2.0)) {
        throw InvalidArgument("config: gamma must lie in the open interval (0, 2)");
    }
    if (config.max_outer_iterations < 1) {
        throw InvalidArgument("config: max_outer_iterations must be at least 1");
    }
}

bool ParameterReport::all_pass() const {
    return std::all_of(nodes.begin(), nodes.end(), [](const NodeThreshold& t) { return t.pass; });
}

std::vector<NodeId> ParameterReport::failing_nodes() const {
    std::vector<NodeId> out;
    for (const auto& t : nodes) {
        if (!t.pass) out.push_back(t.node);
    }
    return out;
}

ParameterViolation::ParameterViolation(std::vector<NodeId> nodes)
    : Error([&] {
          std::ostringstream msg;
          msg << "proximal weight condition violated at node(s):";
          for (NodeId n : nodes) msg << ' ' << (n + 1);
          return msg.str();
      }()),
      nodes_(std::move(nodes)) {}

OuterIterationFailure::OuterIterationFailure(std::size_t k, const std::string& what)
    : Error("outer iteration " + std::to_string(k) + ": " + what), k_(k) {}

ParameterReport validate_parameters(const AdmmConfig& config, std::span<const Problem> problems,
                                    std::size_t n_nodes) {
    check_config(config);
    const double factor = config.rho * (static_cast<double>(n_nodes) / (2.0 - config.gamma) - 1.0);
    ParameterReport report;
    for (std::size_t i = 0; i < problems.size(); ++i) {
        const double a_norm = spectral_norm<double>(problems[i].coupling);
        NodeThreshold t;
        t.node = i;
        t.theta = factor * a_norm * a_norm;
        t.prox_min_eigenvalue = problems[i].prox_weight.min_eigenvalue();
        t.margin = t.prox_min_eigenvalue - t.theta;
        t.pass = t.margin > 0.0;
        report.nodes.push_back(t);
    }
    return report;
}

void require_valid(const ParameterReport& report) {
    if (!report.all_pass()) {
        throw ParameterViolation(report.failing_nodes());
    }
}

std::vector<Variables> make_initial_variables(std::span<const Problem> problems, Eigen::Index constraint_dim,
                                              const InitOptions& options) {
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal;
    auto random_vector = [&](Eigen::Index n) {
        VectorXd v(n);
        for (Eigen::Index j = 0; j < n; ++j) v[j] = normal(rng);
        return v;
    };
    std::vector<Variables> vars;
    vars.reserve(problems.size());
    for (const auto& p : problems) {
        Variables v;
        v.x = VectorXd::Zero(p.dimension());
        v.lambda_hat = options.random_lambda ? random_vector(constraint_dim) : VectorXd::Zero(constraint_dim);
        v.d_hat = options.random_dhat ? random_vector(constraint_dim) : VectorXd::Zero(constraint_dim);
        vars.push_back(std::move(v));
    }
    return vars;
}

AdmmRun qdpj_admm_run(std::span<const Problem> problems, const Digraph& g, const VectorXd& b,
                      const AdmmConfig& config, std::vector<Variables> init, const RunOptions& options) {
    check_config(config);
    check_problems(problems, b);
    const std::size_t n = problems.size();
    if (g.node_count() != n) {
        throw InvalidArgument("qdpj: graph size differs from the number of problems");
    }
    const Eigen::Index m = b.size();
    check_init(problems, init, m);
    gate_parameters(config, problems);
    const std::size_t diam = options.diameter != 0 ? options.diameter : diameter(g);
    if (options.diameter != 0 && !is_strongly_connected(g)) {
        throw NotStronglyConnected("qdpj: communication graph is not strongly connected");
    }

    const Stopwatch clock(config.record_wallclock);
    const auto solvers = make_solvers(problems, config.rho);
    ConsensusRng rng(config.master_seed, n);
    DfqacOptions dfqac;
    dfqac.diameter = diam;
    dfqac.round_cap = config.consensus_round_cap;

    AdmmRun run;
    run.saddle = resolve_saddle(problems, b, options);
    run.variables = std::move(init);
    auto& vars = run.variables;

    const double big_n = static_cast<double>(n);
    std::vector<VectorXd> phi(n);

    struct ResidualEstimate {
        std::size_t rounds = 0;
        std::uint64_t pieces = 0;
        std::uint64_t bits = 0;
    };
    // Forms phi_i from the current x_i and writes the estimate into every d_hat_i.
    auto estimate_residual = [&](std::size_t k) {
        for (std::size_t i = 0; i < n; ++i) {
            const VectorXd ax = problems[i].coupling * vars[i].x;
            phi[i] = config.phi_reading == PhiReading::consistent ? VectorXd(big_n * ax - b)
                                                                  : VectorXd(big_n * (ax - b));
        }
        ResidualEstimate est;
        if (config.averaging == Averaging::exact) {
            VectorXd mean = VectorXd::Zero(m);
            for (const auto& p : phi) mean += p;
            mean /= big_n;
            for (auto& v : vars) v.d_hat = mean;
            return est;
        }
        try {
            ConsensusResult res = run_dfqac(phi, g, config.level, rng, dfqac);
            for (std::size_t i = 0; i < n; ++i) {
                vars[i].d_hat = std::move(res.estimate[i]);
            }
            est.rounds = res.rounds_used;
            est.pieces = res.pieces_sent_total;
            est.bits = res.bits_estimate;
        } catch (const ConsensusCapExceeded& e) {
            throw OuterIterationFailure(k, e.what());
        }
        return est;
    };

    VectorXd residual;
    auto record = [&](std::size_t k, const ResidualEstimate& est) {
        const auto x = collect_x(vars);
        const auto lambda = collect_lambda(vars);
        IterationTrace row = measure(k, problems, b, x, lambda, run.saddle, config, residual);
        row.consensus_rounds = est.rounds;
        row.pieces_sent = est.pieces;
        row.bits_estimate = est.bits;
        row.wallclock_ms = clock.elapsed_ms();
        run.trace.push_back(row);
        if (options.observer) {
            options.observer(IterationSnapshot{k, vars, residual});
        }
    };

    ResidualEstimate init_est;
    if (config.init_dhat_by_consensus) {
        init_est = estimate_residual(0);
    }
    record(0, init_est);

    std::vector<VectorXd> next_x(n);
    for (std::size_t k = 1; k <= config.max_outer_iterations; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            next_x[i] = solvers[i].solve(vars[i].x, vars[i].d_hat, vars[i].lambda_hat);
        }
        for (std::size_t i = 0; i < n; ++i) {
            vars[i].x = std::move(next_x[i]);
        }
        const ResidualEstimate est = estimate_residual(k);
        for (auto& v : vars) {
            v.lambda_hat += config.gamma * config.rho * v.d_hat;
        }
        record(k, est);
    }
    return run;
}

AdmmRun centralized_pj_admm_run(std::span<const Problem> problems, const VectorXd& b, const AdmmConfig& config,
                                std::vector<Variables> init, CommMode mode, const RunOptions& options) {
    check_config(config);
    check_problems(problems, b);
    const std::size_t n = problems.size();
    const Eigen::Index m = b.size();
    check_init(problems, init, m);
    gate_parameters(config, problems);

    const Stopwatch clock(config.record_wallclock);
    const auto solvers = make_solvers(problems, config.rho);
    const bool quantized = mode == CommMode::quantized;
    auto transmit = [&](const VectorXd& v) { return quantized ? quantize_to_lattice(v, config.level) : v; };

    AdmmRun run;
    run.saddle = resolve_saddle(problems, b, options);
    run.variables = std::move(init);
    auto& vars = run.variables;

    // The aggregator keeps the exact multiplier; nodes see its transmitted copy.
    VectorXd lambda = vars.front().lambda_hat;
    std::vector<VectorXd> sent_x(n);
    VectorXd sent_residual;  // sum_j A_j x~_j - b as seen by the aggregator

    std::uint64_t message_bits = 0;
    for (const auto& p : problems) {
        message_bits += static_cast<std::uint64_t>(p.dimension() + m) * kPayloadIntegerBits;
    }
    auto upload = [&] {
        for (std::size_t i = 0; i < n; ++i) sent_x[i] = transmit(vars[i].x);
        sent_residual = coupling_residual<double>(sent_x, problems, b);
    };
    auto broadcast = [&] {
        const VectorXd lambda_sent = transmit(lambda);
        for (std::size_t i = 0; i < n; ++i) {
            vars[i].lambda_hat = lambda_sent;
            // A_i x_i + sum_{j != i} A_j x~_j - b with the node's own exact x_i.
            vars[i].d_hat = sent_residual + problems[i].coupling * (vars[i].x - sent_x[i]);
        }
    };

    VectorXd residual;
    auto record = [&](std::size_t k) {
        const auto x = collect_x(vars);
        const std::vector<VectorXd> lambda_copy{lambda};
        IterationTrace row = measure(k, problems, b, x, lambda_copy, run.saddle, config, residual);
        row.wallclock_ms = clock.elapsed_ms();
        if (k > 0) {
            row.pieces_sent = 2 * n;
            row.bits_estimate = message_bits;
        }
        run.trace.push_back(row);
        if (options.observer) {
            options.observer(IterationSnapshot{k, vars, residual});
        }
    };

    upload();
    broadcast();
    record(0);

    std::vector<VectorXd> next_x(n);
    for (std::size_t k = 1; k <= config.max_outer_iterations; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            next_x[i] = solvers[i].solve(vars[i].x, vars[i].d_hat, vars[i].lambda_hat);
        }
        for (std::size_t i = 0; i < n; ++i) {
            vars[i].x = std::move(next_x[i]);
        }
        upload();
        lambda += config.gamma * config.rho * sent_residual;
        broadcast();
        record(k);
    }
    return run;
}

}  // namespace qdpj
