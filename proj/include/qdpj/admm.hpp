#ifndef QDPJ_ADMM_HPP_
#define QDPJ_ADMM_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qdpj/consensus.hpp"
#include "qdpj/digraph.hpp"
#include "qdpj/local_solver.hpp"
#include "qdpj/metrics.hpp"
#include "qdpj/quantize.hpp"

namespace qdpj {

using Problem = LocalProblem<double>;
using Variables = NodeVariables<double>;
using Saddle = SaddlePoint<double>;

/// How each node forms its consensus input from A_i x_i.
enum class PhiReading {
    consistent,  // phi_i = N A_i x_i - b, averages to sum_i A_i x_i - b
    literal,     // phi_i = N (A_i x_i - b), averages to sum_i A_i x_i - N b
};

/// How the residual estimate d_hat is produced in the distributed run.
enum class Averaging {
    quantized,  // finite-time quantized consensus over the digraph
    exact,      // exact network average (the zero-quantization limit)
};

enum class CommMode { exact, quantized };

struct AdmmConfig {
    double rho = 0.01;
    double gamma = 1.0;
    QuantizationLevel level{1, 1000};
    std::size_t max_outer_iterations = 1000;
    std::size_t consensus_round_cap = 0;  // 0 selects 10^4 * D
    std::uint64_t master_seed = 1;
    PhiReading phi_reading = PhiReading::consistent;
    Averaging averaging = Averaging::quantized;
    bool init_dhat_by_consensus = true;
    bool allow_invalid_parameters = false;
    bool record_wallclock = false;
};

/// Throws InvalidArgument unless rho > 0, 0 < gamma < 2 and K >= 1.
void check_config(const AdmmConfig& config);

struct NodeThreshold {
    NodeId node = 0;
    double theta = 0.0;               // rho (N / (2 - gamma) - 1) ||A_i||^2
    double prox_min_eigenvalue = 0.0;
    double margin = 0.0;              // lambda_min(P_i) - theta
    bool pass = false;
};

struct ParameterReport {
    std::vector<NodeThreshold> nodes;
    bool all_pass() const;
    std::vector<NodeId> failing_nodes() const;
};

class ParameterViolation : public Error {
 public:
    explicit ParameterViolation(std::vector<NodeId> nodes);
    const std::vector<NodeId>& nodes() const { return nodes_; }

 private:
    std::vector<NodeId> nodes_;
};

/// Checks P_i - theta_i I > 0 for every node. Throws InvalidArgument for an
/// invalid config; violations are reported, not thrown.
ParameterReport validate_parameters(const AdmmConfig& config, std::span<const Problem> problems, std::size_t n_nodes);

/// Throws ParameterViolation listing the failing nodes.
void require_valid(const ParameterReport& report);

/// One row per outer iteration; row 0 is the initial point.
struct IterationTrace {
    std::size_t k = 0;
    double residual_norm = 0.0;   // ||sum_i A_i x_i - b||
    std::optional<double> lagrangian_gap;  // L(x, lambda*) - L(x*, lambda*)
    std::optional<double> l1_error;        // sum_i ||x_i - x_i*||_1
    std::size_t consensus_rounds = 0;
    std::optional<double> merit;
    double wallclock_ms = 0.0;
    std::uint64_t pieces_sent = 0;
    std::uint64_t bits_estimate = 0;
};

struct IterationSnapshot {
    std::size_t k;
    std::span<const Variables> variables;
    const VectorXd& residual;  // exact sum_i A_i x_i - b
};

struct RunOptions {
    const Saddle* saddle = nullptr;  // computed with kkt_oracle when null
    std::size_t diameter = 0;        // computed from the graph when 0
    std::function<void(const IterationSnapshot&)> observer;
};

struct AdmmRun {
    std::vector<Variables> variables;
    std::vector<IterationTrace> trace;
    std::optional<Saddle> saddle;
};

struct InitOptions {
    bool random_lambda = false;  // per-node random lambda_hat, else zero
    bool random_dhat = false;    // random d_hat, else zero
    std::uint64_t seed = 0;
};

/// Zero x for every node plus lambda_hat / d_hat per `options`.
std::vector<Variables> make_initial_variables(std::span<const Problem> problems, Eigen::Index constraint_dim,
                                              const InitOptions& options = {});

/// Distributed proximal Jacobian ADMM with quantized residual consensus.
/// Throws ParameterViolation, NotStronglyConnected, ConsensusCapExceeded
/// (message names the outer iteration).
AdmmRun qdpj_admm_run(std::span<const Problem> problems, const Digraph& g, const VectorXd& b,
                      const AdmmConfig& config, std::vector<Variables> init, const RunOptions& options = {});

/// Proximal Jacobian ADMM with a central aggregator. In quantized mode each
/// uploaded x_i and the broadcast multiplier are passed through the floor
/// quantizer before use.
AdmmRun centralized_pj_admm_run(std::span<const Problem> problems, const VectorXd& b, const AdmmConfig& config,
                                std::vector<Variables> init, CommMode mode, const RunOptions& options = {});

/// Consensus failure inside an outer iteration.
class OuterIterationFailure : public Error {
 public:
    OuterIterationFailure(std::size_t k, const std::string& what);
    std::size_t iteration() const { return k_; }

 private:
    std::size_t k_;
};

}  // namespace qdpj

#endif  // QDPJ_ADMM_HPP_
