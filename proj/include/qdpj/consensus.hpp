#ifndef QDPJ_CONSENSUS_HPP_
#define QDPJ_CONSENSUS_HPP_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include "qdpj/digraph.hpp"
#include "qdpj/quantize.hpp"
#include "qdpj/types.hpp"

namespace qdpj {

/// Per-node state of the finite-time quantized average consensus protocol.
struct ConsensusNodeState {
    IntVector chi;             // integer mass
    std::int64_t xi = 0;       // count; chi / xi tracks the running average
    IntVector big_m;           // window maximum of ceil(chi / xi)
    IntVector small_m;         // window minimum of floor(chi / xi)
    std::int64_t tau = 0;      // pieces left to emit in the current round, plus one
    std::vector<NodeId> targets;        // out-neighbors followed by self
    std::vector<double> probabilities;  // 1 / (1 + out_degree) per target
};

/// One atomic (mass, count = 1) fragment.
struct PieceMessage {
    IntVector payload_chi;
    std::int64_t payload_count = 1;
    NodeId sender = 0;
    NodeId receiver = 0;
    std::size_t round = 0;
};

struct ConsensusResult {
    std::vector<VectorXd> estimate;  // per node, identical across nodes
    IntVector lattice_estimate;      // common small_m at termination
    std::size_t rounds_used = 0;
    std::uint64_t pieces_sent_total = 0;
    std::uint64_t bits_estimate = 0;
};

/// Payload accounting used for bits_estimate.
inline constexpr std::uint64_t kPayloadIntegerBits = 64;
inline constexpr std::uint64_t kPieceHeaderBits = 64;

/// Round cap reached without the stopping rule firing.
class ConsensusCapExceeded : public Error {
 public:
    ConsensusCapExceeded(std::size_t rounds, std::int64_t spread);
    std::size_t rounds() const { return rounds_; }
    /// max_i ||M_i - m_i||_inf at the last completed window.
    std::int64_t spread() const { return spread_; }

 private:
    std::size_t rounds_;
    std::int64_t spread_;
};

/// Independent, reproducible random streams, one per node, derived from
/// (master seed, node id). Streams persist across protocol invocations.
class ConsensusRng {
 public:
    ConsensusRng(std::uint64_t master_seed, std::size_t node_count);

    std::mt19937_64& node(NodeId i) { return engines_.at(i); }
    std::size_t node_count() const { return engines_.size(); }

 private:
    std::vector<std::mt19937_64> engines_;
};

/// Sets xi = 2, chi = 2 * floor(phi / delta) and the uniform transmission
/// probabilities. Throws InvalidArgument on size or dimension mismatch and
/// OverflowError when the total mass could exceed 64-bit range.
std::vector<ConsensusNodeState> init_consensus(std::span<const VectorXd> inputs, const Digraph& g,
                                               const QuantizationLevel& level);

struct RoundReport {
    std::uint64_t messages_delivered = 0;
    std::vector<std::uint64_t> pieces_sent;  // per sender
};

/// Executes round t >= 1 for every node in lock step: window refresh when
/// (t - 1) mod D == 0, max/min fusion over in-neighbors, piece splitting,
/// then delivery of all pieces sent this round. When `sent` is non-null the
/// individual messages are appended to it.
RoundReport consensus_round(std::vector<ConsensusNodeState>& states, const Digraph& g, std::size_t diameter,
                            ConsensusRng& rng, std::size_t t, std::vector<PieceMessage>* sent = nullptr);

/// True iff t mod D == 0 and every node has ||M_i - m_i||_inf <= 1.
bool check_stop(std::span<const ConsensusNodeState> states, std::size_t diameter, std::size_t t);

/// Writes one CSV row per node per round:
///   round,node,chi,xi,M,m,pieces_sent
/// Vector fields are ';'-separated integers.
class TranscriptWriter {
 public:
    explicit TranscriptWriter(std::ostream& out);
    void record(std::size_t t, std::span<const ConsensusNodeState> states,
                std::span<const std::uint64_t> pieces_sent);

 private:
    std::ostream& out_;
};

struct DfqacOptions {
    std::size_t round_cap = 0;   // 0 selects 10^4 * D
    std::size_t diameter = 0;    // 0 computes it from the graph
    TranscriptWriter* transcript = nullptr;
    // Called after every completed round (after delivery).
    std::function<void(std::size_t t, std::span<const ConsensusNodeState>)> on_round;
};

/// Runs rounds until check_stop fires and returns m_i * delta at every node.
/// Throws NotStronglyConnected, ConsensusCapExceeded, OverflowError.
ConsensusResult run_dfqac(std::span<const VectorXd> inputs, const Digraph& g, const QuantizationLevel& level,
                          ConsensusRng& rng, const DfqacOptions& options = {});

}  // namespace qdpj

#endif  // QDPJ_CONSENSUS_HPP_
