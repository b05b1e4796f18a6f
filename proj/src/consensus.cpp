#include "qdpj/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

namespace qdpj {

namespace {

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    // b > 0 throughout the protocol.
    std::int64_t q = a / b;
    if (a % b != 0 && a < 0) {
        --q;
    }
    return q;
}

// Exact below 2^52 in magnitude; the double quotient is off by at most one.
constexpr std::int64_t kFastDivLimit = std::int64_t{1} << 52;

void floor_ratio_into(const Eigen::Ref<const IntVector>& chi, std::int64_t xi, IntVector& out) {
    const double inv = 1.0 / static_cast<double>(xi);
    for (Eigen::Index j = 0; j < chi.size(); ++j) {
        const std::int64_t a = chi[j];
        if (a >= kFastDivLimit || a <= -kFastDivLimit) {
            out[j] = floor_div(a, xi);
            continue;
        }
        std::int64_t q = static_cast<std::int64_t>(std::floor(static_cast<double>(a) * inv));
        const std::int64_t r = a - q * xi;
        q -= (r < 0);
        q += (r >= xi);
        out[j] = q;
    }
}

void ceil_ratio_into(const IntVector& chi, std::int64_t xi, IntVector& out) {
    floor_ratio_into(-chi, xi, out);
    out = -out;
}

void checked_accumulate(Eigen::Ref<IntVector> target, const Eigen::Ref<const IntVector>& add) {
    for (Eigen::Index j = 0; j < add.size(); ++j) {
        if (__builtin_add_overflow(target[j], add[j], &target[j])) {
            throw OverflowError("consensus mass overflowed 64 bits");
        }
    }
}

std::int64_t max_spread(std::span<const ConsensusNodeState> states) {
    std::int64_t spread = 0;
    for (const auto& s : states) {
        if (s.big_m.size() > 0) {
            spread = std::max(spread, (s.big_m - s.small_m).maxCoeff());
        }
    }
    return spread;
}

void write_vector(std::ostream& out, const IntVector& v) {
    for (Eigen::Index j = 0; j < v.size(); ++j) {
        if (j > 0) out << ';';
        out << v[j];
    }
}

}  // namespace

ConsensusCapExceeded::ConsensusCapExceeded(std::size_t rounds, std::int64_t spread)
    : Error("consensus did not stop within " + std::to_string(rounds) +
            " rounds (window spread " + std::to_string(spread) + ")"),
      rounds_(rounds),
      spread_(spread) {}

ConsensusRng::ConsensusRng(std::uint64_t master_seed, std::size_t node_count) {
    engines_.reserve(node_count);
    for (std::size_t i = 0; i < node_count; ++i) {
        std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                          static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(std::uint64_t{i} >> 32),
                          0x51ed2701u};
        engines_.emplace_back(seq);
    }
}

std::vector<ConsensusNodeState> init_consensus(std::span<const VectorXd> inputs, const Digraph& g,
                                               const QuantizationLevel& level) {
    const std::size_t n = g.node_count();
    if (inputs.size() != n) {
        throw InvalidArgument("init_consensus: expected one input per node");
    }
    const Eigen::Index dim = inputs.front().size();
    if (dim == 0) {
        throw InvalidArgument("init_consensus: inputs must be non-empty vectors");
    }

    std::vector<ConsensusNodeState> states(n);
    IntVector abs_total = IntVector::Zero(dim);
    for (NodeId i = 0; i < n; ++i) {
        if (inputs[i].size() != dim) {
            throw InvalidArgument("init_consensus: inputs differ in dimension");
        }
        auto& s = states[i];
        const IntVector q = quantize_floor(inputs[i], level).values;
        s.chi.resize(dim);
        for (Eigen::Index j = 0; j < dim; ++j) {
            std::int64_t abs_twice = 0;
            if (__builtin_mul_overflow(q[j], 2, &s.chi[j]) ||
                __builtin_mul_overflow(q[j] < 0 ? -q[j] : q[j], 2, &abs_twice) ||
                __builtin_add_overflow(abs_total[j], abs_twice, &abs_total[j])) {
                throw OverflowError("init_consensus: total mass exceeds 64-bit range");
            }
        }
        s.xi = 2;
        s.tau = 0;
        s.big_m = IntVector::Zero(dim);
        s.small_m = IntVector::Zero(dim);

        const auto out = g.out_neighbors(i);
        s.targets.assign(out.begin(), out.end());
        s.targets.push_back(i);
        s.probabilities.assign(s.targets.size(), 1.0 / static_cast<double>(s.targets.size()));
    }
    return states;
}

RoundReport consensus_round(std::vector<ConsensusNodeState>& states, const Digraph& g, std::size_t diameter,
                            ConsensusRng& rng, std::size_t t, std::vector<PieceMessage>* sent) {
    const std::size_t n = states.size();
    if (t == 0 || diameter == 0) {
        throw InvalidArgument("consensus_round: t and diameter must be positive");
    }
    if (n != g.node_count() || rng.node_count() != n) {
        throw InvalidArgument("consensus_round: state, graph and rng sizes differ");
    }
    const Eigen::Index dim = states.front().chi.size();

    // 1. Window refresh.
    if ((t - 1) % diameter == 0) {
        for (auto& s : states) {
            ceil_ratio_into(s.chi, s.xi, s.big_m);
            floor_ratio_into(s.chi, s.xi, s.small_m);
        }
    }

    // Per-thread scratch; columns are nodes.
    thread_local Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> broadcast_max;
    thread_local Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> broadcast_min;
    thread_local Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> inbox_mass;
    const auto cols = static_cast<Eigen::Index>(n);

    // 2. Max/min fusion against the values broadcast at the start of the round.
    broadcast_max.resize(dim, cols);
    broadcast_min.resize(dim, cols);
    for (NodeId i = 0; i < n; ++i) {
        broadcast_max.col(static_cast<Eigen::Index>(i)) = states[i].big_m;
        broadcast_min.col(static_cast<Eigen::Index>(i)) = states[i].small_m;
    }
    for (NodeId i = 0; i < n; ++i) {
        auto& s = states[i];
        for (NodeId j : g.in_neighbors(i)) {
            const auto col = static_cast<Eigen::Index>(j);
            s.big_m = s.big_m.cwiseMax(broadcast_max.col(col));
            s.small_m = s.small_m.cwiseMin(broadcast_min.col(col));
        }
    }

    // 3-4. Split off xi - 1 pieces, each to a uniformly drawn target.
    RoundReport report;
    report.pieces_sent.assign(n, 0);
    inbox_mass.setZero(dim, cols);
    std::vector<std::int64_t> inbox_count(n, 0);
    thread_local IntVector piece;
    piece.resize(dim);
    for (NodeId i = 0; i < n; ++i) {
        auto& s = states[i];
        std::uniform_int_distribution<std::size_t> pick(0, s.targets.size() - 1);
        auto& engine = rng.node(i);
        s.tau = s.xi;
        while (s.tau > 1) {
            floor_ratio_into(s.chi, s.xi, piece);
            s.chi -= piece;
            s.xi -= 1;
            s.tau -= 1;
            const NodeId target = s.targets[pick(engine)];
            checked_accumulate(inbox_mass.col(static_cast<Eigen::Index>(target)), piece);
            inbox_count[target] += 1;
            report.pieces_sent[i] += 1;
            if (sent != nullptr) {
                sent->push_back(PieceMessage{piece, 1, i, target, t});
            }
        }
    }

    // Delivery at the end of the round.
    for (NodeId i = 0; i < n; ++i) {
        checked_accumulate(states[i].chi, inbox_mass.col(static_cast<Eigen::Index>(i)));
        states[i].xi += inbox_count[i];
        report.messages_delivered += static_cast<std::uint64_t>(inbox_count[i]);
    }
    return report;
}

bool check_stop(std::span<const ConsensusNodeState> states, std::size_t diameter, std::size_t t) {
    if (diameter == 0 || t % diameter != 0) {
        return false;
    }
    return std::all_of(states.begin(), states.end(), [](const ConsensusNodeState& s) {
        return (s.big_m - s.small_m).lpNorm<Eigen::Infinity>() <= 1;
    });
}

TranscriptWriter::TranscriptWriter(std::ostream& out) : out_(out) {
    out_ << "round,node,chi,xi,M,m,pieces_sent\n";
}

void TranscriptWriter::record(std::size_t t, std::span<const ConsensusNodeState> states,
                              std::span<const std::uint64_t> pieces_sent) {
    for (std::size_t i = 0; i < states.size(); ++i) {
        const auto& s = states[i];
        out_ << t << ',' << (i + 1) << ',';
        write_vector(out_, s.chi);
        out_ << ',' << s.xi << ',';
        write_vector(out_, s.big_m);
        out_ << ',';
        write_vector(out_, s.small_m);
        out_ << ',' << (i < pieces_sent.size() ? pieces_sent[i] : 0) << '\n';
    }
}

ConsensusResult run_dfqac(std::span<const VectorXd> inputs, const Digraph& g, const QuantizationLevel& level,
                          ConsensusRng& rng, const DfqacOptions& options) {
    const std::size_t diameter_value = options.diameter != 0 ? options.diameter : diameter(g);
    if (options.diameter != 0 && !is_strongly_connected(g)) {
        throw NotStronglyConnected("run_dfqac requires a strongly connected digraph");
    }
    const std::size_t cap = options.round_cap != 0 ? options.round_cap : 10000 * diameter_value;

    auto states = init_consensus(inputs, g, level);
    const Eigen::Index dim = states.front().chi.size();

    ConsensusResult result;
    for (std::size_t t = 1; t <= cap; ++t) {
        const RoundReport report = consensus_round(states, g, diameter_value, rng, t);
        result.pieces_sent_total += report.messages_delivered;
        if (options.transcript != nullptr) {
            options.transcript->record(t, states, report.pieces_sent);
        }
        if (options.on_round) {
            options.on_round(t, states);
        }
        if (check_stop(states, diameter_value, t)) {
            result.rounds_used = t;
            result.lattice_estimate = states.front().small_m;
            result.estimate.reserve(states.size());
            const VectorXd common = dequantize(result.lattice_estimate, level);
            for (const auto& s : states) {
                result.estimate.push_back(s.small_m == result.lattice_estimate ? common
                                                                               : dequantize(s.small_m, level));
            }
            result.bits_estimate =
                result.pieces_sent_total * (static_cast<std::uint64_t>(dim) * kPayloadIntegerBits + kPieceHeaderBits);
            return result;
        }
    }
    throw ConsensusCapExceeded(cap, max_spread(states));
}

}  // namespace qdpj
