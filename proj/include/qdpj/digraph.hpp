#ifndef QDPJ_DIGRAPH_HPP_
#define QDPJ_DIGRAPH_HPP_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "qdpj/types.hpp"

namespace qdpj {

/// Directed edge stored as (receiver, sender): information flows sender -> receiver.
struct Edge {
    NodeId receiver;
    NodeId sender;

    friend bool operator==(const Edge&, const Edge&) = default;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Neighbor sets of one node. Self is never listed; every node carries an
/// implicit self-edge.
struct NeighborView {
    std::span<const NodeId> in_neighbors;
    std::span<const NodeId> out_neighbors;
    std::size_t in_degree;
    std::size_t out_degree;
};

class NotStronglyConnected : public Error {
 public:
    using Error::Error;
};

/// Static communication topology. Node ids are 0-based in memory and 1-based
/// in the edge-list file format.
class Digraph {
 public:
    /// Builds a graph with `node_count` nodes. Self pairs in `edges` are
    /// ignored (self-loops are always present), duplicates are merged.
    explicit Digraph(std::size_t node_count, std::span<const Edge> edges = {});

    std::size_t node_count() const { return in_.size(); }

    /// Number of directed edges, not counting self-loops.
    std::size_t edge_count() const { return edge_count_; }

    bool has_edge(NodeId receiver, NodeId sender) const;

    std::span<const NodeId> in_neighbors(NodeId i) const { return in_.at(i); }
    std::span<const NodeId> out_neighbors(NodeId i) const { return out_.at(i); }
    std::size_t in_degree(NodeId i) const { return in_.at(i).size(); }
    std::size_t out_degree(NodeId i) const { return out_.at(i).size(); }
    NeighborView neighbors(NodeId i) const;

    /// All non-self edges in lexicographic (receiver, sender) order.
    std::vector<Edge> edges() const;

    friend bool operator==(const Digraph& a, const Digraph& b) { return a.in_ == b.in_; }

 private:
    std::vector<std::vector<NodeId>> in_;
    std::vector<std::vector<NodeId>> out_;
    std::size_t edge_count_ = 0;
};

bool is_strongly_connected(const Digraph& g);

/// Longest shortest directed path over ordered pairs i != j. A single node
/// has diameter 1 so that window arithmetic stays well defined.
/// Throws NotStronglyConnected.
std::size_t diameter(const Digraph& g);

/// Random strongly connected digraph: a random Hamiltonian cycle plus extra
/// uniformly chosen edges until round(edge_density * n * (n - 1)) edges exist.
Digraph random_strongly_connected(std::size_t n, double edge_density, std::uint64_t seed);

/// Edge-list text format: first line "N", then one "receiver sender" pair per
/// line with 1-based ids. Self-loops are implied and never written.
void write_edge_list(std::ostream& out, const Digraph& g);
Digraph read_edge_list(std::istream& in);

}  // namespace qdpj

#endif  // QDPJ_DIGRAPH_HPP_
