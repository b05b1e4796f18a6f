#include "qdpj/digraph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

namespace qdpj {

namespace {

// Hop distances from `source` along edge direction; SIZE_MAX when unreachable.
std::vector<std::size_t> bfs_distances(const Digraph& g, NodeId source) {
    constexpr auto kUnreached = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> dist(g.node_count(), kUnreached);
    std::deque<NodeId> frontier{source};
    dist[source] = 0;
    while (!frontier.empty()) {
        const NodeId u = frontier.front();
        frontier.pop_front();
        for (NodeId v : g.out_neighbors(u)) {
            if (dist[v] == kUnreached) {
                dist[v] = dist[u] + 1;
                frontier.push_back(v);
            }
        }
    }
    return dist;
}

}  // namespace

Digraph::Digraph(std::size_t node_count, std::span<const Edge> edges)
    : in_(node_count), out_(node_count) {
    if (node_count == 0) {
        throw InvalidArgument("digraph needs at least one node");
    }
    for (const Edge& e : edges) {
        if (e.receiver >= node_count || e.sender >= node_count) {
            throw InvalidArgument("edge endpoint out of range");
        }
        if (e.receiver == e.sender) {
            continue;
        }
        in_[e.receiver].push_back(e.sender);
        out_[e.sender].push_back(e.receiver);
    }
    for (auto* lists : {&in_, &out_}) {
        for (auto& l : *lists) {
            std::sort(l.begin(), l.end());
            l.erase(std::unique(l.begin(), l.end()), l.end());
        }
    }
    for (const auto& l : in_) {
        edge_count_ += l.size();
    }
}

bool Digraph::has_edge(NodeId receiver, NodeId sender) const {
    if (receiver == sender) {
        return receiver < node_count();
    }
    const auto& l = in_.at(receiver);
    return std::binary_search(l.begin(), l.end(), sender);
}

NeighborView Digraph::neighbors(NodeId i) const {
    return NeighborView{in_neighbors(i), out_neighbors(i), in_degree(i), out_degree(i)};
}

std::vector<Edge> Digraph::edges() const {
    std::vector<Edge> result;
    result.reserve(edge_count_);
    for (NodeId r = 0; r < in_.size(); ++r) {
        for (NodeId s : in_[r]) {
            result.push_back({r, s});
        }
    }
    return result;
}

bool is_strongly_connected(const Digraph& g) {
    // Forward reachability from node 0 plus reachability in the reversed graph.
    const std::size_t n = g.node_count();
    for (bool reversed : {false, true}) {
        std::vector<char> seen(n, 0);
        std::vector<NodeId> stack{0};
        seen[0] = 1;
        std::size_t count = 1;
        while (!stack.empty()) {
            const NodeId u = stack.back();
            stack.pop_back();
            for (NodeId v : reversed ? g.in_neighbors(u) : g.out_neighbors(u)) {
                if (!seen[v]) {
                    seen[v] = 1;
                    ++count;
                    stack.push_back(v);
                }
            }
        }
        if (count != n) {
            return false;
        }
    }
    return true;
}

std::size_t diameter(const Digraph& g) {
    if (!is_strongly_connected(g)) {
        throw NotStronglyConnected("diameter requested for a digraph that is not strongly connected");
    }
    std::size_t d = 1;
    for (NodeId s = 0; s < g.node_count(); ++s) {
        const auto dist = bfs_distances(g, s);
        d = std::max(d, *std::max_element(dist.begin(), dist.end()));
    }
    return d;
}

Digraph random_strongly_connected(std::size_t n, double edge_density, std::uint64_t seed) {
    if (n == 0) {
        throw InvalidArgument("random_strongly_connected: n must be positive");
    }
    if (!(edge_density > 0.0) || edge_density > 1.0) {
        throw InvalidArgument("random_strongly_connected: edge_density must lie in (0, 1]");
    }
    if (n == 1) {
        return Digraph(1);
    }
    std::mt19937_64 rng(seed);

    std::vector<NodeId> order(n);
    std::iota(order.begin(), order.end(), NodeId{0});
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<Edge> edges;
    std::vector<char> used(n * n, 0);
    for (std::size_t k = 0; k < n; ++k) {
        const NodeId sender = order[k];
        const NodeId receiver = order[(k + 1) % n];
        if (!used[receiver * n + sender]) {
            used[receiver * n + sender] = 1;
            edges.push_back({receiver, sender});
        }
    }

    const std::size_t possible = n * (n - 1);
    const auto target = static_cast<std::size_t>(std::llround(edge_density * static_cast<double>(possible)));
    if (target > edges.size()) {
        std::vector<Edge> candidates;
        candidates.reserve(possible - edges.size());
        for (NodeId r = 0; r < n; ++r) {
            for (NodeId s = 0; s < n; ++s) {
                if (r != s && !used[r * n + s]) {
                    candidates.push_back({r, s});
                }
            }
        }
        std::shuffle(candidates.begin(), candidates.end(), rng);
        const std::size_t extra = std::min(target - edges.size(), candidates.size());
        edges.insert(edges.end(), candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(extra));
    }
    return Digraph(n, edges);
}

void write_edge_list(std::ostream& out, const Digraph& g) {
    out << g.node_count() << '\n';
    for (const Edge& e : g.edges()) {
        out << (e.receiver + 1) << ' ' << (e.sender + 1) << '\n';
    }
}

Digraph read_edge_list(std::istream& in) {
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        std::istringstream header(line);
        if (!(header >> n) || n == 0) {
            throw InvalidArgument("edge list: first line must be a positive node count");
        }
        break;
    }
    if (n == 0) {
        throw InvalidArgument("edge list: empty input");
    }
    std::vector<Edge> edges;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        std::istringstream row(line);
        long long r = 0;
        long long s = 0;
        if (!(row >> r >> s) || r < 1 || s < 1 || static_cast<std::size_t>(r) > n ||
            static_cast<std::size_t>(s) > n) {
            throw InvalidArgument("edge list: bad edge on line " + std::to_string(line_no));
        }
        edges.push_back({static_cast<NodeId>(r - 1), static_cast<NodeId>(s - 1)});
    }
    return Digraph(n, edges);
}

}  // namespace qdpj
