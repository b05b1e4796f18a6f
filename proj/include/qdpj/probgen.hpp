#ifndef QDPJ_PROBGEN_HPP_
#define QDPJ_PROBGEN_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "qdpj/admm.hpp"

namespace qdpj {

enum class CouplingKind { identity, random };

struct InstanceSpec {
    std::size_t n_nodes = 10;
    std::size_t local_dim = 5;   // n_i
    std::size_t data_rows = 8;   // p, rows of C_i
    CouplingKind coupling = CouplingKind::identity;
    std::size_t coupling_rows = 0;  // m for random couplings; identity uses m = n_i
    VectorXd b;                     // empty means zero
    std::uint64_t seed = 1;

    std::size_t constraint_dim() const {
        return coupling == CouplingKind::identity ? local_dim : coupling_rows;
    }

    friend bool operator==(const InstanceSpec& a, const InstanceSpec& c) {
        return a.n_nodes == c.n_nodes && a.local_dim == c.local_dim && a.data_rows == c.data_rows &&
               a.coupling == c.coupling && a.coupling_rows == c.coupling_rows && a.b == c.b && a.seed == c.seed;
    }
};

/// N = 100, n_i = 100, p = 120, A_i = I, b = 0.
InstanceSpec full_instance_spec(std::uint64_t seed = 1);
/// N = 10, n_i = 5, p = 8, A_i = I, b = 0.
InstanceSpec desk_instance_spec(std::uint64_t seed = 1);

struct Instance {
    std::vector<Problem> problems;
    VectorXd b;
};

/// Proximal scale rho (N / (2 - gamma) - 1 + 1e-3) ||A_i||^2; reduces to
/// rho (N - 1 + 1e-3) for gamma = 1 and A_i = I.
double default_prox_scale(std::size_t n_nodes, double rho, double gamma, double coupling_norm);

/// C_i, e_i (and random A_i) drawn i.i.d. standard normal from `spec.seed`;
/// P_i = tau_i I with tau_i = default_prox_scale(...).
Instance generate(const InstanceSpec& spec, double rho, double gamma);

/// Text layout, all floats "%.17g", matrices row-major:
///   qdpj-instance 1
///   nodes N constraints m
///   b <m values>
///   node i rows p cols n      (once per node, i 1-based)
///   C <p*n values>
///   e <p values>
///   A <m*n values>
///   P scaled <tau>            or  P dense <n*n values>
void write_instance(std::ostream& out, const Instance& instance);
Instance read_instance(std::istream& in);

}  // namespace qdpj

#endif  // QDPJ_PROBGEN_HPP_
