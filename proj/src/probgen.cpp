#include "qdpj/probgen.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace qdpj {

namespace {

void write_values(std::ostream& out, const double* data, Eigen::Index count) {
    char buf[32];
    for (Eigen::Index k = 0; k < count; ++k) {
        std::snprintf(buf, sizeof(buf), "%.17g", data[k]);
        out << ' ' << buf;
    }
    out << '\n';
}

void write_row_major(std::ostream& out, const MatrixXd& m) {
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    write_values(out, rm.data(), rm.size());
}

class Reader {
 public:
    explicit Reader(std::istream& in) : in_(in) {}

    void expect(const std::string& word) {
        std::string got;
        if (!(in_ >> got) || got != word) {
            throw InvalidArgument("instance file: expected '" + word + "', got '" + got + "'");
        }
    }

    std::string word() {
        std::string w;
        if (!(in_ >> w)) throw InvalidArgument("instance file: unexpected end of input");
        return w;
    }

    std::size_t count() {
        long long v = 0;
        if (!(in_ >> v) || v < 0) throw InvalidArgument("instance file: bad size field");
        return static_cast<std::size_t>(v);
    }

    double real() {
        // strtod accepts inf/nan spellings that operator>> rejects.
        const std::string w = word();
        char* end = nullptr;
        const double v = std::strtod(w.c_str(), &end);
        if (end == w.c_str() || *end != '\0') throw InvalidArgument("instance file: bad number '" + w + "'");
        return v;
    }

    VectorXd vector(std::size_t n) {
        VectorXd v(static_cast<Eigen::Index>(n));
        for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = real();
        return v;
    }

    MatrixXd matrix(std::size_t rows, std::size_t cols) {
        MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = real();
        return m;
    }

 private:
    std::istream& in_;
};

}  // namespace

InstanceSpec full_instance_spec(std::uint64_t seed) {
    InstanceSpec spec;
    spec.n_nodes = 100;
    spec.local_dim = 100;
    spec.data_rows = 120;
    spec.seed = seed;
    return spec;
}

InstanceSpec desk_instance_spec(std::uint64_t seed) {
    InstanceSpec spec;
    spec.n_nodes = 10;
    spec.local_dim = 5;
    spec.data_rows = 8;
    spec.seed = seed;
    return spec;
}

double default_prox_scale(std::size_t n_nodes, double rho, double gamma, double coupling_norm) {
    return rho * (static_cast<double>(n_nodes) / (2.0 - gamma) - 1.0 + 1e-3) * coupling_norm * coupling_norm;
}

Instance generate(const InstanceSpec& spec, double rho, double gamma) {
    if (spec.n_nodes == 0 || spec.local_dim == 0 || spec.data_rows == 0 || spec.constraint_dim() == 0) {
        throw InvalidArgument("instance spec: dimensions must be positive");
    }
    const auto n = static_cast<Eigen::Index>(spec.local_dim);
    const auto p = static_cast<Eigen::Index>(spec.data_rows);
    const auto m = static_cast<Eigen::Index>(spec.constraint_dim());
    if (spec.b.size() != 0 && spec.b.size() != m) {
        throw InvalidArgument("instance spec: b has the wrong length");
    }

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal;
    auto fill = [&](MatrixXd& a) {
        for (Eigen::Index r = 0; r < a.rows(); ++r)
            for (Eigen::Index c = 0; c < a.cols(); ++c) a(r, c) = normal(rng);
    };

    Instance inst;
    inst.b = spec.b.size() == 0 ? VectorXd::Zero(m) : spec.b;
    inst.problems.reserve(spec.n_nodes);
    for (std::size_t i = 0; i < spec.n_nodes; ++i) {
        Problem prob;
        prob.objective.c_matrix.resize(p, n);
        fill(prob.objective.c_matrix);
        MatrixXd e(p, 1);
        fill(e);
        prob.objective.e_vector = e.col(0);
        if (spec.coupling == CouplingKind::identity) {
            prob.coupling = MatrixXd::Identity(n, n);
        } else {
            prob.coupling.resize(m, n);
            fill(prob.coupling);
        }
        const double a_norm = spec.coupling == CouplingKind::identity ? 1.0 : spectral_norm<double>(prob.coupling);
        prob.prox_weight =
            ProxWeight<double>::scaled_identity(default_prox_scale(spec.n_nodes, rho, gamma, a_norm));
        inst.problems.push_back(std::move(prob));
    }
    return inst;
}

void write_instance(std::ostream& out, const Instance& instance) {
    out << "qdpj-instance 1\n";
    out << "nodes " << instance.problems.size() << " constraints " << instance.b.size() << '\n';
    out << 'b';
    write_values(out, instance.b.data(), instance.b.size());
    for (std::size_t i = 0; i < instance.problems.size(); ++i) {
        const auto& p = instance.problems[i];
        out << "node " << (i + 1) << " rows " << p.objective.c_matrix.rows() << " cols " << p.dimension() << '\n';
        out << 'C';
        write_row_major(out, p.objective.c_matrix);
        out << 'e';
        write_values(out, p.objective.e_vector.data(), p.objective.e_vector.size());
        out << 'A';
        write_row_major(out, p.coupling);
        if (p.prox_weight.is_scaled_identity()) {
            out << "P scaled";
            const double tau = p.prox_weight.scale();
            write_values(out, &tau, 1);
        } else {
            out << "P dense";
            write_row_major(out, p.prox_weight.matrix());
        }
    }
}

Instance read_instance(std::istream& in) {
    Reader r(in);
    r.expect("qdpj-instance");
    if (r.count() != 1) {
        throw InvalidArgument("instance file: unsupported version");
    }
    r.expect("nodes");
    const std::size_t nodes = r.count();
    r.expect("constraints");
    const std::size_t m = r.count();
    Instance inst;
    r.expect("b");
    inst.b = r.vector(m);
    for (std::size_t i = 0; i < nodes; ++i) {
        r.expect("node");
        if (r.count() != i + 1) throw InvalidArgument("instance file: nodes out of order");
        r.expect("rows");
        const std::size_t p = r.count();
        r.expect("cols");
        const std::size_t n = r.count();
        Problem prob;
        r.expect("C");
        prob.objective.c_matrix = r.matrix(p, n);
        r.expect("e");
        prob.objective.e_vector = r.vector(p);
        r.expect("A");
        prob.coupling = r.matrix(m, n);
        r.expect("P");
        const std::string kind = r.word();
        if (kind == "scaled") {
            prob.prox_weight = ProxWeight<double>::scaled_identity(r.real());
        } else if (kind == "dense") {
            prob.prox_weight = ProxWeight<double>::dense(r.matrix(n, n));
        } else {
            throw InvalidArgument("instance file: unknown prox weight kind '" + kind + "'");
        }
        inst.problems.push_back(std::move(prob));
    }
    return inst;
}

}  // namespace qdpj
