#include <doctest.h>

#include <cmath>
#include <random>

#include "qdpj/admm.hpp"
#include "qdpj/probgen.hpp"

using namespace qdpj;

namespace {

Instance small_instance(std::size_t n_nodes, std::size_t dim, std::size_t rows, std::uint64_t seed, double rho,
                        double gamma = 1.0) {
    InstanceSpec spec;
    spec.n_nodes = n_nodes;
    spec.local_dim = dim;
    spec.data_rows = rows;
    spec.seed = seed;
    return generate(spec, rho, gamma);
}

// Centralized Jacobian iteration written directly from its definition:
//   x_i+ = argmin f_i(x) + rho/2 ||A_i x + sum_{j!=i} A_j x_j - b + lambda/rho||^2 + 1/2 ||x - x_i||_P^2
//   lambda+ = lambda + gamma rho (sum_i A_i x_i+ - b)
// solved with a QR factorization of the stationarity system.
std::vector<std::vector<VectorXd>> jacobian_oracle(const std::vector<Problem>& problems, const VectorXd& b,
                                                   double rho, double gamma, std::size_t iterations) {
    const std::size_t n = problems.size();
    std::vector<VectorXd> x;
    for (const auto& p : problems) x.push_back(VectorXd::Zero(p.dimension()));
    VectorXd lambda = VectorXd::Zero(b.size());
    std::vector<std::vector<VectorXd>> history{x};
    for (std::size_t k = 0; k < iterations; ++k) {
        VectorXd total = -b;
        for (std::size_t i = 0; i < n; ++i) total += problems[i].coupling * x[i];
        std::vector<VectorXd> next(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& p = problems[i];
            const MatrixXd& c = p.objective.c_matrix;
            const MatrixXd& a = p.coupling;
            const MatrixXd pw = p.prox_weight.to_dense(p.dimension());
            const VectorXd others = total - a * x[i];
            const MatrixXd lhs = c.transpose() * c + rho * a.transpose() * a + pw;
            const VectorXd rhs = c.transpose() * p.objective.e_vector - a.transpose() * (rho * others + lambda) + pw * x[i];
            next[i] = lhs.colPivHouseholderQr().solve(rhs);
        }
        x = next;
        VectorXd r = -b;
        for (std::size_t i = 0; i < n; ++i) r += problems[i].coupling * x[i];
        lambda += gamma * rho * r;
        history.push_back(x);
    }
    return history;
}

double window_increase(const std::vector<IterationTrace>& trace, std::size_t width) {
    double worst = 0.0;
    for (std::size_t start = 0; start + width < trace.size(); ++start) {
        double up = 0.0;
        for (std::size_t k = start + 1; k <= start + width; ++k) up += std::max(0.0, *trace[k].merit - *trace[k - 1].merit);
        worst = std::max(worst, up);
    }
    return worst;
}

}  // namespace

TEST_CASE("parameter gate arithmetic") {
    AdmmConfig c;
    c.rho = 0.01;
    c.gamma = 1.0;
    const double tau = default_prox_scale(100, c.rho, c.gamma, 1.0);
    CHECK(std::abs(tau - 0.99001) <= 1e-15);
    std::vector<Problem> problems(100);
    for (auto& p : problems) {
        p.objective.c_matrix = MatrixXd::Identity(2, 2);
        p.objective.e_vector = VectorXd::Zero(2);
        p.coupling = MatrixXd::Identity(2, 2);
        p.prox_weight = ProxWeight<double>::scaled_identity(tau);
    }
    const auto report = validate_parameters(c, problems, 100);
    CHECK(report.all_pass());
    for (const auto& t : report.nodes) {
        CHECK(std::abs(t.theta - 0.99) <= 1e-15);
        CHECK(std::abs(t.margin - 1e-5) <= 1e-12);
    }

    problems[3].prox_weight = ProxWeight<double>::scaled_identity(0.5);
    const auto bad = validate_parameters(c, problems, 100);
    CHECK_FALSE(bad.all_pass());
    CHECK(bad.failing_nodes() == std::vector<NodeId>{3});
    CHECK_THROWS_AS(require_valid(bad), ParameterViolation);

    c.gamma = 2.0;
    CHECK_THROWS_AS(validate_parameters(c, problems, 100), InvalidArgument);
    c.gamma = 1.0;
    c.rho = 0.0;
    CHECK_THROWS_AS(validate_parameters(c, problems, 100), InvalidArgument);
}

TEST_CASE("exact averaging reproduces the centralized iteration") {
    const double rho = 0.5;
    const Instance inst = small_instance(5, 4, 6, 13, rho);
    AdmmConfig c;
    c.rho = rho;
    c.max_outer_iterations = 20;
    c.averaging = Averaging::exact;
    const Digraph g = random_strongly_connected(5, 0.3, 1);
    const auto init = make_initial_variables(inst.problems, inst.b.size());

    std::vector<std::vector<VectorXd>> qdpj_hist;
    RunOptions opt;
    opt.observer = [&](const IterationSnapshot& s) {
        std::vector<VectorXd> x;
        for (const auto& v : s.variables) x.push_back(v.x);
        qdpj_hist.push_back(x);
    };
    qdpj_admm_run(inst.problems, g, inst.b, c, init, opt);

    std::vector<std::vector<VectorXd>> central_hist;
    RunOptions copt;
    copt.observer = [&](const IterationSnapshot& s) {
        std::vector<VectorXd> x;
        for (const auto& v : s.variables) x.push_back(v.x);
        central_hist.push_back(x);
    };
    centralized_pj_admm_run(inst.problems, inst.b, c, init, CommMode::exact, copt);

    const auto oracle = jacobian_oracle(inst.problems, inst.b, rho, 1.0, 20);
    REQUIRE(qdpj_hist.size() == 21);
    REQUIRE(central_hist.size() == 21);
    double worst = 0.0;
    for (std::size_t k = 0; k <= 20; ++k)
        for (std::size_t i = 0; i < 5; ++i) {
            worst = std::max(worst, (qdpj_hist[k][i] - oracle[k][i]).cwiseAbs().maxCoeff());
            worst = std::max(worst, (central_hist[k][i] - oracle[k][i]).cwiseAbs().maxCoeff());
        }
    CHECK(worst <= 1e-8);
}

TEST_CASE("quantized run invariants") {
    const double rho = 0.1;
    const Instance inst = small_instance(8, 3, 5, 21, rho);
    const Digraph g = random_strongly_connected(8, 0.2, 5);
    const std::size_t d = diameter(g);
    AdmmConfig c;
    c.rho = rho;
    c.level = QuantizationLevel(1, 1000);
    c.max_outer_iterations = 60;
    const auto init = make_initial_variables(inst.problems, inst.b.size());
    const double envelope = 2.0 * std::sqrt(static_cast<double>(inst.b.size())) * c.level.value();

    bool agree = true;
    double fidelity = 0.0;
    RunOptions opt;
    opt.observer = [&](const IterationSnapshot& s) {
        for (const auto& v : s.variables) {
            if (v.lambda_hat != s.variables.front().lambda_hat) agree = false;
            if (v.d_hat != s.variables.front().d_hat) agree = false;
        }
        fidelity = std::max(fidelity, (s.variables.front().d_hat - s.residual).norm());
    };
    const AdmmRun run = qdpj_admm_run(inst.problems, g, inst.b, c, init, opt);
    CHECK(agree);
    CHECK(fidelity <= envelope);
    REQUIRE(run.trace.size() == 61);
    for (std::size_t k = 0; k < run.trace.size(); ++k) {
        CHECK(run.trace[k].k == k);
        CHECK(run.trace[k].consensus_rounds >= d);
        CHECK(run.trace[k].l1_error.has_value());
        CHECK(run.trace[k].wallclock_ms == 0.0);
        CHECK(run.trace[k].bits_estimate == run.trace[k].pieces_sent * (inst.b.size() * 64 + 64));
    }

    const AdmmRun again = qdpj_admm_run(inst.problems, g, inst.b, c, init, {});
    for (std::size_t k = 0; k < run.trace.size(); ++k) {
        CHECK(again.trace[k].residual_norm == run.trace[k].residual_norm);
        CHECK(again.trace[k].merit == run.trace[k].merit);
        CHECK(again.trace[k].consensus_rounds == run.trace[k].consensus_rounds);
    }
}

TEST_CASE("phi readings") {
    const double rho = 0.3;
    Instance inst = small_instance(4, 2, 4, 3, rho);
    const Digraph g = random_strongly_connected(4, 0.5, 2);
    AdmmConfig c;
    c.rho = rho;
    c.max_outer_iterations = 5;
    c.averaging = Averaging::exact;
    const auto init = make_initial_variables(inst.problems, inst.b.size());

    // b = 0: both readings coincide.
    c.phi_reading = PhiReading::literal;
    const auto lit = qdpj_admm_run(inst.problems, g, inst.b, c, init);
    c.phi_reading = PhiReading::consistent;
    const auto con = qdpj_admm_run(inst.problems, g, inst.b, c, init);
    for (std::size_t i = 0; i < 4; ++i) CHECK(lit.variables[i].x == con.variables[i].x);

    // b != 0: the literal reading averages to sum A_i x_i - N b.
    inst.b = VectorXd::Constant(2, 0.25);
    c.max_outer_iterations = 1;
    VectorXd consistent_dhat, literal_dhat, residual;
    RunOptions opt;
    opt.observer = [&](const IterationSnapshot& s) {
        consistent_dhat = s.variables.front().d_hat;
        residual = s.residual;
    };
    qdpj_admm_run(inst.problems, g, inst.b, c, init, opt);
    CHECK((consistent_dhat - residual).norm() <= 1e-12);
    c.phi_reading = PhiReading::literal;
    opt.observer = [&](const IterationSnapshot& s) {
        literal_dhat = s.variables.front().d_hat;
        residual = s.residual;
    };
    qdpj_admm_run(inst.problems, g, inst.b, c, init, opt);
    CHECK((literal_dhat - (residual - 3.0 * inst.b)).norm() <= 1e-12);
}

TEST_CASE("centralized exact mode converges on a three-node instance") {
    const double rho = 1.0;
    Instance inst = small_instance(3, 2, 4, 8, rho);
    inst.b = VectorXd::Constant(2, 1.0);
    AdmmConfig c;
    c.rho = rho;
    c.max_outer_iterations = 1000;
    const auto run = centralized_pj_admm_run(inst.problems, inst.b, c,
                                             make_initial_variables(inst.problems, inst.b.size()), CommMode::exact);
    CHECK(run.trace.back().residual_norm <= 1e-6);
    CHECK(*run.trace.back().l1_error <= 1e-6);
    CHECK(run.trace.back().pieces_sent == 6);
}

TEST_CASE("merit decrease up to a slack proportional to the quantization level") {
    const double rho = 0.1;
    const Instance inst = small_instance(6, 3, 5, 41, rho);
    const Digraph g = random_strongly_connected(6, 0.3, 9);
    AdmmConfig c;
    c.rho = rho;
    c.max_outer_iterations = 300;
    const auto init = make_initial_variables(inst.problems, inst.b.size());
    const std::size_t width = 50;

    c.level = QuantizationLevel(1, 1000);
    const double calibrated = window_increase(qdpj_admm_run(inst.problems, g, inst.b, c, init).trace, width);
    const double slope = calibrated / (static_cast<double>(width) * c.level.value());
    for (const auto& level : {QuantizationLevel(1, 10000), QuantizationLevel(1, 100000)}) {
        c.level = level;
        const double inc = window_increase(qdpj_admm_run(inst.problems, g, inst.b, c, init).trace, width);
        CHECK(inc <= static_cast<double>(width) * slope * level.value());
    }
}

TEST_CASE("centralized quantized mode") {
    const double rho = 0.1;
    const Instance inst = small_instance(5, 3, 5, 2, rho);
    AdmmConfig c;
    c.rho = rho;
    c.level = QuantizationLevel(1, 100);
    c.max_outer_iterations = 30;
    const auto init = make_initial_variables(inst.problems, inst.b.size());
    bool on_lattice = true;
    RunOptions opt;
    opt.observer = [&](const IterationSnapshot& s) {
        for (const auto& v : s.variables)
            if (quantize_to_lattice(v.lambda_hat, c.level) != v.lambda_hat) on_lattice = false;
    };
    const auto run = centralized_pj_admm_run(inst.problems, inst.b, c, init, CommMode::quantized, opt);
    CHECK(on_lattice);
    std::uint64_t bits = 0;
    for (const auto& p : inst.problems) bits += static_cast<std::uint64_t>(p.dimension() + inst.b.size()) * 64;
    CHECK(run.trace[1].bits_estimate == bits);
    CHECK(run.trace[0].pieces_sent == 0);

    // A very fine lattice tracks the exact run closely.
    c.level = QuantizationLevel(1, 1000000000);
    const auto fine = centralized_pj_admm_run(inst.problems, inst.b, c, init, CommMode::quantized);
    const auto exact = centralized_pj_admm_run(inst.problems, inst.b, c, init, CommMode::exact);
    for (std::size_t i = 0; i < 5; ++i) CHECK((fine.variables[i].x - exact.variables[i].x).norm() <= 1e-6);
}

TEST_CASE("failures") {
    const double rho = 0.1;
    Instance inst = small_instance(6, 3, 5, 4, rho);
    const auto init = make_initial_variables(inst.problems, inst.b.size());
    AdmmConfig c;
    c.rho = rho;
    c.max_outer_iterations = 3;

    CHECK_THROWS_AS(qdpj_admm_run(inst.problems, random_strongly_connected(5, 0.3, 1), inst.b, c, init),
                    InvalidArgument);
    const std::vector<Edge> path{{1, 0}, {2, 1}, {3, 2}, {4, 3}, {5, 4}};
    CHECK_THROWS_AS(qdpj_admm_run(inst.problems, Digraph(6, path), inst.b, c, init), NotStronglyConnected);

    const Digraph g = random_strongly_connected(6, 0.05, 3);
    c.consensus_round_cap = 1;
    try {
        qdpj_admm_run(inst.problems, g, inst.b, c, init);
        FAIL("expected an outer iteration failure");
    } catch (const OuterIterationFailure& e) {
        CHECK(e.iteration() == 0);
        CHECK(std::string(e.what()).find("outer iteration 0") != std::string::npos);
    }
    c.consensus_round_cap = 0;

    for (auto& p : inst.problems) p.prox_weight = ProxWeight<double>::scaled_identity(0.01);
    try {
        qdpj_admm_run(inst.problems, g, inst.b, c, init);
        FAIL("expected a parameter violation");
    } catch (const ParameterViolation& e) {
        CHECK(e.nodes().size() == 6);
    }
    CHECK_THROWS_AS(centralized_pj_admm_run(inst.problems, inst.b, c, init, CommMode::exact), ParameterViolation);
    c.allow_invalid_parameters = true;
    CHECK(qdpj_admm_run(inst.problems, g, inst.b, c, init).trace.size() == 4);

    c.gamma = 2.0;
    CHECK_THROWS_AS(centralized_pj_admm_run(inst.problems, inst.b, c, init, CommMode::exact), InvalidArgument);
    c.gamma = 1.0;
    auto bad_init = init;
    bad_init[2].x = VectorXd::Zero(7);
    CHECK_THROWS_AS(centralized_pj_admm_run(inst.problems, inst.b, c, bad_init, CommMode::exact), InvalidArgument);
}

TEST_CASE("gap metrics are omitted without an oracle") {
    const double rho = 0.1;
    Instance inst = small_instance(3, 4, 2, 6, rho);  // C_i^T C_i is singular
    AdmmConfig c;
    c.rho = rho;
    c.max_outer_iterations = 3;
    const auto run = centralized_pj_admm_run(inst.problems, inst.b, c,
                                             make_initial_variables(inst.problems, inst.b.size()), CommMode::exact);
    CHECK_FALSE(run.saddle.has_value());
    for (const auto& r : run.trace) {
        CHECK_FALSE(r.lagrangian_gap.has_value());
        CHECK_FALSE(r.l1_error.has_value());
        CHECK_FALSE(r.merit.has_value());
    }
}

TEST_CASE("initial variables") {
    const Instance inst = small_instance(3, 2, 3, 1, 0.1);
    const auto zero = make_initial_variables(inst.problems, 2);
    for (const auto& v : zero) {
        CHECK(v.x.isZero(0.0));
        CHECK(v.lambda_hat.isZero(0.0));
    }
    InitOptions o;
    o.random_lambda = true;
    o.seed = 4;
    const auto a = make_initial_variables(inst.problems, 2, o);
    const auto b = make_initial_variables(inst.problems, 2, o);
    CHECK(a[1].lambda_hat == b[1].lambda_hat);
    CHECK(a[0].lambda_hat != a[1].lambda_hat);
}
