#include <doctest.h>

#include <random>

#include "qdpj/metrics.hpp"

using namespace qdpj;

namespace {

using Problems = std::vector<LocalProblem<double>>;

MatrixXd gaussian(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = normal(rng);
    return m;
}

Problems random_problems(std::size_t n_nodes, Eigen::Index n, Eigen::Index p, Eigen::Index m, std::mt19937_64& rng,
                         double tau) {
    Problems out;
    for (std::size_t i = 0; i < n_nodes; ++i) {
        LocalProblem<double> prob;
        prob.objective.c_matrix = gaussian(p, n, rng);
        prob.objective.e_vector = gaussian(p, 1, rng).col(0);
        prob.coupling = gaussian(m, n, rng);
        prob.prox_weight = ProxWeight<double>::scaled_identity(tau);
        out.push_back(prob);
    }
    return out;
}

LocalProblem<double> identity_problem(const VectorXd& e) {
    LocalProblem<double> p;
    const auto n = e.size();
    p.objective.c_matrix = MatrixXd::Identity(n, n);
    p.objective.e_vector = e;
    p.coupling = MatrixXd::Identity(n, n);
    p.prox_weight = ProxWeight<double>::scaled_identity(1.0);
    return p;
}

std::vector<VectorXd> split(const VectorXd& stacked, const Problems& problems) {
    std::vector<VectorXd> out;
    Eigen::Index off = 0;
    for (const auto& p : problems) {
        out.push_back(stacked.segment(off, p.dimension()));
        off += p.dimension();
    }
    return out;
}

// Projected gradient on the stacked variable; projection onto {A x = b}.
std::vector<VectorXd> projected_gradient_oracle(const Problems& problems, const VectorXd& b) {
    Eigen::Index total = 0;
    for (const auto& p : problems) total += p.dimension();
    MatrixXd a(b.size(), total);
    MatrixXd h = MatrixXd::Zero(total, total);
    VectorXd g0(total);
    Eigen::Index off = 0;
    for (const auto& p : problems) {
        const auto n = p.dimension();
        a.middleCols(off, n) = p.coupling;
        h.block(off, off, n, n) = p.objective.c_matrix.transpose() * p.objective.c_matrix;
        g0.segment(off, n) = p.objective.c_matrix.transpose() * p.objective.e_vector;
        off += n;
    }
    const Eigen::LDLT<MatrixXd> aat(a * a.transpose());
    auto project = [&](const VectorXd& x) -> VectorXd { return x - a.transpose() * aat.solve(a * x - b); };
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(h, Eigen::EigenvaluesOnly);
    const double step = 1.0 / eig.eigenvalues().maxCoeff();
    VectorXd x = project(VectorXd::Zero(total));
    for (int it = 0; it < 5000000; ++it) {
        const VectorXd next = project(x - step * (h * x - g0));
        const double move = (next - x).norm();
        x = next;
        if (move <= 1e-13) break;
    }
    return split(x, problems);
}

}  // namespace

TEST_CASE("oracle: unconstrained optimum already feasible") {
    VectorXd e(3);
    e << 1.0, -2.0, 0.5;
    const Problems problems{identity_problem(e), identity_problem(-e)};
    const auto s = kkt_oracle<double>(problems, VectorXd::Zero(3));
    CHECK((s.x_star[0] - e).norm() <= 1e-14);
    CHECK((s.x_star[1] + e).norm() <= 1e-14);
    CHECK(s.lambda_star.norm() <= 1e-14);
}

TEST_CASE("oracle: symmetric inputs") {
    VectorXd v(2);
    v << 0.3, -1.7;
    const Problems problems{identity_problem(v), identity_problem(v)};
    const auto s = kkt_oracle<double>(problems, VectorXd::Zero(2));
    CHECK((s.lambda_star - v).norm() <= 1e-14);
    CHECK(s.x_star[0].norm() <= 1e-14);
    CHECK(s.x_star[1].norm() <= 1e-14);
}

TEST_CASE("oracle matches projected gradient on random instances") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 3; ++trial) {
        const Problems problems = random_problems(3, 4, 6, 2, rng, 1.0);
        const VectorXd b = gaussian(2, 1, rng).col(0);
        const auto s = kkt_oracle<double>(problems, b);
        const auto x = projected_gradient_oracle(problems, b);
        double err = 0.0;
        for (std::size_t i = 0; i < 3; ++i) err = std::max(err, (s.x_star[i] - x[i]).cwiseAbs().maxCoeff());
        CHECK(err <= 1e-7);
        CHECK(coupling_residual<double>(s.x_star, problems, b).norm() <= 1e-9 * (1.0 + b.norm()));
        for (std::size_t i = 0; i < 3; ++i) {
            const VectorXd g = problems[i].objective.gradient(s.x_star[i]) + problems[i].coupling.transpose() * s.lambda_star;
            CHECK(g.norm() <= 1e-8);
        }
        CHECK(s.nu_residual <= 1e-8);
    }
}

TEST_CASE("oracle errors") {
    std::mt19937_64 rng(4);
    Problems problems = random_problems(2, 4, 2, 2, rng, 1.0);  // p < n: C^T C singular
    CHECK_THROWS_AS(kkt_oracle<double>(problems, VectorXd::Zero(2)), SingularSystem);
    CHECK_THROWS_AS(kkt_oracle<double>(Problems{}, VectorXd::Zero(2)), InvalidArgument);
    Problems zero_coupling = random_problems(2, 2, 4, 2, rng, 1.0);
    for (auto& p : zero_coupling) p.coupling.setZero();
    CHECK_THROWS_AS(kkt_oracle<double>(zero_coupling, VectorXd::Zero(2)), SingularSystem);
}

TEST_CASE("lagrangians") {
    std::mt19937_64 rng(5);
    const Problems problems = random_problems(3, 3, 5, 2, rng, 1.0);
    const VectorXd b = gaussian(2, 1, rng).col(0);
    const auto s = kkt_oracle<double>(problems, b);
    const VectorXd lam = gaussian(2, 1, rng).col(0);
    double fsum = 0.0;
    for (std::size_t i = 0; i < 3; ++i) fsum += problems[i].objective.value(s.x_star[i]);
    CHECK(lagrangian<double>(s.x_star, lam, problems, b) == doctest::Approx(fsum).epsilon(1e-12));
    CHECK(lagrangian<double>(s.x_star, s.lambda_star, problems, b) == doctest::Approx(fsum).epsilon(1e-12));
    CHECK(augmented_lagrangian<double>(s.x_star, lam, problems, b, 2.0) == doctest::Approx(fsum).epsilon(1e-12));

    std::vector<VectorXd> x;
    for (int i = 0; i < 3; ++i) x.push_back(gaussian(3, 1, rng).col(0));
    double f = 0.0;
    for (std::size_t i = 0; i < 3; ++i) f += problems[i].objective.value(x[i]);
    CHECK(lagrangian<double>(x, VectorXd::Zero(2), problems, b) == doctest::Approx(f).epsilon(1e-14));
    CHECK(augmented_lagrangian<double>(x, lam, problems, b, 0.5) >= lagrangian<double>(x, lam, problems, b));
    CHECK_THROWS_AS(augmented_lagrangian<double>(x, lam, problems, b, 0.0), InvalidArgument);

    // Saddle inequality: L(x, lambda*) >= L(x*, lambda*).
    const double base = lagrangian<double>(s.x_star, s.lambda_star, problems, b);
    std::normal_distribution<double> small(0.0, 1e-2);
    for (int trial = 0; trial < 100; ++trial) {
        auto near = s.x_star;
        for (auto& v : near)
            for (auto& c : v) c += small(rng);
        CHECK(lagrangian<double>(near, s.lambda_star, problems, b) >= base - 1e-9);
    }
}

TEST_CASE("l1 error") {
    std::mt19937_64 rng(6);
    const Problems problems = random_problems(2, 3, 5, 3, rng, 1.0);
    const auto s = kkt_oracle<double>(problems, VectorXd::Zero(3));
    CHECK(l1_error<double>(s.x_star, s) == 0.0);
    auto x = s.x_star;
    x[1][2] += 1e-6;
    CHECK(l1_error<double>(x, s) == doctest::Approx(1e-6).epsilon(1e-6));
}

TEST_CASE("theorem constant") {
    std::mt19937_64 rng(7);
    const Problems problems = random_problems(3, 2, 4, 2, rng, 0.8);
    const VectorXd b = gaussian(2, 1, rng).col(0);
    const auto s = kkt_oracle<double>(problems, b);
    std::vector<NodeVariables<double>> at_saddle;
    for (const auto& x : s.x_star) at_saddle.push_back({x, s.lambda_star, VectorXd::Zero(2)});
    CHECK(theorem_constant_c<double>(at_saddle, s, problems, 0.1, 1.0) == 0.0);

    std::vector<NodeVariables<double>> init;
    for (int i = 0; i < 3; ++i) {
        init.push_back({gaussian(2, 1, rng).col(0), gaussian(2, 1, rng).col(0), VectorXd::Zero(2)});
    }
    const double rho = 0.3;
    const double gamma = 1.2;
    // Term-by-term closed form with dense matrices.
    double primal_p = 0.0, primal_a = 0.0, dual = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        const VectorXd d = init[i].x - s.x_star[i];
        const MatrixXd ata = problems[i].coupling.transpose() * problems[i].coupling;
        primal_a += d.transpose() * ata * d;
        primal_p += d.transpose() * (0.8 * MatrixXd::Identity(2, 2)) * d;
        dual += (init[i].lambda_hat - s.lambda_star).squaredNorm() / 3.0;
    }
    const double expected = 0.5 * (rho * primal_a + primal_p) + dual / (2.0 * gamma * rho);
    CHECK(theorem_constant_c<double>(init, s, problems, rho, gamma) == doctest::Approx(expected).epsilon(1e-13));

    const double doubled = 0.5 * (2.0 * rho * primal_a + primal_p) + dual / (2.0 * gamma * 2.0 * rho);
    CHECK(theorem_constant_c<double>(init, s, problems, 2.0 * rho, gamma) == doctest::Approx(doubled).epsilon(1e-13));
}

TEST_CASE("corollary weighted differences") {
    std::mt19937_64 rng(9);
    Problems problems;
    for (int i = 0; i < 3; ++i) problems.push_back(identity_problem(gaussian(2, 1, rng).col(0)));
    for (auto& p : problems) p.prox_weight = ProxWeight<double>::scaled_identity(0.7);
    std::vector<VectorXd> a, b;
    for (int i = 0; i < 3; ++i) {
        a.push_back(gaussian(2, 1, rng).col(0));
        b.push_back(gaussian(2, 1, rng).col(0));
    }
    const std::vector<double> ones(3, 1.0);
    CHECK(corollary_weighted_diff<double>(a, a, problems, 0.5, ones) == 0.0);
    double expected = 0.0;
    for (int i = 0; i < 3; ++i) expected += 0.7 * (a[i] - b[i]).squaredNorm();
    CHECK(corollary_weighted_diff<double>(a, b, problems, 0.5, ones) == doctest::Approx(0.5 * expected).epsilon(1e-14));

    for (double eps : {0.6, 1.0, 3.0, 100.0}) {
        const std::vector<double> e(3, eps);
        CHECK(corollary_weighted_diff<double>(a, b, problems, 0.5, e) >= 0.0);
    }
    const std::vector<double> tiny(3, 0.01);
    CHECK_THROWS_AS(corollary_weighted_diff<double>(a, b, problems, 0.5, tiny), InvalidArgument);
    const std::vector<double> bad{1.0, 0.0, 1.0};
    CHECK_THROWS_AS(corollary_weighted_diff<double>(a, b, problems, 0.5, bad), InvalidArgument);
}
