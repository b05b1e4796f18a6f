#ifndef QDPJ_METRICS_HPP_
#define QDPJ_METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "qdpj/local_solver.hpp"
#include "qdpj/types.hpp"

namespace qdpj {

/// Variables held by one node in the distributed iteration.
template <typename Scalar>
struct NodeVariables {
    Vector<Scalar> x;           // local decision variable
    Vector<Scalar> lambda_hat;  // local copy of the multiplier
    Vector<Scalar> d_hat;       // local estimate of the coupling residual
};

template <typename Scalar>
struct SaddlePoint {
    std::vector<Vector<Scalar>> x_star;
    Vector<Scalar> lambda_star;
    Scalar nu_residual = Scalar(0);  // max of primal infeasibility and stationarity error
};

/// sum_i A_i x_i - b.
template <typename Scalar>
Vector<Scalar> coupling_residual(std::span<const Vector<Scalar>> x, std::span<const LocalProblem<Scalar>> problems,
                                 const Vector<Scalar>& b) {
    if (x.size() != problems.size()) {
        throw InvalidArgument("coupling residual: one vector per node expected");
    }
    Vector<Scalar> r = -b;
    for (std::size_t i = 0; i < problems.size(); ++i) {
        r.noalias() += problems[i].coupling * x[i];
    }
    return r;
}

/// Saddle point of the coupled quadratic program by block elimination:
///   x_i = H_i^{-1}(C_i^T e_i - A_i^T lambda),  H_i = C_i^T C_i,
///   (sum_i A_i H_i^{-1} A_i^T) lambda = sum_i A_i H_i^{-1} C_i^T e_i - b.
/// Throws SingularSystem if some H_i or the Schur complement is singular.
template <typename Scalar>
SaddlePoint<Scalar> kkt_oracle(std::span<const LocalProblem<Scalar>> problems, const Vector<Scalar>& b) {
    if (problems.empty()) {
        throw InvalidArgument("kkt oracle: no nodes");
    }
    const Eigen::Index m = b.size();
    std::vector<Eigen::LLT<Matrix<Scalar>>> factors;
    std::vector<Vector<Scalar>> unconstrained;  // H_i^{-1} C_i^T e_i
    factors.reserve(problems.size());
    Matrix<Scalar> schur = Matrix<Scalar>::Zero(m, m);
    Vector<Scalar> rhs = -b;
    for (const auto& p : problems) {
        p.check_dimensions();
        if (p.constraint_dim() != m) {
            throw InvalidArgument("kkt oracle: coupling row count differs from b");
        }
        factors.emplace_back(p.objective.hessian());
        auto& llt = factors.back();
        if (llt.info() != Eigen::Success) {
            throw SingularSystem("kkt oracle: C_i^T C_i is not positive definite");
        }
        unconstrained.push_back(llt.solve(p.objective.c_matrix.transpose() * p.objective.e_vector));
        schur.noalias() += p.coupling * llt.solve(p.coupling.transpose());
        rhs.noalias() += p.coupling * unconstrained.back();
    }
    Eigen::LDLT<Matrix<Scalar>> schur_ldlt(schur);
    if (schur_ldlt.info() != Eigen::Success || schur_ldlt.rcond() < Scalar(1e-14)) {
        throw SingularSystem("kkt oracle: Schur complement is singular");
    }

    SaddlePoint<Scalar> saddle;
    saddle.lambda_star = schur_ldlt.solve(rhs);
    Scalar stationarity = Scalar(0);
    for (std::size_t i = 0; i < problems.size(); ++i) {
        const auto& p = problems[i];
        saddle.x_star.push_back(unconstrained[i] - factors[i].solve(p.coupling.transpose() * saddle.lambda_star));
        const Vector<Scalar> grad =
            p.objective.gradient(saddle.x_star.back()) + p.coupling.transpose() * saddle.lambda_star;
        stationarity = std::max(stationarity, grad.norm());
    }
    const Scalar infeasibility =
        coupling_residual<Scalar>(saddle.x_star, problems, b).norm();
    saddle.nu_residual = std::max(stationarity, infeasibility);
    return saddle;
}

/// sum_i f_i(x_i) + lambda^T (sum_i A_i x_i - b).
template <typename Scalar>
Scalar lagrangian(std::span<const Vector<Scalar>> x, const Vector<Scalar>& lambda,
                  std::span<const LocalProblem<Scalar>> problems, const Vector<Scalar>& b) {
    Scalar total = Scalar(0);
    for (std::size_t i = 0; i < problems.size(); ++i) {
        total += problems[i].objective.value(x[i]);
    }
    return total + lambda.dot(coupling_residual(x, problems, b));
}

/// Lagrangian plus rho/2 ||sum_i A_i x_i - b||^2. Requires rho > 0.
template <typename Scalar>
Scalar augmented_lagrangian(std::span<const Vector<Scalar>> x, const Vector<Scalar>& lambda,
                            std::span<const LocalProblem<Scalar>> problems, const Vector<Scalar>& b, Scalar rho) {
    if (!(rho > Scalar(0))) {
        throw InvalidArgument("augmented lagrangian: rho must be positive");
    }
    const Vector<Scalar> r = coupling_residual(x, problems, b);
    Scalar total = Scalar(0);
    for (std::size_t i = 0; i < problems.size(); ++i) {
        total += problems[i].objective.value(x[i]);
    }
    return total + lambda.dot(r) + Scalar(0.5) * rho * r.squaredNorm();
}

/// sum_i ||x_i - x_i*||_1.
template <typename Scalar>
Scalar l1_error(std::span<const Vector<Scalar>> x, const SaddlePoint<Scalar>& saddle) {
    Scalar total = Scalar(0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        total += (x[i] - saddle.x_star[i]).template lpNorm<1>();
    }
    return total;
}

/// ||v||^2 in the metric rho A^T A + P.
template <typename Scalar>
Scalar primal_metric_sq(const LocalProblem<Scalar>& p, const Vector<Scalar>& v, Scalar rho) {
    return rho * (p.coupling * v).squaredNorm() + v.dot(p.prox_weight.apply(v));
}

/// Lyapunov quantity
///   1/2 sum_i ||x_i - x_i*||^2_{rho A_i^T A_i + P_i} + 1/(2 gamma rho) ||lambda_hat - lambda*||^2,
/// where the dual term averages ||lambda_hat_i - lambda*||^2 over nodes (all
/// copies coincide when initialized identically).
template <typename Scalar>
Scalar merit(std::span<const Vector<Scalar>> x, std::span<const Vector<Scalar>> lambda_hat,
             const SaddlePoint<Scalar>& saddle, std::span<const LocalProblem<Scalar>> problems, Scalar rho,
             Scalar gamma) {
    Scalar primal = Scalar(0);
    for (std::size_t i = 0; i < problems.size(); ++i) {
        primal += primal_metric_sq(problems[i], Vector<Scalar>(x[i] - saddle.x_star[i]), rho);
    }
    Scalar dual = Scalar(0);
    for (const auto& l : lambda_hat) {
        dual += (l - saddle.lambda_star).squaredNorm();
    }
    dual /= static_cast<Scalar>(lambda_hat.size());
    return Scalar(0.5) * primal + dual / (Scalar(2) * gamma * rho);
}

/// Constant C of the ergodic bound, evaluated at the initial iterates.
template <typename Scalar>
Scalar theorem_constant_c(std::span<const NodeVariables<Scalar>> init, const SaddlePoint<Scalar>& saddle,
                          std::span<const LocalProblem<Scalar>> problems, Scalar rho, Scalar gamma) {
    std::vector<Vector<Scalar>> x;
    std::vector<Vector<Scalar>> lambda;
    for (const auto& v : init) {
        x.push_back(v.x);
        lambda.push_back(v.lambda_hat);
    }
    return merit<Scalar>(x, lambda, saddle, problems, rho, gamma);
}

/// 1/2 sum_i ||x_curr_i - x_next_i||^2_{W_i}, W_i = rho A_i^T A_i + P_i - (rho/eps_i) A_i^T A_i.
/// Throws InvalidArgument when some eps_i <= 0 or W_i is indefinite.
template <typename Scalar>
Scalar corollary_weighted_diff(std::span<const Vector<Scalar>> x_curr, std::span<const Vector<Scalar>> x_next,
                               std::span<const LocalProblem<Scalar>> problems, Scalar rho,
                               std::span<const Scalar> epsilons) {
    if (epsilons.size() != problems.size()) {
        throw InvalidArgument("corollary weighted diff: one epsilon per node expected");
    }
    Scalar total = Scalar(0);
    for (std::size_t i = 0; i < problems.size(); ++i) {
        const auto& p = problems[i];
        if (!(epsilons[i] > Scalar(0))) {
            throw InvalidArgument("corollary weighted diff: epsilon must be positive");
        }
        const Matrix<Scalar> ata = p.coupling.transpose() * p.coupling;
        const Matrix<Scalar> weight =
            p.prox_weight.to_dense(p.dimension()) + rho * (Scalar(1) - Scalar(1) / epsilons[i]) * ata;
        Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(weight, Eigen::EigenvaluesOnly);
        const Scalar scale = std::max(Scalar(1), weight.cwiseAbs().maxCoeff());
        if (eig.eigenvalues().minCoeff() < -Scalar(1e-12) * scale) {
            throw InvalidArgument("corollary weighted diff: weight matrix is indefinite for node " +
                                  std::to_string(i));
        }
        const Vector<Scalar> delta = x_curr[i] - x_next[i];
        total += weighted_squared_norm(delta, weight);
    }
    return Scalar(0.5) * total;
}

}  // namespace qdpj

#endif  // QDPJ_METRICS_HPP_
