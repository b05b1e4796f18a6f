#ifndef QDPJ_LOCAL_SOLVER_HPP_
#define QDPJ_LOCAL_SOLVER_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "qdpj/types.hpp"

namespace qdpj {

/// f(x) = 1/2 ||C x - e||^2.
template <typename Scalar>
struct QuadraticObjective {
    Matrix<Scalar> c_matrix;
    Vector<Scalar> e_vector;

    Scalar value(const Vector<Scalar>& x) const { return Scalar(0.5) * (c_matrix * x - e_vector).squaredNorm(); }
    Vector<Scalar> gradient(const Vector<Scalar>& x) const { return c_matrix.transpose() * (c_matrix * x - e_vector); }
    Matrix<Scalar> hessian() const { return c_matrix.transpose() * c_matrix; }
};

/// Proximal weight P: either scale * I (the common case) or a dense symmetric matrix.
template <typename Scalar>
class ProxWeight {
 public:
    ProxWeight() = default;

    static ProxWeight scaled_identity(Scalar scale) {
        ProxWeight w;
        w.scale_ = scale;
        return w;
    }

    static ProxWeight dense(Matrix<Scalar> matrix) {
        if (matrix.rows() != matrix.cols()) {
            throw InvalidArgument("prox weight must be square");
        }
        ProxWeight w;
        w.matrix_ = std::move(matrix);
        return w;
    }

    bool is_scaled_identity() const { return matrix_.size() == 0; }
    Scalar scale() const { return scale_; }
    const Matrix<Scalar>& matrix() const { return matrix_; }

    Matrix<Scalar> to_dense(Eigen::Index n) const {
        return is_scaled_identity() ? Matrix<Scalar>(scale_ * Matrix<Scalar>::Identity(n, n)) : matrix_;
    }

    Vector<Scalar> apply(const Vector<Scalar>& x) const {
        return is_scaled_identity() ? Vector<Scalar>(scale_ * x) : Vector<Scalar>(matrix_ * x);
    }

    Scalar min_eigenvalue() const {
        if (is_scaled_identity()) {
            return scale_;
        }
        Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(matrix_, Eigen::EigenvaluesOnly);
        return eig.eigenvalues().minCoeff();
    }

 private:
    Scalar scale_ = Scalar(0);
    Matrix<Scalar> matrix_;
};

/// One node's share of the resource allocation problem.
template <typename Scalar>
struct LocalProblem {
    QuadraticObjective<Scalar> objective;
    Matrix<Scalar> coupling;  // A_i, m x n_i
    ProxWeight<Scalar> prox_weight;

    Eigen::Index dimension() const { return coupling.cols(); }
    Eigen::Index constraint_dim() const { return coupling.rows(); }

    void check_dimensions() const {
        const Eigen::Index n = dimension();
        if (objective.c_matrix.cols() != n || objective.c_matrix.rows() != objective.e_vector.size()) {
            throw InvalidArgument("local problem: objective and coupling dimensions differ");
        }
        if (!prox_weight.is_scaled_identity() && prox_weight.matrix().rows() != n) {
            throw InvalidArgument("local problem: prox weight has the wrong size");
        }
    }
};

template <typename Scalar>
Scalar weighted_squared_norm(const Vector<Scalar>& v, const Matrix<Scalar>& weight) {
    return v.dot(weight * v);
}

// Shift inside the penalty: A x - A x_prev + d_hat + lambda_hat / rho.
template <typename Scalar>
Vector<Scalar> prox_penalty_residual(const LocalProblem<Scalar>& prob, const Vector<Scalar>& x,
                                     const Vector<Scalar>& x_prev, const Vector<Scalar>& d_hat,
                                     const Vector<Scalar>& lambda_hat, Scalar rho) {
    return prob.coupling * (x - x_prev) + d_hat + lambda_hat / rho;
}

/// Value of f(x) + 1/2 ||x - x_prev||_P^2 + rho/2 ||A x - A x_prev + d_hat + lambda_hat/rho||^2.
template <typename Scalar>
Scalar prox_objective(const LocalProblem<Scalar>& prob, const Vector<Scalar>& x, const Vector<Scalar>& x_prev,
                      const Vector<Scalar>& d_hat, const Vector<Scalar>& lambda_hat, Scalar rho) {
    const Vector<Scalar> dx = x - x_prev;
    return prob.objective.value(x) + Scalar(0.5) * dx.dot(prob.prox_weight.apply(dx)) +
           Scalar(0.5) * rho * prox_penalty_residual(prob, x, x_prev, d_hat, lambda_hat, rho).squaredNorm();
}

template <typename Scalar>
Vector<Scalar> prox_gradient(const LocalProblem<Scalar>& prob, const Vector<Scalar>& x, const Vector<Scalar>& x_prev,
                             const Vector<Scalar>& d_hat, const Vector<Scalar>& lambda_hat, Scalar rho) {
    return prob.objective.gradient(x) + prob.prox_weight.apply(x - x_prev) +
           rho * prob.coupling.transpose() * prox_penalty_residual(prob, x, x_prev, d_hat, lambda_hat, rho);
}

/// Cached factorization of the proximal subproblem
///   (C^T C + P + rho A^T A) x = C^T e + P x_prev + rho A^T (A x_prev - d_hat - lambda_hat / rho).
/// The system matrix does not change between outer iterations, so it is
/// factorized once.
template <typename Scalar>
class ProxSolver {
 public:
    ProxSolver(const LocalProblem<Scalar>& prob, Scalar rho) : prob_(&prob), rho_(rho) {
        if (!(rho > Scalar(0))) {
            throw InvalidArgument("prox step: rho must be positive");
        }
        prob.check_dimensions();
        const Eigen::Index n = prob.dimension();
        system_ = prob.objective.hessian() + rho * prob.coupling.transpose() * prob.coupling;
        if (prob.prox_weight.is_scaled_identity()) {
            system_.diagonal().array() += prob.prox_weight.scale();
        } else {
            system_ += prob.prox_weight.matrix();
        }
        ct_e_ = prob.objective.c_matrix.transpose() * prob.objective.e_vector;
        llt_.compute(system_);
        if (llt_.info() != Eigen::Success || n == 0) {
            throw SingularSystem("prox step: subproblem system is not positive definite");
        }
    }

    Vector<Scalar> rhs(const Vector<Scalar>& x_prev, const Vector<Scalar>& d_hat,
                       const Vector<Scalar>& lambda_hat) const {
        const auto& a = prob_->coupling;
        if (x_prev.size() != prob_->dimension() || d_hat.size() != a.rows() || lambda_hat.size() != a.rows()) {
            throw InvalidArgument("prox step: argument dimensions do not match the local problem");
        }
        return ct_e_ + prob_->prox_weight.apply(x_prev) +
               rho_ * (a.transpose() * (a * x_prev - d_hat - lambda_hat / rho_));
    }

    Vector<Scalar> solve(const Vector<Scalar>& x_prev, const Vector<Scalar>& d_hat,
                         const Vector<Scalar>& lambda_hat) const {
        return llt_.solve(rhs(x_prev, d_hat, lambda_hat));
    }

    const Matrix<Scalar>& system_matrix() const { return system_; }
    Scalar rho() const { return rho_; }

 private:
    const LocalProblem<Scalar>* prob_;
    Scalar rho_;
    Matrix<Scalar> system_;
    Vector<Scalar> ct_e_;
    Eigen::LLT<Matrix<Scalar>> llt_;
};

/// Exact minimizer of the proximal subproblem for a quadratic objective.
/// Throws SingularSystem when the normal-equation matrix is not positive definite.
template <typename Scalar>
Vector<Scalar> prox_step(const LocalProblem<Scalar>& prob, const Vector<Scalar>& x_prev, const Vector<Scalar>& d_hat,
                         const Vector<Scalar>& lambda_hat, Scalar rho) {
    return ProxSolver<Scalar>(prob, rho).solve(x_prev, d_hat, lambda_hat);
}

/// Largest singular value via power iteration on A^T A.
template <typename Scalar>
Scalar spectral_norm(const Matrix<Scalar>& a, Scalar rel_tol = Scalar(1e-10), int max_iterations = 100000) {
    if (a.size() == 0 || a.isZero(Scalar(0))) {
        return Scalar(0);
    }
    std::mt19937_64 rng(0x5eed);
    std::normal_distribution<double> normal;
    Vector<Scalar> v(a.cols());
    for (Eigen::Index j = 0; j < v.size(); ++j) {
        v[j] = Scalar(normal(rng));
    }
    v.normalize();
    Scalar estimate = Scalar(0);
    for (int it = 0; it < max_iterations; ++it) {
        Vector<Scalar> w = a.transpose() * (a * v);
        const Scalar next = v.dot(w);  // Rayleigh quotient of A^T A
        const Scalar norm = w.norm();
        if (norm == Scalar(0)) {
            break;
        }
        v = w / norm;
        if (std::abs(next - estimate) <= rel_tol * std::abs(next)) {
            estimate = next;
            break;
        }
        estimate = next;
    }
    return std::sqrt(std::max(estimate, Scalar(0)));
}

/// Smooth convex objective for the damped Newton prox path.
template <typename Scalar>
class ConvexObjective {
 public:
    virtual ~ConvexObjective() = default;
    virtual Scalar value(const Vector<Scalar>& x) const = 0;
    virtual Vector<Scalar> gradient(const Vector<Scalar>& x) const = 0;
    virtual Matrix<Scalar> hessian(const Vector<Scalar>& x) const = 0;
};

template <typename Scalar>
struct NewtonOptions {
    Scalar gradient_tolerance = Scalar(1e-9);
    int max_iterations = 200;
};

/// Proximal subproblem for a generic objective, solved by damped Newton with
/// Armijo backtracking. Throws Error if the gradient tolerance is not reached.
template <typename Scalar>
Vector<Scalar> prox_step_newton(const ConvexObjective<Scalar>& f, const Matrix<Scalar>& coupling,
                                const ProxWeight<Scalar>& prox_weight, const Vector<Scalar>& x_prev,
                                const Vector<Scalar>& d_hat, const Vector<Scalar>& lambda_hat, Scalar rho,
                                const NewtonOptions<Scalar>& options = {}) {
    if (!(rho > Scalar(0))) {
        throw InvalidArgument("prox step: rho must be positive");
    }
    const Vector<Scalar> shift = d_hat + lambda_hat / rho - coupling * x_prev;
    auto objective = [&](const Vector<Scalar>& x) {
        const Vector<Scalar> dx = x - x_prev;
        return f.value(x) + Scalar(0.5) * dx.dot(prox_weight.apply(dx)) +
               Scalar(0.5) * rho * (coupling * x + shift).squaredNorm();
    };
    auto gradient = [&](const Vector<Scalar>& x) {
        return Vector<Scalar>(f.gradient(x) + prox_weight.apply(x - x_prev) +
                              rho * coupling.transpose() * (coupling * x + shift));
    };
    const Matrix<Scalar> fixed_hessian =
        prox_weight.to_dense(x_prev.size()) + rho * coupling.transpose() * coupling;

    Vector<Scalar> x = x_prev;
    for (int it = 0; it < options.max_iterations; ++it) {
        const Vector<Scalar> g = gradient(x);
        if (g.norm() <= options.gradient_tolerance) {
            return x;
        }
        const Matrix<Scalar> h = f.hessian(x) + fixed_hessian;
        Eigen::LDLT<Matrix<Scalar>> ldlt(h);
        if (ldlt.info() != Eigen::Success) {
            throw SingularSystem("prox step: Newton system factorization failed");
        }
        const Vector<Scalar> step = -ldlt.solve(g);
        const Scalar slope = g.dot(step);
        const Scalar base = objective(x);
        Scalar t = Scalar(1);
        while (t > Scalar(1e-12) && objective(x + t * step) > base + Scalar(1e-4) * t * slope) {
            t *= Scalar(0.5);
        }
        x += t * step;
    }
    if (gradient(x).norm() <= options.gradient_tolerance) {
        return x;
    }
    throw Error("prox step: Newton iteration did not reach the gradient tolerance");
}

}  // namespace qdpj

#endif  // QDPJ_LOCAL_SOLVER_HPP_
