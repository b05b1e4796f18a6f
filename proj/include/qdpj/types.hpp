#ifndef QDPJ_TYPES_HPP_
#define QDPJ_TYPES_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qdpj {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using VectorXd = Vector<double>;
using MatrixXd = Matrix<double>;

// Integer lattice coordinates and consensus masses.
using IntVector = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

using NodeId = std::size_t;

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
    using std::runtime_error::runtime_error;
};

/// Invalid arguments or inconsistent dimensions.
class InvalidArgument : public Error {
 public:
    using Error::Error;
};

/// Fixed-width integer arithmetic would have wrapped.
class OverflowError : public Error {
 public:
    using Error::Error;
};

/// A linear system that must be positive definite was not.
class SingularSystem : public Error {
 public:
    using Error::Error;
};

}  // namespace qdpj

#endif  // QDPJ_TYPES_HPP_
