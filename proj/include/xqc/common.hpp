#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <stdexcept>
#include <string>

namespace xqc {

inline constexpr const char* kVersion = "0.1.0";

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using VecX = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// Base class for all recoverable solver/model failures.
class XqcError : public std::runtime_error {
public:
    explicit XqcError(const std::string& msg) : std::runtime_error(msg) {}
};

class InvalidGeometryError : public XqcError {
public:
    using XqcError::XqcError;
};

class DegenerateConfigurationError : public XqcError {
public:
    using XqcError::XqcError;
};

class NonconvergenceError : public XqcError {
public:
    NonconvergenceError(const std::string& msg, double residual, int iterations)
        : XqcError(msg), residual(residual), iterations(iterations) {}
    double residual;
    int iterations;
};

class LambdaNonconvergenceError : public NonconvergenceError {
public:
    using NonconvergenceError::NonconvergenceError;
};

class AssemblyError : public XqcError {
public:
    using XqcError::XqcError;
};

class ConditioningError : public XqcError {
public:
    using XqcError::XqcError;
};

class EnrichmentDegeneracyError : public XqcError {
public:
    using XqcError::XqcError;
};

class UndefinedMetricError : public XqcError {
public:
    using XqcError::XqcError;
};

class InvalidConfigError : public XqcError {
public:
    using XqcError::XqcError;
};

} // namespace xqc
