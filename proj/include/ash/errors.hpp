#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ash {

/// Base class for all failures raised by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A vector or intermediate result contains NaN/Inf.
class NonFiniteError : public Error {
public:
    using Error::Error;
};

/// A truncated series failed to reach the requested tolerance.
class ToleranceNotReachedError : public Error {
public:
    using Error::Error;
};

/// An iterative solver ran out of iterations.
class NoConvergenceError : public Error {
public:
    NoConvergenceError(const std::string& what, long iterations, double residual)
        : Error(what), iterations(iterations), residual(residual) {}
    long iterations = 0;
    double residual = 0.0;
};

/// The Arnoldi process produced a zero vector while the residual is nonzero.
class BreakdownError : public Error {
public:
    using Error::Error;
};

/// A dense oracle was asked for a problem above its size cap.
class TooLargeError : public Error {
public:
    using Error::Error;
};

/// A quadrature grid violates its resolution contract.
class InvalidGridError : public Error {
public:
    using Error::Error;
};

/// The branching matrix has spectral radius >= 1.
class NotStationaryError : public Error {
public:
    using Error::Error;
};

/// Simulated event count exceeded the explosion cap.
class ExplosionGuardError : public Error {
public:
    ExplosionGuardError(const std::string& what, std::size_t count)
        : Error(what), count(count) {}
    std::size_t count = 0;
};

/// An operation needing generation labels got an unlabeled log.
class UnlabeledLogError : public Error {
public:
    using Error::Error;
};

/// The horizon is shorter than one averaging window.
class EmptyHorizonError : public Error {
public:
    using Error::Error;
};

/// A baseline that needs a target vector was called without one.
class MissingTargetError : public Error {
public:
    using Error::Error;
};

/// Two rankings do not cover the same index set.
class LengthMismatchError : public Error {
public:
    using Error::Error;
};

} // namespace ash
