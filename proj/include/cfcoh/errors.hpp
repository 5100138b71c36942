#pragma once

#include <stdexcept>
#include <string>

namespace cfcoh {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A Clarke vector was too small to divide by (complex frequency undefined).
class MagnitudeUnderflow : public Error {
public:
    using Error::Error;
};

/// Malformed model data: bad ids, invalid parameters, dangling references.
class InvalidModel : public Error {
public:
    using Error::Error;
};

class DisconnectedNetwork : public InvalidModel {
public:
    using InvalidModel::InvalidModel;
};

class ZeroImpedanceBranch : public InvalidModel {
public:
    using InvalidModel::InvalidModel;
};

class NoSuchBranch : public InvalidModel {
public:
    using InvalidModel::InvalidModel;
};

class SingularAdmittance : public Error {
public:
    using Error::Error;
};

/// Analytical complex frequency requested for a model that has none
/// (ZIP loads with a constant-current share).
class NotAnalytical : public Error {
public:
    using Error::Error;
};

/// Numerical failures of the solvers. `operation()` names the failing stage.
class SolverError : public Error {
public:
    SolverError(std::string operation, const std::string& what)
        : Error(operation + ": " + what), operation_(std::move(operation))
    {
    }
    const std::string& operation() const noexcept { return operation_; }

private:
    std::string operation_;
};

class NonConvergence : public SolverError {
public:
    using SolverError::SolverError;
};

class NewtonDivergence : public SolverError {
public:
    using SolverError::SolverError;
};

class InfeasibleInit : public SolverError {
public:
    using SolverError::SolverError;
};

class TimeBaseMismatch : public Error {
public:
    using Error::Error;
};

class EmptyWindow : public Error {
public:
    using Error::Error;
};

/// Scenario document rejected. `path()` is a JSON pointer to the offending node.
class ScenarioError : public Error {
public:
    ScenarioError(std::string path, const std::string& what)
        : Error((path.empty() ? std::string("/") : path) + ": " + what), path_(std::move(path))
    {
    }
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

} // namespace cfcoh
