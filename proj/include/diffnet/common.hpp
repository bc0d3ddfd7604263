#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace diffnet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised when an argument violates an operation's precondition.
struct InvalidParameter : std::invalid_argument
{
    using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical routine cannot produce a solution.
struct SolverError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

/// Raised for malformed or unreadable files.
struct IoError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

/// Writes a warning line to stderr. Thread-safe.
void warn(const std::string& message);

} // namespace diffnet
